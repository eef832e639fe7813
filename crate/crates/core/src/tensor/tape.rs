use std::collections::HashMap;

use super::{ParamId, ParamStore, Real, Rng, Tensor};
use crate::error::{arg, Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Operation kinds, used for reporting and fault injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Constant,
    Param,
    Gather,
    MatMul,
    Add,
    Sub,
    Mul,
    AddBias,
    Scale,
    OneMinus,
    Tanh,
    Sigmoid,
    Relu,
    Abs,
    Softmax,
    Concat,
    Row,
    Stack,
    Transpose,
    Sum,
    Mean,
    SoftmaxCrossEntropy,
    Dropout,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::Constant => "constant",
            OpKind::Param => "param",
            OpKind::Gather => "gather",
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::AddBias => "add_bias",
            OpKind::Scale => "scale",
            OpKind::OneMinus => "one_minus",
            OpKind::Tanh => "tanh",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Relu => "relu",
            OpKind::Abs => "abs",
            OpKind::Softmax => "softmax",
            OpKind::Concat => "concat",
            OpKind::Row => "row",
            OpKind::Stack => "stack",
            OpKind::Transpose => "transpose",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::SoftmaxCrossEntropy => "softmax_cross_entropy",
            OpKind::Dropout => "dropout",
        }
    }

    pub fn parse(name: &str) -> Option<OpKind> {
        ALL_KINDS.iter().copied().find(|k| k.name() == name)
    }
}

const ALL_KINDS: [OpKind; 23] = [
    OpKind::Constant,
    OpKind::Param,
    OpKind::Gather,
    OpKind::MatMul,
    OpKind::Add,
    OpKind::Sub,
    OpKind::Mul,
    OpKind::AddBias,
    OpKind::Scale,
    OpKind::OneMinus,
    OpKind::Tanh,
    OpKind::Sigmoid,
    OpKind::Relu,
    OpKind::Abs,
    OpKind::Softmax,
    OpKind::Concat,
    OpKind::Row,
    OpKind::Stack,
    OpKind::Transpose,
    OpKind::Sum,
    OpKind::Mean,
    OpKind::SoftmaxCrossEntropy,
    OpKind::Dropout,
];

enum Op<T> {
    Constant,
    Param(ParamId),
    Gather { param: ParamId, rows: Vec<usize> },
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, T),
    OneMinus(Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Abs(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    Row(Var, usize),
    Stack(Vec<Var>),
    Transpose(Var),
    Sum(Var),
    Mean(Vec<Var>),
    SoftmaxCrossEntropy { logits: Var, target: usize, probs: Vec<T> },
    Dropout { x: Var, mask: Vec<T> },
}

impl<T> Op<T> {
    fn kind(&self) -> OpKind {
        match self {
            Op::Constant => OpKind::Constant,
            Op::Param(_) => OpKind::Param,
            Op::Gather { .. } => OpKind::Gather,
            Op::MatMul { .. } => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::AddBias(..) => OpKind::AddBias,
            Op::Scale(..) => OpKind::Scale,
            Op::OneMinus(_) => OpKind::OneMinus,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Relu(_) => OpKind::Relu,
            Op::Abs(_) => OpKind::Abs,
            Op::Softmax(_) => OpKind::Softmax,
            Op::Concat(_) => OpKind::Concat,
            Op::Row(..) => OpKind::Row,
            Op::Stack(_) => OpKind::Stack,
            Op::Transpose(_) => OpKind::Transpose,
            Op::Sum(_) => OpKind::Sum,
            Op::Mean(_) => OpKind::Mean,
            Op::SoftmaxCrossEntropy { .. } => OpKind::SoftmaxCrossEntropy,
            Op::Dropout { .. } => OpKind::Dropout,
        }
    }
}

struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records operations in execution order and replays them backwards.
///
/// A node's inputs are always recorded before the node itself, so the
/// recording order is a topological order and [`Tape::backward`] simply
/// visits nodes from last to first.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: HashMap<ParamId, Var>,
    fault: Option<OpKind>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
            fault: None,
        }
    }

    /// Test fixture: the backward rule of `kind` is scaled by 1.5.
    #[doc(hidden)]
    pub fn with_faulty_backward(kind: OpKind) -> Self {
        Self {
            fault: Some(kind),
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn kind(&self, v: Var) -> OpKind {
        self.nodes[v.0].op.kind()
    }

    /// Value of a single-element node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor<T> {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node shapes are valid")
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, needs_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    // ---------------------------------------------------------------- leaves

    pub fn constant(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Constant, false)
    }

    pub fn constant_vec(&mut self, data: Vec<T>) -> Result<Var> {
        if data.is_empty() {
            return arg("empty constant vector");
        }
        Ok(self.push(vec![data.len()], data, Op::Constant, false))
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Var {
        let n = shape.iter().product();
        self.push(shape.to_vec(), vec![T::zero(); n], Op::Constant, false)
    }

    /// Leaf bound to a stored parameter. Each parameter is copied onto the
    /// tape at most once.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let t = store.get(id);
        let v = self.push(
            t.shape().to_vec(),
            t.data().to_vec(),
            Op::Param(id),
            t.requires_grad(),
        );
        self.params.insert(id, v);
        v
    }

    /// Selected rows of a stored matrix, as an `[rows.len(), cols]` leaf.
    /// Gradients are scattered back into the selected rows only.
    pub fn gather(&mut self, store: &ParamStore<T>, id: ParamId, rows: &[usize]) -> Result<Var> {
        let t = store.get(id);
        let [nrows, cols] = t.shape() else {
            return arg(format!("gather needs a matrix, got {:?}", t.shape()));
        };
        let (nrows, cols) = (*nrows, *cols);
        if rows.is_empty() {
            return arg("gather with no rows");
        }
        let mut value = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            if r >= nrows {
                return arg(format!("gather row {r} out of range for {nrows} rows"));
            }
            value.extend_from_slice(&t.data()[r * cols..(r + 1) * cols]);
        }
        Ok(self.push(
            vec![rows.len(), cols],
            value,
            Op::Gather {
                param: id,
                rows: rows.to_vec(),
            },
            t.requires_grad(),
        ))
    }

    // ------------------------------------------------------------ arithmetic

    /// Matrix product. Either side may be a vector: `[k]·[k,n] → [n]`,
    /// `[m,k]·[k] → [m]`, `[k]·[k] → []`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let (m, k, a_vec) = match sa.as_slice() {
            [k] => (1, *k, true),
            [m, k] => (*m, *k, false),
            _ => return Err(dim("matmul", &sa, &sb)),
        };
        let (k2, n, b_vec) = match sb.as_slice() {
            [k] => (*k, 1, true),
            [k, n] => (*k, *n, false),
            _ => return Err(dim("matmul", &sa, &sb)),
        };
        if k != k2 {
            return Err(dim("matmul", &sa, &sb));
        }
        let value = mm(self.value(a), self.value(b), m, k, n);
        let shape = match (a_vec, b_vec) {
            (true, true) => vec![],
            (true, false) => vec![n],
            (false, true) => vec![m],
            (false, false) => vec![m, n],
        };
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(shape, value, Op::MatMul { a, b, m, k, n }, ng))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(dim(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Var {
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        let ng = self.ng(a) || self.ng(b);
        self.push(shape, value, op, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.binary(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.binary(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.binary(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    /// `x + b` where `b` is a vector matching the last axis of `x`,
    /// added to every row.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let sx = self.shape(x);
        let sb = self.shape(b);
        let n = match (sx.last(), sb) {
            (Some(&n), [m]) if n == *m => n,
            _ => return Err(dim("add_bias", sx, sb)),
        };
        let bias = self.value(b);
        let value = self
            .value(x)
            .iter()
            .enumerate()
            .map(|(i, &v)| v + bias[i % n])
            .collect();
        let shape = sx.to_vec();
        let ng = self.ng(x) || self.ng(b);
        Ok(self.push(shape, value, Op::AddBias(x, b), ng))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        self.unary(x, Op::Scale(x, c), |v| v * c)
    }

    /// `1 - x`, elementwise.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.unary(x, Op::OneMinus(x), |v| T::one() - v)
    }

    fn unary(&mut self, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let value = self.value(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        let ng = self.ng(x);
        self.push(shape, value, op, ng)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), |v| v.tanh())
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Relu(x), |v| if v > T::zero() { v } else { T::zero() })
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, Op::Abs(x), |v| v.abs())
    }

    /// Softmax along the last axis (a vector, or each row of a matrix).
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let n = match shape.as_slice() {
            [n] | [_, n] if *n > 0 => *n,
            _ => return arg(format!("softmax expects a nonempty vector or matrix rows, got {shape:?}")),
        };
        let xs = self.value(x);
        if xs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("softmax"));
        }
        let mut value = Vec::with_capacity(xs.len());
        for row in xs.chunks(n) {
            value.extend(softmax_slice(row));
        }
        let ng = self.ng(x);
        Ok(self.push(shape, value, Op::Softmax(x), ng))
    }

    /// Concatenation along the last axis. All parts must be vectors, or
    /// matrices with the same number of rows.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return arg("concat of an empty list");
        };
        let s0 = self.shape(first).to_vec();
        let rows = match s0.as_slice() {
            [_] => None,
            [r, _] => Some(*r),
            _ => return Err(dim("concat", &s0, &[])),
        };
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let sp = self.shape(p);
            let ok = match (rows, sp) {
                (None, [w]) => {
                    widths.push(*w);
                    true
                }
                (Some(r), [r2, w]) if r == *r2 => {
                    widths.push(*w);
                    true
                }
                _ => false,
            };
            if !ok {
                return Err(dim("concat", &s0, sp));
            }
        }
        let total: usize = widths.iter().sum();
        let nrows = rows.unwrap_or(1);
        let mut value = Vec::with_capacity(nrows * total);
        for r in 0..nrows {
            for (&p, &w) in parts.iter().zip(&widths) {
                value.extend_from_slice(&self.value(p)[r * w..(r + 1) * w]);
            }
        }
        let shape = match rows {
            None => vec![total],
            Some(r) => vec![r, total],
        };
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(shape, value, Op::Concat(parts.to_vec()), ng))
    }

    /// Row `i` of a matrix, as a vector.
    pub fn row(&mut self, x: Var, i: usize) -> Result<Var> {
        let &[r, c] = self.shape(x) else {
            return arg(format!("row expects a matrix, got {:?}", self.shape(x)));
        };
        if i >= r {
            return arg(format!("row {i} out of range for {r} rows"));
        }
        let value = self.value(x)[i * c..(i + 1) * c].to_vec();
        let ng = self.ng(x);
        Ok(self.push(vec![c], value, Op::Row(x, i), ng))
    }

    /// Stacks equal-length vectors into the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let Some(&first) = rows.first() else {
            return arg("stack of an empty sequence");
        };
        let s0 = self.shape(first).to_vec();
        let [n] = s0.as_slice() else {
            return Err(dim("stack", &s0, &[]));
        };
        let n = *n;
        let mut value = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            if self.shape(r) != s0.as_slice() {
                return Err(dim("stack", &s0, self.shape(r)));
            }
            value.extend_from_slice(self.value(r));
        }
        let ng = rows.iter().any(|&r| self.ng(r));
        Ok(self.push(vec![rows.len(), n], value, Op::Stack(rows.to_vec()), ng))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let &[r, c] = self.shape(x) else {
            return arg(format!("transpose expects a matrix, got {:?}", self.shape(x)));
        };
        let xs = self.value(x);
        let mut value = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                value[j * r + i] = xs[i * c + j];
            }
        }
        let ng = self.ng(x);
        Ok(self.push(vec![c, r], value, Op::Transpose(x), ng))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().copied().sum();
        let ng = self.ng(x);
        self.push(vec![], vec![s], Op::Sum(x), ng)
    }

    /// Arithmetic mean of equally shaped tensors: left-to-right sum, then
    /// division by the count.
    pub fn mean(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return arg("mean of an empty list");
        };
        let shape = self.shape(first).to_vec();
        let mut acc = self.value(first).to_vec();
        for &x in &xs[1..] {
            if self.shape(x) != shape.as_slice() {
                return Err(dim("mean", &shape, self.shape(x)));
            }
            for (a, &b) in acc.iter_mut().zip(self.value(x)) {
                *a += b;
            }
        }
        let n = T::of(xs.len() as f64);
        acc.iter_mut().for_each(|a| *a = *a / n);
        let ng = xs.iter().any(|&x| self.ng(x));
        Ok(self.push(shape, acc, Op::Mean(xs.to_vec()), ng))
    }

    /// `-log softmax(logits)[target]`, computed with log-sum-exp. The
    /// gradient with respect to the logits is `softmax - onehot`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let &[k] = self.shape(logits) else {
            return arg(format!(
                "cross entropy expects logits as a vector, got {:?}",
                self.shape(logits)
            ));
        };
        if target >= k {
            return arg(format!("target class {target} out of range for {k} classes"));
        }
        let z = self.value(logits);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("softmax_cross_entropy"));
        }
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let sum_exp: T = z.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum_exp.ln();
        let loss = lse - z[target];
        let probs = z.iter().map(|&v| (v - max).exp() / sum_exp).collect();
        let ng = self.ng(logits);
        Ok(self.push(
            vec![],
            vec![loss],
            Op::SoftmaxCrossEntropy {
                logits,
                target,
                probs,
            },
            ng,
        ))
    }

    /// Inverted dropout: in training each unit is zeroed with probability
    /// `rate` and survivors are scaled by `1 / (1 - rate)`. Otherwise, or
    /// with `rate == 0`, returns `x` unchanged without drawing randomness.
    pub fn dropout(&mut self, x: Var, rate: f64, training: bool, rng: &mut Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return arg(format!("dropout rate {rate} outside [0, 1)"));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = T::of(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.value(x).len())
            .map(|_| if rng.uniform() < rate { T::zero() } else { keep })
            .collect();
        let value = self
            .value(x)
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let shape = self.shape(x).to_vec();
        let ng = self.ng(x);
        Ok(self.push(shape, value, Op::Dropout { x, mask }, ng))
    }

    // -------------------------------------------------------------- backward

    /// Back-propagates from the scalar `loss`, adding parameter gradients
    /// into `store`. Nodes that do not lead to `loss` are not visited, and
    /// the tape itself is left unchanged, so calling this twice doubles
    /// every gradient.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<T>) -> Result<()> {
        let node = &self.nodes[loss.0];
        if node.value.len() != 1 {
            return arg(format!("backward from non-scalar of shape {:?}", node.shape));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(mut g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if self.fault == Some(node.op.kind()) {
                let f = T::of(1.5);
                g.iter_mut().for_each(|x| *x *= f);
            }
            self.backward_node(node, &g, &mut grads, store);
        }
        Ok(())
    }

    fn backward_node(
        &self,
        node: &Node<T>,
        g: &[T],
        grads: &mut [Option<Vec<T>>],
        store: &mut ParamStore<T>,
    ) {
        let one = T::one();
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => store.accumulate(*id, g),
            Op::Gather { param, rows } => store.accumulate_rows(*param, rows, g),
            Op::MatMul { a, b, m, k, n } => {
                if self.ng(*a) {
                    let da = mm_bt(g, self.value(*b), *m, *n, *k);
                    self.acc(grads, *a, |dst| add_into(dst, &da));
                }
                if self.ng(*b) {
                    let db = mm_at(self.value(*a), g, *m, *k, *n);
                    self.acc(grads, *b, |dst| add_into(dst, &db));
                }
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, |dst| add_into(dst, g));
                self.acc(grads, *b, |dst| add_into(dst, g));
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, |dst| add_into(dst, g));
                self.acc(grads, *b, |dst| {
                    for (d, &x) in dst.iter_mut().zip(g) {
                        *d -= x;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                self.acc(grads, *a, |dst| {
                    for i in 0..dst.len() {
                        dst[i] += g[i] * vb[i];
                    }
                });
                self.acc(grads, *b, |dst| {
                    for i in 0..dst.len() {
                        dst[i] += g[i] * va[i];
                    }
                });
            }
            Op::AddBias(x, b) => {
                self.acc(grads, *x, |dst| add_into(dst, g));
                self.acc(grads, *b, |dst| {
                    let n = dst.len();
                    for (i, &x) in g.iter().enumerate() {
                        dst[i % n] += x;
                    }
                });
            }
            Op::Scale(x, c) => self.acc(grads, *x, |dst| {
                for (d, &v) in dst.iter_mut().zip(g) {
                    *d += v * *c;
                }
            }),
            Op::OneMinus(x) => self.acc(grads, *x, |dst| {
                for (d, &v) in dst.iter_mut().zip(g) {
                    *d -= v;
                }
            }),
            Op::Tanh(x) => {
                let y = &node.value;
                self.acc(grads, *x, |dst| {
                    for i in 0..dst.len() {
                        dst[i] += g[i] * (one - y[i] * y[i]);
                    }
                })
            }
            Op::Sigmoid(x) => {
                let y = &node.value;
                self.acc(grads, *x, |dst| {
                    for i in 0..dst.len() {
                        dst[i] += g[i] * y[i] * (one - y[i]);
                    }
                })
            }
            Op::Relu(x) => {
                let xs = self.value(*x);
                self.acc(grads, *x, |dst| {
                    for i in 0..dst.len() {
                        if xs[i] > T::zero() {
                            dst[i] += g[i];
                        }
                    }
                })
            }
            Op::Abs(x) => {
                let xs = self.value(*x);
                self.acc(grads, *x, |dst| {
                    for i in 0..dst.len() {
                        if xs[i] > T::zero() {
                            dst[i] += g[i];
                        } else if xs[i] < T::zero() {
                            dst[i] -= g[i];
                        }
                    }
                })
            }
            Op::Softmax(x) => {
                let y = &node.value;
                let n = *node.shape.last().expect("softmax has an axis");
                self.acc(grads, *x, |dst| {
                    for r in 0..y.len() / n {
                        let (ys, gs) = (&y[r * n..(r + 1) * n], &g[r * n..(r + 1) * n]);
                        let dot: T = ys.iter().zip(gs).map(|(&a, &b)| a * b).sum();
                        for j in 0..n {
                            dst[r * n + j] += ys[j] * (gs[j] - dot);
                        }
                    }
                })
            }
            Op::Concat(parts) => {
                let total = *node.shape.last().expect("concat has an axis");
                let rows = node.value.len() / total;
                let mut offset = 0;
                for &p in parts {
                    let w = *self.shape(p).last().expect("part has an axis");
                    self.acc(grads, p, |dst| {
                        for r in 0..rows {
                            add_into(
                                &mut dst[r * w..(r + 1) * w],
                                &g[r * total + offset..r * total + offset + w],
                            );
                        }
                    });
                    offset += w;
                }
            }
            Op::Row(x, i) => {
                let c = g.len();
                self.acc(grads, *x, |dst| add_into(&mut dst[i * c..(i + 1) * c], g));
            }
            Op::Stack(rows) => {
                let n = node.shape[1];
                for (i, &r) in rows.iter().enumerate() {
                    self.acc(grads, r, |dst| add_into(dst, &g[i * n..(i + 1) * n]));
                }
            }
            Op::Transpose(x) => {
                let (c, r) = (node.shape[0], node.shape[1]);
                self.acc(grads, *x, |dst| {
                    for i in 0..r {
                        for j in 0..c {
                            dst[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Sum(x) => self.acc(grads, *x, |dst| {
                for d in dst.iter_mut() {
                    *d += g[0];
                }
            }),
            Op::Mean(xs) => {
                let n = T::of(xs.len() as f64);
                let share: Vec<T> = g.iter().map(|&v| v / n).collect();
                for &x in xs {
                    self.acc(grads, x, |dst| add_into(dst, &share));
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                target,
                probs,
            } => self.acc(grads, *logits, |dst| {
                for (j, d) in dst.iter_mut().enumerate() {
                    let onehot = if j == *target { one } else { T::zero() };
                    *d += g[0] * (probs[j] - onehot);
                }
            }),
            Op::Dropout { x, mask } => self.acc(grads, *x, |dst| {
                for i in 0..dst.len() {
                    dst[i] += g[i] * mask[i];
                }
            }),
        }
    }

    fn acc(&self, grads: &mut [Option<Vec<T>>], v: Var, f: impl FnOnce(&mut [T])) {
        if !self.ng(v) {
            return;
        }
        let n = self.nodes[v.0].value.len();
        let slot = grads[v.0].get_or_insert_with(|| vec![T::zero(); n]);
        f(slot);
    }
}

fn dim(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::Dimension {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    let one = T::one();
    if v >= T::zero() {
        one / (one + (-v).exp())
    } else {
        let e = v.exp();
        e / (one + e)
    }
}

pub(crate) fn softmax_slice<T: Real>(row: &[T]) -> Vec<T> {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// `C[m,n] = A[m,k] · B[k,n]`.
fn mm<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}

/// `dA[m,k] = dC[m,n] · Bᵀ` with `B[k,n]`.
fn mm_bt<T: Real>(dc: &[T], b: &[T], m: usize, n: usize, k: usize) -> Vec<T> {
    let mut da = vec![T::zero(); m * k];
    for i in 0..m {
        let drow = &dc[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut s = T::zero();
            for j in 0..n {
                s += drow[j] * brow[j];
            }
            da[i * k + p] = s;
        }
    }
    da
}

/// `dB[k,n] = Aᵀ · dC` with `A[m,k]`, `dC[m,n]`.
fn mm_at<T: Real>(a: &[T], dc: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut db = vec![T::zero(); k * n];
    for i in 0..m {
        let drow = &dc[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let dst = &mut db[p * n..(p + 1) * n];
            for j in 0..n {
                dst[j] += av * drow[j];
            }
        }
    }
    db
}
