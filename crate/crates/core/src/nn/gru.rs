//! Gated recurrent units.
//!
//! With row-vector inputs and input-major weights, one step is
//!
//! ```text
//! z  = σ(x·W_z + h_prev·U_z + b_z)
//! r  = σ(x·W_r + h_prev·U_r + b_r)
//! h̃  = tanh(x·W_h + (r ⊙ h_prev)·U_h + b_h)
//! h  = (1 - z) ⊙ h_prev + z ⊙ h̃
//! ```
//!
//! Every recurrence starts from a zero hidden state.

use super::Initializer;
use crate::error::{Error, Result};
use crate::tensor::{ParamId, ParamStore, Real, Tape, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub b_z: ParamId,
    pub b_r: ParamId,
    pub b_h: ParamId,
    pub d_in: usize,
    pub d_h: usize,
}

impl GruParams {
    pub fn new<T: Real>(init: &mut Initializer<'_, T>, d_in: usize, d_h: usize) -> Result<Self> {
        Ok(Self {
            w_z: init.weight("w_z", &[d_in, d_h])?,
            w_r: init.weight("w_r", &[d_in, d_h])?,
            w_h: init.weight("w_h", &[d_in, d_h])?,
            u_z: init.weight("u_z", &[d_h, d_h])?,
            u_r: init.weight("u_r", &[d_h, d_h])?,
            u_h: init.weight("u_h", &[d_h, d_h])?,
            b_z: init.bias("b_z", d_h)?,
            b_r: init.bias("b_r", d_h)?,
            b_h: init.bias("b_h", d_h)?,
            d_in,
            d_h,
        })
    }
}

/// Forward and backward GRUs with independent weights.
#[derive(Clone, Debug, PartialEq)]
pub struct BiGruParams {
    pub forward: GruParams,
    pub backward: GruParams,
}

impl BiGruParams {
    pub fn new<T: Real>(init: &mut Initializer<'_, T>, d_in: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            forward: GruParams::new(&mut init.scope("fwd"), d_in, hidden)?,
            backward: GruParams::new(&mut init.scope("bwd"), d_in, hidden)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.forward.d_h
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.d_h
    }
}

fn expect_len<T: Real>(tape: &Tape<T>, v: Var, n: usize, op: &'static str) -> Result<()> {
    let s = tape.shape(v);
    if s != [n] {
        return Err(Error::Dimension {
            op,
            lhs: s.to_vec(),
            rhs: vec![n],
        });
    }
    Ok(())
}

/// The recurrent half of a step, given the input projections
/// `x·W_* + b_*` for each gate.
fn gru_step<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    p: &GruParams,
    proj: [Var; 3],
    h_prev: Var,
) -> Result<Var> {
    let u_z = tape.param(store, p.u_z);
    let u_r = tape.param(store, p.u_r);
    let u_h = tape.param(store, p.u_h);

    let hz = tape.matmul(h_prev, u_z)?;
    let z = tape.add(proj[0], hz)?;
    let z = tape.sigmoid(z);
    let hr = tape.matmul(h_prev, u_r)?;
    let r = tape.add(proj[1], hr)?;
    let r = tape.sigmoid(r);
    let rh = tape.mul(r, h_prev)?;
    let rhu = tape.matmul(rh, u_h)?;
    let cand = tape.add(proj[2], rhu)?;
    let cand = tape.tanh(cand);

    let keep = tape.one_minus(z);
    let old = tape.mul(keep, h_prev)?;
    let new = tape.mul(z, cand)?;
    tape.add(old, new)
}

/// A single GRU step on vectors `x_t: [d_in]`, `h_prev: [d_h]`.
pub fn gru_cell<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    x_t: Var,
    h_prev: Var,
    p: &GruParams,
) -> Result<Var> {
    expect_len(tape, x_t, p.d_in, "gru_cell input")?;
    expect_len(tape, h_prev, p.d_h, "gru_cell state")?;
    let mut proj = [x_t; 3];
    for (slot, (w, b)) in proj
        .iter_mut()
        .zip([(p.w_z, p.b_z), (p.w_r, p.b_r), (p.w_h, p.b_h)])
    {
        let w = tape.param(store, w);
        let b = tape.param(store, b);
        let xw = tape.matmul(x_t, w)?;
        *slot = tape.add_bias(xw, b)?;
    }
    gru_step(tape, store, p, proj, h_prev)
}

/// Runs a GRU over the rows of `xs: [L, d_in]`, returning `[L, d_h]` with
/// row `t` holding the state after reading position `t`. With `reverse`
/// the sequence is read from the last row to the first.
pub fn gru_sequence<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    xs: Var,
    p: &GruParams,
    reverse: bool,
) -> Result<Var> {
    let shape = tape.shape(xs).to_vec();
    let &[len, d_in] = shape.as_slice() else {
        return Err(Error::Dimension {
            op: "gru_sequence",
            lhs: shape,
            rhs: vec![0, p.d_in],
        });
    };
    if d_in != p.d_in {
        return Err(Error::Dimension {
            op: "gru_sequence",
            lhs: shape,
            rhs: vec![len, p.d_in],
        });
    }
    // Input projections for all positions at once.
    let mut projs = [xs; 3];
    for (slot, (w, b)) in projs
        .iter_mut()
        .zip([(p.w_z, p.b_z), (p.w_r, p.b_r), (p.w_h, p.b_h)])
    {
        let w = tape.param(store, w);
        let b = tape.param(store, b);
        let xw = tape.matmul(xs, w)?;
        *slot = tape.add_bias(xw, b)?;
    }
    let mut h = tape.zeros(&[p.d_h]);
    let mut states = vec![h; len];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    };
    for t in order {
        let proj = [
            tape.row(projs[0], t)?,
            tape.row(projs[1], t)?,
            tape.row(projs[2], t)?,
        ];
        h = gru_step(tape, store, p, proj, h)?;
        states[t] = h;
    }
    tape.stack(&states)
}

/// Bidirectional GRU over `xs: [L, d_in]`; row `t` of the result is
/// `forward_t ⊕ backward_t`, shape `[L, 2H]`.
pub fn bigru<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    xs: Var,
    p: &BiGruParams,
) -> Result<Var> {
    let fwd = gru_sequence(tape, store, xs, &p.forward, false)?;
    let bwd = gru_sequence(tape, store, xs, &p.backward, true)?;
    tape.concat(&[fwd, bwd])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn zero_weights_keep_zero_state() {
        let mut store = ParamStore::<f64>::new();
        let p = GruParams::new(&mut Initializer::new(&mut store, 0), 4, 3).unwrap();
        for id in store.ids().collect::<Vec<_>>() {
            store.get_mut(id).data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        let mut tape = Tape::new();
        let x = tape.constant(&Tensor::vector(vec![1.0, -2.0, 0.5, 3.0]).unwrap());
        let h0 = tape.zeros(&[3]);
        let h = gru_cell(&mut tape, &store, x, h0, &p).unwrap();
        assert_eq!(tape.value(h), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut store = ParamStore::<f64>::new();
        let p = GruParams::new(&mut Initializer::new(&mut store, 0), 4, 3).unwrap();
        let mut tape = Tape::new();
        let x = tape.zeros(&[5]);
        let h0 = tape.zeros(&[3]);
        assert!(matches!(
            gru_cell(&mut tape, &store, x, h0, &p),
            Err(Error::Dimension { .. })
        ));
        let xs = tape.zeros(&[2, 5]);
        assert!(gru_sequence(&mut tape, &store, xs, &p, false).is_err());
    }

    #[test]
    fn bigru_output_width_is_twice_hidden() {
        let mut store = ParamStore::<f64>::new();
        let p = BiGruParams::new(&mut Initializer::new(&mut store, 1), 2, 5).unwrap();
        for len in 1..6 {
            let mut tape = Tape::new();
            let xs = tape.constant(&Tensor::zeros(vec![len, 2]).unwrap());
            let out = bigru(&mut tape, &store, xs, &p).unwrap();
            assert_eq!(tape.shape(out), &[len, 10]);
        }
    }
}
