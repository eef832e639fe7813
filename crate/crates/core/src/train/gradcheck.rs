//! The finite-difference suite behind `cer gradcheck`.

use crate::data::{EmbeddingTable, EncodedConversation, RowSource};
use crate::error::Result;
use crate::model::{loss_cer, loss_multi, loss_si, Model, ModelConfig, Pass, PairSample};
use crate::nn::{
    attention_pool, bigru, cross_attend, gate_fuse, gru_cell, si_pair_features, AttnPoolParams,
    BiGruParams, BilinearParams, GateParams, GruParams, Initializer,
};
use crate::tensor::{GradCheck, GradChecker, OpKind, ParamId, ParamStore, Rng, Tape, Tensor, Var};

/// Component names reported by [`gradcheck_suite`], in order.
pub const GRADCHECK_COMPONENTS: &[&str] = &[
    "op.matmul",
    "op.add",
    "op.sub",
    "op.mul",
    "op.add_bias",
    "op.scale",
    "op.one_minus",
    "op.tanh",
    "op.sigmoid",
    "op.relu",
    "op.abs",
    "op.softmax",
    "op.concat",
    "op.row",
    "op.stack",
    "op.transpose",
    "op.sum",
    "op.mean",
    "op.softmax_cross_entropy",
    "op.gather",
    "op.dropout",
    "layer.gru_cell",
    "layer.bigru",
    "layer.attention_pool",
    "layer.gate_fuse",
    "layer.cross_attend",
    "layer.si_pair_features",
    "model.iue=off,cue=off",
    "model.iue=off,cue=on",
    "model.iue=on,cue=off",
    "model.iue=on,cue=on",
];

/// Entries in `±[0.1, 1)`, away from the kinks of relu and abs.
fn input(store: &mut ParamStore<f64>, rng: &mut Rng, name: &str, shape: &[usize]) -> Result<ParamId> {
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            let m = rng.uniform_range(0.1, 1.0);
            if rng.uniform() < 0.5 {
                -m
            } else {
                m
            }
        })
        .collect();
    store.add(name, Tensor::new(shape.to_vec(), data)?.with_grad(true))
}

/// Random-weighted sum of every entry, so no gradient is trivially equal
/// across entries.
fn project(tape: &mut Tape<f64>, x: Var, seed: u64) -> Result<Var> {
    let n = tape.value(x).len();
    let mut rng = Rng::new(seed);
    let w: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let w = tape.constant(&Tensor::new(tape.shape(x).to_vec(), w)?);
    let prod = tape.mul(x, w)?;
    Ok(tape.sum(prod))
}

fn unary(checker: &GradChecker, name: &str, f: fn(&mut Tape<f64>, Var) -> Result<Var>) -> Result<GradCheck> {
    let mut store = ParamStore::new();
    let mut rng = Rng::new(11);
    let a = input(&mut store, &mut rng, "a", &[3, 4])?;
    checker.check(name, &mut store, |t, s| {
        let x = t.param(s, a);
        let y = f(t, x)?;
        project(t, y, 1)
    })
}

fn binary(
    checker: &GradChecker,
    name: &str,
    sa: &[usize],
    sb: &[usize],
    f: fn(&mut Tape<f64>, Var, Var) -> Result<Var>,
) -> Result<GradCheck> {
    let mut store = ParamStore::new();
    let mut rng = Rng::new(12);
    let a = input(&mut store, &mut rng, "a", sa)?;
    let b = input(&mut store, &mut rng, "b", sb)?;
    checker.check(name, &mut store, |t, s| {
        let x = t.param(s, a);
        let y = t.param(s, b);
        let z = f(t, x, y)?;
        project(t, z, 2)
    })
}

fn ops(checker: &GradChecker) -> Result<Vec<GradCheck>> {
    let mut out = vec![
        binary(checker, "op.matmul", &[3, 4], &[4, 2], |t, a, b| t.matmul(a, b))?,
        binary(checker, "op.add", &[2, 3], &[2, 3], |t, a, b| t.add(a, b))?,
        binary(checker, "op.sub", &[2, 3], &[2, 3], |t, a, b| t.sub(a, b))?,
        binary(checker, "op.mul", &[2, 3], &[2, 3], |t, a, b| t.mul(a, b))?,
        binary(checker, "op.add_bias", &[3, 4], &[4], |t, a, b| t.add_bias(a, b))?,
        unary(checker, "op.scale", |t, x| Ok(t.scale(x, -1.7)))?,
        unary(checker, "op.one_minus", |t, x| Ok(t.one_minus(x)))?,
        unary(checker, "op.tanh", |t, x| Ok(t.tanh(x)))?,
        unary(checker, "op.sigmoid", |t, x| Ok(t.sigmoid(x)))?,
        unary(checker, "op.relu", |t, x| Ok(t.relu(x)))?,
        unary(checker, "op.abs", |t, x| Ok(t.abs(x)))?,
        unary(checker, "op.softmax", |t, x| t.softmax(x))?,
        binary(checker, "op.concat", &[2, 3], &[2, 2], |t, a, b| t.concat(&[a, b]))?,
        unary(checker, "op.row", |t, x| t.row(x, 1))?,
        binary(checker, "op.stack", &[3], &[3], |t, a, b| t.stack(&[a, b, a]))?,
        unary(checker, "op.transpose", |t, x| t.transpose(x))?,
        unary(checker, "op.sum", |t, x| Ok(t.sum(x)))?,
        binary(checker, "op.mean", &[3], &[3], |t, a, b| t.mean(&[a, b, b]))?,
        unary(checker, "op.softmax_cross_entropy", |t, x| {
            let r = t.row(x, 2)?;
            t.softmax_cross_entropy(r, 1)
        })?,
    ];

    let mut store = ParamStore::new();
    let table = input(&mut store, &mut Rng::new(13), "table", &[5, 3])?;
    out.push(checker.check("op.gather", &mut store, |t, s| {
        let x = t.gather(s, table, &[4, 0, 4, 2])?;
        project(t, x, 3)
    })?);

    let mut store = ParamStore::new();
    let a = input(&mut store, &mut Rng::new(14), "a", &[4, 5])?;
    out.push(checker.check("op.dropout", &mut store, |t, s| {
        let x = t.param(s, a);
        let y = t.dropout(x, 0.4, true, &mut Rng::new(99))?;
        project(t, y, 4)
    })?);
    Ok(out)
}

/// Randomises every parameter (biases included) so no check runs at the
/// all-zero-bias point only.
fn perturb(store: &mut ParamStore<f64>, seed: u64) {
    let mut rng = Rng::new(seed);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for x in store.get_mut(id).data_mut() {
            *x += rng.uniform_range(-0.3, 0.3);
        }
    }
}

fn layers(checker: &GradChecker) -> Result<Vec<GradCheck>> {
    let mut out = Vec::new();

    let mut store = ParamStore::new();
    let p = GruParams::new(&mut Initializer::new(&mut store, 21).scope("gru"), 4, 3)?;
    let x = input(&mut store, &mut Rng::new(1), "x", &[4])?;
    let h = input(&mut store, &mut Rng::new(2), "h", &[3])?;
    perturb(&mut store, 31);
    out.push(checker.check("layer.gru_cell", &mut store, |t, s| {
        let (x, h) = (t.param(s, x), t.param(s, h));
        let y = gru_cell(t, s, x, h, &p)?;
        project(t, y, 5)
    })?);

    let mut store = ParamStore::new();
    let p = BiGruParams::new(&mut Initializer::new(&mut store, 22).scope("bigru"), 3, 2)?;
    let xs = input(&mut store, &mut Rng::new(3), "xs", &[4, 3])?;
    perturb(&mut store, 32);
    out.push(checker.check("layer.bigru", &mut store, |t, s| {
        let xs = t.param(s, xs);
        let y = bigru(t, s, xs, &p)?;
        project(t, y, 6)
    })?);

    let mut store = ParamStore::new();
    let p = AttnPoolParams::new(&mut Initializer::new(&mut store, 23).scope("pool"), 4)?;
    let hs = input(&mut store, &mut Rng::new(4), "hs", &[3, 4])?;
    perturb(&mut store, 33);
    out.push(checker.check("layer.attention_pool", &mut store, |t, s| {
        let hs = t.param(s, hs);
        let (u, alpha) = attention_pool(t, s, hs, &p)?;
        let both = t.concat(&[u, alpha])?;
        project(t, both, 7)
    })?);

    let mut store = ParamStore::new();
    let p = GateParams::new(&mut Initializer::new(&mut store, 24).scope("gate"), 4)?;
    let a = input(&mut store, &mut Rng::new(5), "h_task", &[2, 4])?;
    let b = input(&mut store, &mut Rng::new(6), "h_shared", &[2, 4])?;
    perturb(&mut store, 34);
    out.push(checker.check("layer.gate_fuse", &mut store, |t, s| {
        let (a, b) = (t.param(s, a), t.param(s, b));
        let y = gate_fuse(t, s, a, b, &p)?;
        project(t, y, 8)
    })?);

    let mut store = ParamStore::new();
    let p = BilinearParams::new(&mut Initializer::new(&mut store, 25).scope("bilinear"), 3)?;
    let a = input(&mut store, &mut Rng::new(7), "tgt", &[3, 3])?;
    let b = input(&mut store, &mut Rng::new(8), "src", &[3, 3])?;
    out.push(checker.check("layer.cross_attend", &mut store, |t, s| {
        let (a, b) = (t.param(s, a), t.param(s, b));
        let y = cross_attend(t, s, a, b, &p)?;
        let both = t.concat(&[y.output, y.beta])?;
        project(t, both, 9)
    })?);

    let mut store = ParamStore::new();
    let a = input(&mut store, &mut Rng::new(9), "f_i", &[3])?;
    let b = input(&mut store, &mut Rng::new(10), "f_j", &[3])?;
    out.push(checker.check("layer.si_pair_features", &mut store, |t, s| {
        let (a, b) = (t.param(s, a), t.param(s, b));
        let y = si_pair_features(t, a, b)?;
        project(t, y, 10)
    })?);
    Ok(out)
}

/// A 3-utterance, 4-word conversation over a 9-word vocabulary.
fn toy_conversation() -> EncodedConversation {
    EncodedConversation {
        id: "toy".into(),
        tokens: vec![vec![2, 3, 4, 5], vec![6, 2, 7, 8], vec![3, 3, 8, 0]],
        speakers: vec!["A".into(), "B".into(), "A".into()],
        emotions: vec![Some(1), Some(4), Some(0)],
    }
}

fn model_check(checker: &GradChecker, iue: bool, cue: bool) -> Result<GradCheck> {
    let mut rng = Rng::new(41);
    let dim = 3;
    let data = (0..9 * dim).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let table = EmbeddingTable {
        dim,
        data,
        trainable: true,
        provenance: vec![RowSource::Random; 9],
    };
    let config = ModelConfig {
        embed_dim: dim,
        word_hidden: 2,
        utt_hidden: 2,
        si_hidden: 3,
        num_emotions: 5,
        enable_iue_bridge: iue,
        enable_cue_bridge: cue,
        ..ModelConfig::emorynlp()
    };
    let mut model = Model::<f64>::new(config, &table, true, 42)?;
    perturb(&mut model.store, 43);
    let conv = toy_conversation();
    let pairs = [
        PairSample { i: 0, j: 2, same: true },
        PairSample { i: 1, j: 2, same: false },
        PairSample { i: 0, j: 1, same: false },
    ];
    let name = format!(
        "model.iue={},cue={}",
        if iue { "on" } else { "off" },
        if cue { "on" } else { "off" }
    );
    let mut store = std::mem::take(&mut model.store);
    checker.check(&name, &mut store, |t, s| {
        let m = Model {
            config: model.config.clone(),
            mtl: true,
            params: model.params.clone(),
            store: s.clone(),
        };
        let (cer, si) = {
            let mut pass = Pass::new(&m, t, &conv, None)?;
            let cer = pass.cer()?;
            let si = pass.si(&pairs)?;
            (cer, si)
        };
        let l_cer = loss_cer(t, cer.logits, &conv.emotions)?;
        let l_si = loss_si(t, si.as_ref(), &pairs)?;
        Ok(loss_multi(t, l_cer, l_si)?.value)
    })
}

/// Checks every tape op, every layer and the full multi-task model in all
/// four bridge configurations. `fault` deliberately corrupts one backward
/// rule, for testing the checker itself.
pub fn gradcheck_suite(fault: Option<OpKind>) -> Result<Vec<GradCheck>> {
    let checker = GradChecker::with_fault(fault);
    let mut out = ops(&checker)?;
    out.extend(layers(&checker)?);
    for (iue, cue) in [(false, false), (false, true), (true, false), (true, true)] {
        out.push(model_check(&checker, iue, cue)?);
    }
    Ok(out)
}
