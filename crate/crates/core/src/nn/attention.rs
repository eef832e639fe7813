use super::Initializer;
use crate::error::{Error, Result};
use crate::tensor::{ParamId, ParamStore, Real, Tape, Var};

/// Additive attention pooling weights for inputs of width `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttnPoolParams {
    pub w_a: ParamId,
    pub b_a: ParamId,
    pub v_a: ParamId,
    pub dim: usize,
}

impl AttnPoolParams {
    pub fn new<T: Real>(init: &mut Initializer<'_, T>, dim: usize) -> Result<Self> {
        Ok(Self {
            w_a: init.weight("w_a", &[dim, dim])?,
            b_a: init.bias("b_a", dim)?,
            v_a: init.weight("v_a", &[dim])?,
            dim,
        })
    }
}

/// Pools the rows `h_j` of `hs: [n, d]` into one vector:
///
/// ```text
/// z_j = tanh(h_j·W_a + b_a)
/// α   = softmax_j(z_j·v_a)
/// u   = Σ_j α_j h_j
/// ```
///
/// Returns `(u: [d], α: [n])`.
pub fn attention_pool<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    hs: Var,
    p: &AttnPoolParams,
) -> Result<(Var, Var)> {
    let shape = tape.shape(hs);
    if shape.len() != 2 || shape[1] != p.dim {
        return Err(Error::Dimension {
            op: "attention_pool",
            lhs: shape.to_vec(),
            rhs: vec![0, p.dim],
        });
    }
    if shape[0] == 0 {
        return Err(Error::Argument("attention_pool over an empty sequence".into()));
    }
    let w = tape.param(store, p.w_a);
    let b = tape.param(store, p.b_a);
    let v = tape.param(store, p.v_a);
    let proj = tape.matmul(hs, w)?;
    let proj = tape.add_bias(proj, b)?;
    let z = tape.tanh(proj);
    let scores = tape.matmul(z, v)?;
    let alpha = tape.softmax(scores)?;
    let u = tape.matmul(alpha, hs)?;
    Ok((u, alpha))
}
