use super::Initializer;
use crate::error::{Error, Result};
use crate::tensor::{ParamId, ParamStore, Real, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    pub w_g: ParamId,
    pub b_g: ParamId,
    pub dim: usize,
}

impl GateParams {
    pub fn new<T: Real>(init: &mut Initializer<'_, T>, dim: usize) -> Result<Self> {
        Ok(Self {
            w_g: init.weight("w_g", &[dim, dim])?,
            b_g: init.bias("b_g", dim)?,
            dim,
        })
    }
}

/// Mixes shared features into task features with a sigmoid gate computed
/// from the task features:
///
/// ```text
/// g = σ(h_task·W_g + b_g)
/// ĥ = g ⊙ h_shared + (1 - g) ⊙ h_task
/// ```
///
/// Evaluated per component as `h_task + g·(h_shared - h_task)` when
/// `g < 0.5` and as `h_shared - (1 - g)·(h_shared - h_task)` otherwise. The
/// step taken is then at most half the distance, so rounding cannot push the
/// result outside `[min, max]` of the two inputs, and equal inputs come back
/// bit-for-bit. Accepts vectors `[d]` or row-wise matrices `[n, d]`.
pub fn gate_fuse<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    h_task: Var,
    h_shared: Var,
    p: &GateParams,
) -> Result<Var> {
    let st = tape.shape(h_task);
    if st != tape.shape(h_shared) || st.last() != Some(&p.dim) {
        return Err(Error::Dimension {
            op: "gate_fuse",
            lhs: st.to_vec(),
            rhs: tape.shape(h_shared).to_vec(),
        });
    }
    let w = tape.param(store, p.w_g);
    let b = tape.param(store, p.b_g);
    let pre = tape.matmul(h_task, w)?;
    let pre = tape.add_bias(pre, b)?;
    let g = tape.sigmoid(pre);
    let diff = tape.sub(h_shared, h_task)?;

    let from_task = tape.mul(g, diff)?;
    let from_task = tape.add(h_task, from_task)?;
    let rest = tape.one_minus(g);
    let from_shared = tape.mul(rest, diff)?;
    let from_shared = tape.sub(h_shared, from_shared)?;

    let half = T::of(0.5);
    let low: Vec<T> = tape
        .value(g)
        .iter()
        .map(|&v| if v < half { T::one() } else { T::zero() })
        .collect();
    let low = tape.constant(&Tensor::new(tape.shape(g).to_vec(), low)?);
    let high = tape.one_minus(low);
    let a = tape.mul(low, from_task)?;
    let b = tape.mul(high, from_shared)?;
    tape.add(a, b)
}
