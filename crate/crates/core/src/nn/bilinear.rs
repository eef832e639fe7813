use super::Initializer;
use crate::error::{Error, Result};
use crate::tensor::{ParamId, ParamStore, Real, Tape, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct BilinearParams {
    pub w_c: ParamId,
    pub dim: usize,
}

impl BilinearParams {
    pub fn new<T: Real>(init: &mut Initializer<'_, T>, dim: usize) -> Result<Self> {
        Ok(Self {
            w_c: init.weight("w_c", &[dim, dim])?,
            dim,
        })
    }
}

/// Output of [`cross_attend`].
#[derive(Clone, Copy, Debug)]
pub struct CrossAttention {
    /// `[N, 2d]`: each target row followed by its attended source summary.
    pub output: Var,
    /// `[N, N]`: attention of target `i` over source `j`; rows sum to one.
    pub beta: Var,
}

/// Bilinear cross attention between two utterance sequences of the same
/// conversation:
///
/// ```text
/// c_ij   = tgt_i · W_c · src_j
/// β_i    = softmax_j(c_ij)          (over every j, including j = i)
/// out_i  = tgt_i ⊕ Σ_j β_ij src_j
/// ```
pub fn cross_attend<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    tgt: Var,
    src: Var,
    p: &BilinearParams,
) -> Result<CrossAttention> {
    let (st, ss) = (tape.shape(tgt), tape.shape(src));
    if st.len() != 2 || st != ss || st[1] != p.dim {
        return Err(Error::Dimension {
            op: "cross_attend",
            lhs: st.to_vec(),
            rhs: ss.to_vec(),
        });
    }
    let w = tape.param(store, p.w_c);
    let tw = tape.matmul(tgt, w)?;
    let src_t = tape.transpose(src)?;
    let scores = tape.matmul(tw, src_t)?;
    let beta = tape.softmax(scores)?;
    let attended = tape.matmul(beta, src)?;
    let output = tape.concat(&[tgt, attended])?;
    Ok(CrossAttention { output, beta })
}
