use crate::error::{Error, Result};
use crate::tensor::{Real, Tape, Var};

/// Features for a same-speaker decision on two utterance vectors:
/// `f_i ⊕ f_j ⊕ |f_i - f_j| ⊕ (f_i ⊙ f_j)`, length `4d`.
///
/// The difference term is elementwise, so the last two blocks are symmetric
/// in the two arguments.
pub fn si_pair_features<T: Real>(tape: &mut Tape<T>, f_i: Var, f_j: Var) -> Result<Var> {
    let (si, sj) = (tape.shape(f_i), tape.shape(f_j));
    if si.len() != 1 || si != sj {
        return Err(Error::Dimension {
            op: "si_pair_features",
            lhs: si.to_vec(),
            rhs: sj.to_vec(),
        });
    }
    let diff = tape.sub(f_i, f_j)?;
    let dist = tape.abs(diff);
    let prod = tape.mul(f_i, f_j)?;
    tape.concat(&[f_i, f_j, dist, prod])
}
