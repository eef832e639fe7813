use serde::{Deserialize, Serialize};

use crate::tensor::Rng;

/// An unordered utterance pair `i < j` and whether both share a speaker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSample {
    pub i: usize,
    pub j: usize,
    pub same: bool,
}

impl PairSample {
    /// Class index: 1 for the same speaker, 0 otherwise.
    pub fn label(&self) -> usize {
        usize::from(self.same)
    }
}

/// Draws `min(t, N(N-1)/2)` distinct pairs uniformly without replacement.
/// Fewer than two utterances yield no pairs.
///
/// With `balance`, up to half the draws come from same-speaker pairs and the
/// rest from different-speaker pairs, topping up from whichever class has
/// pairs left.
pub fn sample_pairs(speakers: &[String], t: usize, rng: &mut Rng, balance: bool) -> Vec<PairSample> {
    let n = speakers.len();
    let mut all = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            all.push(PairSample {
                i,
                j,
                same: speakers[i] == speakers[j],
            });
        }
    }
    let k = t.min(all.len());
    if !balance {
        return partial_shuffle(&mut all, k, rng).to_vec();
    }
    let (mut pos, mut neg): (Vec<_>, Vec<_>) = all.into_iter().partition(|p| p.same);
    let want_pos = (k / 2 + k % 2).min(pos.len());
    let want_neg = (k - want_pos).min(neg.len());
    let want_pos = k - want_neg;
    let mut out = partial_shuffle(&mut pos, want_pos, rng).to_vec();
    out.extend_from_slice(partial_shuffle(&mut neg, want_neg, rng));
    out
}

/// First `k` entries of a Fisher-Yates shuffle.
fn partial_shuffle<'a, T>(items: &'a mut [T], k: usize, rng: &mut Rng) -> &'a [T] {
    for a in 0..k {
        let b = a + rng.below((items.len() - a) as u64) as usize;
        items.swap(a, b);
    }
    &items[..k]
}
