use crate::error::{arg, Result};
use crate::tensor::Rng;

/// Groups conversation indices `0..n` into batches of `batch_size`; the
/// last batch may be smaller. Conversations are never split. With
/// `shuffle` the order is permuted by `rng` first.
///
/// Batches are processed one conversation at a time, so no padding is ever
/// introduced.
pub fn make_batches(n: usize, batch_size: usize, rng: &mut Rng, shuffle: bool) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return arg("batch_size must be at least 1");
    }
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        rng.shuffle(&mut order);
    }
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_four_four_two() {
        let b = make_batches(10, 4, &mut Rng::new(0), true).unwrap();
        let sizes: Vec<usize> = b.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn unshuffled_keeps_order() {
        let b = make_batches(5, 2, &mut Rng::new(0), false).unwrap();
        assert_eq!(b, vec![vec![0, 1], vec![2, 3], vec![4]]);
    }

    #[test]
    fn seeded_shuffle_is_reproducible() {
        let a = make_batches(37, 4, &mut Rng::new(42), true).unwrap();
        let b = make_batches(37, 4, &mut Rng::new(42), true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_batch_size_rejected() {
        assert!(make_batches(3, 0, &mut Rng::new(0), false).is_err());
    }
}
