use super::{Real, Rng, Tensor};
use crate::error::{arg, Result};

/// Glorot-uniform initialization: every entry drawn from
/// `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
///
/// For a matrix `[fan_in, fan_out]`; a vector `[n]` uses `fan_in = n`,
/// `fan_out = 1`. Requires a gradient buffer.
pub fn init_param<T: Real>(shape: &[usize], rng: &mut Rng) -> Result<Tensor<T>> {
    let (fan_in, fan_out) = match shape {
        [n] => (*n, 1),
        [r, c] => (*r, *c),
        _ => return arg(format!("init_param expects a vector or matrix, got {shape:?}")),
    };
    if fan_in == 0 || fan_out == 0 {
        return arg(format!("init_param: zero dimension in {shape:?}"));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| T::of(rng.uniform_range(-bound, bound)))
        .collect();
    Ok(Tensor::new(shape.to_vec(), data)?.with_grad(true))
}

/// Zero-filled trainable tensor (bias convention).
pub fn zeros<T: Real>(shape: &[usize]) -> Result<Tensor<T>> {
    Ok(Tensor::zeros(shape.to_vec())?.with_grad(true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let a: Tensor<f64> = init_param(&[5, 4], &mut Rng::new(1)).unwrap();
        let b: Tensor<f64> = init_param(&[5, 4], &mut Rng::new(1)).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn mean_within_three_sigma() {
        let t: Tensor<f64> = init_param(&[100, 100], &mut Rng::new(9)).unwrap();
        let a = (6.0f64 / 200.0).sqrt();
        // variance of U(-a, a) is a²/3
        let sigma_mean = (a * a / 3.0 / 10_000.0).sqrt();
        let mean = t.data().iter().sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 3.0 * sigma_mean, "mean {mean}");
        assert!(t.data().iter().all(|x| x.abs() <= a));
    }

    #[test]
    fn bias_is_zero() {
        let b: Tensor<f64> = zeros(&[7]).unwrap();
        assert!(b.data().iter().all(|&x| x == 0.0));
        assert!(b.requires_grad());
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(init_param::<f64>(&[0, 3], &mut Rng::new(0)).is_err());
        assert!(init_param::<f64>(&[3, 0], &mut Rng::new(0)).is_err());
    }
}
