use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{arg, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TTest {
    pub mean_diff: f64,
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    /// The differences had zero variance up to rounding; `p_value` is then 0 when the mean
    /// difference is nonzero and 1 otherwise.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a[k] - b[k]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return arg(format!("paired samples differ in length: {} vs {}", a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return arg("a paired t-test needs at least two pairs");
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    // Differences that agree up to rounding of the subtraction count as
    // constant, so `a = b + c` is detected even when `c` is not exact.
    let constant = d
        .iter()
        .zip(a.iter().zip(b))
        .all(|(x, (p, q))| (x - mean).abs() <= 8.0 * f64::EPSILON * p.abs().max(q.abs()));
    if var == 0.0 || constant {
        return Ok(TTest {
            mean_diff: mean,
            t: if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY },
            df,
            p_value: if mean == 0.0 { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    let p_value = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        mean_diff: mean,
        t,
        df,
        p_value,
        degenerate: false,
    })
}
