//! Central finite-difference gradient checking in double precision.

use super::{OpKind, ParamStore, Tape, Var};
use crate::error::Result;

/// Largest relative error accepted by [`GradCheck::passed`].
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Outcome of checking one scalar function against finite differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
    /// Name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOLERANCE
    }
}

/// `|a - n| / max(|a|, |n|, floor)`.
///
/// The floor keeps entries whose true gradient is zero (dead ReLU units,
/// unused inputs) from dividing rounding noise by zero.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

/// Compares tape gradients with central differences `(f(x+h) - f(x-h)) / 2h`
/// for every entry of every parameter that requires a gradient.
#[derive(Clone, Debug)]
pub struct GradChecker {
    pub step: f64,
    pub floor: f64,
    pub fault: Option<OpKind>,
}

impl Default for GradChecker {
    fn default() -> Self {
        Self {
            step: 1e-5,
            floor: 1e-6,
            fault: None,
        }
    }
}

impl GradChecker {
    pub fn with_fault(fault: Option<OpKind>) -> Self {
        Self {
            fault,
            ..Self::default()
        }
    }

    fn tape(&self) -> Tape<f64> {
        match self.fault {
            Some(k) => Tape::with_faulty_backward(k),
            None => Tape::new(),
        }
    }

    pub fn check<F>(&self, name: &str, store: &mut ParamStore<f64>, f: F) -> Result<GradCheck>
    where
        F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var>,
    {
        store.zero_grad();
        let mut tape = self.tape();
        let loss = f(&mut tape, store)?;
        tape.backward(loss, store)?;

        let eval = |store: &ParamStore<f64>| -> Result<f64> {
            let mut t = Tape::new();
            let l = f(&mut t, store)?;
            Ok(t.scalar(l))
        };

        let mut report = GradCheck {
            name: name.to_string(),
            max_rel_error: 0.0,
            worst: None,
            checked: 0,
        };
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let Some(analytic) = store.get(id).grad().map(<[f64]>::to_vec) else {
                continue;
            };
            for (i, &a) in analytic.iter().enumerate() {
                let orig = store.get(id).data()[i];
                store.get_mut(id).data_mut()[i] = orig + self.step;
                let plus = eval(store)?;
                store.get_mut(id).data_mut()[i] = orig - self.step;
                let minus = eval(store)?;
                store.get_mut(id).data_mut()[i] = orig;
                let numeric = (plus - minus) / (2.0 * self.step);
                let err = relative_error(a, numeric, self.floor);
                report.checked += 1;
                if err > report.max_rel_error || err.is_nan() {
                    report.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
                    report.worst = Some((store.name(id).to_string(), i));
                }
            }
        }
        store.zero_grad();
        Ok(report)
    }
}
