use rayon::prelude::*;
use serde::Serialize;

use crate::data::{EncodedConversation, LabelSet};
use crate::error::{arg, Result};
use crate::model::{Model, Prediction};
use crate::tensor::Real;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Classification report over labeled utterances.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    /// `confusion[gold][pred]`.
    pub confusion: Vec<Vec<usize>>,
    pub n: usize,
}

impl EvalReport {
    pub fn from_labels(golds: &[usize], preds: &[usize], k: usize) -> Result<Self> {
        if golds.len() != preds.len() {
            return arg(format!("{} golds vs {} predictions", golds.len(), preds.len()));
        }
        if golds.is_empty() {
            return arg("no labeled utterances to score");
        }
        let mut confusion = vec![vec![0usize; k]; k];
        for (&g, &p) in golds.iter().zip(preds) {
            if g >= k || p >= k {
                return arg(format!("label ({g}, {p}) outside 0..{k}"));
            }
            confusion[g][p] += 1;
        }
        Ok(Self::from_confusion(confusion))
    }

    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Self {
        let k = confusion.len();
        let n: usize = confusion.iter().flatten().sum();
        let mut per_class = Vec::with_capacity(k);
        let mut weighted = 0.0;
        let mut correct = 0;
        for c in 0..k {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            weighted += support as f64 * f1;
            correct += tp;
            per_class.push(ClassScores {
                precision,
                recall,
                f1,
                support,
            });
        }
        Self {
            weighted_f1: weighted / n as f64,
            accuracy: ratio(correct, n),
            per_class,
            confusion,
            n,
        }
    }

    /// Per-class table followed by the weighted score, tab separated.
    pub fn to_tsv(&self, labels: &LabelSet) -> String {
        let mut s = String::from("label\tprecision\trecall\tf1\tsupport\n");
        for (c, sc) in self.per_class.iter().enumerate() {
            s.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
                labels.name(c),
                sc.precision,
                sc.recall,
                sc.f1,
                sc.support
            ));
        }
        s.push_str(&format!("weighted\t\t\t{:.6}\t{}\n", self.weighted_f1, self.n));
        s
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Support-weighted mean of per-class F1; classes without predictions or
/// gold items score zero.
pub fn weighted_macro_f1(golds: &[usize], preds: &[usize], k: usize) -> Result<f64> {
    Ok(EvalReport::from_labels(golds, preds, k)?.weighted_f1)
}

/// Predicts every conversation (in parallel, results kept in input order).
pub fn predict_all<T: Real>(model: &Model<T>, convs: &[EncodedConversation]) -> Result<Vec<Prediction>> {
    convs.par_iter().map(|c| model.predict(c)).collect()
}

/// Scores the labeled utterances of `convs`.
pub fn evaluate<T: Real>(model: &Model<T>, convs: &[EncodedConversation]) -> Result<EvalReport> {
    let preds = predict_all(model, convs)?;
    let (mut golds, mut guesses) = (Vec::new(), Vec::new());
    for (conv, pred) in convs.iter().zip(&preds) {
        for (gold, guess) in conv.emotions.iter().zip(pred.labels()) {
            if let Some(g) = *gold {
                golds.push(g);
                guesses.push(guess);
            }
        }
    }
    EvalReport::from_labels(&golds, &guesses, model.config.num_emotions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case_is_one_third() {
        assert_eq!(weighted_macro_f1(&[0, 0, 1, 1], &[0, 0, 0, 0], 2).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn perfect_is_one() {
        let g = [3, 1, 4, 1, 5];
        assert_eq!(weighted_macro_f1(&g, &g, 7).unwrap(), 1.0);
    }

    #[test]
    fn confusion_sums_to_n() {
        let r = EvalReport::from_labels(&[0, 1, 2, 2], &[1, 1, 2, 0], 3).unwrap();
        assert_eq!(r.confusion.iter().flatten().sum::<usize>(), r.n);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn empty_rejected() {
        assert!(weighted_macro_f1(&[], &[], 3).is_err());
    }
}
