use serde::Serialize;

use super::{train, TrainData, TrainSchedule};
use crate::data::EmbeddingTable;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::tensor::Real;

/// Dev scores of one bridge configuration, one per seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub iue: bool,
    pub cue: bool,
    pub scores: Vec<f64>,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationReport {
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, iue: bool, cue: bool) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.iue == iue && r.cue == cue)
    }

    /// Columns `iue, cue, dataset, f1` with the median score per row.
    pub fn to_tsv(&self) -> String {
        let flag = |b: bool| if b { "on" } else { "off" };
        let mut s = String::from("iue\tcue\tdataset\tf1\n");
        for r in &self.rows {
            s.push_str(&format!("{}\t{}\t{}\t{:.6}\n", flag(r.iue), flag(r.cue), self.dataset, r.median));
        }
        s
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Trains one model per seed (seed drives both initialisation and the
/// schedule) and returns each run's best dev weighted-F1. Runs are spread
/// over `jobs` worker threads; results are in seed order.
pub fn train_seeds<T: Real>(
    config: &ModelConfig,
    mtl: bool,
    schedule: &TrainSchedule,
    data: TrainData<'_>,
    embeddings: &EmbeddingTable,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Argument(e.to_string()))?;
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let model = Model::<T>::new(config.clone(), embeddings, mtl, seed)?;
                let schedule = TrainSchedule {
                    seed,
                    ..schedule.clone()
                };
                let out = train(model, &schedule, data, None)?;
                out.best_dev_f1
                    .ok_or_else(|| Error::Config("the ablation needs a labeled dev corpus".into()))
            })
            .collect()
    })
}

/// All four bridge configurations of the multi-task model, each trained
/// with the same seeds. Rows come in the order (off, off), (off, on),
/// (on, off), (on, on).
pub fn run_ablation<T: Real>(
    config: &ModelConfig,
    schedule: &TrainSchedule,
    data: TrainData<'_>,
    embeddings: &EmbeddingTable,
    seeds: &[u64],
    jobs: usize,
    dataset: &str,
) -> Result<AblationReport> {
    let mut rows = Vec::with_capacity(4);
    for (iue, cue) in [(false, false), (false, true), (true, false), (true, true)] {
        let c = ModelConfig {
            enable_iue_bridge: iue,
            enable_cue_bridge: cue,
            ..config.clone()
        };
        let scores = train_seeds::<T>(&c, true, schedule, data, embeddings, seeds, jobs)?;
        rows.push(AblationRow {
            iue,
            cue,
            median: median(&scores),
            scores,
        });
    }
    Ok(AblationReport {
        dataset: dataset.to_string(),
        seeds: seeds.to_vec(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn tsv_layout() {
        let r = AblationReport {
            dataset: "synthetic".into(),
            seeds: vec![1],
            rows: vec![AblationRow {
                iue: true,
                cue: false,
                scores: vec![0.5],
                median: 0.5,
            }],
        };
        assert_eq!(r.to_tsv(), "iue\tcue\tdataset\tf1\non\toff\tsynthetic\t0.500000\n");
    }
}
