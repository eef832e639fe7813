//! Training, evaluation, significance testing and the bridge ablation.
//!
//! One epoch walks the labeled corpus in shuffled batches. In multi-task
//! mode every labeled batch is trained on `L_CER + L_SI` (speaker pairs are
//! sampled from the labeled conversations too) and is followed by
//! `mix_ratio` batches from the speaker-only corpus trained on `L_SI`
//! alone. The speaker-only corpus is cycled and reshuffled whenever it runs
//! out. Adam takes one step per batch.
//!
//! The training log is JSON lines: one record per batch
//! (`{"epoch","batch","loss_cer","loss_si","loss_multi"}`, with `null` for
//! terms that are absent in that batch) and one per epoch
//! (`{"epoch","train_loss","dev_f1"}`).

mod ablation;
mod gradcheck;
mod metrics;
mod stats;

pub use ablation::{median, run_ablation, train_seeds, AblationReport, AblationRow};
pub use gradcheck::{gradcheck_suite, GRADCHECK_COMPONENTS};
pub use metrics::{evaluate, predict_all, weighted_macro_f1, ClassScores, EvalReport};
pub use stats::{paired_t_test, TTest};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{make_batches, EncodedConversation};
use crate::error::{Error, Result};
use crate::model::{loss_cer, loss_si, LossTerm, sample_pairs, DropoutStreams, Model, Pass};
use crate::tensor::{AdamConfig, AdamState, ParamId, Real, Rng, Tape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub lr_main: f64,
    /// Learning rate of the word vectors; 0 keeps them frozen.
    pub lr_embedding: f64,
    /// Speaker-only batches per labeled batch.
    pub mix_ratio: usize,
    /// Stop after this many epochs without a better dev score.
    pub early_stop_patience: usize,
    pub seed: u64,
    /// Global gradient-norm limit, off when absent.
    pub grad_clip: Option<f64>,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            max_epochs: 50,
            batch_size: 4,
            lr_main: 2.5e-4,
            lr_embedding: 0.0,
            mix_ratio: 1,
            early_stop_patience: 10,
            seed: 0,
            grad_clip: None,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.max_epochs == 0 {
            return bad("train.max_epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("train.batch_size must be positive".into());
        }
        if !(self.lr_main > 0.0 && self.lr_main.is_finite()) {
            return bad(format!("train.lr_main must be positive, got {}", self.lr_main));
        }
        if !(self.lr_embedding >= 0.0 && self.lr_embedding.is_finite()) {
            return bad(format!("train.lr_embedding must be >= 0, got {}", self.lr_embedding));
        }
        if self.early_stop_patience == 0 {
            return bad("train.early_stop_patience must be positive".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("train.grad_clip must be positive, got {c}"));
            }
        }
        Ok(())
    }
}

/// Encoded corpora for one training run.
#[derive(Clone, Copy, Debug)]
pub struct TrainData<'a> {
    pub train: &'a [EncodedConversation],
    pub dev: &'a [EncodedConversation],
    /// Speaker-only conversations; ignored by single-task models.
    pub si: &'a [EncodedConversation],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_f1: Option<f64>,
}

/// The best model by dev score (the last one without a dev set).
#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub best: Model<T>,
    pub best_epoch: usize,
    pub best_dev_f1: Option<f64>,
    pub history: Vec<EpochSummary>,
}

#[derive(Serialize)]
struct BatchRecord {
    epoch: usize,
    batch: usize,
    loss_cer: Option<f64>,
    loss_si: Option<f64>,
    loss_multi: f64,
}

struct Trainer<'a, T> {
    model: Model<T>,
    schedule: &'a TrainSchedule,
    main: AdamState<T>,
    embedding: Option<AdamState<T>>,
    dropout: DropoutStreams,
    pairs_cer: Rng,
    pairs_si: Rng,
}

#[derive(Clone, Copy, PartialEq)]
enum BatchKind {
    Labeled,
    SpeakerOnly,
}

impl<T: Real> Trainer<'_, T> {
    /// Forward, backward and one Adam step; returns the batch record.
    fn batch(&mut self, convs: &[&EncodedConversation], kind: BatchKind, epoch: usize, batch: usize) -> Result<BatchRecord> {
        let mtl = self.model.mtl;
        let t = self.model.config.pairs_per_conversation;
        let balance = self.model.config.balance_pairs;
        let use_cer = kind == BatchKind::Labeled;
        let use_si = mtl;
        let n_cer = if use_cer { convs.iter().filter(|c| c.is_labeled()).count() } else { 0 };
        let n_si = if use_si { convs.iter().filter(|c| c.len() >= 2).count() } else { 0 };

        self.model.store.zero_grad();
        let (mut sum_cer, mut sum_si) = (0.0, 0.0);
        for conv in convs {
            let pairs = if use_si {
                let rng = match kind {
                    BatchKind::Labeled => &mut self.pairs_cer,
                    BatchKind::SpeakerOnly => &mut self.pairs_si,
                };
                sample_pairs(&conv.speakers, t, rng, balance)
            } else {
                Vec::new()
            };
            let mut tape = Tape::new();
            let diverged = |e: Error| match e {
                Error::Numeric(_) => Error::Divergence { epoch, batch },
                e => e,
            };
            let (l_cer, l_si) = {
                let mut pass = Pass::new(&self.model, &mut tape, conv, Some(&mut self.dropout))?;
                let l_cer = if use_cer {
                    let out = pass.cer().map_err(diverged)?;
                    Some((out.logits, conv.emotions.clone()))
                } else {
                    None
                };
                let si = if use_si { pass.si(&pairs).map_err(diverged)? } else { None };
                (l_cer, si)
            };
            let l_cer = match l_cer {
                Some((logits, golds)) => loss_cer(&mut tape, logits, &golds).map_err(diverged)?,
                None => LossTerm {
                    value: tape.zeros(&[]),
                    has_gradient: false,
                },
            };
            let l_si = loss_si(&mut tape, l_si.as_ref(), &pairs).map_err(diverged)?;
            let lc = tape.scalar(l_cer.value).as_f64();
            let ls = tape.scalar(l_si.value).as_f64();
            if !lc.is_finite() || !ls.is_finite() {
                return Err(Error::Divergence { epoch, batch });
            }
            let mut parts = Vec::new();
            if l_cer.has_gradient {
                sum_cer += lc;
                parts.push(tape.scale(l_cer.value, T::of(1.0 / n_cer as f64)));
            }
            if l_si.has_gradient {
                sum_si += ls;
                parts.push(tape.scale(l_si.value, T::of(1.0 / n_si as f64)));
            }
            let objective = match parts.as_slice() {
                [] => continue,
                [one] => *one,
                [a, b] => tape.add(*a, *b)?,
                _ => unreachable!(),
            };
            tape.backward(objective, &mut self.model.store)?;
        }
        if let Some(c) = self.schedule.grad_clip {
            self.model.store.clip_grad_norm(T::of(c));
        }
        self.main.step(&mut self.model.store);
        if let Some(e) = &mut self.embedding {
            e.step(&mut self.model.store);
        }
        let loss_cer = (n_cer > 0).then(|| sum_cer / n_cer as f64);
        let loss_si = (n_si > 0).then(|| sum_si / n_si as f64);
        Ok(BatchRecord {
            epoch,
            batch,
            loss_cer,
            loss_si,
            loss_multi: loss_cer.unwrap_or(0.0) + loss_si.unwrap_or(0.0),
        })
    }
}

fn write_line<S: Serialize>(log: &mut Option<&mut dyn Write>, record: &S) -> Result<()> {
    if let Some(w) = log {
        serde_json::to_writer(&mut **w, record)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Trains `model` and returns the best snapshot by dev weighted-F1.
///
/// With a dev set, training stops early after `early_stop_patience`
/// epochs without improvement. All randomness derives from
/// `schedule.seed` through named streams (batch order, pair sampling and
/// per-side dropout), so a single-task run and a multi-task run without
/// bridges draw identical emotion-side randomness.
pub fn train<T: Real>(
    mut model: Model<T>,
    schedule: &TrainSchedule,
    data: TrainData<'_>,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainOutcome<T>> {
    schedule.validate()?;
    if data.train.is_empty() {
        return Err(Error::Config("the training corpus is empty".into()));
    }
    let train_embedding = schedule.lr_embedding > 0.0;
    model.set_embedding_trainable(train_embedding);
    let emb = model.params.embedding;
    let main_ids: Vec<ParamId> = model.store.ids().filter(|&id| id != emb).collect();
    let root = Rng::new(schedule.seed);
    let mut trainer = Trainer {
        main: AdamState::new(&model.store, main_ids, AdamConfig::with_lr(schedule.lr_main)),
        embedding: train_embedding
            .then(|| AdamState::new(&model.store, vec![emb], AdamConfig::with_lr(schedule.lr_embedding))),
        dropout: DropoutStreams::new(&root.fork_named("dropout")),
        pairs_cer: root.fork_named("pairs.cer"),
        pairs_si: root.fork_named("pairs.si"),
        model,
        schedule,
    };
    let mut order_cer = root.fork_named("batches.cer");
    let mut order_si = root.fork_named("batches.si");
    let si_active = trainer.model.mtl && !data.si.is_empty();
    let mut si_queue: Vec<Vec<usize>> = Vec::new();

    let mut best = trainer.model.clone();
    let (mut best_epoch, mut best_f1) = (0, None::<f64>);
    let mut history = Vec::new();
    for epoch in 1..=schedule.max_epochs {
        let batches = make_batches(data.train.len(), schedule.batch_size, &mut order_cer, true)?;
        let mut batch_no = 0;
        let mut total = 0.0;
        for b in &batches {
            batch_no += 1;
            let convs: Vec<_> = b.iter().map(|&i| &data.train[i]).collect();
            let rec = trainer.batch(&convs, BatchKind::Labeled, epoch, batch_no)?;
            total += rec.loss_multi;
            write_line(&mut log, &rec)?;
            if si_active {
                for _ in 0..schedule.mix_ratio {
                    if si_queue.is_empty() {
                        si_queue = make_batches(data.si.len(), schedule.batch_size, &mut order_si, true)?;
                        si_queue.reverse();
                    }
                    let sb = si_queue.pop().expect("nonempty speaker corpus");
                    batch_no += 1;
                    let convs: Vec<_> = sb.iter().map(|&i| &data.si[i]).collect();
                    let rec = trainer.batch(&convs, BatchKind::SpeakerOnly, epoch, batch_no)?;
                    write_line(&mut log, &rec)?;
                }
            }
        }
        let train_loss = total / batches.len() as f64;
        let dev_f1 = if data.dev.iter().any(EncodedConversation::is_labeled) {
            Some(evaluate(&trainer.model, data.dev)?.weighted_f1)
        } else {
            None
        };
        history.push(EpochSummary {
            epoch,
            train_loss,
            dev_f1,
        });
        write_line(&mut log, history.last().unwrap())?;
        match (dev_f1, best_f1) {
            (Some(f), Some(b)) if f <= b => {
                if epoch - best_epoch >= schedule.early_stop_patience {
                    break;
                }
            }
            _ => {
                best = trainer.model.clone();
                best_epoch = epoch;
                best_f1 = dev_f1;
            }
        }
    }
    best.store.zero_grad();
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_dev_f1: best_f1,
        history,
    })
}
