//! One test per acceptance criterion. Each prints a single `criterion N:
//! PASS|FAIL` line to stderr (outside the harness capture) before asserting.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cer::cli::synthetic_run_config;
use cer::data::{
    encode_corpus, load_corpus, load_embeddings, random_embeddings, EmbeddingTable, EncodedConversation, LabelSet,
    SyntheticCorpus, SyntheticSpec, Vocabulary,
};
use cer::model::{loss_cer, loss_multi, loss_si, Model, ModelConfig, Pass, PairSample};
use cer::tensor::{Rng, Tape};
use cer::train::*;

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n}: {verdict} {detail}");
}

struct Encoded {
    train: Vec<EncodedConversation>,
    dev: Vec<EncodedConversation>,
    si: Vec<EncodedConversation>,
    vocab: Vocabulary,
}

fn encode(corpus: &SyntheticCorpus) -> Encoded {
    let vocab = Vocabulary::build(&[&corpus.train, &corpus.dev, &corpus.unlabeled], 1);
    Encoded {
        train: encode_corpus(&corpus.train, &vocab),
        dev: encode_corpus(&corpus.dev, &vocab),
        si: encode_corpus(&corpus.unlabeled, &vocab),
        vocab,
    }
}

fn small_config(iue: bool, cue: bool) -> ModelConfig {
    ModelConfig {
        embed_dim: 16,
        word_hidden: 16,
        utt_hidden: 16,
        si_hidden: 16,
        dropout: 0.0,
        enable_iue_bridge: iue,
        enable_cue_bridge: cue,
        ..ModelConfig::default()
    }
}

#[test]
fn criterion_1_gradient_soundness() {
    let start = Instant::now();
    let results = gradcheck_suite(None).unwrap();
    let elapsed = start.elapsed();
    let worst = results.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let all = results.iter().all(|r| r.passed() && r.max_rel_error < 1e-4);
    let complete = results.len() == GRADCHECK_COMPONENTS.len();
    let pass = all && complete && elapsed < Duration::from_secs(60);
    report(
        1,
        pass,
        &format!("{} components, worst relative error {worst:.2e}, {:.1}s", results.len(), elapsed.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_2_bridge_off_equivalence() {
    let start = Instant::now();
    let corpus = SyntheticCorpus::generate(&SyntheticSpec { unlabeled_conversations: 20, ..SyntheticSpec::toy(20) }, 7);
    let enc = encode(&corpus);
    let emb = random_embeddings(&enc.vocab, 16, &mut Rng::new(7));
    let cfg = small_config(false, false);

    // Shared parameters: a trained baseline copied into the multi-task model.
    let schedule = TrainSchedule { max_epochs: 3, lr_main: 3e-3, ..TrainSchedule::default() };
    let data = TrainData { train: &enc.train, dev: &[], si: &[] };
    let base = train(Model::<f64>::new(cfg.clone(), &emb, false, 3).unwrap(), &schedule, data, None).unwrap().best;
    let mut mtl = Model::<f64>::new(cfg, &emb, true, 99).unwrap();
    let mut copied = 0;
    for (_, name, t) in base.store.iter() {
        let id = mtl.store.id(name).expect("baseline parameter exists in the multi-task model");
        *mtl.store.get_mut(id) = t.clone();
        copied += 1;
    }
    let mut identical = true;
    for conv in enc.train.iter().chain(&enc.dev) {
        identical &= base.predict(conv).unwrap() == mtl.predict(conv).unwrap();
    }
    let elapsed = start.elapsed();
    let pass = identical && elapsed < Duration::from_secs(5);
    report(
        2,
        pass,
        &format!("{copied} shared tensors, bit-identical predictions: {identical}, {:.2}s", elapsed.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_3_mtl_benefit_on_synthetic_corpus() {
    let start = Instant::now();
    let config = synthetic_run_config(Path::new("."));
    let corpus = SyntheticCorpus::generate(&SyntheticSpec::default(), 0);
    let enc = encode(&corpus);
    let emb = random_embeddings(&enc.vocab, config.model.embed_dim, &mut Rng::new(0).fork_named("embeddings"));
    let data = TrainData { train: &enc.train, dev: &enc.dev, si: &enc.si };
    let seeds = [1, 2, 3, 4, 5];
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());

    let baseline = train_seeds::<f64>(&config.model, false, &config.train, data, &emb, &seeds, jobs).unwrap();
    let ablation = run_ablation::<f64>(&config.model, &config.train, data, &emb, &seeds, jobs, "synthetic").unwrap();
    let full = ablation.row(true, true).unwrap();
    let none = ablation.row(false, false).unwrap();
    let base_median = median(&baseline);
    let elapsed = start.elapsed();

    let _ = writeln!(std::io::stderr(), "  baseline   {baseline:.4?} median {base_median:.4}");
    for r in &ablation.rows {
        let _ = writeln!(std::io::stderr(), "  iue={:<5} cue={:<5} {:.4?} median {:.4}", r.iue, r.cue, r.scores, r.median);
    }
    let pass = full.median >= base_median && full.median >= none.median && elapsed < Duration::from_secs(30 * 60);
    report(
        3,
        pass,
        &format!(
            "full median {:.4} vs baseline {base_median:.4} and (off,off) {:.4}, {:.0}s",
            full.median,
            none.median,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_overfit_toy_corpus() {
    let start = Instant::now();
    let corpus = SyntheticCorpus::generate(&SyntheticSpec::toy(5), 5);
    let enc = encode(&corpus);
    assert_eq!(enc.train.len(), 5);
    let emb = random_embeddings(&enc.vocab, 16, &mut Rng::new(1));
    let model = Model::<f64>::new(small_config(true, true), &emb, false, 1).unwrap();
    let schedule = TrainSchedule {
        max_epochs: 200,
        lr_main: 1e-2,
        early_stop_patience: 200,
        seed: 1,
        ..TrainSchedule::default()
    };
    let out = train(model, &schedule, TrainData { train: &enc.train, dev: &[], si: &[] }, None).unwrap();
    let accuracy = evaluate(&out.best, &enc.train).unwrap().accuracy;
    let loss = out.history.last().unwrap().train_loss;
    let elapsed = start.elapsed();
    let pass = accuracy >= 0.99 && loss < 0.05 && elapsed < Duration::from_secs(120);
    report(
        4,
        pass,
        &format!("training accuracy {accuracy:.4}, final loss {loss:.2e} after {} epochs, {:.1}s", out.history.len(), elapsed.as_secs_f64()),
    );
    assert!(pass);
}

/// Per-class brute force, independent of the confusion matrix.
fn f1_oracle(golds: &[usize], preds: &[usize], k: usize) -> f64 {
    (0..k)
        .map(|c| {
            let tp = golds.iter().zip(preds).filter(|&(&g, &p)| g == c && p == c).count() as f64;
            let predicted = preds.iter().filter(|&&p| p == c).count() as f64;
            let support = golds.iter().filter(|&&g| g == c).count() as f64;
            if tp == 0.0 {
                0.0
            } else {
                let (p, r) = (tp / predicted, tp / support);
                support * 2.0 * p * r / (p + r)
            }
        })
        .sum::<f64>()
        / golds.len() as f64
}

#[test]
fn criterion_5_metric_oracle() {
    let mut rng = Rng::new(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = 2 + rng.below(7) as usize;
        let n = 1 + rng.below(50) as usize;
        let golds: Vec<usize> = (0..n).map(|_| rng.below(k as u64) as usize).collect();
        let preds: Vec<usize> = golds
            .iter()
            .map(|&g| if rng.uniform() < 0.4 { g } else { rng.below(k as u64) as usize })
            .collect();
        worst = worst.max((weighted_macro_f1(&golds, &preds, k).unwrap() - f1_oracle(&golds, &preds, k)).abs());
    }
    let hand = weighted_macro_f1(&[0, 0, 1, 1], &[0, 0, 0, 0], 2).unwrap();
    let pass = worst < 1e-12 && hand == 1.0 / 3.0;
    report(5, pass, &format!("max deviation {worst:.1e} over 1000 cases, hand case {hand:?}"));
    assert!(pass);
}

#[test]
fn criterion_6_loss_arithmetic() {
    let corpus = SyntheticCorpus::generate(&SyntheticSpec::toy(4), 3);
    let enc = encode(&corpus);
    let emb = random_embeddings(&enc.vocab, 16, &mut Rng::new(3));
    let mut exact = true;
    let mut uniform_err: f64 = 0.0;
    for (iue, cue) in [(false, false), (false, true), (true, false), (true, true)] {
        for zero_out in [false, true] {
            let mut m = Model::<f64>::new(small_config(iue, cue), &emb, true, 5).unwrap();
            if zero_out {
                m.store.get_mut(m.params.cer_out).data_mut().fill(0.0);
                let w = m.params.si_head.as_ref().unwrap().w_out;
                m.store.get_mut(w).data_mut().fill(0.0);
            }
            for conv in &enc.train {
                let pairs: Vec<PairSample> = (0..conv.len())
                    .flat_map(|i| (i + 1..conv.len()).map(move |j| (i, j)))
                    .map(|(i, j)| PairSample { i, j, same: conv.speakers[i] == conv.speakers[j] })
                    .collect();
                let mut tape = Tape::new();
                let mut pass = Pass::new(&m, &mut tape, conv, None).unwrap();
                let cer = pass.cer().unwrap();
                let si = pass.si(&pairs).unwrap();
                let lc = loss_cer(&mut tape, cer.logits, &conv.emotions).unwrap();
                let ls = loss_si(&mut tape, si.as_ref(), &pairs).unwrap();
                let total = loss_multi(&mut tape, lc, ls).unwrap();
                let (c, s) = (tape.scalar(lc.value), tape.scalar(ls.value));
                exact &= tape.scalar(total.value).to_bits() == (c + s).to_bits();
                if zero_out {
                    uniform_err = uniform_err.max((c - 7f64.ln()).abs()).max((s - 2f64.ln()).abs());
                }
            }
        }
    }
    let pass = exact && uniform_err < 1e-12;
    report(6, pass, &format!("sum exact to the bit: {exact}, uniform-loss deviation {uniform_err:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_7_deterministic_training_logs() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic/config.json");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_cer"))
            .args(["train", "--seed", "17", "--config"])
            .arg(&config)
            .arg("--out-dir")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("train_log.jsonl")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    let pass = !a.is_empty() && a == b;
    report(7, pass, &format!("two runs, {} log bytes each, byte-identical: {}", a.len(), a == b));
    assert!(pass);
}

#[test]
fn criterion_8_published_scale_scores_are_documented_as_out_of_reach() {
    let readme = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let section = readme.split("## Reproducibility scope").nth(1).unwrap_or("");
    let pass = ["35.92", "61.90", "not reproducible", "59.67"].iter().all(|s| section.contains(s));
    report(8, pass, "README states which published scores are out of reach at desk scale");
    assert!(pass);
}

/// Optional extended run on user-supplied MELD data and 300-d word vectors:
/// `CER_MELD_DIR` holds converted train/dev/test JSONL, `CER_VECTORS` the
/// vector file. Run with `cargo test --release --test acceptance -- --ignored`.
#[test]
#[ignore = "needs MELD and pretrained word vectors"]
fn criterion_8_extended_meld_baseline() {
    let (Ok(dir), Ok(vectors)) = (std::env::var("CER_MELD_DIR"), std::env::var("CER_VECTORS")) else {
        report(8, false, "extended run skipped: set CER_MELD_DIR and CER_VECTORS");
        return;
    };
    let labels = LabelSet::meld();
    let load = |name: &str| load_corpus(Path::new(&dir).join(format!("{name}.jsonl")), &labels).unwrap();
    let (tr, dv, te) = (load("train"), load("dev"), load("test"));
    let vocab = Vocabulary::build(&[&tr, &dv, &te], 1);
    let config = ModelConfig::meld();
    let (emb, _): (EmbeddingTable, _) =
        load_embeddings(&vectors, &vocab, config.embed_dim, &mut Rng::new(1).fork_named("embeddings")).unwrap();
    let (tr, dv, te) = (encode_corpus(&tr, &vocab), encode_corpus(&dv, &vocab), encode_corpus(&te, &vocab));
    let model = Model::<f64>::new(config, &emb, false, 1).unwrap();
    let out = train(model, &TrainSchedule { seed: 1, ..TrainSchedule::default() }, TrainData { train: &tr, dev: &dv, si: &[] }, None).unwrap();
    let f1 = 100.0 * evaluate(&out.best, &te).unwrap().weighted_f1;
    let pass = (f1 - 59.67).abs() <= 2.0;
    report(8, pass, &format!("extended MELD baseline test F1 {f1:.2} (target 59.67 +/- 2.0)"));
    assert!(pass);
}
