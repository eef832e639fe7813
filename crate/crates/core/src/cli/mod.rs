//! The `cer` command-line front end.
//!
//! Exit codes: 0 success, 1 failed gradient check or internal error,
//! 2 invalid configuration or input data, 3 training divergence.

mod config;

pub use config::{load_run_config, DataConfig, LabelsSpec, Paths, RunConfig};

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::data::{
    convert, encode_corpus, load_corpus, load_embeddings, random_embeddings, write_corpus, Corpus,
    EmbeddingTable, SourceFormat, SyntheticCorpus, SyntheticSpec, Vocabulary,
};
use crate::error::{Error, Result};
use crate::model::{load_checkpoint, save_checkpoint, Model};
use crate::tensor::{OpKind, Precision, Real, Rng};
use crate::train::{
    evaluate, gradcheck_suite, paired_t_test, predict_all, run_ablation, train, TrainData, GRADCHECK_COMPONENTS,
};

#[derive(Debug, Parser)]
#[command(name = "cer", version, about = "Conversational emotion recognition with speaker identification as an auxiliary task")]
pub struct Cli {
    /// Worker threads for evaluation and multi-seed runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoint, log and dev report to the output directory.
    Train(RunArgs),
    /// Score a labeled corpus with a checkpoint.
    Eval(EvalArgs),
    /// Write per-utterance predictions, optionally with attention weights.
    Predict(PredictArgs),
    /// Compare every backward rule with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Convert a native corpus to conversation JSONL.
    Convert(ConvertArgs),
    /// Train all four bridge configurations over several seeds.
    Ablate(AblateArgs),
    /// Generate the synthetic speaker-cue corpus and a matching config.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset defaults applied before the config file.
    #[arg(long, value_parser = ["emorynlp", "meld"])]
    pub preset: Option<String>,
    /// Overrides train.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides out_dir.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Dotted-key override, e.g. `--set model.dropout=0.3` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Conversation JSONL with emotion labels.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Print the report as JSON instead of TSV.
    #[arg(long, default_value_t = false)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory receiving predictions.jsonl.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Include word attention (alpha) and utterance cross attention (beta rows).
    #[arg(long, default_value_t = false)]
    pub dump_attention: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Corrupts one backward rule (testing aid).
    #[arg(long, hide = true)]
    pub corrupt: Option<String>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, value_parser = ["meld-csv", "emorynlp-json", "friends-transcript"])]
    pub format: String,
    #[arg(long)]
    pub input: PathBuf,
    /// Output conversation JSONL file.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated seeds.
    #[arg(long, default_value = "1,2,3,4,5", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Dataset name written to the report.
    #[arg(long, default_value = "dataset")]
    pub dataset: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "synthetic")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Labeled training conversations.
    #[arg(long, default_value_t = 160)]
    pub train: usize,
    /// Labeled dev conversations.
    #[arg(long, default_value_t = 40)]
    pub dev: usize,
    /// Unlabeled conversations for the speaker task.
    #[arg(long, default_value_t = 800)]
    pub unlabeled: usize,
    /// Distinct signature words per speaker.
    #[arg(long, default_value_t = SyntheticSpec::default().signature_words)]
    pub signature_words: usize,
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    run(cli)
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build_global();
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
        Command::Convert(a) => cmd_convert(&a),
        Command::Ablate(a) => cmd_ablate(&a, cli.jobs),
        Command::Synth(a) => cmd_synth(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } => 3,
        Error::Config(_)
        | Error::Parse { .. }
        | Error::UnknownLabel { .. }
        | Error::Checkpoint(_)
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Io(_) => 2,
        _ => 1,
    }
}

fn resolve_config(a: &RunArgs) -> Result<RunConfig> {
    let mut c = load_run_config(a.config.as_deref(), a.preset.as_deref(), &a.overrides)?;
    if let Some(s) = a.seed {
        c.train.seed = s;
    }
    if let Some(d) = &a.out_dir {
        c.out_dir = d.clone();
    }
    Ok(c)
}

struct Prepared {
    labels: crate::data::LabelSet,
    vocab: Vocabulary,
    embeddings: EmbeddingTable,
    train: Vec<crate::data::EncodedConversation>,
    dev: Vec<crate::data::EncodedConversation>,
    test: Vec<crate::data::EncodedConversation>,
    si: Vec<crate::data::EncodedConversation>,
}

fn load_optional(path: &Option<PathBuf>, labels: &crate::data::LabelSet) -> Result<Option<Corpus>> {
    path.as_ref().map(|p| load_corpus(p, labels)).transpose()
}

fn prepare(c: &RunConfig) -> Result<Prepared> {
    let labels = c.labels()?;
    let train = load_corpus(c.paths.train.as_ref().expect("validated"), &labels)?;
    let dev = load_optional(&c.paths.dev, &labels)?;
    let test = load_optional(&c.paths.test, &labels)?;
    let si = if c.mtl { load_optional(&c.paths.si, &labels)? } else { None };
    let mut sources = vec![&train];
    sources.extend(dev.iter());
    sources.extend(test.iter());
    sources.extend(si.iter());
    let vocab = Vocabulary::build(&sources, c.data.min_freq);
    let mut rng = Rng::new(c.train.seed).fork_named("embeddings");
    let embeddings = match c.paths.embeddings.as_deref() {
        Some("random") | None => random_embeddings(&vocab, c.model.embed_dim, &mut rng),
        Some(path) => {
            let (table, report) = load_embeddings(path, &vocab, c.model.embed_dim, &mut rng)?;
            eprintln!(
                "word vectors: {} found, {} missing (randomly initialised)",
                report.found, report.misses
            );
            table
        }
    };
    let enc = |c: Option<Corpus>| c.map(|c| encode_corpus(&c, &vocab)).unwrap_or_default();
    Ok(Prepared {
        train: encode_corpus(&train, &vocab),
        dev: enc(dev),
        test: enc(test),
        si: enc(si),
        labels,
        vocab,
        embeddings,
    })
}

#[derive(Serialize)]
struct TrainSummary {
    best_epoch: usize,
    best_dev_f1: Option<f64>,
    epochs_run: usize,
    dev: Option<crate::train::EvalReport>,
    test: Option<crate::train::EvalReport>,
}

fn train_typed<T: Real>(c: &RunConfig, p: &Prepared) -> Result<i32> {
    fs::create_dir_all(&c.out_dir)?;
    let model = Model::<T>::new(c.model.clone(), &p.embeddings, c.mtl, c.train.seed)?;
    let mut log = BufWriter::new(File::create(c.out_dir.join("train_log.jsonl"))?);
    let data = TrainData {
        train: &p.train,
        dev: &p.dev,
        si: &p.si,
    };
    let outcome = train(model, &c.train, data, Some(&mut log))?;
    log.flush()?;
    save_checkpoint(c.out_dir.join("model.ckpt"), &outcome.best, &p.labels, &p.vocab)?;
    let score = |convs: &[crate::data::EncodedConversation]| -> Result<Option<crate::train::EvalReport>> {
        if convs.iter().any(|c| c.is_labeled()) {
            Ok(Some(evaluate(&outcome.best, convs)?))
        } else {
            Ok(None)
        }
    };
    let summary = TrainSummary {
        best_epoch: outcome.best_epoch,
        best_dev_f1: outcome.best_dev_f1,
        epochs_run: outcome.history.len(),
        dev: score(&p.dev)?,
        test: score(&p.test)?,
    };
    fs::write(c.out_dir.join("report.json"), serde_json::to_string_pretty(&summary)?)?;
    if let Some(dev) = &summary.dev {
        print!("{}", dev.to_tsv(&p.labels));
    }
    println!(
        "best epoch {} of {}; checkpoint {}",
        summary.best_epoch,
        summary.epochs_run,
        c.out_dir.join("model.ckpt").display()
    );
    Ok(0)
}

fn cmd_train(a: &RunArgs) -> Result<i32> {
    let c = resolve_config(a)?;
    c.validate(false)?;
    let p = prepare(&c)?;
    match c.model.precision {
        Precision::Double => train_typed::<f64>(&c, &p),
        Precision::Single => train_typed::<f32>(&c, &p),
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let ckpt = load_checkpoint::<f64>(&a.checkpoint)?;
    let corpus = load_corpus(&a.corpus, &ckpt.labels)?;
    let convs = encode_corpus(&corpus, &ckpt.vocab);
    let report = evaluate(&ckpt.model, &convs).map_err(|e| match e {
        Error::Argument(m) => Error::Config(format!("{}: {m}", a.corpus.display())),
        e => e,
    })?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_tsv(&ckpt.labels));
    }
    Ok(0)
}

#[derive(Serialize)]
struct PredictionRecord<'a> {
    conv_id: &'a str,
    utt_index: usize,
    label: &'a str,
    dist: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_row: Option<&'a [f64]>,
}

fn cmd_predict(a: &PredictArgs) -> Result<i32> {
    let ckpt = load_checkpoint::<f64>(&a.checkpoint)?;
    let corpus = load_corpus(&a.corpus, &ckpt.labels)?;
    let convs = encode_corpus(&corpus, &ckpt.vocab);
    let preds = predict_all(&ckpt.model, &convs)?;
    fs::create_dir_all(&a.out_dir)?;
    let path = a.out_dir.join("predictions.jsonl");
    let mut w = BufWriter::new(File::create(&path)?);
    for (conv, pred) in convs.iter().zip(&preds) {
        for (i, label) in pred.labels().into_iter().enumerate() {
            let rec = PredictionRecord {
                conv_id: &conv.id,
                utt_index: i,
                label: ckpt.labels.name(label),
                dist: &pred.probs[i],
                alpha: a.dump_attention.then(|| pred.alpha[i].as_slice()),
                beta_row: if a.dump_attention {
                    pred.beta.as_ref().map(|b| b[i].as_slice())
                } else {
                    None
                },
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<i32> {
    let fault = match &a.corrupt {
        None => None,
        Some(name) => Some(OpKind::parse(name).ok_or_else(|| Error::Config(format!("--corrupt: unknown op `{name}`")))?),
    };
    let results = gradcheck_suite(fault)?;
    debug_assert_eq!(results.len(), GRADCHECK_COMPONENTS.len());
    println!("component\tmax_rel_error\tentries\tstatus");
    let mut ok = true;
    for r in &results {
        ok &= r.passed();
        println!(
            "{}\t{:.3e}\t{}\t{}",
            r.name,
            r.max_rel_error,
            r.checked,
            if r.passed() { "ok" } else { "FAIL" }
        );
    }
    Ok(if ok { 0 } else { 1 })
}

fn cmd_convert(a: &ConvertArgs) -> Result<i32> {
    let format = SourceFormat::parse(&a.format).expect("clap restricts values");
    let file = File::open(&a.input).map_err(|e| Error::Parse {
        path: a.input.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let corpus = convert(format, BufReader::new(file), &a.input.display().to_string())?;
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(&a.output)?);
    write_corpus(&mut w, &corpus)?;
    w.flush()?;
    println!(
        "{} conversations, {} utterances -> {}",
        corpus.len(),
        corpus.num_utterances(),
        a.output.display()
    );
    Ok(0)
}

fn ablate_typed<T: Real>(a: &AblateArgs, c: &RunConfig, p: &Prepared, jobs: usize) -> Result<i32> {
    let data = TrainData {
        train: &p.train,
        dev: &p.dev,
        si: &p.si,
    };
    let report = run_ablation::<T>(&c.model, &c.train, data, &p.embeddings, &a.seeds, jobs, &a.dataset)?;
    fs::create_dir_all(&c.out_dir)?;
    fs::write(c.out_dir.join("ablation.tsv"), report.to_tsv())?;
    fs::write(c.out_dir.join("ablation.json"), serde_json::to_string_pretty(&report)?)?;
    print!("{}", report.to_tsv());
    if a.seeds.len() >= 2 {
        let full = &report.row(true, true).expect("four rows").scores;
        let none = &report.row(false, false).expect("four rows").scores;
        let t = paired_t_test(full, none)?;
        println!(
            "paired t-test (on,on) vs (off,off) over {} seeds: mean diff {:.6}, p = {:.6}{}",
            a.seeds.len(),
            t.mean_diff,
            t.p_value,
            if t.degenerate { " (zero variance)" } else { "" }
        );
    }
    Ok(0)
}

fn cmd_ablate(a: &AblateArgs, jobs: usize) -> Result<i32> {
    let mut c = resolve_config(&a.run)?;
    c.mtl = true;
    c.validate(true)?;
    if a.seeds.is_empty() {
        return Err(Error::Config("--seeds: at least one seed is required".into()));
    }
    let p = prepare(&c)?;
    match c.model.precision {
        Precision::Double => ablate_typed::<f64>(a, &c, &p, jobs),
        Precision::Single => ablate_typed::<f32>(a, &c, &p, jobs),
    }
}

/// Small dimensions that train in seconds on the synthetic corpus.
pub fn synthetic_run_config(out_dir: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.model.embed_dim = 16;
    c.model.word_hidden = 16;
    c.model.utt_hidden = 16;
    c.model.si_hidden = 16;
    c.model.dropout = 0.1;
    c.train.lr_main = 3e-3;
    c.train.max_epochs = 30;
    c.train.early_stop_patience = 8;
    c.paths = Paths {
        train: Some("train.jsonl".into()),
        dev: Some("dev.jsonl".into()),
        test: None,
        si: Some("si.jsonl".into()),
        embeddings: Some("random".into()),
    };
    c.out_dir = out_dir.join("run");
    c
}

fn cmd_synth(a: &SynthArgs) -> Result<i32> {
    let spec = SyntheticSpec {
        train_conversations: a.train,
        dev_conversations: a.dev,
        unlabeled_conversations: a.unlabeled,
        signature_words: a.signature_words,
        ..SyntheticSpec::default()
    };
    let corpus = SyntheticCorpus::generate(&spec, a.seed);
    fs::create_dir_all(&a.out_dir)?;
    for (name, c) in [("train", &corpus.train), ("dev", &corpus.dev), ("si", &corpus.unlabeled)] {
        let mut w = BufWriter::new(File::create(a.out_dir.join(format!("{name}.jsonl")))?);
        write_corpus(&mut w, c)?;
        w.flush()?;
    }
    let mut config = synthetic_run_config(Path::new("."));
    config.out_dir = PathBuf::from("run");
    fs::write(a.out_dir.join("config.json"), serde_json::to_string_pretty(&config)?)?;
    println!("wrote {}/{{train,dev,si}}.jsonl and config.json", a.out_dir.display());
    Ok(0)
}
