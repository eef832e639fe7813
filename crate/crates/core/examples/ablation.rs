//! Trains the four bridge configurations over three seeds on a small
//! synthetic corpus and compares the full model with the bridge-free one.

use cer::data::{encode_corpus, random_embeddings, SyntheticCorpus, SyntheticSpec, Vocabulary};
use cer::model::ModelConfig;
use cer::tensor::Rng;
use cer::train::{paired_t_test, run_ablation, TrainData, TrainSchedule};

fn main() -> cer::Result<()> {
    let spec = SyntheticSpec {
        train_conversations: 40,
        dev_conversations: 20,
        unlabeled_conversations: 120,
        ..SyntheticSpec::default()
    };
    let corpus = SyntheticCorpus::generate(&spec, 0);
    let vocab = Vocabulary::build(&[&corpus.train, &corpus.dev, &corpus.unlabeled], 1);
    let (train, dev, si) = (
        encode_corpus(&corpus.train, &vocab),
        encode_corpus(&corpus.dev, &vocab),
        encode_corpus(&corpus.unlabeled, &vocab),
    );
    let emb = random_embeddings(&vocab, 12, &mut Rng::new(0));
    let config = ModelConfig {
        embed_dim: 12,
        word_hidden: 12,
        utt_hidden: 12,
        si_hidden: 12,
        dropout: 0.1,
        ..ModelConfig::default()
    };
    let schedule = TrainSchedule {
        max_epochs: 10,
        lr_main: 3e-3,
        ..TrainSchedule::default()
    };
    let seeds = [1, 2, 3];
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let data = TrainData { train: &train, dev: &dev, si: &si };
    let report = run_ablation::<f64>(&config, &schedule, data, &emb, &seeds, jobs, "synthetic")?;
    print!("{}", report.to_tsv());
    let full = &report.row(true, true).unwrap().scores;
    let none = &report.row(false, false).unwrap().scores;
    let t = paired_t_test(full, none)?;
    println!("paired t-test, full vs bridge-free: mean diff {:+.4}, p = {:.4}", t.mean_diff, t.p_value);
    Ok(())
}
