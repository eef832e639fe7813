//! Overfits the emotion model on a five-conversation toy corpus.

use cer::data::{encode_corpus, random_embeddings, SyntheticCorpus, SyntheticSpec, Vocabulary};
use cer::model::{Model, ModelConfig};
use cer::tensor::Rng;
use cer::train::{evaluate, train, TrainData, TrainSchedule};

fn main() -> cer::Result<()> {
    let corpus = SyntheticCorpus::generate(&SyntheticSpec::toy(5), 5);
    let vocab = Vocabulary::build(&[&corpus.train], 1);
    let convs = encode_corpus(&corpus.train, &vocab);
    let emb = random_embeddings(&vocab, 16, &mut Rng::new(1));
    let config = ModelConfig {
        embed_dim: 16,
        word_hidden: 16,
        utt_hidden: 16,
        si_hidden: 16,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let model = Model::<f64>::new(config, &emb, false, 1)?;
    let schedule = TrainSchedule {
        max_epochs: 200,
        lr_main: 1e-2,
        early_stop_patience: 200,
        seed: 1,
        ..TrainSchedule::default()
    };
    let out = train(model, &schedule, TrainData { train: &convs, dev: &[], si: &[] }, None)?;
    for e in out.history.iter().filter(|e| e.epoch == 1 || e.epoch % 40 == 0) {
        println!("epoch {:3}  loss {:.4e}", e.epoch, e.train_loss);
    }
    let report = evaluate(&out.best, &convs)?;
    println!("training accuracy {:.3}, weighted F1 {:.3}", report.accuracy, report.weighted_f1);
    Ok(())
}
