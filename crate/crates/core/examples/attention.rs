//! Briefly trains the multi-task model, then prints the word attention of
//! each utterance and the cross-attention matrix of one conversation, with
//! weights above 0.1 and 0.2 marked.

use cer::data::{encode_corpus, random_embeddings, SyntheticCorpus, SyntheticSpec, Vocabulary};
use cer::model::{Model, ModelConfig};
use cer::tensor::Rng;
use cer::train::{train, TrainData, TrainSchedule};

fn mark(w: f64) -> &'static str {
    if w > 0.2 {
        "**"
    } else if w > 0.1 {
        "*"
    } else {
        ""
    }
}

fn main() -> cer::Result<()> {
    let spec = SyntheticSpec {
        unlabeled_conversations: 30,
        ..SyntheticSpec::toy(20)
    };
    let corpus = SyntheticCorpus::generate(&spec, 2);
    let vocab = Vocabulary::build(&[&corpus.train, &corpus.unlabeled], 1);
    let (convs, si) = (encode_corpus(&corpus.train, &vocab), encode_corpus(&corpus.unlabeled, &vocab));
    let emb = random_embeddings(&vocab, 12, &mut Rng::new(2));
    let config = ModelConfig {
        embed_dim: 12,
        word_hidden: 12,
        utt_hidden: 12,
        si_hidden: 12,
        ..ModelConfig::default()
    };
    let model = Model::<f64>::new(config, &emb, true, 2)?;
    let schedule = TrainSchedule { max_epochs: 15, lr_main: 5e-3, ..TrainSchedule::default() };
    let model = train(model, &schedule, TrainData { train: &convs, dev: &[], si: &si }, None)?.best;

    let conv = &corpus.train.conversations[0];
    let pred = model.predict(&convs[0])?;
    for (i, utt) in conv.utterances.iter().enumerate() {
        let words: Vec<String> = cer::data::tokenize(&utt.text)
            .into_iter()
            .zip(&pred.alpha[i])
            .map(|(w, &a)| format!("{w}{}", mark(a)))
            .collect();
        println!("{:>9}: {}", utt.speaker, words.join(" "));
    }
    println!("\ncross attention (rows attend over utterances):");
    for row in pred.beta.as_ref().expect("cross attention enabled") {
        let cells: Vec<String> = row.iter().map(|&b| format!("{b:.2}{:<2}", mark(b))).collect();
        println!("  {}", cells.join(" "));
    }
    Ok(())
}
