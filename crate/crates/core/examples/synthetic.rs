//! Generates the synthetic speaker-cue corpus and shows how each emotion
//! follows the marker in the same speaker's previous utterance.

use cer::data::{SyntheticCorpus, SyntheticSpec};

fn main() {
    let spec = SyntheticSpec::default();
    let corpus = SyntheticCorpus::generate(&spec, 0);
    println!(
        "train {} / dev {} / unlabeled {} conversations, {} labeled utterances",
        corpus.train.len(),
        corpus.dev.len(),
        corpus.unlabeled.len(),
        corpus.train.num_utterances()
    );
    let labels = &corpus.train.labels;
    for utt in corpus.train.conversations[0].utterances.iter().take(6) {
        let emotion = utt.emotion.map_or("-", |e| labels.name(e));
        println!("{:>9} [{emotion:>8}] {}", utt.speaker, utt.text);
    }
}
