use super::corpus::{Conversation, Corpus, LabelSet, Utterance};
use crate::tensor::Rng;

/// Parameters of the speaker-cue corpus generator.
///
/// Every speaker has a few signature words. Every utterance carries one
/// emotion marker word (`mk<label>`, lower-cased). The gold emotion of an utterance is
/// the marker of the *previous utterance by the same speaker*, or `neutral`
/// for a speaker's first turn. Each turn is taken either by a speaker who has
/// not spoken yet (with probability `new_speaker_rate`, while any are left)
/// or by one of the two most recent speakers, so the relevant earlier turn is
/// always one or two steps back. Solving the task therefore comes down to
/// deciding whether nearby turns share a speaker, which is what the speaker
/// task learns.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub train_conversations: usize,
    pub dev_conversations: usize,
    /// Conversations without emotion labels, for the speaker task.
    pub unlabeled_conversations: usize,
    pub min_utterances: usize,
    pub max_utterances: usize,
    pub speakers: usize,
    pub speakers_per_conversation: (usize, usize),
    pub signature_words: usize,
    pub filler_vocabulary: usize,
    pub filler_words: (usize, usize),
    /// Probability that an utterance contains its speaker's signature word.
    pub signature_rate: f64,
    pub new_speaker_rate: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            train_conversations: 160,
            dev_conversations: 40,
            unlabeled_conversations: 800,
            min_utterances: 8,
            max_utterances: 12,
            speakers: 6,
            speakers_per_conversation: (2, 4),
            signature_words: 3,
            filler_vocabulary: 40,
            filler_words: (2, 4),
            signature_rate: 1.0,
            new_speaker_rate: 0.3,
        }
    }
}

impl SyntheticSpec {
    /// A handful of short conversations, for overfitting checks.
    pub fn toy(conversations: usize) -> Self {
        Self {
            train_conversations: conversations,
            dev_conversations: 0,
            unlabeled_conversations: 0,
            min_utterances: 4,
            max_utterances: 6,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub train: Corpus,
    pub dev: Corpus,
    pub unlabeled: Corpus,
}

impl SyntheticCorpus {
    pub fn generate(spec: &SyntheticSpec, seed: u64) -> Self {
        let labels = LabelSet::emorynlp();
        let root = Rng::new(seed);
        let make = |name: &str, n: usize, labeled: bool| {
            let mut rng = root.fork_named(name);
            let mut corpus = Corpus::new(labels.clone());
            for k in 0..n {
                corpus
                    .conversations
                    .push(conversation(spec, &labels, &mut rng, format!("{name}{k}"), labeled));
            }
            corpus
        };
        Self {
            train: make("train", spec.train_conversations, true),
            dev: make("dev", spec.dev_conversations, true),
            unlabeled: make("si", spec.unlabeled_conversations, false),
        }
    }
}

fn range(rng: &mut Rng, (lo, hi): (usize, usize)) -> usize {
    lo + rng.below((hi - lo + 1) as u64) as usize
}

fn conversation(spec: &SyntheticSpec, labels: &LabelSet, rng: &mut Rng, id: String, labeled: bool) -> Conversation {
    let n = range(rng, (spec.min_utterances, spec.max_utterances));
    let mut cast: Vec<usize> = (0..spec.speakers).collect();
    rng.shuffle(&mut cast);
    let (lo, hi) = spec.speakers_per_conversation;
    cast.truncate(range(rng, (lo.min(spec.speakers), hi.min(spec.speakers))).max(1));

    let mut last_marker: Vec<Option<usize>> = vec![None; spec.speakers];
    let mut utterances = Vec::with_capacity(n);
    let mut fresh = cast.iter().copied();
    let mut turns: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        let recent: Vec<usize> = match turns.as_slice() {
            [] => vec![],
            [.., a] if i == 1 => vec![*a],
            [.., b, a] if a == b => vec![*a],
            [.., b, a] => vec![*b, *a],
            _ => unreachable!(),
        };
        let s = if recent.is_empty() || rng.uniform() < spec.new_speaker_rate {
            fresh.next()
        } else {
            None
        }
        .unwrap_or_else(|| recent[rng.below(recent.len() as u64) as usize]);
        turns.push(s);
        let marker = rng.below(labels.len() as u64) as usize;
        let mut words: Vec<String> = (0..range(rng, spec.filler_words))
            .map(|_| format!("w{}", rng.below(spec.filler_vocabulary as u64)))
            .collect();
        if rng.uniform() < spec.signature_rate {
            let sig = rng.below(spec.signature_words as u64);
            words.push(format!("sig{s}k{sig}"));
        }
        words.push(format!("mk{}", labels.name(marker).to_lowercase()));
        rng.shuffle(&mut words);
        let emotion = last_marker[s].unwrap_or(0);
        last_marker[s] = Some(marker);
        utterances.push(Utterance::new(
            format!("speaker{s}"),
            words.join(" "),
            labeled.then_some(emotion),
        ));
    }
    Conversation { id, utterances }
}
