use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::vocab::{Vocabulary, UNK_TOKEN};
use crate::error::{Error, Result};

/// The emotion inventory of a corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_lowercase()).collect();
        if names.is_empty() {
            return Err(Error::Argument("label set is empty".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || names[..i].contains(n) {
                return Err(Error::Argument(format!("invalid or duplicate label `{n}`")));
            }
        }
        Ok(Self { names })
    }

    /// MELD: anger, disgust, fear, joy, neutral, sadness, surprise.
    pub fn meld() -> Self {
        Self::new(&["neutral", "joy", "surprise", "anger", "sadness", "disgust", "fear"])
            .expect("static labels")
    }

    /// EmoryNLP: neutral, joyful, peaceful, powerful, scared, mad, sad.
    pub fn emorynlp() -> Self {
        Self::new(&["neutral", "joyful", "peaceful", "powerful", "scared", "mad", "sad"])
            .expect("static labels")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "meld" => Some(Self::meld()),
            "emorynlp" => Some(Self::emorynlp()),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        let l = label.trim().to_lowercase();
        self.names.iter().position(|n| *n == l)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub speaker: String,
    pub text: String,
    /// Never empty: a text without tokens is represented by a single
    /// unknown-word token so utterance indices stay aligned with labels.
    pub tokens: Vec<String>,
    pub emotion: Option<usize>,
}

impl Utterance {
    pub fn new(speaker: impl Into<String>, text: impl Into<String>, emotion: Option<usize>) -> Self {
        let text = text.into();
        let mut tokens = tokenize(&text);
        if tokens.is_empty() {
            tokens.push(UNK_TOKEN.to_string());
        }
        Self {
            speaker: speaker.into(),
            text,
            tokens,
            emotion,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conversation {
    pub id: String,
    pub utterances: Vec<Utterance>,
}

impl Conversation {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.utterances.iter().any(|u| u.emotion.is_some())
    }

    /// Number of distinct speakers.
    pub fn num_speakers(&self) -> usize {
        let mut s: Vec<&str> = self.utterances.iter().map(|u| u.speaker.as_str()).collect();
        s.sort_unstable();
        s.dedup();
        s.len()
    }
}

/// Conversations together with the label inventory they were read with.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub labels: LabelSet,
    pub conversations: Vec<Conversation>,
}

impl Corpus {
    pub fn new(labels: LabelSet) -> Self {
        Self {
            labels,
            conversations: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.conversations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }

    pub fn num_utterances(&self) -> usize {
        self.conversations.iter().map(Conversation::len).sum()
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConversation {
    id: String,
    utterances: Vec<RawUtterance>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawUtterance {
    speaker: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emotion: Option<String>,
}

pub fn load_corpus(path: impl AsRef<Path>, labels: &LabelSet) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    read_corpus(BufReader::new(file), labels, &path.display().to_string())
}

/// Parses conversation JSONL, preserving order. `source` names the input
/// in error messages.
pub fn read_corpus<R: BufRead>(reader: R, labels: &LabelSet, source: &str) -> Result<Corpus> {
    let mut corpus = Corpus::new(labels.clone());
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| Error::Parse {
            path: source.to_string(),
            line: lineno,
            message,
        };
        let raw: RawConversation = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
        if raw.utterances.is_empty() {
            return Err(fail(format!("conversation `{}` has no utterances", raw.id)));
        }
        let mut utterances = Vec::with_capacity(raw.utterances.len());
        for (k, u) in raw.utterances.into_iter().enumerate() {
            if u.speaker.trim().is_empty() {
                return Err(fail(format!("utterance {k} has an empty speaker")));
            }
            let emotion = match u.emotion {
                None => None,
                Some(label) => Some(labels.index(&label).ok_or_else(|| Error::UnknownLabel {
                    path: source.to_string(),
                    line: lineno,
                    label: label.clone(),
                })?),
            };
            utterances.push(Utterance::new(u.speaker, u.text, emotion));
        }
        corpus.conversations.push(Conversation {
            id: raw.id,
            utterances,
        });
    }
    Ok(corpus)
}

pub fn write_corpus<W: Write>(mut w: W, corpus: &Corpus) -> Result<()> {
    for conv in &corpus.conversations {
        let raw = RawConversation {
            id: conv.id.clone(),
            utterances: conv
                .utterances
                .iter()
                .map(|u| RawUtterance {
                    speaker: u.speaker.clone(),
                    text: u.text.clone(),
                    emotion: u.emotion.map(|e| corpus.labels.name(e).to_string()),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &raw)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// A conversation mapped to vocabulary indices.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedConversation {
    pub id: String,
    pub tokens: Vec<Vec<usize>>,
    pub speakers: Vec<String>,
    pub emotions: Vec<Option<usize>>,
}

impl EncodedConversation {
    pub fn encode(conv: &Conversation, vocab: &Vocabulary) -> Self {
        Self {
            id: conv.id.clone(),
            tokens: conv
                .utterances
                .iter()
                .map(|u| u.tokens.iter().map(|t| vocab.index(t)).collect())
                .collect(),
            speakers: conv.utterances.iter().map(|u| u.speaker.clone()).collect(),
            emotions: conv.utterances.iter().map(|u| u.emotion).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.emotions.iter().any(Option::is_some)
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.iter().map(Vec::len).sum()
    }
}

pub fn encode_corpus(corpus: &Corpus, vocab: &Vocabulary) -> Vec<EncodedConversation> {
    corpus
        .conversations
        .iter()
        .map(|c| EncodedConversation::encode(c, vocab))
        .collect()
}
