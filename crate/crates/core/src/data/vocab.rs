use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::corpus::Corpus;

pub const UNK: usize = 0;
pub const PAD: usize = 1;
pub(crate) const UNK_TOKEN: &str = "<unk>";
pub(crate) const PAD_TOKEN: &str = "<pad>";

/// Token to index map with `<unk>` at 0 and `<pad>` at 1.
///
/// Regular entries are ordered by descending corpus frequency, ties broken
/// lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_freq: usize,
}

impl Vocabulary {
    pub fn build(corpora: &[&Corpus], min_freq: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for corpus in corpora {
            for conv in &corpus.conversations {
                for u in &conv.utterances {
                    for t in &u.tokens {
                        if t != UNK_TOKEN && t != PAD_TOKEN {
                            *counts.entry(t.as_str()).or_default() += 1;
                        }
                    }
                }
            }
        }
        let mut entries: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_freq.max(1))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens = [UNK_TOKEN, PAD_TOKEN]
            .into_iter()
            .chain(entries.into_iter().map(|(t, _)| t))
            .map(str::to_string)
            .collect();
        Self::from_tokens(tokens, min_freq)
    }

    /// Rebuilds a vocabulary from its token list (index order), e.g. when
    /// loading a checkpoint.
    pub fn from_tokens(tokens: Vec<String>, min_freq: usize) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            tokens,
            index,
            min_freq,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, or [`UNK`].
    pub fn index(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    /// SHA-256 over the newline-joined token list, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
