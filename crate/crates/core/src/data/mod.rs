//! Corpora, vocabularies and word vectors.
//!
//! # Conversation JSONL
//!
//! UTF-8, one JSON object per line:
//!
//! ```text
//! {"id": "d12", "utterances": [
//!     {"speaker": "Monica", "text": "There's nothing to tell!", "emotion": "neutral"},
//!     {"speaker": "Joey", "text": "C'mon, you're going out with the guy!"}
//! ]}
//! ```
//!
//! `emotion` is optional; conversations without it contribute only to the
//! speaker task. Labels must belong to the configured [`LabelSet`]
//! (compared case-insensitively). Blank lines are skipped.
//!
//! # Word vectors
//!
//! Plain text, one `token v1 v2 ... vD` line per word, separated by single
//! spaces or tabs. An optional first line `count dim` (two integers) is
//! ignored.

mod batch;
mod convert;
mod corpus;
mod embeddings;
mod synthetic;
mod tokenize;
mod vocab;

pub use batch::make_batches;
pub use convert::{convert, SourceFormat};
pub use corpus::{
    encode_corpus, load_corpus, read_corpus, write_corpus, Conversation, Corpus, EncodedConversation,
    LabelSet, Utterance,
};
pub use embeddings::{load_embeddings, random_embeddings, EmbeddingReport, EmbeddingTable, RowSource};
pub use synthetic::{SyntheticCorpus, SyntheticSpec};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, PAD, UNK};
