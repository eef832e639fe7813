//! Multi-task conversational emotion recognition with speaker
//! identification as an auxiliary task.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense tensors, a reverse-mode tape, Adam, dropout and
//!   initialisation.
//! * [`nn`]: GRU/Bi-GRU, attention pooling, gated shared-private fusion,
//!   bilinear cross attention and speaker-pair features.
//! * [`model`]: the emotion (CER) and speaker (SI) hierarchical encoders, the
//!   two bridges between them, losses, pair sampling and checkpoints.
//! * [`data`]: conversation JSONL corpora, tokenisation, vocabularies, word
//!   vectors, batching, format converters and a synthetic corpus generator.
//! * [`train`]: the mixed-corpus training loop, weighted macro-F1, paired
//!   t-tests and the bridge ablation harness.
//! * [`cli`]: the `cer` command-line front end.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
