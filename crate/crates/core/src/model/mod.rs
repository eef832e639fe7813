//! The emotion model, the speaker model and their multi-task composite.
//!
//! Both tasks share the word-vector table and have their own word Bi-GRU,
//! attention pooling and utterance Bi-GRU. In multi-task mode two optional
//! bridges connect them:
//!
//! * the word-level bridge runs a shared word Bi-GRU over the embeddings and
//!   mixes it into each task's word features with a task-specific gate;
//! * the utterance-level bridge lets each task's contextual utterance
//!   vectors attend over the other task's with a bilinear score, doubling
//!   their width.
//!
//! Emotion logits are `f̂_i · W_cer`. Speaker logits for a pair `(i, j)` are
//! `relu(δ_ij · W_f + b_f) · W_si` with `δ_ij = f_i ⊕ f_j ⊕ |f_i - f_j| ⊕ f_i ⊙ f_j`;
//! class 1 means "same speaker".

mod checkpoint;
mod forward;
mod pairs;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use forward::{loss_cer, loss_multi, loss_si, CerOutput, DropoutStreams, LossTerm, Pass, Prediction, SiOutput};
pub use pairs::{sample_pairs, PairSample};

use serde::{Deserialize, Serialize};

use crate::data::EmbeddingTable;
use crate::error::{Error, Result};
use crate::nn::{AttnPoolParams, BiGruParams, BilinearParams, GateParams, Initializer};
use crate::tensor::{ParamId, ParamStore, Precision, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// Word Bi-GRU size per direction.
    pub word_hidden: usize,
    /// Utterance Bi-GRU size per direction.
    pub utt_hidden: usize,
    pub num_emotions: usize,
    /// Speaker pairs sampled per conversation.
    pub pairs_per_conversation: usize,
    pub dropout: f64,
    pub enable_iue_bridge: bool,
    pub enable_cue_bridge: bool,
    /// Width of the speaker-pair hidden layer.
    pub si_hidden: usize,
    /// Sample same-speaker and different-speaker pairs in equal numbers.
    pub balance_pairs: bool,
    pub precision: Precision,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::emorynlp()
    }
}

impl ModelConfig {
    pub fn emorynlp() -> Self {
        Self {
            embed_dim: 300,
            word_hidden: 200,
            utt_hidden: 200,
            num_emotions: 7,
            pairs_per_conversation: 3,
            dropout: 0.5,
            enable_iue_bridge: true,
            enable_cue_bridge: true,
            si_hidden: 200,
            balance_pairs: false,
            precision: Precision::Double,
        }
    }

    pub fn meld() -> Self {
        Self {
            word_hidden: 150,
            utt_hidden: 150,
            pairs_per_conversation: 2,
            si_hidden: 150,
            ..Self::emorynlp()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "emorynlp" => Some(Self::emorynlp()),
            "meld" => Some(Self::meld()),
            _ => None,
        }
    }

    /// Checks field ranges; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("embed_dim", self.embed_dim),
            ("word_hidden", self.word_hidden),
            ("utt_hidden", self.utt_hidden),
            ("num_emotions", self.num_emotions),
            ("pairs_per_conversation", self.pairs_per_conversation),
            ("si_hidden", self.si_hidden),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "model.dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Width of the contextual utterance vectors fed to the output layers.
    pub fn context_dim(&self, mtl: bool) -> usize {
        if mtl && self.enable_cue_bridge {
            4 * self.utt_hidden
        } else {
            2 * self.utt_hidden
        }
    }
}

/// Which task's encoder stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Cer,
    Si,
}

impl Side {
    pub(crate) fn other(self) -> Self {
        match self {
            Self::Cer => Self::Si,
            Self::Si => Self::Cer,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Word Bi-GRU, attention pooling and utterance Bi-GRU of one task.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub word: BiGruParams,
    pub pool: AttnPoolParams,
    pub utt: BiGruParams,
}

impl Encoder {
    fn new<T: Real>(init: &mut Initializer<'_, T>, c: &ModelConfig) -> Result<Self> {
        Ok(Self {
            word: BiGruParams::new(&mut init.scope("word"), c.embed_dim, c.word_hidden)?,
            pool: AttnPoolParams::new(&mut init.scope("pool"), 2 * c.word_hidden)?,
            utt: BiGruParams::new(&mut init.scope("utt"), 2 * c.word_hidden, c.utt_hidden)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiHead {
    pub w_f: ParamId,
    pub b_f: ParamId,
    pub w_out: ParamId,
}

/// Shared word Bi-GRU with one gate per task.
#[derive(Clone, Debug, PartialEq)]
pub struct IueBridge {
    pub shared: BiGruParams,
    pub gate_cer: GateParams,
    pub gate_si: GateParams,
}

/// Bilinear cross attention in both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct CueBridge {
    pub cer: BilinearParams,
    pub si: BilinearParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub embedding: ParamId,
    pub cer: Encoder,
    pub cer_out: ParamId,
    pub si: Option<Encoder>,
    pub si_head: Option<SiHead>,
    pub iue: Option<IueBridge>,
    pub cue: Option<CueBridge>,
}

impl ModelParams {
    pub(crate) fn encoder(&self, side: Side) -> &Encoder {
        match side {
            Side::Cer => &self.cer,
            Side::Si => self.si.as_ref().expect("speaker encoder exists in multi-task mode"),
        }
    }
}

/// Parameters plus the configuration they were built from.
///
/// With `mtl == false` only the emotion path exists (the standalone
/// baseline). Parameter names are hierarchical (`cer.word.fwd.w_z`) and
/// initial values depend only on the seed and the name, so the emotion
/// path of a multi-task model starts from exactly the baseline's weights.
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub mtl: bool,
    pub params: ModelParams,
    pub store: ParamStore<T>,
}

impl<T: Real> Model<T> {
    pub fn new(config: ModelConfig, embeddings: &EmbeddingTable, mtl: bool, seed: u64) -> Result<Self> {
        config.validate()?;
        if embeddings.dim != config.embed_dim {
            return Err(Error::Config(format!(
                "model.embed_dim is {} but the word vectors have {} dimensions",
                config.embed_dim, embeddings.dim
            )));
        }
        let mut store = ParamStore::new();
        let embedding = store.add("embedding", embeddings.to_tensor()?)?;
        let mut init = Initializer::new(&mut store, seed);
        let c = &config;
        let d_ctx = c.context_dim(mtl);
        let cer = Encoder::new(&mut init.scope("cer"), c)?;
        let cer_out = init.weight("cer.w_out", &[d_ctx, c.num_emotions])?;
        let (mut si, mut si_head, mut iue, mut cue) = (None, None, None, None);
        if mtl {
            si = Some(Encoder::new(&mut init.scope("si"), c)?);
            si_head = Some(SiHead {
                w_f: init.weight("si.w_f", &[4 * d_ctx, c.si_hidden])?,
                b_f: init.bias("si.b_f", c.si_hidden)?,
                w_out: init.weight("si.w_out", &[c.si_hidden, 2])?,
            });
            if c.enable_iue_bridge {
                iue = Some(IueBridge {
                    shared: BiGruParams::new(&mut init.scope("shared.word"), c.embed_dim, c.word_hidden)?,
                    gate_cer: GateParams::new(&mut init.scope("shared.gate_cer"), 2 * c.word_hidden)?,
                    gate_si: GateParams::new(&mut init.scope("shared.gate_si"), 2 * c.word_hidden)?,
                });
            }
            if c.enable_cue_bridge {
                cue = Some(CueBridge {
                    cer: BilinearParams::new(&mut init.scope("cross.cer"), 2 * c.utt_hidden)?,
                    si: BilinearParams::new(&mut init.scope("cross.si"), 2 * c.utt_hidden)?,
                });
            }
        }
        Ok(Self {
            config,
            mtl,
            params: ModelParams {
                embedding,
                cer,
                cer_out,
                si,
                si_head,
                iue,
                cue,
            },
            store,
        })
    }

    /// Whether the word vectors receive gradients.
    pub fn embedding_trainable(&self) -> bool {
        self.store.get(self.params.embedding).requires_grad()
    }

    pub fn set_embedding_trainable(&mut self, trainable: bool) {
        self.store
            .get_mut(self.params.embedding)
            .set_requires_grad(trainable);
    }

    pub fn vocab_size(&self) -> usize {
        self.store.get(self.params.embedding).shape()[0]
    }
}
