//! Binary checkpoint container.
//!
//! ```text
//! magic      8 bytes   "CERCKPT\0"
//! version    u32 LE    currently 1
//! header_len u64 LE
//! header     JSON      config, mtl flag, labels, vocabulary, tensor table
//! data       f64 LE    every tensor in header order, row-major
//! ```
//!
//! Values are always stored in double precision, so saving and loading a
//! double-precision model is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig};
use crate::data::{EmbeddingTable, LabelSet, RowSource, Vocabulary};
use crate::error::{Error, Result};
use crate::tensor::Real;

const MAGIC: &[u8; 8] = b"CERCKPT\0";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    mtl: bool,
    labels: LabelSet,
    vocab: Vec<String>,
    vocab_hash: String,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
}

/// A model with the label inventory and vocabulary it was trained with.
#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    pub model: Model<T>,
    pub labels: LabelSet,
    pub vocab: Vocabulary,
}

pub fn save_checkpoint<T: Real>(
    path: impl AsRef<Path>,
    model: &Model<T>,
    labels: &LabelSet,
    vocab: &Vocabulary,
) -> Result<()> {
    let header = Header {
        config: model.config.clone(),
        mtl: model.mtl,
        labels: labels.clone(),
        vocab: vocab.tokens().to_vec(),
        vocab_hash: vocab.hash(),
        tensors: model
            .store
            .iter()
            .map(|(_, name, t)| TensorEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                trainable: t.requires_grad(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, _, t) in model.store.iter() {
        for x in t.data() {
            w.write_all(&x.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("file too short"))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b)?;
    let version = u32::from_le_bytes(u32b);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u64b)?;
    let mut json = vec![0u8; u64::from_le_bytes(u64b) as usize];
    r.read_exact(&mut json).map_err(|_| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(&json)?;

    let vocab = Vocabulary::from_tokens(header.vocab, 1);
    if vocab.hash() != header.vocab_hash {
        return Err(bad("vocabulary hash mismatch"));
    }
    let placeholder = EmbeddingTable {
        dim: header.config.embed_dim,
        data: vec![0.0; vocab.len() * header.config.embed_dim],
        trainable: false,
        provenance: vec![RowSource::Random; vocab.len()],
    };
    let mut model = Model::<T>::new(header.config, &placeholder, header.mtl, 0)?;
    if model.store.len() != header.tensors.len() {
        return Err(bad(format!(
            "expected {} tensors, file has {}",
            model.store.len(),
            header.tensors.len()
        )));
    }
    for entry in &header.tensors {
        let id = model
            .store
            .id(&entry.name)
            .ok_or_else(|| bad(format!("unexpected tensor `{}`", entry.name)))?;
        let t = model.store.get_mut(id);
        if t.shape() != entry.shape.as_slice() {
            return Err(bad(format!(
                "tensor `{}` has shape {:?}, expected {:?}",
                entry.name,
                entry.shape,
                t.shape()
            )));
        }
        for x in t.data_mut() {
            r.read_exact(&mut u64b).map_err(|_| bad("truncated data"))?;
            *x = T::of(f64::from_le_bytes(u64b));
        }
        t.set_requires_grad(entry.trainable);
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(bad("trailing bytes after tensor data"));
    }
    Ok(Checkpoint {
        model,
        labels: header.labels,
        vocab,
    })
}
