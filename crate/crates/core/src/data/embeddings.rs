use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::vocab::{Vocabulary, PAD, UNK};
use crate::error::{Error, Result};
use crate::tensor::{Real, Rng, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSource {
    Pretrained,
    Random,
}

/// One row per vocabulary entry.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub data: Vec<f64>,
    pub trainable: bool,
    pub provenance: Vec<RowSource>,
}

impl EmbeddingTable {
    pub fn rows(&self) -> usize {
        self.provenance.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_tensor<T: Real>(&self) -> Result<Tensor<T>> {
        Ok(Tensor::from_f64(vec![self.rows(), self.dim], &self.data)?.with_grad(self.trainable))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EmbeddingReport {
    /// Regular vocabulary entries found in the file.
    pub found: usize,
    /// Regular vocabulary entries absent from the file (randomly initialised).
    pub misses: usize,
    pub missed_tokens: Vec<String>,
}

/// Random rows drawn from `U(-a, a)` with `a = sqrt(3 / dim)`, i.e. unit
/// expected squared norm. The padding row is zero.
pub fn random_embeddings(vocab: &Vocabulary, dim: usize, rng: &mut Rng) -> EmbeddingTable {
    let a = (3.0 / dim as f64).sqrt();
    let mut data = Vec::with_capacity(vocab.len() * dim);
    for i in 0..vocab.len() {
        for _ in 0..dim {
            let x = rng.uniform_range(-a, a);
            data.push(if i == PAD { 0.0 } else { x });
        }
    }
    EmbeddingTable {
        dim,
        data,
        trainable: false,
        provenance: vec![RowSource::Random; vocab.len()],
    }
}

/// Reads a text word-vector file. In-vocabulary tokens take the file's
/// values; all other rows keep their [`random_embeddings`] values.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut Rng,
) -> Result<(EmbeddingTable, EmbeddingReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    read_embeddings(BufReader::new(file), vocab, dim, rng, &path.display().to_string())
}

pub(crate) fn read_embeddings<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut Rng,
    source: &str,
) -> Result<(EmbeddingTable, EmbeddingReport)> {
    let mut table = random_embeddings(vocab, dim, rng);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            continue;
        }
        let fail = |message: String| Error::Parse {
            path: source.to_string(),
            line: i + 1,
            message,
        };
        if fields.len() != dim + 1 {
            return Err(fail(format!(
                "expected {dim} values after the token, found {}",
                fields.len() - 1
            )));
        }
        let Some(row) = vocab.get(fields[0]) else { continue };
        if row == UNK || row == PAD {
            continue;
        }
        for (k, f) in fields[1..].iter().enumerate() {
            table.data[row * dim + k] = f
                .parse::<f64>()
                .map_err(|e| fail(format!("value {}: {e}", k + 1)))?;
        }
        table.provenance[row] = RowSource::Pretrained;
    }
    let mut report = EmbeddingReport::default();
    for (i, src) in table.provenance.iter().enumerate().skip(2) {
        match src {
            RowSource::Pretrained => report.found += 1,
            RowSource::Random => {
                report.misses += 1;
                report.missed_tokens.push(vocab.token(i).to_string());
            }
        }
    }
    Ok((table, report))
}
