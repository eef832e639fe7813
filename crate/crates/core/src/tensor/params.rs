use std::collections::HashMap;

use super::{Real, Tensor};
use crate::error::{arg, Result};

/// Handle to a tensor registered in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable tensors and their gradient buffers.
///
/// `touched` records which tensors received a gradient since the last
/// [`ParamStore::zero_grad`]; the optimizer leaves untouched tensors alone.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    tensors: Vec<Tensor<T>>,
    names: Vec<String>,
    by_name: HashMap<String, ParamId>,
    touched: Vec<bool>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            tensors: Vec::new(),
            names: Vec::new(),
            by_name: HashMap::new(),
            touched: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return arg(format!("parameter `{name}` registered twice"));
        }
        let id = ParamId(self.tensors.len());
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(tensor);
        self.touched.push(false);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<T>)> {
        self.tensors
            .iter()
            .zip(&self.names)
            .enumerate()
            .map(|(i, (t, n))| (ParamId(i), n.as_str(), t))
    }

    pub fn touched(&self, id: ParamId) -> bool {
        self.touched[id.0]
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.zero_grad();
        }
        self.touched.iter_mut().for_each(|x| *x = false);
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, g: &[T]) {
        if let Some(grad) = self.tensors[id.0].grad_mut() {
            for (a, &b) in grad.iter_mut().zip(g) {
                *a += b;
            }
            self.touched[id.0] = true;
        }
    }

    pub(crate) fn accumulate_rows(&mut self, id: ParamId, rows: &[usize], g: &[T]) {
        let cols = self.tensors[id.0].shape()[1];
        if let Some(grad) = self.tensors[id.0].grad_mut() {
            for (k, &r) in rows.iter().enumerate() {
                let dst = &mut grad[r * cols..(r + 1) * cols];
                for (a, &b) in dst.iter_mut().zip(&g[k * cols..(k + 1) * cols]) {
                    *a += b;
                }
            }
            self.touched[id.0] = true;
        }
    }

    /// Global L2 norm over every gradient buffer.
    pub fn grad_norm(&self) -> T {
        let mut acc = T::zero();
        for t in &self.tensors {
            if let Some(g) = t.grad() {
                for &x in g {
                    acc += x * x;
                }
            }
        }
        acc.sqrt()
    }

    /// Rescales all gradients so their global norm is at most `max_norm`.
    pub fn clip_grad_norm(&mut self, max_norm: T) -> T {
        let norm = self.grad_norm();
        if norm > max_norm {
            let scale = max_norm / norm;
            for t in &mut self.tensors {
                if let Some(g) = t.grad_mut() {
                    g.iter_mut().for_each(|x| *x *= scale);
                }
            }
        }
        norm
    }

    /// Copies every tensor's values from `other`, matched by name.
    pub fn copy_values_from(&mut self, other: &ParamStore<T>) -> Result<()> {
        for (id, name, src) in other.iter() {
            let dst_id = match self.id(name) {
                Some(d) => d,
                None => return arg(format!("parameter `{name}` missing in destination")),
            };
            let dst = &mut self.tensors[dst_id.0];
            if dst.shape() != src.shape() {
                return arg(format!(
                    "parameter `{name}` has shape {:?}, source {:?}",
                    dst.shape(),
                    src.shape()
                ));
            }
            dst.data_mut().copy_from_slice(other.get(id).data());
        }
        Ok(())
    }
}
