//! Neural building blocks on top of the tape.
//!
//! Parameter structs hold [`ParamId`]s into a [`ParamStore`]; layer
//! functions read the values through a [`Tape`] and never mutate the store.

mod attention;
mod bilinear;
mod gate;
mod gru;
mod pair;

pub use attention::{attention_pool, AttnPoolParams};
pub use bilinear::{cross_attend, BilinearParams, CrossAttention};
pub use gate::{gate_fuse, GateParams};
pub use gru::{bigru, gru_cell, gru_sequence, BiGruParams, GruParams};
pub use pair::si_pair_features;

use crate::error::Result;
use crate::tensor::{init_param, zeros, ParamId, ParamStore, Real, Rng};

/// Registers parameters under hierarchical names.
///
/// Every weight draws from its own generator, forked from the seed by the
/// full parameter name, so a tensor's initial value does not depend on
/// which other tensors exist.
pub struct Initializer<'a, T> {
    store: &'a mut ParamStore<T>,
    root: Rng,
    prefix: String,
}

impl<'a, T: Real> Initializer<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, seed: u64) -> Self {
        Self {
            store,
            root: Rng::new(seed),
            prefix: String::new(),
        }
    }

    /// A child initializer whose names are prefixed with `scope.`.
    pub fn scope(&mut self, scope: &str) -> Initializer<'_, T> {
        let prefix = if self.prefix.is_empty() {
            scope.to_string()
        } else {
            format!("{}.{scope}", self.prefix)
        };
        Initializer {
            store: self.store,
            root: self.root.clone(),
            prefix,
        }
    }

    fn full(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    /// Glorot-uniform weight of the given shape.
    pub fn weight(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        let full = self.full(name);
        let mut rng = self.root.fork_named(&full);
        let t = init_param(shape, &mut rng)?;
        self.store.add(full, t)
    }

    /// Zero-initialized bias vector.
    pub fn bias(&mut self, name: &str, n: usize) -> Result<ParamId> {
        let full = self.full(name);
        self.store.add(full, zeros(&[n])?)
    }
}
