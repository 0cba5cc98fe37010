//! Pairwise dependence between sentence positions: corpus PMI, conditional
//! PMI and Gibbs-sampled conditional mutual information.

mod estimators;
mod matrix;
mod pmi;
mod table;
#[cfg(test)]
mod tests;

use std::collections::HashMap;
use std::rc::Rc;

use crate::corpus::MASK;
use crate::error::{Error, Result};
use crate::mlm::TinyMlm;

pub use estimators::{cond_mi, cond_mi_from_chain, cond_pmi, gibbs_chain, GibbsChain};
pub use matrix::{
    aggregate_words, dependence_matrix, DependenceConfig, DependenceMatrix, Meta, Method, Scorer,
};
pub use pmi::PmiTable;
pub use table::{TableModel, FIRST_TOKEN};

/// Anything that yields `p(x_pos | rest)` for a sequence whose position
/// `pos` holds `[MASK]`. Other `[MASK]` positions are unobserved.
pub trait ConditionalModel {
    fn vocab_size(&self) -> usize;

    fn conditional(&self, ids: &[usize], pos: usize) -> Result<Vec<f64>>;
}

impl ConditionalModel for TinyMlm {
    fn vocab_size(&self) -> usize {
        self.dims.vocab
    }

    fn conditional(&self, ids: &[usize], pos: usize) -> Result<Vec<f64>> {
        self.predict_position(ids, pos)
    }
}

/// Memoized conditional queries keyed by the full substituted context.
#[derive(Default)]
pub struct ProbCache {
    map: HashMap<(usize, Vec<usize>), Rc<[f64]>>,
    hits: u64,
    misses: u64,
}

impl ProbCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get<M: ConditionalModel + ?Sized>(
        &mut self,
        model: &M,
        ids: &[usize],
        pos: usize,
    ) -> Result<Rc<[f64]>> {
        if ids.get(pos) != Some(&MASK) {
            return Err(Error::OutOfRange {
                pos,
                len: ids.len(),
            });
        }
        if let Some(p) = self.map.get(&(pos, ids.to_vec())) {
            self.hits += 1;
            return Ok(p.clone());
        }
        self.misses += 1;
        let p: Rc<[f64]> = model.conditional(ids, pos)?.into();
        self.map.insert((pos, ids.to_vec()), p.clone());
        Ok(p)
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }
}
