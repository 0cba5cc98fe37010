use super::ConditionalModel;
use crate::corpus::MASK;
use crate::error::{Error, Result};

/// First id used for real tokens; everything below is a special symbol.
pub const FIRST_TOKEN: usize = 4;

/// An explicit joint distribution over fixed-length sequences of `k` token
/// types (ids `4..4+k`). Conditionals are exact; `[MASK]` positions other
/// than the queried one are marginalized out.
#[derive(Debug, Clone)]
pub struct TableModel {
    len: usize,
    k: usize,
    probs: Vec<f64>,
}

impl TableModel {
    /// `probs` is indexed by the base-`k` number whose most significant digit
    /// is position 0.
    pub fn new(len: usize, k: usize, probs: Vec<f64>) -> Result<Self> {
        let cells = k
            .checked_pow(len as u32)
            .ok_or_else(|| Error::Dimension(format!("{k}^{len} cells overflow")))?;
        if probs.len() != cells {
            return Err(Error::Dimension(format!(
                "table of {} cells, expected {cells}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NonFinite("negative or non-finite table entry".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Unnormalized(total));
        }
        Ok(Self { len, k, probs })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_types(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Token ids of cell `idx`.
    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.len];
        for p in (0..self.len).rev() {
            out[p] = FIRST_TOKEN + idx % self.k;
            idx /= self.k;
        }
        out
    }

    pub fn encode(&self, ids: &[usize]) -> usize {
        ids.iter()
            .fold(0, |acc, &t| acc * self.k + (t - FIRST_TOKEN))
    }
}

impl ConditionalModel for TableModel {
    fn vocab_size(&self) -> usize {
        FIRST_TOKEN + self.k
    }

    fn conditional(&self, ids: &[usize], pos: usize) -> Result<Vec<f64>> {
        if ids.len() != self.len {
            return Err(Error::Dimension(format!(
                "sequence of length {}, table has {}",
                ids.len(),
                self.len
            )));
        }
        if ids[pos] != MASK {
            return Err(Error::Target(format!("position {pos} is not masked")));
        }
        for (p, &t) in ids.iter().enumerate() {
            if t != MASK && !(FIRST_TOKEN..FIRST_TOKEN + self.k).contains(&t) {
                return Err(Error::OutOfRange { pos: p, len: self.len });
            }
        }
        let mut out = vec![0.0; FIRST_TOKEN + self.k];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let cell = self.decode(idx);
            if cell.iter().zip(ids).all(|(&c, &t)| t == MASK || c == t) {
                out[cell[pos]] += p;
            }
        }
        let z: f64 = out.iter().sum();
        if z <= 0.0 {
            return Err(Error::NonFinite("conditioning on a zero-probability context".into()));
        }
        out.iter_mut().for_each(|x| *x /= z);
        Ok(out)
    }
}
