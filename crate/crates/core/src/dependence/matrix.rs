use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::estimators::{cond_mi, cond_pmi};
use super::{ConditionalModel, PmiTable, ProbCache};
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::rng::split;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "PMI")]
    Pmi,
    #[serde(rename = "CondPMI")]
    CondPmi,
    #[serde(rename = "CondMI")]
    CondMi,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pmi => "PMI",
            Method::CondPmi => "CondPMI",
            Method::CondMi => "CondMI",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pmi" => Ok(Method::Pmi),
            "condpmi" => Ok(Method::CondPmi),
            "condmi" => Ok(Method::CondMi),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DependenceConfig {
    pub gibbs_steps: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for DependenceConfig {
    fn default() -> Self {
        Self {
            gibbs_steps: 2000,
            burn_in: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gibbs_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Symmetric word-by-word scores with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceMatrix {
    pub n: usize,
    pub method: Method,
    /// Row-major `n × n`.
    pub scores: Vec<f64>,
    #[serde(default)]
    pub meta: Meta,
}

impl DependenceMatrix {
    pub fn new(n: usize, method: Method, scores: Vec<f64>, meta: Meta) -> Result<Self> {
        let m = Self {
            n,
            method,
            scores,
            meta,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_fn(n: usize, method: Method, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut scores = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                scores[i * n + j] = v;
                scores[j * n + i] = v;
            }
        }
        Self::new(n, method, scores, Meta::default())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.scores.len() != n * n {
            return Err(Error::Dimension(format!(
                "{} scores for n = {n}",
                self.scores.len()
            )));
        }
        for i in 0..n {
            if self.scores[i * n + i] != 0.0 {
                return Err(Error::Dimension(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let v = self.scores[i * n + j];
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("score ({i}, {j}) = {v}")));
                }
                if v != self.scores[j * n + i] {
                    return Err(Error::Dimension(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.n + j]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

/// Word-level scores: the maximum over subword pairs spanning two words.
pub fn aggregate_words(m: &DependenceMatrix, word_map: &[usize]) -> Result<DependenceMatrix> {
    if word_map.len() != m.n {
        return Err(Error::Dimension(format!(
            "word map of length {} for a {}-position matrix",
            word_map.len(),
            m.n
        )));
    }
    let n_words = word_map.iter().max().map_or(0, |w| w + 1);
    let mut seen = vec![false; n_words];
    word_map.iter().for_each(|&w| seen[w] = true);
    if seen.iter().any(|s| !s) {
        return Err(Error::Dimension("word map skips a word index".into()));
    }
    let mut scores = vec![f64::NEG_INFINITY; n_words * n_words];
    for i in 0..m.n {
        for j in 0..m.n {
            let (u, w) = (word_map[i], word_map[j]);
            if u != w {
                let cell = &mut scores[u * n_words + w];
                *cell = cell.max(m.get(i, j));
            }
        }
    }
    for u in 0..n_words {
        scores[u * n_words + u] = 0.0;
    }
    DependenceMatrix::new(n_words, m.method, scores, m.meta.clone())
}

/// Where pairwise scores come from.
#[derive(Clone, Copy)]
pub enum Scorer<'a> {
    Pmi(&'a PmiTable),
    CondPmi(&'a dyn ConditionalModel),
    CondMi(&'a dyn ConditionalModel),
}

impl Scorer<'_> {
    pub fn method(&self) -> Method {
        match self {
            Scorer::Pmi(_) => Method::Pmi,
            Scorer::CondPmi(_) => Method::CondPmi,
            Scorer::CondMi(_) => Method::CondMi,
        }
    }
}

/// Scores every pair of positions, averages the two directions for the
/// model-based estimators and aggregates to words.
pub fn dependence_matrix(
    scorer: Scorer<'_>,
    sentence: &Sentence,
    cfg: &DependenceConfig,
) -> Result<DependenceMatrix> {
    let ids = &sentence.ids;
    let n = ids.len();
    if n < 2 {
        return Err(Error::Dimension(format!(
            "need at least 2 positions, sentence has {n}"
        )));
    }
    let mut cache = ProbCache::new();
    let mut directed = |i: usize, j: usize| -> Result<f64> {
        match scorer {
            Scorer::Pmi(t) => Ok(t.pmi(ids[i], ids[j])),
            Scorer::CondPmi(m) => cond_pmi(m, &mut cache, ids, i, j),
            Scorer::CondMi(m) => {
                let mut rng = split(cfg.seed, (i * n + j) as u64);
                cond_mi(
                    m,
                    &mut cache,
                    ids,
                    i,
                    j,
                    cfg.gibbs_steps,
                    cfg.burn_in,
                    &mut rng,
                )
            }
        }
    };
    let mut scores = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = match scorer {
                Scorer::Pmi(_) => directed(i, j)?,
                _ => 0.5 * (directed(i, j)? + directed(j, i)?),
            };
            scores[i * n + j] = v;
            scores[j * n + i] = v;
        }
    }
    let meta = match scorer {
        Scorer::CondMi(_) => Meta {
            gibbs_steps: Some(cfg.gibbs_steps),
            seed: Some(cfg.seed),
        },
        _ => Meta::default(),
    };
    let m = DependenceMatrix::new(n, scorer.method(), scores, meta)?;
    aggregate_words(&m, &sentence.word_map)
}
