use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub condition: String,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub condition: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// `1.96 * sd / sqrt(n)` with the sample standard deviation; zero for a
    /// single seed.
    pub ci95_halfwidth: f64,
}

/// Raw per-seed measurements. Conditions keep their first-insertion order,
/// which is also the plotting order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub experiment: String,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(experiment: impl Into<String>) -> Self {
        ResultTable {
            experiment: experiment.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, condition: &str, seed: u64, metric: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{condition}/{metric} seed {seed}")));
        }
        if self
            .rows
            .iter()
            .any(|r| r.condition == condition && r.seed == seed && r.metric == metric)
        {
            return Err(Error::Config(format!(
                "duplicate row {condition}/{metric} for seed {seed}"
            )));
        }
        self.rows.push(ResultRow {
            condition: condition.into(),
            seed,
            metric: metric.into(),
            value,
        });
        Ok(())
    }

    pub fn conditions(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.condition.as_str()))
            .map(|r| r.condition.as_str())
            .collect()
    }

    pub fn metrics(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.metric.as_str()))
            .map(|r| r.metric.as_str())
            .collect()
    }

    pub fn values(&self, condition: &str, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.condition == condition && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    pub fn mean(&self, condition: &str, metric: &str) -> Option<f64> {
        let v = self.values(condition, metric);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// One row per (condition, metric) in table order.
    pub fn aggregates(&self) -> Vec<AggregateRow> {
        let mut out = Vec::new();
        for c in self.conditions() {
            for m in self.metrics() {
                let v = self.values(c, m);
                if v.is_empty() {
                    continue;
                }
                let n = v.len();
                let mean = v.iter().sum::<f64>() / n as f64;
                let ci = if n > 1 {
                    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                    1.96 * var.sqrt() / (n as f64).sqrt()
                } else {
                    0.0
                };
                out.push(AggregateRow {
                    condition: c.into(),
                    metric: m.into(),
                    n,
                    mean,
                    ci95_halfwidth: ci,
                });
            }
        }
        out
    }

    pub fn merge(&mut self, other: ResultTable) -> Result<()> {
        for r in other.rows {
            self.push(&r.condition, r.seed, &r.metric, r.value)?;
        }
        Ok(())
    }
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && x[idx[end + 1]] == x[idx[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=end] {
            r[i] = avg;
        }
        k = end + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}
