use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Edge;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Minimizes `(1/2n)‖y − Xβ‖² + λ‖β‖₁` by cyclic coordinate descent on the
/// Gram matrix. No intercept.
pub fn lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, cfg: &LassoConfig) -> Result<DVector<f64>> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("{} targets for {n} rows", y.len())));
    }
    if n == 0 || lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Config(format!("invalid lasso problem (n = {n}, λ = {lambda})")));
    }
    let gram = x.transpose() * x / n as f64;
    let corr = x.transpose() * y / n as f64;
    let mut beta = DVector::zeros(p);
    for _ in 0..cfg.max_sweeps {
        let mut delta: f64 = 0.0;
        for j in 0..p {
            if gram[(j, j)] == 0.0 {
                continue;
            }
            let partial = corr[j] - gram.row(j).dot(&beta.transpose()) + gram[(j, j)] * beta[j];
            let next = soft_threshold(partial, lambda) / gram[(j, j)];
            delta = delta.max((next - beta[j]).abs());
            beta[j] = next;
        }
        if delta < cfg.tol {
            return Ok(beta);
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_sweeps,
    })
}

/// Per-node lasso of each column on all others; an edge is kept when either
/// regression selects it. Samples are one per row.
pub fn neighborhood_select(samples: &DMatrix<f64>, lambda: f64, cfg: &LassoConfig) -> Result<Vec<Edge>> {
    let (n, l) = samples.shape();
    if n <= l {
        return Err(Error::Config(format!("need more samples than variables ({n} <= {l})")));
    }
    let mut edges = std::collections::BTreeSet::new();
    for i in 0..l {
        let rest: Vec<usize> = (0..l).filter(|&c| c != i).collect();
        let x = samples.select_columns(&rest);
        let beta = lasso(&x, &samples.column(i).into_owned(), lambda, cfg)?;
        for (c, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                edges.insert(Edge::new(i, rest[c]));
            }
        }
    }
    Ok(edges.into_iter().collect())
}
