//! Exact numerical worlds for checking the theory: Gaussian latent-variable
//! models and small enumerable discrete models.

mod discrete;
mod gaussian;
mod lasso;

use serde::{Deserialize, Serialize};

pub use discrete::{
    discrete_exact, discrete_gen, prop3_check, prop4_check, perturb, DiscreteExact,
    DiscreteLatentModel, DiscreteSpec,
};
pub use gaussian::{
    gaussian_cond_mi, gaussian_gen, masked_beta, pca_project, prop1_check, prop2_check,
    two_stage_beta, GaussianModel, GaussianSpec, PcaResult, Sparsity,
};
pub use lasso::{lasso, neighborhood_select, LassoConfig};

/// Tolerance under which a negative slack still counts as holding.
pub const SLACK_TOL: f64 = 1e-9;

/// One inequality check, `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub detail: String,
}

impl PropReport {
    pub fn new(lhs: f64, rhs: f64, detail: impl Into<String>) -> Self {
        let slack = rhs - lhs;
        Self {
            lhs,
            rhs,
            slack,
            holds: slack >= -SLACK_TOL || rhs == f64::INFINITY,
            detail: detail.into(),
        }
    }
}
