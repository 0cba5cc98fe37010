//! Tiny masked language models, Gibbs-sampled conditional mutual information
//! and unsupervised dependency parsing, with exact numerical oracles for the
//! latent-variable analysis of masked prediction.

pub mod corpus;
pub mod dependence;
pub mod experiments;
pub mod error;
pub mod graph;
pub mod masking;
pub mod mlm;
pub mod oracle;
pub mod parsing;
pub mod rng;

pub use error::{Error, Result};
