//! Bayesian shifted-binomial model for multi-item ordinal ratings.
//!
//! Ratings `r_ij ∈ {1..k}` follow a binomial law shifted by one, with success
//! probability `logistic(η_ij)` driven by user covariates `X`, item covariates
//! `Y`, and optionally sparse latent factors `U Vᵀ`. Inference is an exact
//! Gibbs sampler built on Pólya-Gamma data augmentation.

pub mod baselines;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod simulate;

pub use error::{Error, Result};
