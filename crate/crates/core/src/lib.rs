//! Matrix factorization toolkit: deterministic ALS and multiplicative-update
//! NMF baselines, a catalog of Gibbs samplers for real-valued, nonnegative,
//! Poisson, and ordinal Bayesian matrix factorization, and exact plus
//! Bayesian interpolative decomposition, with shared evaluation metrics.

pub mod baselines;
pub mod dist;
pub mod error;
pub mod gibbs;
pub mod id;
pub mod linalg;
pub mod masked;
pub mod metrics;

pub use error::{Error, Result};
pub use masked::{frobenius_loss, masked_mse, FactorState, MaskedMatrix};
