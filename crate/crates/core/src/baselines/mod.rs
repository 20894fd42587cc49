//! Deterministic fitters: regularized ALS and multiplicative-update NMF.

pub mod als;
pub mod nmf;

pub use als::{als_fit, als_sgd_step, als_sweep, regularized_objective, AlsConfig, AlsMode};
pub use nmf::{nmf_mu_fit, nmf_mu_sweep, NmfConfig};
