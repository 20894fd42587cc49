//! Gibbs samplers for Bayesian matrix factorization.
//!
//! One chain runs on one thread; independent chains parallelize with
//! distinct seeds. Within a sweep the updates are sequentially dependent,
//! and the sweep order is fixed per model so chains are bitwise
//! reproducible given (seed, model).

pub mod discrete;
pub mod nmf;
pub mod rmf;

use crate::error::{Error, Result};
use crate::masked::FactorState;

/// Chain configuration: total iterations, burn-in discard, thinning stride,
/// and the chain seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsConfig {
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl GibbsConfig {
    pub fn new(iters: usize, burn_in: usize, thin: usize, seed: u64) -> Result<Self> {
        if iters > 0 && burn_in >= iters {
            return Err(Error::InvalidParameter(format!(
                "burn-in ({burn_in}) must be below the iteration count ({iters})"
            )));
        }
        if thin == 0 {
            return Err(Error::InvalidParameter("thinning must be at least 1".into()));
        }
        Ok(Self {
            iters,
            burn_in,
            thin,
            seed,
        })
    }

    /// True when the (0-based) iteration index should be retained.
    pub fn keep(&self, iter: usize) -> bool {
        iter >= self.burn_in && (iter - self.burn_in) % self.thin == 0
    }
}

/// Per-iteration losses and thinned post-burn-in factor samples.
#[derive(Debug, Clone)]
pub struct GibbsTrace {
    /// Masked train MSE recorded at the end of every iteration.
    pub losses: Vec<f64>,
    /// Retained factor samples (post burn-in, thinned).
    pub samples: Vec<FactorState>,
    pub config: GibbsConfig,
}

impl GibbsTrace {
    pub fn new(config: GibbsConfig) -> Self {
        Self {
            losses: Vec::with_capacity(config.iters),
            samples: Vec::new(),
            config,
        }
    }

    /// Mean loss over post-burn-in iterations.
    pub fn post_burn_in_mean_loss(&self) -> Option<f64> {
        let tail = &self.losses.get(self.config.burn_in..)?;
        if tail.is_empty() {
            return None;
        }
        Some(tail.iter().sum::<f64>() / tail.len() as f64)
    }

    /// Element-wise posterior mean of the retained W, Z (and F) samples.
    pub fn posterior_mean(&self) -> Option<FactorState> {
        let first = self.samples.first()?;
        let mut w = first.w.clone();
        let mut z = first.z.clone();
        let mut f = first.f.clone();
        let mut sigma2 = first.sigma2;
        for s in &self.samples[1..] {
            w += &s.w;
            z += &s.z;
            if let (Some(acc), Some(sf)) = (f.as_mut(), s.f.as_ref()) {
                *acc += sf;
            }
            sigma2 += s.sigma2;
        }
        let n = self.samples.len() as f64;
        w /= n;
        z /= n;
        if let Some(acc) = f.as_mut() {
            *acc /= n;
        }
        FactorState::with_middle(w, f, z, sigma2 / n).ok()
    }
}
