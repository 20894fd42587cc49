//! NMF via multiplicative updates, plain and regularized, with mask support.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::masked::{frobenius_loss, FactorState, MaskedMatrix};

#[derive(Debug, Clone)]
pub struct NmfConfig {
    pub k: usize,
    pub lambda_w: f64,
    pub lambda_z: f64,
    /// Small positive denominator guard; 1e-9 suffices.
    pub eps: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl NmfConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            lambda_w: 0.0,
            lambda_z: 0.0,
            eps: 1e-9,
            max_iters: 500,
            tol: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(
                "denominator guard eps must be positive".into(),
            ));
        }
        if self.lambda_w < 0.0 || self.lambda_z < 0.0 {
            return Err(Error::InvalidParameter(
                "regularization must be nonnegative".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be positive".into()));
        }
        Ok(())
    }
}

/// One multiplicative-update sweep in place: for each k, the k-th row of Z
/// then the k-th column of W. Masked data replaces A and WZ with their
/// observed restrictions in both numerator and denominator.
pub fn nmf_mu_sweep(a: &MaskedMatrix, s: &mut FactorState, cfg: &NmfConfig) {
    let (m_dim, n_dim, k_dim) = (a.nrows(), a.ncols(), s.w.ncols());
    for k in 0..k_dim {
        for n in 0..n_dim {
            let mut num = 0.0;
            let mut den = 0.0;
            for m in 0..m_dim {
                if a.mask[[m, n]] {
                    num += s.w[[m, k]] * a.values[[m, n]];
                    den += s.w[[m, k]] * s.predict(m, n);
                }
            }
            num -= cfg.lambda_z * s.z[[k, n]];
            let updated = s.z[[k, n]] * num / (den + cfg.eps);
            s.z[[k, n]] = if updated.is_finite() { updated.max(0.0) } else { 0.0 };
        }
        for m in 0..m_dim {
            let mut num = 0.0;
            let mut den = 0.0;
            for n in 0..n_dim {
                if a.mask[[m, n]] {
                    num += a.values[[m, n]] * s.z[[k, n]];
                    den += s.predict(m, n) * s.z[[k, n]];
                }
            }
            num -= cfg.lambda_w * s.w[[m, k]];
            let updated = s.w[[m, k]] * num / (den + cfg.eps);
            s.w[[m, k]] = if updated.is_finite() { updated.max(0.0) } else { 0.0 };
        }
    }
}

/// Fits nonnegative A ~ W Z by multiplicative updates.
///
/// Factors initialize entrywise from Uniform(0, 1); the loss history records
/// the (masked) squared Frobenius reconstruction error after each sweep.
/// With no regularization the loss is non-increasing sweep over sweep.
pub fn nmf_mu_fit<R: Rng + ?Sized>(
    a: &MaskedMatrix,
    cfg: &NmfConfig,
    rng: &mut R,
) -> Result<(FactorState, Vec<f64>)> {
    cfg.validate()?;
    for m in 0..a.nrows() {
        for n in 0..a.ncols() {
            if a.mask[[m, n]] && a.values[[m, n]] < 0.0 {
                return Err(Error::NegativeInput(format!(
                    "entry ({m}, {n}) = {}",
                    a.values[[m, n]]
                )));
            }
        }
    }
    let w = Array2::from_shape_fn((a.nrows(), cfg.k), |_| rng.random::<f64>());
    let z = Array2::from_shape_fn((cfg.k, a.ncols()), |_| rng.random::<f64>());
    let mut s = FactorState::new(w, z, 1.0)?;
    let mut history = Vec::with_capacity(cfg.max_iters);
    let mut prev = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        nmf_mu_sweep(a, &mut s, cfg);
        let loss = frobenius_loss(a, &s)?;
        history.push(loss);
        if prev.is_finite() {
            let denom = prev.abs().max(1e-300);
            if ((prev - loss) / denom).abs() < cfg.tol {
                break;
            }
        }
        prev = loss;
    }
    Ok((s, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nonneg_rank2(m: usize, n: usize, seed: u64) -> MaskedMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Array2::from_shape_fn((m, 2), |_| rng.random::<f64>() + 0.1);
        let z = Array2::from_shape_fn((2, n), |_| rng.random::<f64>() + 0.1);
        MaskedMatrix::full(w.dot(&z))
    }

    #[test]
    fn converges_on_exact_rank2() {
        let a = nonneg_rank2(10, 8, 1);
        let mut cfg = NmfConfig::new(2);
        cfg.max_iters = 3000;
        cfg.tol = 1e-14;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, history) = nmf_mu_fit(&a, &cfg, &mut rng).unwrap();
        let norm: f64 = a.values.iter().map(|v| v * v).sum();
        assert!(
            *history.last().unwrap() < 1e-4 * norm,
            "final loss {} vs bound {}",
            history.last().unwrap(),
            1e-4 * norm
        );
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "loss rose: {w:?}");
        }
    }

    #[test]
    fn iterates_stay_nonnegative() {
        let a = nonneg_rank2(6, 5, 3);
        let mut cfg = NmfConfig::new(3);
        cfg.lambda_w = 0.05;
        cfg.lambda_z = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = Array2::from_shape_fn((6, 3), |_| rng.random::<f64>());
        let z = Array2::from_shape_fn((3, 5), |_| rng.random::<f64>());
        let mut s = FactorState::new(w, z, 1.0).unwrap();
        for _ in 0..100 {
            nmf_mu_sweep(&a, &mut s, &cfg);
            assert!(s.w.iter().all(|&v| v >= 0.0));
            assert!(s.z.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn zero_column_init_survives_guard() {
        let a = nonneg_rank2(4, 4, 5);
        let cfg = NmfConfig::new(2);
        let w = {
            let mut w = Array2::from_elem((4, 2), 0.5);
            for i in 0..4 {
                w[[i, 1]] = 0.0;
            }
            w
        };
        let z = Array2::from_elem((2, 4), 0.5);
        let mut s = FactorState::new(w, z, 1.0).unwrap();
        for _ in 0..10 {
            nmf_mu_sweep(&a, &mut s, &cfg);
        }
        assert!(s.w.iter().all(|v| v.is_finite()));
        assert!(s.z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn negative_observed_entry_rejected() {
        let a = MaskedMatrix::full(array![[1.0, -0.5], [2.0, 3.0]]);
        let cfg = NmfConfig::new(1);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(matches!(
            nmf_mu_fit(&a, &cfg, &mut rng),
            Err(Error::NegativeInput(_))
        ));
    }

    #[test]
    fn negative_unobserved_entry_allowed() {
        let a = MaskedMatrix::new(array![[1.0, -0.5]], array![[true, false]]).unwrap();
        let cfg = NmfConfig::new(1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(nmf_mu_fit(&a, &cfg, &mut rng).is_ok());
    }

    #[test]
    fn masked_loss_is_monotone_too() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let full = nonneg_rank2(8, 7, 9);
        let mask = Array2::from_shape_fn((8, 7), |_| rng.random::<f64>() < 0.6);
        if mask.iter().any(|&b| b) {
            let a = MaskedMatrix::new(full.values, mask).unwrap();
            let mut cfg = NmfConfig::new(2);
            cfg.max_iters = 200;
            cfg.tol = 1e-15;
            let (_, history) = nmf_mu_fit(&a, &cfg, &mut rng).unwrap();
            for w in history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "loss rose: {w:?}");
            }
        }
    }
}
