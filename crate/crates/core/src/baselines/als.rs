//! Alternating least squares with regularization, masked rank-one updates,
//! and gradient / stochastic-gradient variants.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, chol_solve};
use crate::masked::{masked_mse, FactorState, MaskedMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlsMode {
    /// Closed-form normal-equation updates on the whole factors; requires a
    /// full mask.
    Full,
    /// Per-column / per-row rank-one solves restricted to observed entries.
    Masked,
    /// Normalized gradient descent on the column/row subproblems.
    Gradient,
    /// Per-example stochastic updates.
    Sgd,
}

#[derive(Debug, Clone)]
pub struct AlsConfig {
    pub k: usize,
    pub lambda_w: f64,
    pub lambda_z: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub mode: AlsMode,
    pub eta_w: f64,
    pub eta_z: f64,
    /// Augments W with a fixed all-ones last column and Z with a fixed
    /// all-ones first row, fitting the offsets through the reduced updates.
    pub bias: bool,
}

impl AlsConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            lambda_w: 0.1,
            lambda_z: 0.1,
            max_iters: 200,
            tol: 1e-8,
            mode: AlsMode::Masked,
            eta_w: 0.01,
            eta_z: 0.01,
            bias: false,
        }
    }

    fn validate(&self, a: &MaskedMatrix) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be positive".into()));
        }
        if self.lambda_w < 0.0 || self.lambda_z < 0.0 {
            return Err(Error::InvalidParameter(
                "regularization must be nonnegative".into(),
            ));
        }
        if self.mode == AlsMode::Full && !a.is_fully_observed() {
            return Err(Error::InvalidParameter(
                "full-matrix ALS requires a fully observed matrix".into(),
            ));
        }
        Ok(())
    }
}

const GRAD_NORM_GUARD: f64 = 1e-14;

/// Solves (G + lambda I) x = rhs via Cholesky; a singular system with
/// lambda = 0 is reported as a linear-solve error.
fn reg_solve(gram: &Array2<f64>, lambda: f64, rhs: &Array1<f64>) -> Result<Array1<f64>> {
    let mut g = gram.clone();
    for i in 0..g.nrows() {
        g[[i, i]] += lambda;
    }
    let l = cholesky(&g.view()).map_err(|_| {
        Error::LinearSolve(
            "normal matrix is singular; use a positive regularization constant".into(),
        )
    })?;
    Ok(chol_solve(&l.view(), &rhs.view()))
}

/// One full alternating sweep (Z update then W update) in place.
pub fn als_sweep<R: Rng + ?Sized>(
    a: &MaskedMatrix,
    s: &mut FactorState,
    cfg: &AlsConfig,
    rng: &mut R,
) -> Result<()> {
    // With a bias term the first row of Z and last column of W stay fixed
    // at one; the reduced updates solve only for the free block.
    let k = s.w.ncols();
    let (w_free, z_free): (Vec<usize>, Vec<usize>) = if cfg.bias {
        ((0..k - 1).collect(), (1..k).collect())
    } else {
        ((0..k).collect(), (0..k).collect())
    };

    match cfg.mode {
        AlsMode::Full | AlsMode::Masked => {
            // Z columns: z_n = (W[o,:]' W[o,:] + lambda I)^{-1} W[o,:]' a_n[o]
            for n in 0..a.ncols() {
                let rows: Vec<usize> = a.col_observed(n).collect();
                if rows.is_empty() {
                    continue;
                }
                let kf = z_free.len();
                let mut gram = Array2::<f64>::zeros((kf, kf));
                let mut rhs = Array1::<f64>::zeros(kf);
                for &m in &rows {
                    let mut target = a.values[[m, n]];
                    if cfg.bias {
                        target -= s.w[[m, 0]]; // fixed first row of Z is one
                    }
                    for (i, &ki) in z_free.iter().enumerate() {
                        let wi = s.w[[m, ki]];
                        rhs[i] += wi * target;
                        for (j, &kj) in z_free.iter().enumerate() {
                            gram[[i, j]] += wi * s.w[[m, kj]];
                        }
                    }
                }
                let sol = reg_solve(&gram, cfg.lambda_z, &rhs)?;
                for (i, &ki) in z_free.iter().enumerate() {
                    s.z[[ki, n]] = sol[i];
                }
            }
            // W rows: w_m = (Z[:,p] Z[:,p]' + lambda I)^{-1} Z[:,p] b_m[p]
            for m in 0..a.nrows() {
                let cols: Vec<usize> = a.row_observed(m).collect();
                if cols.is_empty() {
                    continue;
                }
                let kf = w_free.len();
                let mut gram = Array2::<f64>::zeros((kf, kf));
                let mut rhs = Array1::<f64>::zeros(kf);
                for &n in &cols {
                    let mut target = a.values[[m, n]];
                    if cfg.bias {
                        target -= s.z[[k - 1, n]]; // fixed last column of W is one
                    }
                    for (i, &ki) in w_free.iter().enumerate() {
                        let zi = s.z[[ki, n]];
                        rhs[i] += zi * target;
                        for (j, &kj) in w_free.iter().enumerate() {
                            gram[[i, j]] += zi * s.z[[kj, n]];
                        }
                    }
                }
                let sol = reg_solve(&gram, cfg.lambda_w, &rhs)?;
                for (i, &ki) in w_free.iter().enumerate() {
                    s.w[[m, ki]] = sol[i];
                }
            }
        }
        AlsMode::Gradient => {
            for n in 0..a.ncols() {
                let rows: Vec<usize> = a.col_observed(n).collect();
                if rows.is_empty() {
                    continue;
                }
                let mut grad = Array1::<f64>::zeros(k);
                for &m in &rows {
                    let resid = s.predict(m, n) - a.values[[m, n]];
                    for kk in 0..k {
                        grad[kk] += 2.0 * resid * s.w[[m, kk]];
                    }
                }
                for kk in 0..k {
                    grad[kk] += 2.0 * cfg.lambda_z * s.z[[kk, n]];
                }
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > GRAD_NORM_GUARD {
                    for kk in 0..k {
                        s.z[[kk, n]] -= cfg.eta_z * grad[kk] / norm;
                    }
                }
            }
            for m in 0..a.nrows() {
                let cols: Vec<usize> = a.row_observed(m).collect();
                if cols.is_empty() {
                    continue;
                }
                let mut grad = Array1::<f64>::zeros(k);
                for &n in &cols {
                    let resid = s.predict(m, n) - a.values[[m, n]];
                    for kk in 0..k {
                        grad[kk] += 2.0 * resid * s.z[[kk, n]];
                    }
                }
                for kk in 0..k {
                    grad[kk] += 2.0 * cfg.lambda_w * s.w[[m, kk]];
                }
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > GRAD_NORM_GUARD {
                    for kk in 0..k {
                        s.w[[m, kk]] -= cfg.eta_w * grad[kk] / norm;
                    }
                }
            }
        }
        AlsMode::Sgd => {
            let obs: Vec<(usize, usize)> = (0..a.nrows())
                .flat_map(|m| (0..a.ncols()).map(move |n| (m, n)))
                .filter(|&(m, n)| a.mask[[m, n]])
                .collect();
            for _ in 0..obs.len() {
                let &(m, n) = &obs[rng.random_range(0..obs.len())];
                als_sgd_step(s, a.values[[m, n]], m, n, cfg);
            }
        }
    }
    Ok(())
}

/// Stochastic update of z_n and w_m from the single observation a_mn,
/// stepping along the normalized negative gradient of the per-example
/// regularized loss.
pub fn als_sgd_step(s: &mut FactorState, a_mn: f64, m: usize, n: usize, cfg: &AlsConfig) {
    let k = s.w.ncols();
    let resid = s.predict(m, n) - a_mn;
    let mut grad_z = Array1::<f64>::zeros(k);
    for kk in 0..k {
        grad_z[kk] = 2.0 * resid * s.w[[m, kk]] + 2.0 * cfg.lambda_z * s.z[[kk, n]];
    }
    let norm_z = grad_z.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm_z > GRAD_NORM_GUARD {
        for kk in 0..k {
            s.z[[kk, n]] -= cfg.eta_z * grad_z[kk] / norm_z;
        }
    }
    let resid = s.predict(m, n) - a_mn;
    let mut grad_w = Array1::<f64>::zeros(k);
    for kk in 0..k {
        grad_w[kk] = 2.0 * resid * s.z[[kk, n]] + 2.0 * cfg.lambda_w * s.w[[m, kk]];
    }
    let norm_w = grad_w.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm_w > GRAD_NORM_GUARD {
        for kk in 0..k {
            s.w[[m, kk]] -= cfg.eta_w * grad_w[kk] / norm_w;
        }
    }
}

/// Fits A ~ W Z by alternating least squares.
///
/// Factors initialize from standard normal draws; the loss history records
/// the masked mean squared error after each sweep. Stops on relative loss
/// change below `tol` or after `max_iters` sweeps.
pub fn als_fit<R: Rng + ?Sized>(
    a: &MaskedMatrix,
    cfg: &AlsConfig,
    rng: &mut R,
) -> Result<(FactorState, Vec<f64>)> {
    cfg.validate(a)?;
    let (m, n) = (a.nrows(), a.ncols());
    let mut w = Array2::from_shape_fn((m, cfg.k), |_| StandardNormal.sample(rng));
    let mut z = Array2::from_shape_fn((cfg.k, n), |_| StandardNormal.sample(rng));
    if cfg.bias {
        if cfg.k < 2 {
            return Err(Error::InvalidParameter(
                "bias-term ALS needs K >= 2 (one factor is consumed by the offsets)".into(),
            ));
        }
        for i in 0..m {
            w[[i, cfg.k - 1]] = 1.0;
        }
        for j in 0..n {
            z[[0, j]] = 1.0;
        }
    }
    let mut s = FactorState::new(w, z, 1.0)?;
    let mut history = Vec::with_capacity(cfg.max_iters);
    let mut prev = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        als_sweep(a, &mut s, cfg, rng)?;
        let loss = masked_mse(a, &s)?;
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

/// Regularized objective sum_Omega (a - w'z)^2 + lambda_w ||W||^2 + lambda_z ||Z||^2.
pub fn regularized_objective(a: &MaskedMatrix, s: &FactorState, cfg: &AlsConfig) -> Result<f64> {
    let fit = crate::masked::frobenius_loss(a, s)?;
    let ww: f64 = s.w.iter().map(|v| v * v).sum();
    let zz: f64 = s.z.iter().map(|v| v * v).sum();
    Ok(fit + cfg.lambda_w * ww + cfg.lambda_z * zz)
}
