//! Gibbs samplers for real-valued Bayesian matrix factorization:
//! GGG (independent Gaussian priors), GGGM (shared multivariate prior),
//! GGGA (ARD hierarchy), GGGW (NIW hierarchy), and GVG (volume prior).

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dist::{niw_posterior, sample_niw, InvGammaParams, NiwParams};
use crate::error::{Error, Result};
use crate::gibbs::{GibbsConfig, GibbsTrace};
use crate::linalg::{cholesky, spd_inverse, Lu};
use crate::masked::{masked_mse, FactorState, MaskedMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmfModel {
    Ggg,
    Gggm,
    Ggga,
    Gggw,
    Gvg,
}

/// Hyperparameters for the real-valued model family.
#[derive(Debug, Clone)]
pub struct RmfHyper {
    /// Prior precisions for W entries (GGG/GGGM) — shared scalar.
    pub lambda_w: f64,
    /// Prior precisions for Z entries.
    pub lambda_z: f64,
    pub alpha_sigma: f64,
    pub beta_sigma: f64,
    /// ARD per-factor precisions (GGGA), resampled during the chain.
    pub ard_lambda: Vec<f64>,
    pub ard_alpha: f64,
    pub ard_beta: f64,
    /// Shared NIW prior for rows of W and columns of Z (GGGW).
    pub niw: Option<NiwParams>,
    /// Volume-prior strength (GVG).
    pub gamma_vol: f64,
}

impl RmfHyper {
    /// Algorithm-caption defaults: lambda = 0.1, alpha_sigma = beta_sigma = 1,
    /// ARD alpha = beta = 1, NIW (0, 1, K+1, I).
    pub fn default_for(model: RmfModel, k: usize) -> Self {
        Self {
            lambda_w: 0.1,
            lambda_z: 0.1,
            alpha_sigma: 1.0,
            beta_sigma: 1.0,
            ard_lambda: vec![1.0; k],
            ard_alpha: 1.0,
            ard_beta: 1.0,
            niw: match model {
                RmfModel::Gggw => Some(NiwParams::weak(k)),
                _ => None,
            },
            gamma_vol: 0.1,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_w", self.lambda_w),
            ("lambda_z", self.lambda_z),
            ("alpha_sigma", self.alpha_sigma),
            ("beta_sigma", self.beta_sigma),
            ("ard_alpha", self.ard_alpha),
            ("ard_beta", self.ard_beta),
            ("gamma_vol", self.gamma_vol),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Closed-form conditional of w_mk in the GGG model with prior precision
/// `lambda`: precision = sum_{j in Omega_m} z_kj^2 / sigma^2 + lambda,
/// mean = (var / sigma^2) * sum_j z_kj (a_mj - sum_{i != k} w_mi z_ij).
pub fn ggg_w_posterior(
    m: usize,
    k: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda: f64,
) -> (f64, f64) {
    let mut data_prec = 0.0;
    let mut data_term = 0.0;
    for j in a.row_observed(m) {
        let zkj = s.z[[k, j]];
        let resid = a.values[[m, j]] - (s.predict(m, j) - s.w[[m, k]] * zkj);
        data_prec += zkj * zkj;
        data_term += zkj * resid;
    }
    let var = 1.0 / (data_prec / s.sigma2 + lambda);
    let mean = var / s.sigma2 * data_term;
    (mean, var)
}

/// Symmetric conditional for z_kn.
pub fn ggg_z_posterior(
    k: usize,
    n: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda: f64,
) -> (f64, f64) {
    let mut data_prec = 0.0;
    let mut data_term = 0.0;
    for i in a.col_observed(n) {
        let wik = s.w[[i, k]];
        let resid = a.values[[i, n]] - (s.predict(i, n) - wik * s.z[[k, n]]);
        data_prec += wik * wik;
        data_term += wik * resid;
    }
    let var = 1.0 / (data_prec / s.sigma2 + lambda);
    let mean = var / s.sigma2 * data_term;
    (mean, var)
}

/// Draws w_mk from its conditional Gaussian.
pub fn ggg_sample_w_entry<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda: f64,
    rng: &mut R,
) -> f64 {
    let (mean, var) = ggg_w_posterior(m, k, a, s, lambda);
    mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal)
}

/// Multivariate row conditional with prior N(mu0, Sigma0):
/// precision = Sigma0^{-1} + (1/sigma^2) sum_j z_j z_j',
/// mean = Sigma (Sigma0^{-1} mu0 + (1/sigma^2) sum_j a_mj z_j).
pub fn gggm_w_row_posterior(
    m: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    prior_mean: &Array1<f64>,
    prior_prec: &Array2<f64>,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let k = s.rank();
    let mut prec = prior_prec.clone();
    let mut rhs = prior_prec.dot(prior_mean);
    for j in a.row_observed(m) {
        let zj = s.z.column(j);
        for p in 0..k {
            rhs[p] += a.values[[m, j]] * zj[p] / s.sigma2;
            for q in 0..k {
                prec[[p, q]] += zj[p] * zj[q] / s.sigma2;
            }
        }
    }
    let cov = spd_inverse(&prec.view())?;
    let mean = cov.dot(&rhs);
    Ok((mean, cov))
}

/// Column conditional, symmetric to `gggm_w_row_posterior`.
pub fn gggm_z_col_posterior(
    n: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    prior_mean: &Array1<f64>,
    prior_prec: &Array2<f64>,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let k = s.rank();
    let mut prec = prior_prec.clone();
    let mut rhs = prior_prec.dot(prior_mean);
    for i in a.col_observed(n) {
        let wi = s.w.row(i);
        for p in 0..k {
            rhs[p] += a.values[[i, n]] * wi[p] / s.sigma2;
            for q in 0..k {
                prec[[p, q]] += wi[p] * wi[q] / s.sigma2;
            }
        }
    }
    let cov = spd_inverse(&prec.view())?;
    let mean = cov.dot(&rhs);
    Ok((mean, cov))
}

/// Draws a whole W row from the multivariate conditional with the shared
/// isotropic prior N(0, lambda^{-1} I).
pub fn gggm_sample_w_row<R: Rng + ?Sized>(
    m: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda: f64,
    rng: &mut R,
) -> Result<Array1<f64>> {
    let k = s.rank();
    let prior_mean = Array1::zeros(k);
    let prior_prec = Array2::eye(k) * lambda;
    let (mean, cov) = gggm_w_row_posterior(m, a, s, &prior_mean, &prior_prec)?;
    sample_mvn(&mean, &cov, rng)
}

fn sample_mvn<R: Rng + ?Sized>(
    mean: &Array1<f64>,
    cov: &Array2<f64>,
    rng: &mut R,
) -> Result<Array1<f64>> {
    let l = cholesky(&cov.view())?;
    let std: Array1<f64> = (0..mean.len()).map(|_| StandardNormal.sample(rng)).collect();
    Ok(mean + &l.dot(&std))
}

/// Inverse-Gamma draw of the noise variance:
/// IG(|Omega|/2 + alpha, (1/2) sum_Omega residual^2 + beta).
pub fn sample_sigma2<R: Rng + ?Sized>(
    a: &MaskedMatrix,
    s: &FactorState,
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> Result<f64> {
    let mut ssq = 0.0;
    let mut nobs = 0usize;
    for m in 0..a.nrows() {
        for n in 0..a.ncols() {
            if a.mask[[m, n]] {
                let r = a.values[[m, n]] - s.predict(m, n);
                ssq += r * r;
                nobs += 1;
            }
        }
    }
    let post = InvGammaParams::new(alpha + nobs as f64 / 2.0, beta + 0.5 * ssq)?;
    Ok(post.sample(rng))
}

/// Gamma draw of the ARD factor precision:
/// Gamma((M+N)/2 + alpha, (1/2) sum_i w_ik^2 + (1/2) sum_j z_kj^2 + beta).
pub fn ggga_sample_lambda_k<R: Rng + ?Sized>(
    k: usize,
    s: &FactorState,
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> Result<f64> {
    let (shape, rate) = ggga_lambda_posterior(k, s, alpha, beta);
    Ok(crate::dist::GammaParams::new(shape, rate)?.sample(rng))
}

pub fn ggga_lambda_posterior(k: usize, s: &FactorState, alpha: f64, beta: f64) -> (f64, f64) {
    let sw: f64 = s.w.column(k).iter().map(|v| v * v).sum();
    let sz: f64 = s.z.row(k).iter().map(|v| v * v).sum();
    let (m, n) = (s.w.nrows(), s.z.ncols());
    (
        (m + n) as f64 / 2.0 + alpha,
        0.5 * sw + 0.5 * sz + beta,
    )
}

/// GGGW hyper draw: NIW posterior from the current rows (or columns), then
/// one (mean, covariance) sample from it.
pub fn gggw_sample_hyper<R: Rng + ?Sized>(
    vectors: &[Array1<f64>],
    prior: &NiwParams,
    rng: &mut R,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let post = niw_posterior(prior, vectors)?;
    sample_niw(&post, rng)
}

/// GVG conditional for w_mk under the volume prior
/// p(W) ~ exp(-gamma det(W'W)):
/// variance = 1 / (sum_j z_kj^2 / sigma^2 + gamma (D_{-k,-k} - w' Adj w)),
/// with D and Adj the determinant and adjugate of the reduced Gram matrix.
///
/// A non-positive variance is reported as a degenerate-volume error;
/// the caller shrinks gamma.
pub fn gvg_w_posterior(
    m: usize,
    k: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    gamma: f64,
) -> Result<(f64, f64)> {
    let kdim = s.rank();
    if kdim < 2 {
        return Err(Error::InvalidParameter(
            "GVG needs K >= 2 for the reduced Gram adjugate".into(),
        ));
    }
    let red = kdim - 1;
    let keep: Vec<usize> = (0..kdim).filter(|&i| i != k).collect();
    // B = W_{:,-k}' W_{:,-k}
    let mut b = Array2::<f64>::zeros((red, red));
    for (pi, &p) in keep.iter().enumerate() {
        for (qi, &q) in keep.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..s.w.nrows() {
                acc += s.w[[i, p]] * s.w[[i, q]];
            }
            b[[pi, qi]] = acc;
        }
    }
    let (det_b, adj) = adjugate(&b)?;
    let w_red: Array1<f64> = keep.iter().map(|&p| s.w[[m, p]]).collect();
    // W_{-m,-k}' w_{-m,k}: reduced-column cross products excluding row m
    let mut cross = Array1::<f64>::zeros(red);
    for (pi, &p) in keep.iter().enumerate() {
        let mut acc = 0.0;
        for i in 0..s.w.nrows() {
            if i != m {
                acc += s.w[[i, p]] * s.w[[i, k]];
            }
        }
        cross[pi] = acc;
    }

    let mut data_prec = 0.0;
    let mut data_term = 0.0;
    for j in a.row_observed(m) {
        let zkj = s.z[[k, j]];
        let resid = a.values[[m, j]] - (s.predict(m, j) - s.w[[m, k]] * zkj);
        data_prec += zkj * zkj;
        data_term += zkj * resid;
    }

    let quad = w_red.dot(&adj.dot(&w_red));
    let prec = data_prec / s.sigma2 + gamma * (det_b - quad);
    if !(prec > 0.0) {
        return Err(Error::DegenerateVolume(1.0 / prec));
    }
    let var = 1.0 / prec;
    let mean = var * (gamma * w_red.dot(&adj.dot(&cross)) + data_term / s.sigma2);
    Ok((mean, var))
}

/// Determinant and adjugate det(B) B^{-1}; falls back to cofactor expansion
/// when B is numerically singular and small enough.
fn adjugate(b: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    let n = b.nrows();
    if n == 1 {
        return Ok((b[[0, 0]], Array2::ones((1, 1))));
    }
    let scale = b.iter().map(|v| v.abs()).fold(0.0f64, f64::max).max(1.0);
    let lu = Lu::decompose(&b.view())?;
    let det = lu.det();
    if det.abs() >= 1e-12 * scale {
        let inv = lu.inverse()?;
        return Ok((det, inv * det));
    }
    if n <= 3 {
        let mut adj = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                adj[[j, i]] = cofactor(b, i, j);
            }
        }
        return Ok((det, adj));
    }
    Err(Error::DegenerateVolume(det))
}

fn cofactor(b: &Array2<f64>, i: usize, j: usize) -> f64 {
    let n = b.nrows();
    let minor: Vec<Vec<f64>> = (0..n)
        .filter(|&r| r != i)
        .map(|r| (0..n).filter(|&c| c != j).map(|c| b[[r, c]]).collect())
        .collect();
    let m = minor.len();
    let flat = Array2::from_shape_fn((m, m), |(r, c)| minor[r][c]);
    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
    sign * Lu::decompose(&flat.view()).map(|lu| lu.det()).unwrap_or(0.0)
}

pub fn gvg_sample_w_entry<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    gamma: f64,
    rng: &mut R,
) -> Result<f64> {
    let (mean, var) = gvg_w_posterior(m, k, a, s, gamma)?;
    Ok(mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal))
}

/// Runs a full chain of the requested real-valued model.
///
/// Sweep order per iteration: for each k, all m then all n (entry models);
/// row/column sweeps for GGGM/GGGW; then sigma^2; then hyper-level draws.
pub fn fit_rmf(
    model: RmfModel,
    a: &MaskedMatrix,
    k: usize,
    hyper: &RmfHyper,
    cfg: &GibbsConfig,
) -> Result<GibbsTrace> {
    hyper.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let (m_dim, n_dim) = (a.nrows(), a.ncols());
    let w = Array2::from_shape_fn((m_dim, k), |_| StandardNormal.sample(&mut rng));
    let z = Array2::from_shape_fn((k, n_dim), |_| StandardNormal.sample(&mut rng));
    let mut s = FactorState::new(w, z, 1.0)?;
    let mut h = hyper.clone();
    if h.ard_lambda.len() != k {
        h.ard_lambda = vec![1.0; k];
    }
    let niw_prior = match model {
        RmfModel::Gggw => Some(h.niw.clone().unwrap_or_else(|| NiwParams::weak(k))),
        _ => None,
    };
    // GGGW row/column prior state, refreshed from the NIW posterior each sweep
    let mut w_prior = (Array1::<f64>::zeros(k), Array2::<f64>::eye(k));
    let mut z_prior = (Array1::<f64>::zeros(k), Array2::<f64>::eye(k));

    let mut trace = GibbsTrace::new(*cfg);
    for iter in 0..cfg.iters {
        match model {
            RmfModel::Ggg => {
                for kk in 0..k {
                    for m in 0..m_dim {
                        s.w[[m, kk]] =
                            ggg_sample_w_entry(m, kk, a, &s, h.lambda_w, &mut rng);
                    }
                    for n in 0..n_dim {
                        let (mean, var) = ggg_z_posterior(kk, n, a, &s, h.lambda_z);
                        s.z[[kk, n]] =
                            mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            RmfModel::Ggga => {
                for kk in 0..k {
                    for m in 0..m_dim {
                        s.w[[m, kk]] =
                            ggg_sample_w_entry(m, kk, a, &s, h.ard_lambda[kk], &mut rng);
                    }
                    for n in 0..n_dim {
                        let (mean, var) = ggg_z_posterior(kk, n, a, &s, h.ard_lambda[kk]);
                        s.z[[kk, n]] =
                            mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    }
                    h.ard_lambda[kk] =
                        ggga_sample_lambda_k(kk, &s, h.ard_alpha, h.ard_beta, &mut rng)?;
                }
            }
            RmfModel::Gggm => {
                for m in 0..m_dim {
                    let row = gggm_sample_w_row(m, a, &s, h.lambda_w, &mut rng)?;
                    s.w.row_mut(m).assign(&row);
                }
                for n in 0..n_dim {
                    let prior_mean = Array1::zeros(k);
                    let prior_prec = Array2::eye(k) * h.lambda_z;
                    let (mean, cov) = gggm_z_col_posterior(n, a, &s, &prior_mean, &prior_prec)?;
                    let col = sample_mvn(&mean, &cov, &mut rng)?;
                    s.z.column_mut(n).assign(&col);
                }
            }
            RmfModel::Gggw => {
                for m in 0..m_dim {
                    let prec = spd_inverse(&w_prior.1.view())?;
                    let (mean, cov) = gggm_w_row_posterior(m, a, &s, &w_prior.0, &prec)?;
                    let row = sample_mvn(&mean, &cov, &mut rng)?;
                    s.w.row_mut(m).assign(&row);
                }
                for n in 0..n_dim {
                    let prec = spd_inverse(&z_prior.1.view())?;
                    let (mean, cov) = gggm_z_col_posterior(n, a, &s, &z_prior.0, &prec)?;
                    let col = sample_mvn(&mean, &cov, &mut rng)?;
                    s.z.column_mut(n).assign(&col);
                }
            }
            RmfModel::Gvg => {
                for kk in 0..k {
                    for m in 0..m_dim {
                        s.w[[m, kk]] = gvg_sample_w_entry(m, kk, a, &s, h.gamma_vol, &mut rng)?;
                    }
                    for n in 0..n_dim {
                        let (mean, var) = ggg_z_posterior(kk, n, a, &s, h.lambda_z);
                        s.z[[kk, n]] =
                            mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
        }
        s.sigma2 = sample_sigma2(a, &s, h.alpha_sigma, h.beta_sigma, &mut rng)?;
        if let Some(prior) = &niw_prior {
            let rows: Vec<Array1<f64>> = (0..m_dim).map(|m| s.w.row(m).to_owned()).collect();
            w_prior = gggw_sample_hyper(&rows, prior, &mut rng)?;
            let cols: Vec<Array1<f64>> = (0..n_dim).map(|n| s.z.column(n).to_owned()).collect();
            z_prior = gggw_sample_hyper(&cols, prior, &mut rng)?;
        }
        trace.losses.push(masked_mse(a, &s)?);
        if cfg.keep(iter) {
            trace.samples.push(s.clone());
        }
    }
    Ok(trace)
}

/// Final ARD precisions of a GGGA chain (exposed for rank diagnostics).
pub fn fit_ggga_with_lambdas(
    a: &MaskedMatrix,
    k: usize,
    hyper: &RmfHyper,
    cfg: &GibbsConfig,
) -> Result<(GibbsTrace, Vec<Vec<f64>>)> {
    // Re-runs the GGGA sweep while recording the retained lambda samples.
    hyper.validate()?;
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let (m_dim, n_dim) = (a.nrows(), a.ncols());
    let w = Array2::from_shape_fn((m_dim, k), |_| StandardNormal.sample(&mut rng));
    let z = Array2::from_shape_fn((k, n_dim), |_| StandardNormal.sample(&mut rng));
    let mut s = FactorState::new(w, z, 1.0)?;
    let mut lambdas = vec![1.0; k];
    let mut trace = GibbsTrace::new(*cfg);
    let mut kept = Vec::new();
    for iter in 0..cfg.iters {
        for kk in 0..k {
            for m in 0..m_dim {
                s.w[[m, kk]] = ggg_sample_w_entry(m, kk, a, &s, lambdas[kk], &mut rng);
            }
            for n in 0..n_dim {
                let (mean, var) = ggg_z_posterior(kk, n, a, &s, lambdas[kk]);
                s.z[[kk, n]] = mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
            }
            lambdas[kk] = ggga_sample_lambda_k(kk, &s, hyper.ard_alpha, hyper.ard_beta, &mut rng)?;
        }
        s.sigma2 = sample_sigma2(a, &s, hyper.alpha_sigma, hyper.beta_sigma, &mut rng)?;
        trace.losses.push(masked_mse(a, &s)?);
        if cfg.keep(iter) {
            trace.samples.push(s.clone());
            kept.push(lambdas.clone());
        }
    }
    Ok((trace, kept))
}
