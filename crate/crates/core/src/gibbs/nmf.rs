//! Gibbs samplers for nonnegative Bayesian matrix factorization: GEE, GEEA,
//! GTT, GTTN, GRR, GRRN, the norm family GL1^2 / GL2^2 / GLinf / GL2inf^2,
//! the semi-nonnegative GEG and GnVG, and the GEEE tri-factorization.
//!
//! Every nonnegative conditional is a truncated normal; the models differ
//! only in the extra precision added to the parent variance and the prior
//! term added to the parent mean.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dist::{rn_to_gtn, GammaParams, GtnParams, RnParams};
use crate::error::{Error, Result};
use crate::gibbs::rmf::{ggg_z_posterior, gvg_w_posterior, sample_sigma2};
use crate::gibbs::{GibbsConfig, GibbsTrace};
use crate::masked::{masked_mse, FactorState, MaskedMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmfModel {
    Gee,
    Geea,
    Gtt,
    Gttn,
    Grr,
    Grrn,
    Gl12,
    Gl22,
    GlInf,
    Gl2Inf2,
    Geg,
    Gnvg,
    Geee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormVariant {
    L12,
    L22,
    LInf,
    L2Inf2,
}

/// Hyperparameters shared by the nonnegative family. Per-entry arrays are
/// collapsed to shared scalars, matching the common practice of setting all
/// prior parameters to the same value; the hierarchical models (GTTN, GRRN)
/// expand them into per-entry state inside the chain.
#[derive(Debug, Clone)]
pub struct NmfHyper {
    pub exp_lambda_w: f64,
    pub exp_lambda_z: f64,
    pub tn_mu: f64,
    pub tn_tau: f64,
    pub rn_lambda: f64,
    /// TNSNG hyperprior (mu_mu, tau_mu, a, b).
    pub gtn_mu_mu: f64,
    pub gtn_tau_mu: f64,
    pub gtn_a: f64,
    pub gtn_b: f64,
    /// RNSNG rate hyperprior.
    pub rnsng_alpha: f64,
    /// Zero means "use the uninformative sqrt(mean(A)/K) choice".
    pub rnsng_beta: f64,
    /// GEEA factor-rate hyperprior.
    pub ard_alpha: f64,
    pub ard_beta: f64,
    /// Norm-family per-factor strengths.
    pub norm_lambda: f64,
    pub alpha_sigma: f64,
    pub beta_sigma: f64,
    /// Tri-factor exponential rate for F.
    pub tri_lambda_f: f64,
    /// Gaussian precision for Z in the semi-nonnegative models.
    pub gauss_lambda_z: f64,
    /// Volume strength for GnVG.
    pub gamma_vol: f64,
    /// Inner dimension L of the middle factor (GEEE).
    pub tri_l: usize,
}

impl NmfHyper {
    pub fn default_for(_model: NmfModel, k: usize) -> Self {
        Self {
            exp_lambda_w: 0.1,
            exp_lambda_z: 0.1,
            tn_mu: 0.0,
            tn_tau: 0.1,
            rn_lambda: 0.1,
            gtn_mu_mu: 0.0,
            gtn_tau_mu: 0.1,
            gtn_a: 1.0,
            gtn_b: 1.0,
            rnsng_alpha: 1.0,
            rnsng_beta: 0.0,
            ard_alpha: 1.0,
            ard_beta: 1.0,
            norm_lambda: 0.1,
            alpha_sigma: 1.0,
            beta_sigma: 1.0,
            tri_lambda_f: 0.1,
            gauss_lambda_z: 0.1,
            gamma_vol: 0.1,
            tri_l: k,
        }
    }
}

/// Observed-data sums for the w_mk conditional: (sum_j z_kj^2,
/// sum_j z_kj (a_mj - prediction excluding factor k)).
fn w_data_sums(m: usize, k: usize, a: &MaskedMatrix, s: &FactorState) -> (f64, f64) {
    let mut prec = 0.0;
    let mut term = 0.0;
    for j in a.row_observed(m) {
        let zkj = s.z[[k, j]];
        let resid = a.values[[m, j]] - (s.predict(m, j) - s.w[[m, k]] * zkj);
        prec += zkj * zkj;
        term += zkj * resid;
    }
    (prec, term)
}

fn z_data_sums(k: usize, n: usize, a: &MaskedMatrix, s: &FactorState) -> (f64, f64) {
    let mut prec = 0.0;
    let mut term = 0.0;
    for i in a.col_observed(n) {
        let wik = s.w[[i, k]];
        let resid = a.values[[i, n]] - (s.predict(i, n) - wik * s.z[[k, n]]);
        prec += wik * wik;
        term += wik * resid;
    }
    (prec, term)
}

/// Shared truncated-normal conditional shape:
/// parent variance = sigma^2 / (data_prec + sigma^2 * extra_prec),
/// parent mean = variance * (prior_term + data_term / sigma^2).
fn tn_conditional(
    data_prec: f64,
    data_term: f64,
    sigma2: f64,
    extra_prec: f64,
    prior_term: f64,
) -> Result<GtnParams> {
    let denom = data_prec + sigma2 * extra_prec;
    if !(denom > 0.0) {
        return Err(Error::DegenerateVariance(0, 0));
    }
    let var = sigma2 / denom;
    let mean = var * (prior_term + data_term / sigma2);
    GtnParams::truncated_normal(mean, 1.0 / var)
}

/// GEE conditional of w_mk under the exponential prior with rate lambda.
pub fn gee_w_posterior(
    m: usize,
    k: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda: f64,
) -> Result<GtnParams> {
    let (prec, term) = w_data_sums(m, k, a, s);
    tn_conditional(prec, term, s.sigma2, 0.0, -lambda)
}

pub fn gee_sample_w_entry<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda: f64,
    rng: &mut R,
) -> Result<f64> {
    Ok(gee_w_posterior(m, k, a, s, lambda)?.sample(rng))
}

pub fn gee_z_posterior(
    k: usize,
    n: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda: f64,
) -> Result<GtnParams> {
    let (prec, term) = z_data_sums(k, n, a, s);
    tn_conditional(prec, term, s.sigma2, 0.0, -lambda)
}

/// GEEA factor-rate conditional: Gamma(M + N + alpha,
/// sum of the k-th column of W plus the k-th row of Z + beta).
pub fn geea_lambda_posterior(k: usize, s: &FactorState, alpha: f64, beta: f64) -> (f64, f64) {
    let sw: f64 = s.w.column(k).iter().sum();
    let sz: f64 = s.z.row(k).iter().sum();
    (
        (s.w.nrows() + s.z.ncols()) as f64 + alpha,
        sw + sz + beta,
    )
}

pub fn geea_sample_lambda_k<R: Rng + ?Sized>(
    k: usize,
    s: &FactorState,
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> Result<f64> {
    let (shape, rate) = geea_lambda_posterior(k, s, alpha, beta);
    Ok(GammaParams::new(shape, rate)?.sample(rng))
}

/// GTT conditional of w_mk under the TN(mu, 1/tau) prior.
pub fn gtt_w_posterior(
    m: usize,
    k: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    mu: f64,
    tau: f64,
) -> Result<GtnParams> {
    let (prec, term) = w_data_sums(m, k, a, s);
    tn_conditional(prec, term, s.sigma2, tau, tau * mu)
}

pub fn gtt_sample_w_entry<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    mu: f64,
    tau: f64,
    rng: &mut R,
) -> Result<f64> {
    Ok(gtt_w_posterior(m, k, a, s, mu, tau)?.sample(rng))
}

pub fn gtt_z_posterior(
    k: usize,
    n: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    mu: f64,
    tau: f64,
) -> Result<GtnParams> {
    let (prec, term) = z_data_sums(k, n, a, s);
    tn_conditional(prec, term, s.sigma2, tau, tau * mu)
}

/// GTTN hyper updates for one (mu, tau) pair given the entry value w:
/// mu ~ N((tau w + tau_mu mu_mu) / (tau + tau_mu), 1 / (tau + tau_mu)),
/// tau ~ Gamma(a, b + (w - mu)^2 / 2).
pub fn gttn_mu_posterior(w: f64, tau: f64, mu_mu: f64, tau_mu: f64) -> (f64, f64) {
    let t = tau + tau_mu;
    ((tau * w + tau_mu * mu_mu) / t, t)
}

pub fn gttn_tau_posterior(w: f64, mu: f64, a: f64, b: f64) -> (f64, f64) {
    (a, b + (w - mu) * (w - mu) / 2.0)
}

pub fn gttn_update_hyper<R: Rng + ?Sized>(
    w: f64,
    mu: &mut f64,
    tau: &mut f64,
    h: &NmfHyper,
    rng: &mut R,
) -> Result<()> {
    let (m_post, t_post) = gttn_mu_posterior(w, *tau, h.gtn_mu_mu, h.gtn_tau_mu);
    *mu = m_post + rng.sample::<f64, _>(StandardNormal) / t_post.sqrt();
    let (shape, rate) = gttn_tau_posterior(w, *mu, h.gtn_a, h.gtn_b);
    *tau = GammaParams::new(shape, rate)?.sample(rng);
    Ok(())
}

/// GRR / GRRN conditional of w_mk under the RN(mu, 1/tau, lambda) prior:
/// identical to GTT after mapping the parent mean to (tau mu - lambda)/tau.
pub fn grr_w_posterior(
    m: usize,
    k: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    prior: RnParams,
) -> Result<GtnParams> {
    let mapped = rn_to_gtn(prior);
    gtt_w_posterior(m, k, a, s, mapped.mu, mapped.tau)
}

/// GRRN rate update: Gamma(alpha + 1, beta + w).
pub fn grrn_lambda_posterior(w: f64, alpha: f64, beta: f64) -> (f64, f64) {
    (alpha + 1.0, beta + w)
}

/// GRRN tau update: Gamma(a + 1/2, b + (w - mu)^2 / 2); the shape exceeds
/// the GTTN shape by exactly one half.
pub fn grrn_tau_posterior(w: f64, mu: f64, a: f64, b: f64) -> (f64, f64) {
    (a + 0.5, b + (w - mu) * (w - mu) / 2.0)
}

/// Norm-family conditional for w_mk; see the posterior table for which
/// variant adds the precision term and which subtracts the mean penalty.
/// The row-max indicator uses the pre-update state, ties broken by the
/// lowest column index.
pub fn gl_w_posterior(
    variant: NormVariant,
    m: usize,
    k: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda: f64,
) -> Result<GtnParams> {
    let (prec, term) = w_data_sums(m, k, a, s);
    let row_others: f64 = (0..s.rank()).filter(|&j| j != k).map(|j| s.w[[m, j]]).sum();
    let is_row_max = {
        let mut arg = 0usize;
        let mut best = s.w[[m, 0]].abs();
        for j in 1..s.rank() {
            if s.w[[m, j]].abs() > best {
                best = s.w[[m, j]].abs();
                arg = j;
            }
        }
        arg == k
    };
    let (extra_prec, prior_term) = match variant {
        NormVariant::L12 => (lambda, -lambda * row_others),
        NormVariant::L22 => (lambda, 0.0),
        NormVariant::LInf => (0.0, if is_row_max { -lambda } else { 0.0 }),
        NormVariant::L2Inf2 => (lambda, if is_row_max { -lambda } else { 0.0 }),
    };
    tn_conditional(prec, term, s.sigma2, extra_prec, prior_term)
}

pub fn gl_sample_w_entry<R: Rng + ?Sized>(
    variant: NormVariant,
    m: usize,
    k: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda: f64,
    rng: &mut R,
) -> Result<f64> {
    Ok(gl_w_posterior(variant, m, k, a, s, lambda)?.sample(rng))
}

fn gl_z_posterior(
    variant: NormVariant,
    k: usize,
    n: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda: f64,
) -> Result<GtnParams> {
    let (prec, term) = z_data_sums(k, n, a, s);
    let col_others: f64 = (0..s.rank()).filter(|&j| j != k).map(|j| s.z[[j, n]]).sum();
    let is_col_max = {
        let mut arg = 0usize;
        let mut best = s.z[[0, n]].abs();
        for j in 1..s.rank() {
            if s.z[[j, n]].abs() > best {
                best = s.z[[j, n]].abs();
                arg = j;
            }
        }
        arg == k
    };
    let (extra_prec, prior_term) = match variant {
        NormVariant::L12 => (lambda, -lambda * col_others),
        NormVariant::L22 => (lambda, 0.0),
        NormVariant::LInf => (0.0, if is_col_max { -lambda } else { 0.0 }),
        NormVariant::L2Inf2 => (lambda, if is_col_max { -lambda } else { 0.0 }),
    };
    tn_conditional(prec, term, s.sigma2, extra_prec, prior_term)
}

/// GEEE conditional of the middle factor entry f_kl:
/// parent variance = sigma^2 / sum_{(i,j) in Omega} (w_ik z_lj)^2;
/// parent mean folds the exponential rate and the cross-term-excluded
/// residuals. A zero denominator (W or Z column vanished) is an error.
pub fn geee_f_posterior(
    k: usize,
    l: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda_f: f64,
) -> Result<GtnParams> {
    let f = s
        .f
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("GEEE needs a middle factor".into()))?;
    let mut denom = 0.0;
    let mut term = 0.0;
    for i in 0..a.nrows() {
        let wik = s.w[[i, k]];
        if wik == 0.0 {
            continue;
        }
        for j in a.row_observed(i) {
            let zlj = s.z[[l, j]];
            let coef = wik * zlj;
            // cross-term sum excluding (k, l): full prediction minus this term
            let c = s.predict(i, j) - f[[k, l]] * coef;
            denom += coef * coef;
            term += coef * (a.values[[i, j]] - c);
        }
    }
    if !(denom > 0.0) {
        return Err(Error::DegenerateVariance(k, l));
    }
    let var = s.sigma2 / denom;
    let mean = var * (-lambda_f + term / s.sigma2);
    GtnParams::truncated_normal(mean, 1.0 / var)
}

pub fn geee_sample_f_entry<R: Rng + ?Sized>(
    k: usize,
    l: usize,
    a: &MaskedMatrix,
    s: &FactorState,
    lambda_f: f64,
    rng: &mut R,
) -> Result<f64> {
    Ok(geee_f_posterior(k, l, a, s, lambda_f)?.sample(rng))
}

/// Per-entry hierarchical state for GTTN / GRRN chains.
struct HierState {
    mu_w: Array2<f64>,
    tau_w: Array2<f64>,
    lambda_w: Array2<f64>,
    mu_z: Array2<f64>,
    tau_z: Array2<f64>,
    lambda_z: Array2<f64>,
}

/// Runs a full chain of the requested nonnegative model.
pub fn fit_nmf(
    model: NmfModel,
    a: &MaskedMatrix,
    k: usize,
    hyper: &NmfHyper,
    cfg: &GibbsConfig,
) -> Result<GibbsTrace> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let (m_dim, n_dim) = (a.nrows(), a.ncols());
    let l_dim = if hyper.tri_l == 0 { k } else { hyper.tri_l };

    // Nonnegative factors start entrywise positive.
    let w = Array2::from_shape_fn((m_dim, k), |_| rng.random::<f64>() + 1e-3);
    let (z, f) = match model {
        NmfModel::Geee => {
            let f = Array2::from_shape_fn((k, l_dim), |_| rng.random::<f64>() + 1e-3);
            let z = Array2::from_shape_fn((l_dim, n_dim), |_| rng.random::<f64>() + 1e-3);
            (z, Some(f))
        }
        NmfModel::Geg | NmfModel::Gnvg => {
            // semi-nonnegative: Z is real-valued Gaussian
            let z = Array2::from_shape_fn((k, n_dim), |_| StandardNormal.sample(&mut rng));
            (z, None)
        }
        _ => {
            let z = Array2::from_shape_fn((k, n_dim), |_| rng.random::<f64>() + 1e-3);
            (z, None)
        }
    };
    let mut s = FactorState::with_middle(w, f, z, 1.0)?;

    // GRRN uninformative rate scale: beta = sqrt(mean(A) / K)
    let rnsng_beta = if hyper.rnsng_beta > 0.0 {
        hyper.rnsng_beta
    } else {
        (a.observed_mean()?.max(1e-12) / k as f64).sqrt()
    };

    let mut ard_lambda = vec![1.0f64; k];
    let mut hier = HierState {
        mu_w: Array2::from_elem((m_dim, k), hyper.tn_mu),
        tau_w: Array2::from_elem((m_dim, k), hyper.tn_tau),
        lambda_w: Array2::from_elem((m_dim, k), hyper.rn_lambda),
        mu_z: Array2::from_elem((k, n_dim), hyper.tn_mu),
        tau_z: Array2::from_elem((k, n_dim), hyper.tn_tau),
        lambda_z: Array2::from_elem((k, n_dim), hyper.rn_lambda),
    };

    let mut trace = GibbsTrace::new(*cfg);
    for iter in 0..cfg.iters {
        match model {
            NmfModel::Gee => {
                for kk in 0..k {
                    for m in 0..m_dim {
                        s.w[[m, kk]] =
                            gee_w_posterior(m, kk, a, &s, hyper.exp_lambda_w)?.sample(&mut rng);
                    }
                    for n in 0..n_dim {
                        s.z[[kk, n]] =
                            gee_z_posterior(kk, n, a, &s, hyper.exp_lambda_z)?.sample(&mut rng);
                    }
                }
            }
            NmfModel::Geea => {
                for kk in 0..k {
                    for m in 0..m_dim {
                        s.w[[m, kk]] =
                            gee_w_posterior(m, kk, a, &s, ard_lambda[kk])?.sample(&mut rng);
                    }
                    for n in 0..n_dim {
                        s.z[[kk, n]] =
                            gee_z_posterior(kk, n, a, &s, ard_lambda[kk])?.sample(&mut rng);
                    }
                    ard_lambda[kk] =
                        geea_sample_lambda_k(kk, &s, hyper.ard_alpha, hyper.ard_beta, &mut rng)?;
                }
            }
            NmfModel::Gtt => {
                for kk in 0..k {
                    for m in 0..m_dim {
                        s.w[[m, kk]] =
                            gtt_w_posterior(m, kk, a, &s, hyper.tn_mu, hyper.tn_tau)?
                                .sample(&mut rng);
                    }
                    for n in 0..n_dim {
                        s.z[[kk, n]] =
                            gtt_z_posterior(kk, n, a, &s, hyper.tn_mu, hyper.tn_tau)?
                                .sample(&mut rng);
                    }
                }
            }
            NmfModel::Gttn => {
                for kk in 0..k {
                    for m in 0..m_dim {
                        s.w[[m, kk]] = gtt_w_posterior(
                            m,
                            kk,
                            a,
                            &s,
                            hier.mu_w[[m, kk]],
                            hier.tau_w[[m, kk]],
                        )?
                        .sample(&mut rng);
                        let w_val = s.w[[m, kk]];
                        let (mut mu, mut tau) = (hier.mu_w[[m, kk]], hier.tau_w[[m, kk]]);
                        gttn_update_hyper(w_val, &mut mu, &mut tau, hyper, &mut rng)?;
                        hier.mu_w[[m, kk]] = mu;
                        hier.tau_w[[m, kk]] = tau;
                    }
                    for n in 0..n_dim {
                        s.z[[kk, n]] = gtt_z_posterior(
                            kk,
                            n,
                            a,
                            &s,
                            hier.mu_z[[kk, n]],
                            hier.tau_z[[kk, n]],
                        )?
                        .sample(&mut rng);
                        let z_val = s.z[[kk, n]];
                        let (mut mu, mut tau) = (hier.mu_z[[kk, n]], hier.tau_z[[kk, n]]);
                        gttn_update_hyper(z_val, &mut mu, &mut tau, hyper, &mut rng)?;
                        hier.mu_z[[kk, n]] = mu;
                        hier.tau_z[[kk, n]] = tau;
                    }
                }
            }
            NmfModel::Grr | NmfModel::Grrn => {
                let hierarchical = model == NmfModel::Grrn;
                for kk in 0..k {
                    for m in 0..m_dim {
                        let prior = RnParams::new(
                            hier.mu_w[[m, kk]],
                            hier.tau_w[[m, kk]],
                            hier.lambda_w[[m, kk]],
                        )?;
                        s.w[[m, kk]] = grr_w_posterior(m, kk, a, &s, prior)?.sample(&mut rng);
                        if hierarchical {
                            let w_val = s.w[[m, kk]];
                            let (m_post, t_post) = gttn_mu_posterior(
                                w_val,
                                hier.tau_w[[m, kk]],
                                hyper.gtn_mu_mu,
                                hyper.gtn_tau_mu,
                            );
                            hier.mu_w[[m, kk]] =
                                m_post + rng.sample::<f64, _>(StandardNormal) / t_post.sqrt();
                            let (shape, rate) = grrn_tau_posterior(
                                w_val,
                                hier.mu_w[[m, kk]],
                                hyper.gtn_a,
                                hyper.gtn_b,
                            );
                            hier.tau_w[[m, kk]] = GammaParams::new(shape, rate)?.sample(&mut rng);
                            let (shape, rate) =
                                grrn_lambda_posterior(w_val, hyper.rnsng_alpha, rnsng_beta);
                            hier.lambda_w[[m, kk]] =
                                GammaParams::new(shape, rate)?.sample(&mut rng);
                        }
                    }
                    for n in 0..n_dim {
                        let prior = RnParams::new(
                            hier.mu_z[[kk, n]],
                            hier.tau_z[[kk, n]],
                            hier.lambda_z[[kk, n]],
                        )?;
                        let mapped = rn_to_gtn(prior);
                        s.z[[kk, n]] =
                            gtt_z_posterior(kk, n, a, &s, mapped.mu, mapped.tau)?.sample(&mut rng);
                        if hierarchical {
                            let z_val = s.z[[kk, n]];
                            let (m_post, t_post) = gttn_mu_posterior(
                                z_val,
                                hier.tau_z[[kk, n]],
                                hyper.gtn_mu_mu,
                                hyper.gtn_tau_mu,
                            );
                            hier.mu_z[[kk, n]] =
                                m_post + rng.sample::<f64, _>(StandardNormal) / t_post.sqrt();
                            let (shape, rate) = grrn_tau_posterior(
                                z_val,
                                hier.mu_z[[kk, n]],
                                hyper.gtn_a,
                                hyper.gtn_b,
                            );
                            hier.tau_z[[kk, n]] = GammaParams::new(shape, rate)?.sample(&mut rng);
                            let (shape, rate) =
                                grrn_lambda_posterior(z_val, hyper.rnsng_alpha, rnsng_beta);
                            hier.lambda_z[[kk, n]] =
                                GammaParams::new(shape, rate)?.sample(&mut rng);
                        }
                    }
                }
            }
            NmfModel::Gl12 | NmfModel::Gl22 | NmfModel::GlInf | NmfModel::Gl2Inf2 => {
                let variant = match model {
                    NmfModel::Gl12 => NormVariant::L12,
                    NmfModel::Gl22 => NormVariant::L22,
                    NmfModel::GlInf => NormVariant::LInf,
                    _ => NormVariant::L2Inf2,
                };
                for kk in 0..k {
                    for m in 0..m_dim {
                        s.w[[m, kk]] =
                            gl_w_posterior(variant, m, kk, a, &s, hyper.norm_lambda)?
                                .sample(&mut rng);
                    }
                    for n in 0..n_dim {
                        s.z[[kk, n]] =
                            gl_z_posterior(variant, kk, n, a, &s, hyper.norm_lambda)?
                                .sample(&mut rng);
                    }
                }
            }
            NmfModel::Geg => {
                for kk in 0..k {
                    for m in 0..m_dim {
                        s.w[[m, kk]] =
                            gee_w_posterior(m, kk, a, &s, hyper.exp_lambda_w)?.sample(&mut rng);
                    }
                    for n in 0..n_dim {
                        let (mean, var) = ggg_z_posterior(kk, n, a, &s, hyper.gauss_lambda_z);
                        s.z[[kk, n]] =
                            mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            NmfModel::Gnvg => {
                for kk in 0..k {
                    for m in 0..m_dim {
                        // GVG normal posterior restricted to [0, inf) via GTN
                        let (mean, var) = gvg_w_posterior(m, kk, a, &s, hyper.gamma_vol)?;
                        let tn = GtnParams::truncated_normal(mean, 1.0 / var)?;
                        s.w[[m, kk]] = tn.sample(&mut rng);
                    }
                    for n in 0..n_dim {
                        let (mean, var) = ggg_z_posterior(kk, n, a, &s, hyper.gauss_lambda_z);
                        s.z[[kk, n]] =
                            mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            NmfModel::Geee => {
                // W update treats (F Z) as the effective Z; Z update treats
                // (W F) as the effective W; both reuse the GEE rule.
                for kk in 0..k {
                    let mut eff = effective_w_state(&s)?;
                    for m in 0..m_dim {
                        let v = gee_w_posterior(m, kk, a, &eff, hyper.exp_lambda_w)?
                            .sample(&mut rng);
                        eff.w[[m, kk]] = v;
                        s.w[[m, kk]] = v;
                    }
                    for l in 0..l_dim {
                        s.f.as_mut().unwrap()[[kk, l]] =
                            geee_f_posterior(kk, l, a, &s, hyper.tri_lambda_f)?.sample(&mut rng);
                    }
                }
                for l in 0..l_dim {
                    let mut eff = effective_z_state(&s)?;
                    for n in 0..n_dim {
                        let v = gee_z_posterior(l, n, a, &eff, hyper.exp_lambda_z)?
                            .sample(&mut rng);
                        eff.z[[l, n]] = v;
                        s.z[[l, n]] = v;
                    }
                }
            }
        }
        s.sigma2 = sample_sigma2(a, &s, hyper.alpha_sigma, hyper.beta_sigma, &mut rng)?;
        trace.losses.push(masked_mse(a, &s)?);
        if cfg.keep(iter) {
            trace.samples.push(s.clone());
        }
    }
    Ok(trace)
}

/// Bilinear view of the tri-factor state for the W update: Z_eff = F Z.
fn effective_w_state(s: &FactorState) -> Result<FactorState> {
    let f = s.f.as_ref().unwrap();
    FactorState::new(s.w.clone(), f.dot(&s.z), s.sigma2)
}

/// Bilinear view for the Z update: W_eff = W F.
fn effective_z_state(s: &FactorState) -> Result<FactorState> {
    let f = s.f.as_ref().unwrap();
    FactorState::new(s.w.dot(f), s.z.clone(), s.sigma2)
}
