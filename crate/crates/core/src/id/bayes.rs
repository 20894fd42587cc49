//! Bayesian interpolative decomposition: GBT and GBTN Gibbs samplers, their
//! ARD variants, the aggressive proposal-pair sampler, and the intervened
//! (importance-weighted) IID variant.
//!
//! The factor pair is X (M x N, basis columns of A at J and zero at I) and
//! Y (N x N with GTN-constrained entries); post-processing extracts
//! C = A[:, J] and W = Y[J, :] with the identity block overwritten.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{GammaParams, GtnParams, InvGammaParams};
use crate::error::{Error, Result};
use crate::gibbs::GibbsConfig;
use crate::masked::MaskedMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdVariant {
    Gbt,
    Gbtn,
    GbtArd,
    GbtnArd,
    GbtAggressive,
    Iid,
}

impl IdVariant {
    pub fn uses_ard(self) -> bool {
        matches!(self, IdVariant::GbtArd | IdVariant::GbtnArd)
    }

    pub fn hierarchical(self) -> bool {
        matches!(self, IdVariant::Gbtn | IdVariant::GbtnArd)
    }
}

/// Prior and hyperprior parameters for the Bayesian ID models.
#[derive(Debug, Clone)]
pub struct IdHyper {
    /// Magnitude bounds on Y entries (relaxable to -2, 2).
    pub a: f64,
    pub b: f64,
    pub alpha_sigma: f64,
    pub beta_sigma: f64,
    /// Shared GTN parent mean / precision for the Y prior.
    pub mu_kl: f64,
    pub tau_kl: f64,
    /// GTNSNG hyperprior (GBTN).
    pub mu_mu: f64,
    pub tau_mu: f64,
    pub alpha_t: f64,
    pub beta_t: f64,
    /// Per-column importance in (0, 1) (IID); None is the uniform 1/2.
    pub importance: Option<Vec<f64>>,
    /// Critical inner Y sweeps after each ARD state pass.
    pub nu: usize,
}

impl Default for IdHyper {
    fn default() -> Self {
        Self {
            a: -1.0,
            b: 1.0,
            alpha_sigma: 0.1,
            beta_sigma: 1.0,
            mu_kl: 0.0,
            tau_kl: 1.0,
            mu_mu: 0.0,
            tau_mu: 0.1,
            alpha_t: 1.0,
            beta_t: 1.0,
            importance: None,
            nu: 5,
        }
    }
}

impl IdHyper {
    fn validate(&self, n: usize) -> Result<()> {
        if !(self.a < self.b) {
            return Err(Error::InvalidParameter(format!(
                "bounds must satisfy a < b, got ({}, {})",
                self.a, self.b
            )));
        }
        if let Some(p) = &self.importance {
            if p.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "importance vector has {} entries for {n} columns",
                    p.len()
                )));
            }
            if p.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                return Err(Error::InvalidParameter(
                    "importance entries must lie in the open interval (0, 1)".into(),
                ));
            }
        }
        Ok(())
    }

    /// Squashes raw scores through the logistic function and clamps away
    /// from 0 and 1 to keep the swap odds finite.
    pub fn importance_from_scores(scores: &[f64]) -> Vec<f64> {
        scores
            .iter()
            .map(|&s| (1.0 / (1.0 + (-s).exp())).clamp(1e-6, 1.0 - 1e-6))
            .collect()
    }
}

/// Chain state: binary column indicator r, coefficient matrix Y, basis
/// matrix X (zero outside J), and the noise variance.
#[derive(Debug, Clone)]
pub struct IdState {
    pub r: Vec<bool>,
    pub y: Array2<f64>,
    pub x: Array2<f64>,
    pub sigma2: f64,
}

impl IdState {
    pub fn basis_indices(&self) -> Vec<usize> {
        (0..self.r.len()).filter(|&i| self.r[i]).collect()
    }

    pub fn interpolated_indices(&self) -> Vec<usize> {
        (0..self.r.len()).filter(|&i| !self.r[i]).collect()
    }

    pub fn selected_count(&self) -> usize {
        self.r.iter().filter(|&&b| b).count()
    }

    /// Rebuilds X from the state vector: X[:, J] = A[:, J], X[:, I] = 0.
    pub fn rebuild_x(&mut self, a: &MaskedMatrix) {
        for j in 0..self.r.len() {
            if self.r[j] {
                for i in 0..a.nrows() {
                    self.x[[i, j]] = a.values[[i, j]];
                }
            } else {
                for i in 0..a.nrows() {
                    self.x[[i, j]] = 0.0;
                }
            }
        }
    }
}

/// GTN conditional of y_kl:
/// precision = sum_i x_ik^2 / sigma^2 + tau_kl,
/// mean = ((1/sigma^2) sum_i x_ik (a_il - sum_{j != k} x_ij y_jl)
///         + tau_kl mu_kl) / precision,
/// sums over the observed rows of column l.
pub fn gbt_y_posterior(
    k: usize,
    l: usize,
    a: &MaskedMatrix,
    st: &IdState,
    mu_kl: f64,
    tau_kl: f64,
    bound_a: f64,
    bound_b: f64,
) -> Result<GtnParams> {
    let mut data_prec = 0.0;
    let mut data_term = 0.0;
    for i in a.col_observed(l) {
        let xik = st.x[[i, k]];
        if xik == 0.0 {
            continue;
        }
        let mut pred = 0.0;
        for j in 0..st.y.nrows() {
            pred += st.x[[i, j]] * st.y[[j, l]];
        }
        let excl = pred - xik * st.y[[k, l]];
        data_prec += xik * xik;
        data_term += xik * (a.values[[i, l]] - excl);
    }
    let tau = data_prec / st.sigma2 + tau_kl;
    let mu = (data_term / st.sigma2 + tau_kl * mu_kl) / tau;
    GtnParams::new(mu, tau, bound_a, bound_b)
}

pub fn gbt_sample_y<R: Rng + ?Sized>(
    k: usize,
    l: usize,
    a: &MaskedMatrix,
    st: &IdState,
    h: &IdHyper,
    rng: &mut R,
) -> Result<f64> {
    Ok(gbt_y_posterior(k, l, a, st, h.mu_kl, h.tau_kl, h.a, h.b)?.sample(rng))
}

/// Masked Gaussian log-likelihood of the data under the X(r) Y
/// reconstruction, up to the sigma-only normalizer (which cancels in every
/// ratio the samplers form).
fn log_likelihood(a: &MaskedMatrix, x: &Array2<f64>, y: &Array2<f64>, sigma2: f64) -> f64 {
    let recon = x.dot(y);
    let mut ssq = 0.0;
    for m in 0..a.nrows() {
        for n in 0..a.ncols() {
            if a.mask[[m, n]] {
                let r = a.values[[m, n]] - recon[[m, n]];
                ssq += r * r;
            }
        }
    }
    -0.5 * ssq / sigma2
}

fn x_for_state(a: &MaskedMatrix, r: &[bool]) -> Array2<f64> {
    let mut x = Array2::<f64>::zeros((a.nrows(), a.ncols()));
    for (j, &on) in r.iter().enumerate() {
        if on {
            for i in 0..a.nrows() {
                x[[i, j]] = a.values[[i, j]];
            }
        }
    }
    x
}

/// Swap move between an active column j and an inactive column i. The odds
/// o of the swapped state are the likelihood ratio times the prior ratio
/// (importance-weighted for IID, uniform otherwise); the swap is accepted
/// with probability o / (1 + o).
///
/// Returns true when the swap happened; X is rebuilt from the new state.
pub fn gbt_swap_state<R: Rng + ?Sized>(
    st: &mut IdState,
    j: usize,
    i: usize,
    a: &MaskedMatrix,
    importance: Option<&[f64]>,
    rng: &mut R,
) -> Result<bool> {
    if !st.r[j] || st.r[i] {
        return Err(Error::InvalidParameter(
            "swap needs an active j and an inactive i".into(),
        ));
    }
    let mut cand = st.r.clone();
    cand[j] = false;
    cand[i] = true;
    let x_cand = x_for_state(a, &cand);
    let ll_cur = log_likelihood(a, &st.x, &st.y, st.sigma2);
    let ll_cand = log_likelihood(a, &x_cand, &st.y, st.sigma2);
    let mut log_odds = ll_cand - ll_cur;
    if let Some(p) = importance {
        log_odds += ((1.0 - p[j]) / p[j]).ln() + (p[i] / (1.0 - p[i])).ln();
    }
    // flip probability o / (1 + o) = sigmoid(log o)
    let prob = 1.0 / (1.0 + (-log_odds).exp());
    let flip = rng.random::<f64>() < prob;
    if flip {
        st.r = cand;
        st.x = x_cand;
    }
    Ok(flip)
}

/// IID swap: identical to `gbt_swap_state` with the odds multiplied by
/// ((1 - p_j) / p_j) (p_i / (1 - p_i)). Uniform importance reduces it to
/// the plain swap exactly.
pub fn iid_swap<R: Rng + ?Sized>(
    st: &mut IdState,
    j: usize,
    i: usize,
    a: &MaskedMatrix,
    importance: &[f64],
    rng: &mut R,
) -> Result<bool> {
    gbt_swap_state(st, j, i, a, Some(importance), rng)
}

/// ARD single-index move: a Gibbs draw of r_j from its two-point
/// conditional, o_j = p(r_j = 0 | rest) / p(r_j = 1 | rest); r_j is set to
/// zero with probability o_j / (1 + o_j). |J| floats freely.
pub fn ard_flip<R: Rng + ?Sized>(
    st: &mut IdState,
    j: usize,
    a: &MaskedMatrix,
    rng: &mut R,
) -> Result<bool> {
    let mut r_on = st.r.clone();
    r_on[j] = true;
    let mut r_off = st.r.clone();
    r_off[j] = false;
    let x_on = x_for_state(a, &r_on);
    let x_off = x_for_state(a, &r_off);
    let ll_on = log_likelihood(a, &x_on, &st.y, st.sigma2);
    let ll_off = log_likelihood(a, &x_off, &st.y, st.sigma2);
    let log_odds = ll_off - ll_on;
    let prob_off = 1.0 / (1.0 + (-log_odds).exp());
    let off = rng.random::<f64>() < prob_off;
    st.r[j] = !off;
    if off {
        st.x = x_off;
    } else {
        st.x = x_on;
    }
    Ok(!off)
}

/// Strips the chain factors to C = A[:, J] and W = Y[J, :] with the identity
/// submatrix W[:, J] = I overwritten exactly.
pub fn post_process(st: &IdState, a: &MaskedMatrix) -> (Array2<f64>, Array2<f64>, Vec<usize>) {
    let j_set = st.basis_indices();
    let kk = j_set.len();
    let n = a.ncols();
    let mut c = Array2::<f64>::zeros((a.nrows(), kk));
    for (col, &orig) in j_set.iter().enumerate() {
        for i in 0..a.nrows() {
            c[[i, col]] = a.values[[i, orig]];
        }
    }
    let mut w = Array2::<f64>::zeros((kk, n));
    for (row, &orig_row) in j_set.iter().enumerate() {
        for col in 0..n {
            w[[row, col]] = st.y[[orig_row, col]];
        }
    }
    for (row, &orig_col) in j_set.iter().enumerate() {
        for (rr, _) in j_set.iter().enumerate() {
            w[[rr, orig_col]] = if rr == row { 1.0 } else { 0.0 };
        }
    }
    (c, w, j_set)
}

/// Masked MSE of the X Y reconstruction.
pub fn id_mse(a: &MaskedMatrix, x: &Array2<f64>, y: &Array2<f64>) -> Result<f64> {
    let recon = x.dot(y);
    let mut ssq = 0.0;
    let mut count = 0usize;
    for m in 0..a.nrows() {
        for n in 0..a.ncols() {
            if a.mask[[m, n]] {
                let r = a.values[[m, n]] - recon[[m, n]];
                ssq += r * r;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(ssq / count as f64)
}

/// Chain trace: per-iteration MSE and retained state-vector samples.
#[derive(Debug, Clone)]
pub struct IdTrace {
    pub losses: Vec<f64>,
    pub r_samples: Vec<Vec<bool>>,
    pub config: GibbsConfig,
}

impl IdTrace {
    /// Most frequent selected-column count among retained samples.
    pub fn modal_selected_count(&self) -> Option<usize> {
        if self.r_samples.is_empty() {
            return None;
        }
        let mut counts: std::collections::BTreeMap<usize, usize> = Default::default();
        for r in &self.r_samples {
            *counts.entry(r.iter().filter(|&&b| b).count()).or_insert(0) += 1;
        }
        counts
            .into_iter()
            .max_by_key(|&(_, freq)| freq)
            .map(|(k, _)| k)
    }

    /// Fraction of retained samples with column j selected.
    pub fn selection_frequency(&self, j: usize) -> f64 {
        if self.r_samples.is_empty() {
            return 0.0;
        }
        let hits = self.r_samples.iter().filter(|r| r[j]).count();
        hits as f64 / self.r_samples.len() as f64
    }
}

pub struct IdFit {
    pub trace: IdTrace,
    pub state: IdState,
}

/// Runs a Bayesian ID chain.
///
/// Non-ARD variants hold |J| = k fixed through one uniform swap proposal
/// per iteration; ARD variants pass over every index and then run `nu`
/// inner Y sweeps; the aggressive variant keeps one proposal pair
/// (r2, X2, Y2) and selects between the pair each iteration.
pub fn fit_id(
    variant: IdVariant,
    a: &MaskedMatrix,
    k: Option<usize>,
    h: &IdHyper,
    cfg: &GibbsConfig,
) -> Result<IdFit> {
    let n = a.ncols();
    h.validate(n)?;
    if variant == IdVariant::Iid && h.importance.is_none() {
        return Err(Error::InvalidParameter(
            "IID needs an importance vector".into(),
        ));
    }
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    // initial state: random K-subset (fixed-size variants) or Bernoulli(1/2)
    let mut r = vec![false; n];
    match k {
        Some(kk) if !variant.uses_ard() => {
            if kk == 0 || kk > n {
                return Err(Error::InvalidParameter(format!(
                    "K = {kk} out of range for {n} columns"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            for &idx in order.iter().take(kk) {
                r[idx] = true;
            }
        }
        _ => {
            for flag in r.iter_mut() {
                *flag = rng.random::<f64>() < 0.5;
            }
            if !r.iter().any(|&b| b) {
                r[0] = true;
            }
        }
    }
    let prior = GtnParams::new(h.mu_kl, h.tau_kl, h.a, h.b)?;
    let y = Array2::from_shape_fn((n, n), |_| prior.sample(&mut rng));
    let mut st = IdState {
        r,
        y: y.clone(),
        x: Array2::zeros((a.nrows(), n)),
        sigma2: 1.0,
    };
    st.rebuild_x(a);

    // per-entry hyper state for GBTN
    let mut mu = Array2::from_elem((n, n), h.mu_kl);
    let mut tau = Array2::from_elem((n, n), h.tau_kl);

    // aggressive proposal pair
    let mut prop: Option<(Vec<bool>, Array2<f64>, Array2<f64>)> = if variant
        == IdVariant::GbtAggressive
    {
        let r2 = propose_swap(&st.r, &mut rng);
        let x2 = x_for_state(a, &r2);
        let y2 = y.clone();
        Some((r2, x2, y2))
    } else {
        None
    };

    let mut trace = IdTrace {
        losses: Vec::with_capacity(cfg.iters),
        r_samples: Vec::new(),
        config: *cfg,
    };

    for iter in 0..cfg.iters {
        match variant {
            IdVariant::Gbt | IdVariant::Gbtn | IdVariant::Iid => {
                let j_set = st.basis_indices();
                let i_set = st.interpolated_indices();
                if !j_set.is_empty() && !i_set.is_empty() {
                    let j = j_set[rng.random_range(0..j_set.len())];
                    let i = i_set[rng.random_range(0..i_set.len())];
                    gbt_swap_state(&mut st, j, i, a, h.importance.as_deref(), &mut rng)?;
                }
            }
            IdVariant::GbtArd | IdVariant::GbtnArd => {
                for j in 0..n {
                    let was_on = st.r[j];
                    if was_on && st.selected_count() == 1 {
                        continue; // keep at least one basis column
                    }
                    ard_flip(&mut st, j, a, &mut rng)?;
                }
            }
            IdVariant::GbtAggressive => {
                let (r2, x2, y2) = prop.take().expect("proposal pair is maintained");
                let ll1 = log_likelihood(a, &st.x, &st.y, st.sigma2);
                let ll2 = log_likelihood(a, &x2, &y2, st.sigma2);
                let prob2 = 1.0 / (1.0 + (-(ll2 - ll1)).exp());
                if rng.random::<f64>() < prob2 {
                    st.r = r2;
                    st.x = x2;
                    st.y = y2;
                }
                let r_next = propose_swap(&st.r, &mut rng);
                let x_next = x_for_state(a, &r_next);
                prop = Some((r_next, x_next, st.y.clone()));
            }
        }
        st.rebuild_x(a);

        // noise variance
        let recon = st.x.dot(&st.y);
        let mut ssq = 0.0;
        let mut nobs = 0usize;
        for m in 0..a.nrows() {
            for nn in 0..a.ncols() {
                if a.mask[[m, nn]] {
                    let res = a.values[[m, nn]] - recon[[m, nn]];
                    ssq += res * res;
                    nobs += 1;
                }
            }
        }
        st.sigma2 = InvGammaParams::new(
            h.alpha_sigma + nobs as f64 / 2.0,
            h.beta_sigma + 0.5 * ssq,
        )?
        .sample(&mut rng);

        // Y sweeps (nu inner repeats for ARD)
        let sweeps = if variant.uses_ard() { h.nu } else { 1 };
        for _ in 0..sweeps {
            for kk in 0..n {
                for l in 0..n {
                    let p =
                        gbt_y_posterior(kk, l, a, &st, mu[[kk, l]], tau[[kk, l]], h.a, h.b)?;
                    st.y[[kk, l]] = p.sample(&mut rng);
                    if variant.hierarchical() {
                        let yv = st.y[[kk, l]];
                        // mu update: N((tau y + tau_mu mu_mu) / t, 1/t)
                        let t = tau[[kk, l]] + h.tau_mu;
                        let m_post = (tau[[kk, l]] * yv + h.tau_mu * h.mu_mu) / t;
                        let std: f64 = rand_distr::Distribution::sample(
                            &rand_distr::StandardNormal,
                            &mut rng,
                        );
                        mu[[kk, l]] = m_post + std / t.sqrt();
                        // tau update: Gamma(alpha_t + 1/2, beta_t + (y - mu)^2 / 2)
                        let rate = h.beta_t + (yv - mu[[kk, l]]).powi(2) / 2.0;
                        tau[[kk, l]] =
                            GammaParams::new(h.alpha_t + 0.5, rate)?.sample(&mut rng);
                    }
                }
            }
        }

        // aggressive: refresh the proposal's Y with the proposal X
        if let Some((_, x2, y2)) = prop.as_mut() {
            let st2 = IdState {
                r: st.r.clone(),
                y: y2.clone(),
                x: x2.clone(),
                sigma2: st.sigma2,
            };
            for kk in 0..n {
                for l in 0..n {
                    let p = gbt_y_posterior(kk, l, a, &st2, mu[[kk, l]], tau[[kk, l]], h.a, h.b)?;
                    y2[[kk, l]] = p.sample(&mut rng);
                }
            }
        }

        trace.losses.push(id_mse(a, &st.x, &st.y)?);
        if cfg.keep(iter) {
            trace.r_samples.push(st.r.clone());
        }
    }
    Ok(IdFit { trace, state: st })
}

fn propose_swap<R: Rng + ?Sized>(r: &[bool], rng: &mut R) -> Vec<bool> {
    let j_set: Vec<usize> = (0..r.len()).filter(|&i| r[i]).collect();
    let i_set: Vec<usize> = (0..r.len()).filter(|&i| !r[i]).collect();
    let mut cand = r.to_vec();
    if !j_set.is_empty() && !i_set.is_empty() {
        let j = j_set[rng.random_range(0..j_set.len())];
        let i = i_set[rng.random_range(0..i_set.len())];
        cand[j] = false;
        cand[i] = true;
    }
    cand
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_state(a: &MaskedMatrix, active: &[bool]) -> IdState {
        let n = a.ncols();
        let mut st = IdState {
            r: active.to_vec(),
            y: Array2::zeros((n, n)),
            x: Array2::zeros((a.nrows(), n)),
            sigma2: 1.0,
        };
        st.rebuild_x(a);
        st
    }

    #[test]
    fn y_posterior_prior_limit() {
        // zero X column: the conditional equals the GTN prior
        let a = MaskedMatrix::full(array![[1.0, 2.0], [0.5, -1.0]]);
        let st = small_state(&a, &[false, true]);
        let h = IdHyper::default();
        let p = gbt_y_posterior(0, 0, &a, &st, h.mu_kl, h.tau_kl, h.a, h.b).unwrap();
        assert_abs_diff_eq!(p.mu, h.mu_kl, epsilon = 1e-14);
        assert_abs_diff_eq!(p.tau, h.tau_kl, epsilon = 1e-14);
        assert_eq!((p.a, p.b), (h.a, h.b));
    }

    #[test]
    fn y_draws_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = MaskedMatrix::full(array![[5.0, 2.0], [3.0, -1.0]]);
        let mut st = small_state(&a, &[true, false]);
        let h = IdHyper::default();
        for _ in 0..500 {
            for kk in 0..2 {
                for l in 0..2 {
                    st.y[[kk, l]] = gbt_sample_y(kk, l, &a, &st, &h, &mut rng).unwrap();
                    assert!(
                        (h.a..=h.b).contains(&st.y[[kk, l]]),
                        "draw {} outside bounds",
                        st.y[[kk, l]]
                    );
                }
            }
        }
    }

    #[test]
    fn swap_between_duplicates_is_fair() {
        // identical columns with identical Y rows: likelihood ratio 1,
        // uniform prior -> flip probability exactly 1/2
        let a = MaskedMatrix::full(array![[1.0, 1.0], [2.0, 2.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut flips = 0usize;
        let trials = 20_000;
        for _ in 0..trials {
            let mut st = small_state(&a, &[true, false]);
            st.y = array![[1.0, 1.0], [1.0, 1.0]];
            if gbt_swap_state(&mut st, 0, 1, &a, None, &mut rng).unwrap() {
                flips += 1;
            }
        }
        let freq = flips as f64 / trials as f64;
        let se = (0.25f64 / trials as f64).sqrt();
        assert!((freq - 0.5).abs() < 4.0 * se, "flip frequency {freq}");
    }

    #[test]
    fn dominant_candidate_always_wins() {
        // candidate column reconstructs A exactly; incumbent is noise
        let a = MaskedMatrix::full(array![[10.0, 0.01], [20.0, 0.02]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut flips = 0usize;
        for _ in 0..1000 {
            let mut st = small_state(&a, &[false, true]);
            // Y routes column 0's reconstruction through column 0
            st.y = array![[1.0, 0.001], [0.0, 0.0]];
            if gbt_swap_state(&mut st, 1, 0, &a, None, &mut rng).unwrap() {
                flips += 1;
            }
        }
        assert!(flips > 990, "flips {flips}");
    }

    #[test]
    fn odds_probability_identity() {
        // o = 1 <=> probability 1/2 via the sigmoid form
        let log_odds = 0.0f64;
        let p = 1.0 / (1.0 + (-log_odds).exp());
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn iid_uniform_importance_is_bitwise_gbt() {
        let a = MaskedMatrix::full(array![
            [1.0, 1.0, 0.3],
            [2.0, 2.0, -0.4],
            [0.5, 0.5, 1.2]
        ]);
        let h_gbt = IdHyper::default();
        let mut h_iid = IdHyper::default();
        h_iid.importance = Some(vec![0.5; 3]);
        let cfg = GibbsConfig::new(40, 10, 2, 77).unwrap();
        let fit1 = fit_id(IdVariant::Gbt, &a, Some(2), &h_gbt, &cfg).unwrap();
        let fit2 = fit_id(IdVariant::Iid, &a, Some(2), &h_iid, &cfg).unwrap();
        assert_eq!(fit1.trace.losses, fit2.trace.losses);
        assert_eq!(fit1.state.r, fit2.state.r);
        assert_eq!(fit1.state.y, fit2.state.y);
    }

    #[test]
    fn iid_odds_arithmetic() {
        // p_i = 0.9, p_j = 0.1, equal likelihoods: odds = 9 * 9 = 81,
        // flip probability 81/82
        let a = MaskedMatrix::full(array![[1.0, 1.0], [2.0, 2.0]]);
        let importance = vec![0.1, 0.9];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut flips = 0usize;
        let trials = 50_000;
        for _ in 0..trials {
            let mut st = small_state(&a, &[true, false]);
            st.y = array![[1.0, 1.0], [1.0, 1.0]];
            if iid_swap(&mut st, 0, 1, &a, &importance, &mut rng).unwrap() {
                flips += 1;
            }
        }
        let freq = flips as f64 / trials as f64;
        let expect = 81.0 / 82.0;
        let se = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!(
            (freq - expect).abs() < 4.0 * se.max(1e-3),
            "flip frequency {freq} vs {expect}"
        );
    }

    #[test]
    fn ard_collapses_identical_columns() {
        // all columns identical: |J| shrinks well below N
        let col = array![1.0, 2.0, -0.5, 0.7];
        let mut values = Array2::<f64>::zeros((4, 6));
        for j in 0..6 {
            values.column_mut(j).assign(&col);
        }
        let a = MaskedMatrix::full(values);
        let h = IdHyper::default();
        let mut finals = Vec::new();
        for seed in 0..5 {
            let cfg = GibbsConfig::new(200, 100, 1, seed).unwrap();
            let fit = fit_id(IdVariant::GbtArd, &a, None, &h, &cfg).unwrap();
            finals.push(fit.trace.modal_selected_count().unwrap());
        }
        finals.sort_unstable();
        let median = finals[2];
        assert!(median < 6, "median selected count {median}");
    }

    #[test]
    fn x_zero_outside_basis_after_every_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = MaskedMatrix::full(Array2::from_shape_fn((5, 6), |_| {
            rand::Rng::random_range(&mut rng, -1.0..1.0)
        }));
        let h = IdHyper::default();
        let cfg = GibbsConfig::new(30, 10, 1, 6).unwrap();
        let fit = fit_id(IdVariant::Gbt, &a, Some(3), &h, &cfg).unwrap();
        for (j, &on) in fit.state.r.iter().enumerate() {
            for i in 0..5 {
                if on {
                    assert_eq!(fit.state.x[[i, j]], a.values[[i, j]]);
                } else {
                    assert_eq!(fit.state.x[[i, j]], 0.0);
                }
            }
        }
    }

    #[test]
    fn y_magnitudes_bounded_through_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = MaskedMatrix::full(Array2::from_shape_fn((6, 5), |_| {
            rand::Rng::random_range(&mut rng, -1.0..1.0)
        }));
        let h = IdHyper::default();
        let cfg = GibbsConfig::new(60, 10, 1, 8).unwrap();
        let fit = fit_id(IdVariant::Gbtn, &a, Some(2), &h, &cfg).unwrap();
        assert!(fit.state.y.iter().all(|&v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn post_process_shapes_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = MaskedMatrix::full(Array2::from_shape_fn((4, 5), |_| {
            rand::Rng::random_range(&mut rng, -1.0..1.0)
        }));
        let h = IdHyper::default();
        let cfg = GibbsConfig::new(20, 5, 1, 10).unwrap();
        let fit = fit_id(IdVariant::Gbt, &a, Some(2), &h, &cfg).unwrap();
        let (c, w, j) = post_process(&fit.state, &a);
        assert_eq!(c.dim(), (4, j.len()));
        assert_eq!(w.dim(), (j.len(), 5));
        for (row, &col) in j.iter().enumerate() {
            for rr in 0..j.len() {
                let expect = if rr == row { 1.0 } else { 0.0 };
                assert_eq!(w[[rr, col]], expect);
            }
        }
    }

    #[test]
    fn post_process_identity_already_there_is_noop_on_w_rows() {
        let a = MaskedMatrix::full(array![[1.0, 2.0], [0.5, 1.0]]);
        let mut st = small_state(&a, &[true, false]);
        st.y = array![[1.0, 0.7], [0.3, -0.2]];
        // Y[J, J] is already the identity for J = {0}
        let (_, w, j) = post_process(&st, &a);
        assert_eq!(j, vec![0]);
        assert_eq!(w[[0, 0]], 1.0);
        assert_eq!(w[[0, 1]], 0.7);
    }

    #[test]
    fn zero_iteration_run_keeps_initial_state() {
        let a = MaskedMatrix::full(array![[1.0, 2.0], [0.5, 1.0]]);
        let h = IdHyper::default();
        let cfg = GibbsConfig::new(0, 0, 1, 11).unwrap();
        let fit = fit_id(IdVariant::Gbt, &a, Some(1), &h, &cfg).unwrap();
        assert!(fit.trace.losses.is_empty());
        assert!(fit.trace.r_samples.is_empty());
        assert_eq!(fit.state.selected_count(), 1);
    }

    #[test]
    fn aggressive_variant_runs_and_keeps_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = MaskedMatrix::full(Array2::from_shape_fn((5, 6), |_| {
            rand::Rng::random_range(&mut rng, -1.0..1.0)
        }));
        let h = IdHyper::default();
        let cfg = GibbsConfig::new(40, 10, 1, 13).unwrap();
        let fit = fit_id(IdVariant::GbtAggressive, &a, Some(3), &h, &cfg).unwrap();
        assert_eq!(fit.state.selected_count(), 3);
        assert!(fit.trace.losses.iter().all(|l| l.is_finite()));
    }
}
