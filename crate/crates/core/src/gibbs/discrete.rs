//! Poisson factorization (PAA, PAAA) for count data and ordinal
//! factorization (OGGW) with its scoring rules.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dist::{
    niw_posterior, norm_cdf, sample_niw, GammaParams, GtnParams, NiwParams,
};
use crate::error::{Error, Result};
use crate::gibbs::rmf::{gggm_w_row_posterior, gggm_z_col_posterior};
use crate::gibbs::{GibbsConfig, GibbsTrace};
use crate::linalg::{cholesky, spd_inverse};
use crate::masked::{masked_mse, FactorState, MaskedMatrix};

/// Gamma hyperparameters for the Poisson models.
#[derive(Debug, Clone, Copy)]
pub struct PoissonHyper {
    /// Shared Gamma shape for W and Z entries.
    pub alpha: f64,
    /// Shared Gamma rate (PAA).
    pub beta: f64,
    /// Hierarchical Gamma shape and mean for the per-row/column rates (PAAA):
    /// lambda ~ Gamma(a, a/b).
    pub a: f64,
    pub b: f64,
}

impl PoissonHyper {
    pub fn default_hyper() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            a: 1.0,
            b: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("a", self.a), ("b", self.b)]
        {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Splits the count a_mn across factors: multinomial(a_mn, p) with
/// p_k = w_k z_k / w'z. The components sum to a_mn exactly.
pub fn paa_allocate<R: Rng + ?Sized>(
    a_mn: u64,
    w_m: &[f64],
    z_n: &[f64],
    rng: &mut R,
) -> Result<Vec<u64>> {
    let k = w_m.len();
    if z_n.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "factor rows of length {k} and {}",
            z_n.len()
        )));
    }
    if a_mn == 0 {
        return Ok(vec![0; k]);
    }
    if k == 1 {
        return Ok(vec![a_mn]);
    }
    let total: f64 = w_m.iter().zip(z_n).map(|(w, z)| w * z).sum();
    if !(total > 1e-300) {
        return Err(Error::DegenerateRate(0, 0));
    }
    let probs: Vec<f64> = w_m.iter().zip(z_n).map(|(w, z)| w * z / total).collect();
    // sequential binomial conditioning keeps the sum exact
    let mut counts = vec![0u64; k];
    let mut remaining = a_mn;
    let mut prob_left = 1.0f64;
    for i in 0..k {
        if remaining == 0 {
            break;
        }
        if i == k - 1 {
            counts[i] = remaining;
            break;
        }
        let p = (probs[i] / prob_left).clamp(0.0, 1.0);
        let draw = if p >= 1.0 {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            rand_distr::Binomial::new(remaining, p)
                .expect("validated probability")
                .sample(rng)
        };
        counts[i] = draw;
        remaining -= draw;
        prob_left = (prob_left - probs[i]).max(f64::MIN_POSITIVE);
    }
    Ok(counts)
}

/// Gamma conditional for w_mk: Gamma(alpha + sum_j o_mjk, rate + sum_j z_kj),
/// sums running over the observed columns of row m.
pub fn paa_w_posterior(
    m: usize,
    k: usize,
    allocations: &Array3<u64>,
    z: &Array2<f64>,
    mask: &Array2<bool>,
    alpha: f64,
    rate: f64,
) -> (f64, f64) {
    let mut occ = 0u64;
    let mut zsum = 0.0;
    for j in 0..z.ncols() {
        if mask[[m, j]] {
            occ += allocations[[m, j, k]];
            zsum += z[[k, j]];
        }
    }
    (alpha + occ as f64, rate + zsum)
}

pub fn paa_sample_w_entry<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    allocations: &Array3<u64>,
    z: &Array2<f64>,
    mask: &Array2<bool>,
    alpha: f64,
    rate: f64,
    rng: &mut R,
) -> Result<f64> {
    let (shape, post_rate) = paa_w_posterior(m, k, allocations, z, mask, alpha, rate);
    Ok(GammaParams::new(shape, post_rate)?.sample(rng).max(1e-300))
}

/// PAAA per-row rate conditional: Gamma(K alpha + a, a/b + sum_k w_mk).
pub fn paaa_lambda_posterior(row_sum: f64, k: usize, h: &PoissonHyper) -> (f64, f64) {
    (k as f64 * h.alpha + h.a, h.a / h.b + row_sum)
}

pub fn paaa_sample_lambda_m<R: Rng + ?Sized>(
    m: usize,
    w: &Array2<f64>,
    h: &PoissonHyper,
    rng: &mut R,
) -> Result<f64> {
    let row_sum: f64 = w.row(m).iter().sum();
    let (shape, rate) = paaa_lambda_posterior(row_sum, w.ncols(), h);
    Ok(GammaParams::new(shape, rate)?.sample(rng))
}

/// Ordinal category structure: strictly increasing boundaries with
/// b_1 = -inf and b_{A+1} = +inf, categories 1..A.
#[derive(Debug, Clone)]
pub struct OrdinalSpec {
    pub boundaries: Vec<f64>,
}

impl OrdinalSpec {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 3 {
            return Err(Error::InvalidParameter(
                "ordinal spec needs at least two categories (three boundaries)".into(),
            ));
        }
        if boundaries[0] != f64::NEG_INFINITY
            || *boundaries.last().unwrap() != f64::INFINITY
        {
            return Err(Error::InvalidParameter(
                "outer boundaries must be -inf and +inf".into(),
            ));
        }
        for w in boundaries.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidParameter(
                    "boundaries must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { boundaries })
    }

    /// Integer rating scale default: boundaries at 1.5, 2.5, ..., A - 0.5.
    pub fn integer_scale(categories: usize) -> Result<Self> {
        if categories < 2 {
            return Err(Error::InvalidParameter(
                "need at least two categories".into(),
            ));
        }
        let mut b = vec![f64::NEG_INFINITY];
        for a in 1..categories {
            b.push(a as f64 + 0.5);
        }
        b.push(f64::INFINITY);
        Self::new(b)
    }

    pub fn categories(&self) -> usize {
        self.boundaries.len() - 1
    }

    fn lower(&self, category: usize) -> f64 {
        self.boundaries[category - 1]
    }

    fn upper(&self, category: usize) -> f64 {
        self.boundaries[category]
    }
}

/// p(a | h) = Phi(h - b_a) - Phi(h - b_{a+1}).
pub fn ordinal_prob(category: usize, h: f64, spec: &OrdinalSpec) -> Result<f64> {
    if category == 0 || category > spec.categories() {
        return Err(Error::InvalidParameter(format!(
            "category {category} outside 1..{}",
            spec.categories()
        )));
    }
    Ok(norm_cdf(h - spec.lower(category)) - norm_cdf(h - spec.upper(category)))
}

/// Latent draws for one entry: f ~ GTN(w'z, 1 + 1/tau, b_a, b_{a+1}),
/// then h ~ N((f + w'z tau) / (1 + tau), 1 / (1 + tau)).
pub fn oggw_sample_latents<R: Rng + ?Sized>(
    a_mn: usize,
    wz: f64,
    tau: f64,
    spec: &OrdinalSpec,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let f = GtnParams::new(
        wz,
        1.0 / (1.0 + 1.0 / tau),
        spec.lower(a_mn),
        spec.upper(a_mn),
    )?
    .sample(rng);
    let mean = (f + wz * tau) / (1.0 + tau);
    let sd = (1.0 / (1.0 + tau)).sqrt();
    let h = mean + sd * rng.sample::<f64, _>(StandardNormal);
    Ok((f, h))
}

/// Expected category integrating over the latent h:
/// sum_a Phi((w'z - b_a) / sqrt(1 + 1/tau)); the a = 1 term contributes
/// the category floor of one.
pub fn oggw_expected_category(wz: f64, tau: f64, spec: &OrdinalSpec) -> f64 {
    let scale = (1.0 + 1.0 / tau).sqrt();
    (1..=spec.categories())
        .map(|a| {
            let b = spec.lower(a);
            if b == f64::NEG_INFINITY {
                1.0
            } else {
                norm_cdf((wz - b) / scale)
            }
        })
        .sum()
}

/// Uncertainty-adjusted score: posterior mean of the expected category over
/// retained samples, divided by its posterior standard deviation.
pub fn oggw_score(scores: &[f64]) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two retained samples for a score".into(),
        ));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(Error::UndefinedSimilarity(
            "zero posterior variance in score".into(),
        ));
    }
    Ok(mean / var.sqrt())
}

/// Per-iteration state retained by the Poisson fits.
#[derive(Debug, Clone)]
pub struct PoissonTrace {
    pub trace: GibbsTrace,
}

/// Runs the PAA chain. Unobserved entries are absent from every sum.
pub fn fit_paa(
    a: &MaskedMatrix,
    k: usize,
    h: &PoissonHyper,
    cfg: &GibbsConfig,
) -> Result<GibbsTrace> {
    fit_poisson(a, k, h, cfg, false)
}

/// Runs the PAAA chain with hierarchical per-row/column rates.
pub fn fit_paaa(
    a: &MaskedMatrix,
    k: usize,
    h: &PoissonHyper,
    cfg: &GibbsConfig,
) -> Result<GibbsTrace> {
    fit_poisson(a, k, h, cfg, true)
}

fn fit_poisson(
    a: &MaskedMatrix,
    k: usize,
    h: &PoissonHyper,
    cfg: &GibbsConfig,
    hierarchical: bool,
) -> Result<GibbsTrace> {
    h.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    let (m_dim, n_dim) = (a.nrows(), a.ncols());
    let mut counts = Array2::<u64>::zeros((m_dim, n_dim));
    for m in 0..m_dim {
        for n in 0..n_dim {
            if a.mask[[m, n]] {
                let v = a.values[[m, n]];
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(Error::NegativeInput(format!(
                        "Poisson models need nonnegative integer data, got {v} at ({m}, {n})"
                    )));
                }
                counts[[m, n]] = v as u64;
            }
        }
    }
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let w = Array2::from_shape_fn((m_dim, k), |_| {
        GammaParams::new(h.alpha, h.beta).unwrap().sample(&mut rng).max(1e-6)
    });
    let z = Array2::from_shape_fn((k, n_dim), |_| {
        GammaParams::new(h.alpha, h.beta).unwrap().sample(&mut rng).max(1e-6)
    });
    let mut s = FactorState::new(w, z, 1.0)?;
    let mut alloc = Array3::<u64>::zeros((m_dim, n_dim, k));
    let mut lambda_w = vec![h.beta; m_dim];
    let mut lambda_z = vec![h.beta; n_dim];

    let mut trace = GibbsTrace::new(*cfg);
    for iter in 0..cfg.iters {
        // allocation step
        for m in 0..m_dim {
            for n in 0..n_dim {
                if !a.mask[[m, n]] {
                    continue;
                }
                let w_row: Vec<f64> = s.w.row(m).to_vec();
                let z_col: Vec<f64> = s.z.column(n).to_vec();
                let parts = match paa_allocate(counts[[m, n]], &w_row, &z_col, &mut rng) {
                    Ok(p) => p,
                    Err(Error::DegenerateRate(_, _)) => {
                        // rate underflow with a positive count: re-draw the
                        // offending factor entries from the prior and retry
                        for kk in 0..k {
                            s.w[[m, kk]] = GammaParams::new(h.alpha, h.beta)?
                                .sample(&mut rng)
                                .max(1e-6);
                            s.z[[kk, n]] = GammaParams::new(h.alpha, h.beta)?
                                .sample(&mut rng)
                                .max(1e-6);
                        }
                        let w_row: Vec<f64> = s.w.row(m).to_vec();
                        let z_col: Vec<f64> = s.z.column(n).to_vec();
                        paa_allocate(counts[[m, n]], &w_row, &z_col, &mut rng)?
                    }
                    Err(e) => return Err(e),
                };
                for kk in 0..k {
                    alloc[[m, n, kk]] = parts[kk];
                }
            }
        }
        // factor steps
        for kk in 0..k {
            for m in 0..m_dim {
                let rate = if hierarchical { lambda_w[m] } else { h.beta };
                s.w[[m, kk]] =
                    paa_sample_w_entry(m, kk, &alloc, &s.z, &a.mask, h.alpha, rate, &mut rng)?;
            }
            if hierarchical {
                for m in 0..m_dim {
                    lambda_w[m] = paaa_sample_lambda_m(m, &s.w, h, &mut rng)?;
                }
            }
            for n in 0..n_dim {
                let rate = if hierarchical { lambda_z[n] } else { h.beta };
                let (shape, post_rate) = paa_z_posterior(kk, n, &alloc, &s.w, &a.mask, h.alpha, rate);
                s.z[[kk, n]] = GammaParams::new(shape, post_rate)?.sample(&mut rng).max(1e-300);
            }
            if hierarchical {
                for n in 0..n_dim {
                    let col_sum: f64 = s.z.column(n).iter().sum();
                    let (shape, rate) = paaa_lambda_posterior(col_sum, k, h);
                    lambda_z[n] = GammaParams::new(shape, rate)?.sample(&mut rng);
                }
            }
        }
        trace.losses.push(masked_mse(a, &s)?);
        if cfg.keep(iter) {
            trace.samples.push(s.clone());
        }
    }
    Ok(trace)
}

/// Symmetric z-conditional of PAA.
pub fn paa_z_posterior(
    k: usize,
    n: usize,
    allocations: &Array3<u64>,
    w: &Array2<f64>,
    mask: &Array2<bool>,
    alpha: f64,
    rate: f64,
) -> (f64, f64) {
    let mut occ = 0u64;
    let mut wsum = 0.0;
    for i in 0..w.nrows() {
        if mask[[i, n]] {
            occ += allocations[[i, n, k]];
            wsum += w[[i, k]];
        }
    }
    (alpha + occ as f64, rate + wsum)
}

/// OGGW chain output: the factor trace plus the retained precision draws.
pub struct OggwFit {
    pub trace: GibbsTrace,
    pub tau_samples: Vec<f64>,
}

/// Runs the OGGW chain on categorical data (values 1..A on observed cells).
///
/// Rows and columns are drawn from their multivariate conditionals given the
/// latent matrix H (Gaussian likelihood on H), the only reading consistent
/// with the model's joint density.
pub fn fit_oggw(
    a: &MaskedMatrix,
    k: usize,
    spec: &OrdinalSpec,
    niw: &NiwParams,
    alpha_tau: f64,
    beta_tau: f64,
    cfg: &GibbsConfig,
) -> Result<OggwFit> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if niw.dim() != k {
        return Err(Error::DimensionMismatch(format!(
            "NIW prior of dim {} but K = {k}",
            niw.dim()
        )));
    }
    let (m_dim, n_dim) = (a.nrows(), a.ncols());
    let mut cats = Array2::<usize>::zeros((m_dim, n_dim));
    for m in 0..m_dim {
        for n in 0..n_dim {
            if a.mask[[m, n]] {
                let v = a.values[[m, n]];
                if v < 1.0 || v.fract() != 0.0 || v as usize > spec.categories() {
                    return Err(Error::InvalidParameter(format!(
                        "ordinal data must be integer categories 1..{}, got {v}",
                        spec.categories()
                    )));
                }
                cats[[m, n]] = v as usize;
            }
        }
    }
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let w = Array2::from_shape_fn((m_dim, k), |_| StandardNormal.sample(&mut rng));
    let z = Array2::from_shape_fn((k, n_dim), |_| StandardNormal.sample(&mut rng));
    let mut s = FactorState::new(w, z, 1.0)?;
    let mut h_latent = Array2::<f64>::zeros((m_dim, n_dim));
    let mut tau = 1.0f64;
    let mut w_prior = (Array1::<f64>::zeros(k), Array2::<f64>::eye(k));
    let mut z_prior = (Array1::<f64>::zeros(k), Array2::<f64>::eye(k));

    let mut trace = GibbsTrace::new(*cfg);
    let mut tau_samples = Vec::new();
    // the latent matrix must exist before the first row conditional
    for m in 0..m_dim {
        for n in 0..n_dim {
            if a.mask[[m, n]] {
                let (_, h) =
                    oggw_sample_latents(cats[[m, n]], s.predict(m, n), tau, spec, &mut rng)?;
                h_latent[[m, n]] = h;
            }
        }
    }
    let h_mask = MaskedMatrix::new(h_latent.clone(), a.mask.clone())?;

    let mut h_obs = h_mask;
    for iter in 0..cfg.iters {
        s.sigma2 = 1.0 / tau;
        for m in 0..m_dim {
            let prec = spd_inverse(&w_prior.1.view())?;
            let (mean, cov) = gggm_w_row_posterior(m, &h_obs, &s, &w_prior.0, &prec)?;
            let l = cholesky(&cov.view())?;
            let std: Array1<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            s.w.row_mut(m).assign(&(&mean + &l.dot(&std)));
            for n in 0..n_dim {
                if a.mask[[m, n]] {
                    let (_, h) =
                        oggw_sample_latents(cats[[m, n]], s.predict(m, n), tau, spec, &mut rng)?;
                    h_obs.values[[m, n]] = h;
                }
            }
        }
        for n in 0..n_dim {
            let prec = spd_inverse(&z_prior.1.view())?;
            let (mean, cov) = gggm_z_col_posterior(n, &h_obs, &s, &z_prior.0, &prec)?;
            let l = cholesky(&cov.view())?;
            let std: Array1<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            s.z.column_mut(n).assign(&(&mean + &l.dot(&std)));
            for m in 0..m_dim {
                if a.mask[[m, n]] {
                    let (_, h) =
                        oggw_sample_latents(cats[[m, n]], s.predict(m, n), tau, spec, &mut rng)?;
                    h_obs.values[[m, n]] = h;
                }
            }
        }
        // precision conditioned on the latent residuals H - WZ
        let mut ssq = 0.0;
        let mut nobs = 0usize;
        for m in 0..m_dim {
            for n in 0..n_dim {
                if a.mask[[m, n]] {
                    let r = h_obs.values[[m, n]] - s.predict(m, n);
                    ssq += r * r;
                    nobs += 1;
                }
            }
        }
        tau = GammaParams::new(alpha_tau + nobs as f64 / 2.0, beta_tau + 0.5 * ssq)?
            .sample(&mut rng);
        s.sigma2 = 1.0 / tau;

        let rows: Vec<Array1<f64>> = (0..m_dim).map(|m| s.w.row(m).to_owned()).collect();
        let post = niw_posterior(niw, &rows)?;
        w_prior = sample_niw(&post, &mut rng)?;
        let cols: Vec<Array1<f64>> = (0..n_dim).map(|n| s.z.column(n).to_owned()).collect();
        let post = niw_posterior(niw, &cols)?;
        z_prior = sample_niw(&post, &mut rng)?;

        trace.losses.push(masked_mse(a, &s)?);
        if cfg.keep(iter) {
            trace.samples.push(s.clone());
            tau_samples.push(tau);
        }
    }
    Ok(OggwFit { trace, tau_samples })
}
