//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`).
//!
//! The oracles here (grid-normalized posteriors, numerically integrated
//! CDFs, quadrature) are written directly from the model densities and do
//! not call the implementation paths they check.

use matfact::baselines::{als_fit, nmf_mu_sweep, AlsConfig, AlsMode, NmfConfig};
use matfact::dist::{
    sample_dirichlet, sample_wishart, DirichletParams, GammaParams, GtnParams, InvGammaParams,
};
use matfact::gibbs::discrete::{
    oggw_expected_category, ordinal_prob, paa_allocate, paa_sample_w_entry, paa_w_posterior,
    paa_z_posterior, OrdinalSpec,
};
use matfact::gibbs::nmf::{
    fit_nmf, gee_w_posterior, geee_f_posterior, gl_w_posterior, grr_w_posterior, gtt_w_posterior,
    NmfHyper, NmfModel, NormVariant,
};
use matfact::gibbs::rmf::{fit_rmf, ggg_w_posterior, RmfHyper, RmfModel};
use matfact::gibbs::{GibbsConfig, GibbsTrace};
use matfact::id::{exact_column_id, fit_id, IdHyper, IdState, IdVariant};
use matfact::linalg::singular_values;
use matfact::{FactorState, MaskedMatrix};
use ndarray::{array, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

const SQRT_2PI: f64 = 2.506628274631000502415765;

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (x - mean) * (x - mean) / var - 0.5 * (var * 2.0 * std::f64::consts::PI).ln()
}

/// Mean and variance of the normalized density exp(logp) on [lo, hi],
/// evaluated on an n-point grid with trapezoid weights.
fn grid_moments(lo: f64, hi: f64, n: usize, logp: impl Fn(f64) -> f64) -> (f64, f64) {
    let step = (hi - lo) / (n - 1) as f64;
    let logs: Vec<f64> = (0..n).map(|i| logp(lo + step * i as f64)).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (i, lg) in logs.iter().enumerate() {
        let x = lo + step * i as f64;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let f = w * (lg - max).exp();
        z += f;
        m1 += f * x;
        m2 += f * x * x;
    }
    let mean = m1 / z;
    (mean, m2 / z - mean * mean)
}

fn assert_close_rel(label: &str, got: f64, want: f64, tol: f64) {
    let denom = want.abs().max(1e-12);
    assert!(
        ((got - want) / denom).abs() < tol,
        "{label}: grid {got} vs closed form {want}"
    );
}

// ---------------------------------------------------------------------------
// AC-01: exact ID worked example
// ---------------------------------------------------------------------------
#[test]
fn ac01_exact_id_worked_example() {
    let start = std::time::Instant::now();
    let a = array![
        [56.0, 41.0, 30.0],
        [32.0, 23.0, 18.0],
        [80.0, 59.0, 42.0]
    ];
    let (c, w, j) = exact_column_id(&a.view(), 2).unwrap();
    assert_eq!(j, vec![0, 2]);
    let expect_w = [[1.0, 1.0, 0.0], [0.0, -0.5, 1.0]];
    for r in 0..2 {
        for cc in 0..3 {
            assert!(
                (w[[r, cc]] - expect_w[r][cc]).abs() < 1e-12,
                "W[{r},{cc}] = {}",
                w[[r, cc]]
            );
        }
    }
    for (r, row) in [[56.0, 30.0], [32.0, 18.0], [80.0, 42.0]].iter().enumerate() {
        assert!((c[[r, 0]] - row[0]).abs() < 1e-12);
        assert!((c[[r, 1]] - row[1]).abs() < 1e-12);
    }
    assert!(start.elapsed().as_secs() < 1);
    println!("[AC-01] exact ID worked example: PASS");
}

// ---------------------------------------------------------------------------
// AC-02: ID magnitude theorem on 200 random matrices
// ---------------------------------------------------------------------------
#[test]
fn ac02_id_magnitude_theorem() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut done = 0;
    let mut attempts = 0;
    while done < 200 {
        attempts += 1;
        assert!(attempts < 1000, "too many degenerate draws");
        let rank = rng.random_range(1..=4usize);
        let m = rng.random_range(rank.max(2)..=9usize);
        let n = rng.random_range(rank.max(2)..=9usize);
        let d = Array2::from_shape_fn((m, rank), |_| rng.random_range(-1.0..1.0));
        let f = Array2::from_shape_fn((rank, n), |_| rng.random_range(-1.0..1.0));
        let a = d.dot(&f);
        let sv = singular_values(&a.view());
        if sv.iter().filter(|&&x| x > 1e-8 * sv[0]).count() != rank {
            continue;
        }
        let (c, w, _) = exact_column_id(&a.view(), rank).unwrap();
        let max_w = w.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        assert!(max_w <= 1.0 + 1e-10, "max |W| = {max_w}");
        let recon = c.dot(&w);
        let err: f64 = (&a - &recon).iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 1e-8, "relateive error {}", err / norm);
        done += 1;
    }
    assert!(start.elapsed().as_secs() < 30);
    println!("[AC-02] ID magnitude theorem over 200 random matrices: PASS");
}

// ---------------------------------------------------------------------------
// AC-03: conjugacy grid-oracle suite
// ---------------------------------------------------------------------------

/// Frozen instance for the entry conditionals: the data row a, the other
/// contribution per column, the coefficients multiplying the free variable,
/// and the noise variance.
struct EntryInstance {
    a_row: Vec<f64>,
    other: Vec<f64>,
    coef: Vec<f64>,
    sigma2: f64,
}

fn entry_instance(rng: &mut ChaCha8Rng) -> EntryInstance {
    let n = rng.random_range(2..=3usize);
    EntryInstance {
        a_row: (0..n).map(|_| rng.random_range(1.0..3.0)).collect(),
        other: (0..n).map(|_| rng.random_range(0.0..0.3)).collect(),
        coef: (0..n).map(|_| rng.random_range(0.5..1.5)).collect(),
        sigma2: rng.random_range(0.5..2.0),
    }
}

impl EntryInstance {
    fn log_gauss_lik(&self, x: f64) -> f64 {
        self.a_row
            .iter()
            .zip(&self.other)
            .zip(&self.coef)
            .map(|((a, o), c)| ln_normal(*a, o + c * x, self.sigma2))
            .sum()
    }

    /// One-row masked matrix and factor state with w_{0,0} as the free entry.
    fn as_state(&self, w00: f64) -> (MaskedMatrix, FactorState) {
        let n = self.a_row.len();
        let a = MaskedMatrix::full(Array2::from_shape_fn((1, n), |(_, j)| self.a_row[j]));
        // W = [w00, 1], Z row 0 = coef, Z row 1 = other
        let mut z = Array2::zeros((2, n));
        for j in 0..n {
            z[[0, j]] = self.coef[j];
            z[[1, j]] = self.other[j];
        }
        let w = array![[w00, 1.0]];
        (a, FactorState::new(w, z, self.sigma2).unwrap())
    }
}

#[test]
fn ac03_conjugacy_grid_oracles() {
    let start = std::time::Instant::now();
    let tol = 1e-3;

    // GGG: Gaussian prior, full-support conditional
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..5 {
        let inst = entry_instance(&mut rng);
        let lambda = rng.random_range(0.2..2.0);
        let (a, s) = inst.as_state(0.0);
        let (mean, var) = ggg_w_posterior(0, 0, &a, &s, lambda);
        let (gm, gv) = grid_moments(-25.0, 25.0, 2001, |x| {
            inst.log_gauss_lik(x) - 0.5 * lambda * x * x
        });
        assert_close_rel(&format!("GGG mean #{trial}"), gm, mean, tol);
        assert_close_rel(&format!("GGG var #{trial}"), gv, var, tol);
    }

    // GEE: exponential prior, truncated-normal conditional
    for trial in 0..5 {
        let inst = entry_instance(&mut rng);
        let lambda = rng.random_range(0.1..1.5);
        let (a, s) = inst.as_state(0.0);
        let p = gee_w_posterior(0, 0, &a, &s, lambda).unwrap();
        let (mean, var) = p.moments().unwrap();
        let (gm, gv) = grid_moments(0.0, 30.0, 2001, |x| inst.log_gauss_lik(x) - lambda * x);
        assert_close_rel(&format!("GEE mean #{trial}"), gm, mean, tol);
        assert_close_rel(&format!("GEE var #{trial}"), gv, var, tol);
    }

    // GTT: truncated-normal prior
    for trial in 0..5 {
        let inst = entry_instance(&mut rng);
        let mu = rng.random_range(0.0..1.0);
        let tau = rng.random_range(0.1..2.0);
        let (a, s) = inst.as_state(0.0);
        let p = gtt_w_posterior(0, 0, &a, &s, mu, tau).unwrap();
        let (mean, var) = p.moments().unwrap();
        let (gm, gv) = grid_moments(0.0, 30.0, 2001, |x| {
            inst.log_gauss_lik(x) - 0.5 * tau * (x - mu) * (x - mu)
        });
        assert_close_rel(&format!("GTT mean #{trial}"), gm, mean, tol);
        assert_close_rel(&format!("GTT var #{trial}"), gv, var, tol);
    }

    // GRRN: rectified-normal prior N(mu, 1/tau) * Exp(lambda) on [0, inf)
    for trial in 0..5 {
        let inst = entry_instance(&mut rng);
        let mu = rng.random_range(0.0..1.0);
        let tau = rng.random_range(0.2..2.0);
        let lambda = rng.random_range(0.1..1.0);
        let (a, s) = inst.as_state(0.0);
        let prior = matfact::dist::RnParams::new(mu, tau, lambda).unwrap();
        let p = grr_w_posterior(0, 0, &a, &s, prior).unwrap();
        let (mean, var) = p.moments().unwrap();
        let (gm, gv) = grid_moments(0.0, 30.0, 2001, |x| {
            inst.log_gauss_lik(x) - 0.5 * tau * (x - mu) * (x - mu) - lambda * x
        });
        assert_close_rel(&format!("GRRN mean #{trial}"), gm, mean, tol);
        assert_close_rel(&format!("GRRN var #{trial}"), gv, var, tol);
    }

    // GL2^2: Gaussian norm prior restricted to the nonnegative half-line
    for trial in 0..5 {
        let inst = entry_instance(&mut rng);
        let lambda = rng.random_range(0.1..1.5);
        let (a, s) = inst.as_state(0.0);
        let p = gl_w_posterior(NormVariant::L22, 0, 0, &a, &s, lambda).unwrap();
        let (mean, var) = p.moments().unwrap();
        let (gm, gv) = grid_moments(0.0, 30.0, 2001, |x| {
            inst.log_gauss_lik(x) - 0.5 * lambda * x * x
        });
        assert_close_rel(&format!("GL22 mean #{trial}"), gm, mean, tol);
        assert_close_rel(&format!("GL22 var #{trial}"), gv, var, tol);
    }

    // GEEE middle-factor conditional
    for trial in 0..5 {
        let lambda_f = rng.random_range(0.1..1.0);
        let sigma2 = rng.random_range(0.5..1.5);
        let w = Array2::from_shape_fn((2, 2), |_| rng.random_range(0.5..1.5));
        let z = Array2::from_shape_fn((2, 2), |_| rng.random_range(0.5..1.5));
        let f = Array2::from_shape_fn((2, 2), |_| rng.random_range(0.0..0.5));
        let a_vals = Array2::from_shape_fn((2, 2), |_| rng.random_range(1.0..3.0));
        let a = MaskedMatrix::full(a_vals.clone());
        let s = FactorState::with_middle(w.clone(), Some(f.clone()), z.clone(), sigma2).unwrap();
        let (k, l) = (0usize, 1usize);
        let p = geee_f_posterior(k, l, &a, &s, lambda_f).unwrap();
        let (mean, var) = p.moments().unwrap();
        let (gm, gv) = grid_moments(0.0, 30.0, 2001, |x| {
            let mut lp = -lambda_f * x;
            for i in 0..2 {
                for j in 0..2 {
                    // prediction with f_kl replaced by x
                    let mut pred = 0.0;
                    for ss in 0..2 {
                        for tt in 0..2 {
                            let fv = if (ss, tt) == (k, l) { x } else { f[[ss, tt]] };
                            pred += w[[i, ss]] * fv * z[[tt, j]];
                        }
                    }
                    lp += ln_normal(a_vals[[i, j]], pred, sigma2);
                }
            }
            lp
        });
        assert_close_rel(&format!("GEEE mean #{trial}"), gm, mean, tol);
        assert_close_rel(&format!("GEEE var #{trial}"), gv, var, tol);
    }

    // PAA w-conditional: Poisson allocations against a Gamma prior
    for trial in 0..5 {
        let alpha = 1.0;
        let beta = rng.random_range(0.5..1.5);
        let n = 3usize;
        let z_row: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let occ: Vec<u64> = (0..n).map(|_| rng.random_range(1..6u64)).collect();
        let mut alloc = Array3::<u64>::zeros((1, n, 1));
        let mut z = Array2::<f64>::zeros((1, n));
        for j in 0..n {
            alloc[[0, j, 0]] = occ[j];
            z[[0, j]] = z_row[j];
        }
        let mask = Array2::from_elem((1, n), true);
        let (shape, rate) = paa_w_posterior(0, 0, &alloc, &z, &mask, alpha, beta);
        let mean = shape / rate;
        let var = shape / (rate * rate);
        let (gm, gv) = grid_moments(1e-9, 20.0, 2001, |x| {
            let mut lp = (alpha - 1.0) * x.ln() - beta * x;
            for j in 0..n {
                let rate_j = x * z_row[j];
                lp += occ[j] as f64 * rate_j.ln() - rate_j;
            }
            lp
        });
        assert_close_rel(&format!("PAA mean #{trial}"), gm, mean, tol);
        assert_close_rel(&format!("PAA var #{trial}"), gv, var, tol);
    }

    // GBT y-conditional: GTN prior on [-1, 1]
    for trial in 0..5 {
        let mu_kl = 0.0;
        let tau_kl = rng.random_range(0.5..2.0);
        let sigma2 = rng.random_range(0.5..1.5);
        let m = 3usize;
        let x_col: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
        let excl: Vec<f64> = (0..m).map(|_| rng.random_range(-0.2..0.2)).collect();
        let a_col: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..0.8)).collect();
        // one basis column (index 0), one interpolated (index 1)
        let mut a_vals = Array2::<f64>::zeros((m, 2));
        let mut x = Array2::<f64>::zeros((m, 2));
        let mut y = Array2::<f64>::zeros((2, 2));
        for i in 0..m {
            a_vals[[i, 1]] = a_col[i];
            a_vals[[i, 0]] = x_col[i];
            x[[i, 0]] = x_col[i];
        }
        // the exclusion term comes from a second basis... fold it into Y row 1
        // by marking column 1's other contribution through x * y with a
        // phantom: simplest is excl = 0 here, so regenerate with zeros
        let _ = excl;
        y[[0, 1]] = 0.0;
        let a = MaskedMatrix::full(a_vals);
        let st = IdState {
            r: vec![true, false],
            y,
            x,
            sigma2,
        };
        let p = matfact::id::bayes::gbt_y_posterior(0, 1, &a, &st, mu_kl, tau_kl, -1.0, 1.0)
            .unwrap();
        let (mean, var) = p.moments().unwrap();
        let (gm, gv) = grid_moments(-1.0, 1.0, 2001, |v| {
            let mut lp = -0.5 * tau_kl * (v - mu_kl) * (v - mu_kl);
            for i in 0..m {
                lp += ln_normal(a_col[i], x_col[i] * v, sigma2);
            }
            lp
        });
        assert_close_rel(&format!("GBT mean #{trial}"), gm, mean, tol);
        assert_close_rel(&format!("GBT var #{trial}"), gv, var, tol);
    }

    assert!(start.elapsed().as_secs() < 60);
    println!("[AC-03] conjugacy grid-oracle suite (8 conditionals x 5 instances): PASS");
}

// ---------------------------------------------------------------------------
// AC-04: sampler distribution suite
// ---------------------------------------------------------------------------

/// KS distance between samples and a density given un-normalized on a grid.
fn ks_against_density(samples: &mut [f64], lo: f64, hi: f64, pdf: impl Fn(f64) -> f64) -> f64 {
    let n_grid = 20_001;
    let step = (hi - lo) / (n_grid - 1) as f64;
    let vals: Vec<f64> = (0..n_grid).map(|i| pdf(lo + step * i as f64)).collect();
    let mut cdf = vec![0.0; n_grid];
    for i in 1..n_grid {
        cdf[i] = cdf[i - 1] + 0.5 * (vals[i - 1] + vals[i]) * step;
    }
    let total = cdf[n_grid - 1];
    for c in cdf.iter_mut() {
        *c /= total;
    }
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let t = ((x - lo) / step).clamp(0.0, (n_grid - 1) as f64);
        let idx = t as usize;
        let frac = t - idx as f64;
        let f = if idx + 1 < n_grid {
            cdf[idx] * (1.0 - frac) + cdf[idx + 1] * frac
        } else {
            1.0
        };
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i as f64 + 1.0) / n).abs());
    }
    d
}

#[test]
fn ac04_sampler_distribution_suite() {
    let start = std::time::Instant::now();
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(41);

    // GTN on a finite interval
    let gtn = GtnParams::new(0.3, 2.0, -1.0, 1.5).unwrap();
    let mut xs: Vec<f64> = (0..draws).map(|_| gtn.sample(&mut rng)).collect();
    let d = ks_against_density(&mut xs, -1.0, 1.5, |x| {
        (-0.5 * 2.0 * (x - 0.3) * (x - 0.3)).exp()
    });
    assert!(d < 0.01, "GTN KS = {d}");

    // TN on [0, inf)
    let tn = GtnParams::truncated_normal(0.5, 1.0).unwrap();
    let mut xs: Vec<f64> = (0..draws).map(|_| tn.sample(&mut rng)).collect();
    let d = ks_against_density(&mut xs, 0.0, 12.0, |x| {
        (-0.5 * (x - 0.5) * (x - 0.5)).exp()
    });
    assert!(d < 0.01, "TN KS = {d}");

    // tail-region GTN exercises the rejection path
    let tail = GtnParams::new(0.0, 1.0, 6.0, 8.0).unwrap();
    let mut xs: Vec<f64> = (0..draws).map(|_| tail.sample(&mut rng)).collect();
    let d = ks_against_density(&mut xs, 6.0, 8.0, |x| (-0.5 * x * x).exp());
    assert!(d < 0.01, "tail GTN KS = {d}");

    // Gamma(2.5, rate 1.5)
    let gamma = GammaParams::new(2.5, 1.5).unwrap();
    let mut xs: Vec<f64> = (0..draws).map(|_| gamma.sample(&mut rng)).collect();
    let d = ks_against_density(&mut xs, 1e-9, 25.0, |x| 1.5f64.powf(2.5) * x.powf(1.5) * (-1.5 * x).exp());
    assert!(d < 0.01, "Gamma KS = {d}");

    // inverse-Gamma(3, 2)
    let ig = InvGammaParams::new(3.0, 2.0).unwrap();
    let mut xs: Vec<f64> = (0..draws).map(|_| ig.sample(&mut rng)).collect();
    let d = ks_against_density(&mut xs, 1e-6, 15.0, |x| x.powf(-4.0) * (-2.0 / x).exp());
    assert!(d < 0.01, "inverse-Gamma KS = {d}");

    // Dirichlet marginals are Beta(alpha_k, alpha_+ - alpha_k)
    let alpha = vec![2.0, 3.0, 1.5];
    let total: f64 = alpha.iter().sum();
    let dir = DirichletParams::new(alpha.clone()).unwrap();
    let all: Vec<Vec<f64>> = (0..draws).map(|_| sample_dirichlet(&dir, &mut rng)).collect();
    for (k, &ak) in alpha.iter().enumerate() {
        let mut xs: Vec<f64> = all.iter().map(|v| v[k]).collect();
        let b = total - ak;
        let d = ks_against_density(&mut xs, 1e-9, 1.0 - 1e-9, |x| {
            x.powf(ak - 1.0) * (1.0 - x).powf(b - 1.0)
        });
        assert!(d < 0.01, "Dirichlet marginal {k} KS = {d}");
    }

    // Wishart mean within 5% of nu * M entrywise at 1e4 draws
    let scale = array![[2.0, 0.3], [0.3, 1.0]];
    let nu = 5.0;
    let reps = 10_000;
    let mut mean = Array2::<f64>::zeros((2, 2));
    for _ in 0..reps {
        mean += &sample_wishart(&scale.view(), nu, &mut rng).unwrap();
    }
    mean /= reps as f64;
    for i in 0..2 {
        for j in 0..2 {
            let expect = nu * scale[[i, j]];
            assert!(
                ((mean[[i, j]] - expect) / expect).abs() < 0.05,
                "Wishart mean {:?} vs {expect}",
                mean[[i, j]]
            );
        }
    }

    assert!(start.elapsed().as_secs() < 60);
    println!("[AC-04] sampler distribution suite (KS < 0.01, Wishart mean within 5%): PASS");
}

// ---------------------------------------------------------------------------
// AC-05: MU-NMF monotonicity
// ---------------------------------------------------------------------------
#[test]
fn ac05_mu_monotonicity() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let a = MaskedMatrix::full(Array2::from_shape_fn((15, 12), |_| rng.random::<f64>()));
        let cfg = NmfConfig::new(4); // unregularized
        let w = Array2::from_shape_fn((15, 4), |_| rng.random::<f64>() + 1e-3);
        let z = Array2::from_shape_fn((4, 12), |_| rng.random::<f64>() + 1e-3);
        let mut s = FactorState::new(w, z, 1.0).unwrap();
        let mut prev = matfact::frobenius_loss(&a, &s).unwrap();
        for sweep in 0..300 {
            nmf_mu_sweep(&a, &mut s, &cfg);
            let loss = matfact::frobenius_loss(&a, &s).unwrap();
            assert!(
                loss <= prev + 1e-12 * prev.max(1.0),
                "seed {seed} sweep {sweep}: loss rose {prev} -> {loss}"
            );
            prev = loss;
        }
    }
    println!("[AC-05] MU-NMF loss non-increasing over 20 seeds x 300 sweeps: PASS");
}

// ---------------------------------------------------------------------------
// AC-06: ALS exact rank-one recovery
// ---------------------------------------------------------------------------
#[test]
fn ac06_als_exact_recovery() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let w: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = MaskedMatrix::full(Array2::from_shape_fn((8, 6), |(i, j)| w[i] * z[j]));
        let mut cfg = AlsConfig::new(1);
        cfg.lambda_w = 1e-9;
        cfg.lambda_z = 1e-9;
        cfg.max_iters = 100;
        cfg.tol = 1e-16;
        cfg.mode = AlsMode::Masked;
        let (_, history) = als_fit(&a, &cfg, &mut rng).unwrap();
        let last = *history.last().unwrap();
        assert!(last < 1e-8, "seed {seed}: final loss {last}");
    }
    println!("[AC-06] ALS rank-one exact recovery over 10 seeds: PASS");
}

// ---------------------------------------------------------------------------
// AC-07: synthetic Bayesian recovery (GGG and GEE)
// ---------------------------------------------------------------------------
fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn post_burn_mean(trace: &GibbsTrace) -> f64 {
    trace.post_burn_in_mean_loss().unwrap()
}

#[test]
fn ac07_synthetic_bayesian_recovery() {
    let start = std::time::Instant::now();
    // GGG, K = 5
    let mut mses = Vec::new();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let w0 = Array2::from_shape_fn((30, 5), |_| {
            rand_distr::StandardNormal.sample(&mut rng)
        });
        let z0 = Array2::from_shape_fn((5, 20), |_| {
            rand_distr::StandardNormal.sample(&mut rng)
        });
        let noise = Array2::from_shape_fn((30, 20), |_| {
            0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let a = MaskedMatrix::full(w0.dot(&z0) + noise);
        let hyper = RmfHyper::default_for(RmfModel::Ggg, 5);
        let cfg = GibbsConfig::new(500, 250, 5, seed).unwrap();
        let trace = fit_rmf(RmfModel::Ggg, &a, 5, &hyper, &cfg).unwrap();
        mses.push(post_burn_mean(&trace));
    }
    let ggg_median = median(mses);
    assert!(ggg_median <= 0.02, "GGG median post-burn-in MSE {ggg_median}");
    let ggg_elapsed = start.elapsed();
    assert!(ggg_elapsed.as_secs() < 120);

    // GEE, K = 3, nonnegative
    let start2 = std::time::Instant::now();
    let mut mses = Vec::new();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(750 + seed);
        let w0 = Array2::from_shape_fn((30, 3), |_| rng.random::<f64>() + 0.2);
        let z0 = Array2::from_shape_fn((3, 20), |_| rng.random::<f64>() + 0.2);
        let noise = Array2::from_shape_fn((30, 20), |_| {
            0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let a = MaskedMatrix::full(w0.dot(&z0) + noise);
        let hyper = NmfHyper::default_for(NmfModel::Gee, 3);
        let cfg = GibbsConfig::new(500, 250, 5, seed).unwrap();
        let trace = fit_nmf(NmfModel::Gee, &a, 3, &hyper, &cfg).unwrap();
        mses.push(post_burn_mean(&trace));
    }
    let gee_median = median(mses);
    assert!(gee_median <= 0.02, "GEE median post-burn-in MSE {gee_median}");
    assert!(start2.elapsed().as_secs() < 120);
    println!(
        "[AC-07] synthetic recovery: GGG median MSE {ggg_median:.4}, GEE median MSE {gee_median:.4} (<= 0.02): PASS"
    );
}

// ---------------------------------------------------------------------------
// AC-08: ARD rank discovery
// ---------------------------------------------------------------------------

/// 20 x 12 matrix: 4 independent base columns, each duplicated three times,
/// plus small Gaussian noise.
fn duplicated_column_matrix(seed: u64, noise_sd: f64) -> MaskedMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base = Vec::new();
    for _ in 0..4 {
        let col: Vec<f64> = (0..20)
            .map(|_| rand_distr::StandardNormal.sample(&mut rng))
            .collect();
        base.push(col);
    }
    let values = Array2::from_shape_fn((20, 12), |(i, j)| {
        base[j % 4][i] + noise_sd * rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    MaskedMatrix::full(values)
}

#[test]
fn ac08_ard_rank_discovery() {
    let mut hits = 0;
    for seed in 0..5u64 {
        let a = duplicated_column_matrix(800 + seed, 1e-2);
        let h = IdHyper::default();
        let cfg = GibbsConfig::new(300, 150, 1, seed).unwrap();
        let fit = fit_id(IdVariant::GbtArd, &a, None, &h, &cfg).unwrap();
        let modal = fit.trace.modal_selected_count().unwrap();
        if modal == 4 {
            hits += 1;
        }
    }
    assert!(hits >= 4, "modal |J| = 4 in only {hits} of 5 seeds");
    println!("[AC-08] GBT-ARD modal |J| = 4 in {hits}/5 seeds: PASS");
}

// ---------------------------------------------------------------------------
// AC-09: IID intervention effect
// ---------------------------------------------------------------------------
#[test]
fn ac09_iid_intervention() {
    // bitwise identity at uniform importance
    let a = duplicated_column_matrix(900, 1e-2);
    let h_gbt = IdHyper::default();
    let mut h_uniform = IdHyper::default();
    h_uniform.importance = Some(vec![0.5; 12]);
    let cfg = GibbsConfig::new(120, 60, 1, 1).unwrap();
    let fit_gbt = fit_id(IdVariant::Gbt, &a, Some(4), &h_gbt, &cfg).unwrap();
    let fit_iid = fit_id(IdVariant::Iid, &a, Some(4), &h_uniform, &cfg).unwrap();
    assert_eq!(fit_gbt.trace.losses, fit_iid.trace.losses);
    assert_eq!(fit_gbt.state.r, fit_iid.state.r);
    assert_eq!(fit_gbt.state.y, fit_iid.state.y);

    // column 0 (duplicate-equivalent to columns 4 and 8) gets p = 0.99
    let mut favored = vec![0.5; 12];
    favored[0] = 0.99;
    let mut h_favor = IdHyper::default();
    h_favor.importance = Some(favored);
    let mut wins = 0;
    for seed in 0..10u64 {
        let a = duplicated_column_matrix(910 + seed, 1e-2);
        let cfg = GibbsConfig::new(250, 100, 1, seed).unwrap();
        let base = fit_id(IdVariant::Gbt, &a, Some(4), &h_gbt, &cfg).unwrap();
        let iid = fit_id(IdVariant::Iid, &a, Some(4), &h_favor, &cfg).unwrap();
        if iid.trace.selection_frequency(0) > base.trace.selection_frequency(0) {
            wins += 1;
        }
    }
    assert!(wins >= 9, "IID beat the GBT baseline in only {wins} of 10 runs");
    println!("[AC-09] IID: bitwise match at p = 1/2; favored column won {wins}/10 paired runs: PASS");
}

// ---------------------------------------------------------------------------
// AC-10: PAA allocation conservation
// ---------------------------------------------------------------------------
#[test]
fn ac10_allocation_conservation() {
    // manual PAA chain on a 10 x 8 count matrix, checking the invariant at
    // every allocation of every iteration
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let k = 2usize;
    let w0 = Array2::from_shape_fn((10, k), |_| rng.random_range(0.5..2.0));
    let z0 = Array2::from_shape_fn((k, 8), |_| rng.random_range(0.5..2.0));
    let counts = Array2::from_shape_fn((10, 8), |(i, j)| {
        let rate: f64 = (0..k).map(|kk| w0[[i, kk]] * z0[[kk, j]]).sum();
        rand_distr::Poisson::new(rate).unwrap().sample(&mut rng) as u64
    });
    let mask = Array2::from_elem((10, 8), true);
    let mut w = Array2::from_shape_fn((10, k), |_| rng.random_range(0.5..2.0));
    let mut z = Array2::from_shape_fn((k, 8), |_| rng.random_range(0.5..2.0));
    let mut alloc = Array3::<u64>::zeros((10, 8, k));
    for _iter in 0..300 {
        for m in 0..10 {
            for n in 0..8 {
                let w_row: Vec<f64> = w.row(m).to_vec();
                let z_col: Vec<f64> = z.column(n).to_vec();
                let parts = paa_allocate(counts[[m, n]], &w_row, &z_col, &mut rng).unwrap();
                assert_eq!(
                    parts.iter().sum::<u64>(),
                    counts[[m, n]],
                    "allocation broke conservation at ({m}, {n})"
                );
                for kk in 0..k {
                    alloc[[m, n, kk]] = parts[kk];
                }
            }
        }
        for kk in 0..k {
            for m in 0..10 {
                w[[m, kk]] =
                    paa_sample_w_entry(m, kk, &alloc, &z, &mask, 1.0, 1.0, &mut rng).unwrap();
            }
            for n in 0..8 {
                let (shape, rate) = paa_z_posterior(kk, n, &alloc, &w, &mask, 1.0, 1.0);
                z[[kk, n]] = GammaParams::new(shape, rate).unwrap().sample(&mut rng).max(1e-300);
            }
        }
    }
    println!("[AC-10] PAA allocation conservation over 300 iterations on 10x8: PASS");
}

// ---------------------------------------------------------------------------
// AC-11: ordinal consistency
// ---------------------------------------------------------------------------
#[test]
fn ac11_ordinal_consistency() {
    for categories in [2usize, 3, 5] {
        let spec = OrdinalSpec::integer_scale(categories).unwrap();
        for i in 0..100 {
            let h = -6.0 + 12.0 * i as f64 / 99.0;
            let total: f64 = (1..=categories)
                .map(|a| ordinal_prob(a, h, &spec).unwrap())
                .sum();
            assert!(
                (total - 1.0).abs() <= 1e-12,
                "A = {categories}, h = {h}: sum {total}"
            );
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1100);
    for draw in 0..20 {
        let categories = [2usize, 3, 5][draw % 3];
        let spec = OrdinalSpec::integer_scale(categories).unwrap();
        let wz = rng.random_range(-1.0..(categories as f64 + 1.0));
        let tau = rng.random_range(0.3..4.0);
        let closed = oggw_expected_category(wz, tau, &spec);
        // quadrature: integral of sum_a a p(a | h) N(h | wz, 1/tau) dh
        let sd = (1.0f64 / tau).sqrt();
        let lo = wz - 10.0 * sd;
        let hi = wz + 10.0 * sd;
        let n = 60_000;
        let step = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let h = lo + step * i as f64;
            let weight = if i == 0 || i == n { 0.5 } else { 1.0 };
            let mut ecat = 0.0;
            for a in 1..=categories {
                ecat += a as f64 * ordinal_prob(a, h, &spec).unwrap();
            }
            let dens = (-0.5 * ((h - wz) / sd).powi(2)).exp() / (sd * SQRT_2PI);
            acc += weight * ecat * dens;
        }
        acc *= step;
        assert!(
            (closed - acc).abs() < 1e-4,
            "draw {draw}: closed {closed} vs quadrature {acc}"
        );
    }
    println!("[AC-11] ordinal probabilities sum to 1; expected category matches quadrature: PASS");
}

// ---------------------------------------------------------------------------
// AC-12: byte-identical reproducibility of `run`
// ---------------------------------------------------------------------------
#[test]
fn ac12_run_reproducibility() {
    use matfact_cli::{run, DataFormat, RunConfig};
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.txt");
    let mut rng = ChaCha8Rng::seed_from_u64(1200);
    let mut text = String::new();
    for _ in 0..10 {
        let row: Vec<String> = (0..8)
            .map(|_| format!("{}", rng.random_range(-2.0..2.0)))
            .collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    std::fs::write(&input, text).unwrap();

    for (model, k) in [("ggg", Some(2)), ("gbt", Some(3))] {
        let mut cfg = RunConfig::default_empty();
        cfg.model = model.to_string();
        cfg.k = k;
        cfg.iters = 60;
        cfg.burn_in = 20;
        cfg.thin = 2;
        cfg.seed = 7;
        cfg.input = input.clone();
        cfg.format = DataFormat::Dense;
        cfg.out = dir.path().join(format!("{model}-a"));
        run(&cfg).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.out = dir.path().join(format!("{model}-b"));
        run(&cfg2).unwrap();
        for file in ["trace.csv", "w.txt"] {
            let a = std::fs::read(cfg.out.join(file)).unwrap();
            let b = std::fs::read(cfg2.out.join(file)).unwrap();
            assert_eq!(a, b, "{model}/{file} differs between identical runs");
        }
        let z_or_c = if model == "gbt" { "c.txt" } else { "z.txt" };
        let a = std::fs::read(cfg.out.join(z_or_c)).unwrap();
        let b = std::fs::read(cfg2.out.join(z_or_c)).unwrap();
        assert_eq!(a, b);
    }
    println!("[AC-12] identical configs produce byte-identical traces and factors: PASS");
}
