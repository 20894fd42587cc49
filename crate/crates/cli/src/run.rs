//! Run configuration, model dispatch, and artifact export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use matfact::baselines::{als_fit, nmf_mu_fit, AlsConfig, AlsMode, NmfConfig};
use matfact::dist::NiwParams;
use matfact::gibbs::discrete::{fit_oggw, fit_paa, fit_paaa, OrdinalSpec, PoissonHyper};
use matfact::gibbs::nmf::{fit_nmf, NmfHyper, NmfModel};
use matfact::gibbs::rmf::{fit_rmf, RmfHyper, RmfModel};
use matfact::gibbs::{GibbsConfig, GibbsTrace};
use matfact::id::{fit_id, post_process, IdHyper, IdVariant};
use matfact::{masked_mse, FactorState, MaskedMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::io::{load_matrix, load_scores, write_dense, DataFormat};
use crate::CliError;

/// Factorization model tags accepted by `fit`.
pub const FIT_MODELS: &[&str] = &[
    "als", "nmf", "ggg", "gggm", "ggga", "gggw", "gvg", "gee", "geea", "gtt", "gttn", "grr",
    "grrn", "gl12", "gl22", "glinf", "gl2inf2", "geg", "gnvg", "geee", "paa", "paaa", "oggw",
];

/// ID model tags accepted by `id-select`.
pub const ID_MODELS: &[&str] = &["gbt", "gbtn", "gbt-ard", "gbtn-ard", "gbt-aggressive", "iid"];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: String,
    pub k: Option<usize>,
    pub ard: bool,
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub input: PathBuf,
    pub format: DataFormat,
    pub out: PathBuf,
    pub overrides: BTreeMap<String, String>,
    pub importance: Option<PathBuf>,
    pub chains: usize,
}

impl RunConfig {
    /// Parses a flat key=value config file. Keys `final_mse` and
    /// `selected_count` (written into manifests for the record) are ignored
    /// on input so a manifest is itself a valid config.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::default_empty();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Parse {
                line: lineno + 1,
                message: format!("expected key=value, got '{line}'"),
            })?;
            cfg.apply_key(key.trim(), value.trim(), lineno + 1)?;
        }
        Ok(cfg)
    }

    pub fn default_empty() -> Self {
        Self {
            model: String::new(),
            k: None,
            ard: false,
            iters: 100,
            burn_in: 20,
            thin: 1,
            seed: 0,
            input: PathBuf::new(),
            format: DataFormat::Dense,
            out: PathBuf::new(),
            overrides: BTreeMap::new(),
            importance: None,
            chains: 1,
        }
    }

    fn apply_key(&mut self, key: &str, value: &str, line: usize) -> Result<(), CliError> {
        let bad = |msg: String| CliError::Parse { line, message: msg };
        match key {
            "model" => self.model = value.to_string(),
            "k" => self.k = Some(value.parse().map_err(|_| bad(format!("bad k '{value}'")))?),
            "ard" => self.ard = value == "true" || value == "1",
            "iters" => {
                self.iters = value
                    .parse()
                    .map_err(|_| bad(format!("bad iters '{value}'")))?
            }
            "burn_in" => {
                self.burn_in = value
                    .parse()
                    .map_err(|_| bad(format!("bad burn_in '{value}'")))?
            }
            "thin" => {
                self.thin = value
                    .parse()
                    .map_err(|_| bad(format!("bad thin '{value}'")))?
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| bad(format!("bad seed '{value}'")))?
            }
            "input" => self.input = PathBuf::from(value),
            "format" => self.format = value.parse()?,
            "out" => self.out = PathBuf::from(value),
            "importance" => self.importance = Some(PathBuf::from(value)),
            "chains" => {
                self.chains = value
                    .parse()
                    .map_err(|_| bad(format!("bad chains '{value}'")))?
            }
            "final_mse" | "selected_count" => {} // manifest-only records
            other => {
                if let Some(hyper_key) = other.strip_prefix("hyper.") {
                    self.overrides
                        .insert(hyper_key.to_string(), value.to_string());
                } else {
                    return Err(bad(format!(
                        "unknown config key '{other}' (hyper overrides use the 'hyper.' prefix)"
                    )));
                }
            }
        }
        Ok(())
    }

    fn gibbs(&self) -> Result<GibbsConfig, CliError> {
        Ok(GibbsConfig::new(
            self.iters,
            self.burn_in,
            self.thin,
            self.seed,
        )?)
    }
}

/// Valid `--set` keys per model tag.
pub fn valid_hyper_keys(model: &str) -> &'static [&'static str] {
    match model {
        "als" => &["lambda_w", "lambda_z", "tol", "eta_w", "eta_z", "mode", "bias"],
        "nmf" => &["lambda_w", "lambda_z", "eps", "tol"],
        "ggg" | "gggm" => &["lambda_w", "lambda_z", "alpha_sigma", "beta_sigma"],
        "ggga" => &["ard_alpha", "ard_beta", "alpha_sigma", "beta_sigma"],
        "gggw" => &["niw_kappa", "niw_nu", "alpha_sigma", "beta_sigma"],
        "gvg" => &["gamma_vol", "lambda_z", "alpha_sigma", "beta_sigma"],
        "gee" => &["exp_lambda_w", "exp_lambda_z", "alpha_sigma", "beta_sigma"],
        "geea" => &["ard_alpha", "ard_beta", "alpha_sigma", "beta_sigma"],
        "gtt" => &["tn_mu", "tn_tau", "alpha_sigma", "beta_sigma"],
        "gttn" => &["tn_mu", "tn_tau", "mu_mu", "tau_mu", "hyper_a", "hyper_b", "alpha_sigma", "beta_sigma"],
        "grr" => &["tn_mu", "tn_tau", "rn_lambda", "alpha_sigma", "beta_sigma"],
        "grrn" => &[
            "tn_mu", "tn_tau", "rn_lambda", "mu_mu", "tau_mu", "hyper_a", "hyper_b",
            "rnsng_alpha", "rnsng_beta", "alpha_sigma", "beta_sigma",
        ],
        "gl12" | "gl22" | "glinf" | "gl2inf2" => &["norm_lambda", "alpha_sigma", "beta_sigma"],
        "geg" => &["exp_lambda_w", "gauss_lambda_z", "alpha_sigma", "beta_sigma"],
        "gnvg" => &["gamma_vol", "gauss_lambda_z", "alpha_sigma", "beta_sigma"],
        "geee" => &["exp_lambda_w", "exp_lambda_z", "tri_lambda_f", "tri_l", "alpha_sigma", "beta_sigma"],
        "paa" => &["poisson_alpha", "poisson_beta"],
        "paaa" => &["poisson_alpha", "poisson_beta", "paaa_a", "paaa_b"],
        "oggw" => &["categories", "alpha_tau", "beta_tau", "niw_kappa", "niw_nu"],
        "gbt" | "gbt-ard" | "gbt-aggressive" | "iid" => &[
            "id_a", "id_b", "id_mu", "id_tau", "alpha_sigma", "beta_sigma", "nu",
        ],
        "gbtn" | "gbtn-ard" => &[
            "id_a", "id_b", "id_mu", "id_tau", "mu_mu", "tau_mu", "alpha_t", "beta_t",
            "alpha_sigma", "beta_sigma", "nu",
        ],
        _ => &[],
    }
}

struct Overrides<'a> {
    model: &'a str,
    map: &'a BTreeMap<String, String>,
}

impl<'a> Overrides<'a> {
    fn check(model: &'a str, map: &'a BTreeMap<String, String>) -> Result<Self, CliError> {
        let valid = valid_hyper_keys(model);
        for key in map.keys() {
            if !valid.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "hyper override '{key}' is not valid for model '{model}'; valid keys: {}",
                    valid.join(", ")
                )));
            }
        }
        Ok(Self { model, map })
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                CliError::Config(format!(
                    "override '{key}={v}' for model '{}' is not a number",
                    self.model
                ))
            }),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                CliError::Config(format!(
                    "override '{key}={v}' for model '{}' is not an integer",
                    self.model
                ))
            }),
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }
}

/// Everything `run` leaves on disk, handed back for programmatic use.
pub struct RunOutput {
    pub final_mse: f64,
    pub losses: Vec<f64>,
    pub selected: Option<Vec<usize>>,
    pub out_dir: PathBuf,
}

/// Executes one run: loads the input, dispatches to the named fitter, and
/// writes the loss trace, factors, selected indices (ID models), and a
/// manifest into the output directory. Identical configs produce
/// byte-identical numeric outputs.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    if cfg.chains > 1 {
        return run_chains(cfg);
    }
    run_single(cfg)
}

fn run_chains(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let mut handles = Vec::new();
    for chain in 0..cfg.chains {
        let mut sub = cfg.clone();
        sub.chains = 1;
        sub.seed = cfg.seed + chain as u64;
        sub.out = cfg.out.join(format!("chain-{chain}"));
        handles.push(std::thread::spawn(move || run_single(&sub)));
    }
    let mut first: Option<RunOutput> = None;
    for handle in handles {
        let out = handle
            .join()
            .map_err(|_| CliError::Config("chain thread panicked".into()))??;
        if first.is_none() {
            first = Some(out);
        }
    }
    Ok(first.expect("at least one chain"))
}

fn run_single(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let is_id = ID_MODELS.contains(&cfg.model.as_str());
    if !is_id && !FIT_MODELS.contains(&cfg.model.as_str()) {
        return Err(CliError::Config(format!(
            "unknown model '{}'; factorization models: {}; ID models: {}",
            cfg.model,
            FIT_MODELS.join(", "),
            ID_MODELS.join(", ")
        )));
    }
    let a = load_matrix(&cfg.input, cfg.format)?;
    std::fs::create_dir_all(&cfg.out)?;
    let ov = Overrides::check(&cfg.model, &cfg.overrides)?;

    if is_id {
        run_id(cfg, &a, &ov)
    } else {
        run_fit(cfg, &a, &ov)
    }
}

fn need_k(cfg: &RunConfig) -> Result<usize, CliError> {
    cfg.k.ok_or_else(|| {
        CliError::Config(format!("model '{}' needs --k", cfg.model))
    })
}

fn run_fit(cfg: &RunConfig, a: &MaskedMatrix, ov: &Overrides) -> Result<RunOutput, CliError> {
    let (state, losses): (FactorState, Vec<f64>) = match cfg.model.as_str() {
        "als" => {
            let mut c = AlsConfig::new(need_k(cfg)?);
            c.lambda_w = ov.f64("lambda_w", c.lambda_w)?;
            c.lambda_z = ov.f64("lambda_z", c.lambda_z)?;
            c.tol = ov.f64("tol", c.tol)?;
            c.eta_w = ov.f64("eta_w", c.eta_w)?;
            c.eta_z = ov.f64("eta_z", c.eta_z)?;
            c.bias = ov.f64("bias", 0.0)? != 0.0;
            c.max_iters = cfg.iters;
            c.mode = match ov.str("mode") {
                None | Some("masked") => AlsMode::Masked,
                Some("full") => AlsMode::Full,
                Some("gradient") => AlsMode::Gradient,
                Some("sgd") => AlsMode::Sgd,
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "unknown ALS mode '{other}' (full, masked, gradient, sgd)"
                    )))
                }
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            als_fit(a, &c, &mut rng)?
        }
        "nmf" => {
            let mut c = NmfConfig::new(need_k(cfg)?);
            c.lambda_w = ov.f64("lambda_w", c.lambda_w)?;
            c.lambda_z = ov.f64("lambda_z", c.lambda_z)?;
            c.eps = ov.f64("eps", c.eps)?;
            c.tol = ov.f64("tol", c.tol)?;
            c.max_iters = cfg.iters;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            nmf_mu_fit(a, &c, &mut rng)?
        }
        "ggg" | "gggm" | "ggga" | "gggw" | "gvg" => {
            let model = match cfg.model.as_str() {
                "ggg" => RmfModel::Ggg,
                "gggm" => RmfModel::Gggm,
                "ggga" => RmfModel::Ggga,
                "gggw" => RmfModel::Gggw,
                _ => RmfModel::Gvg,
            };
            let k = need_k(cfg)?;
            let mut h = RmfHyper::default_for(model, k);
            h.lambda_w = ov.f64("lambda_w", h.lambda_w)?;
            h.lambda_z = ov.f64("lambda_z", h.lambda_z)?;
            h.alpha_sigma = ov.f64("alpha_sigma", h.alpha_sigma)?;
            h.beta_sigma = ov.f64("beta_sigma", h.beta_sigma)?;
            h.ard_alpha = ov.f64("ard_alpha", h.ard_alpha)?;
            h.ard_beta = ov.f64("ard_beta", h.ard_beta)?;
            h.gamma_vol = ov.f64("gamma_vol", h.gamma_vol)?;
            if model == RmfModel::Gggw {
                let mut niw = NiwParams::weak(k);
                niw.kappa0 = ov.f64("niw_kappa", niw.kappa0)?;
                niw.nu0 = ov.f64("niw_nu", niw.nu0)?;
                h.niw = Some(niw);
            }
            let trace = fit_rmf(model, a, k, &h, &cfg.gibbs()?)?;
            trace_outputs(a, trace)?
        }
        "paa" | "paaa" => {
            let mut h = PoissonHyper::default_hyper();
            h.alpha = ov.f64("poisson_alpha", h.alpha)?;
            h.beta = ov.f64("poisson_beta", h.beta)?;
            h.a = ov.f64("paaa_a", h.a)?;
            h.b = ov.f64("paaa_b", h.b)?;
            let k = need_k(cfg)?;
            let trace = if cfg.model == "paa" {
                fit_paa(a, k, &h, &cfg.gibbs()?)?
            } else {
                fit_paaa(a, k, &h, &cfg.gibbs()?)?
            };
            trace_outputs(a, trace)?
        }
        "oggw" => {
            let k = need_k(cfg)?;
            let categories = ov.usize("categories", 5)?;
            let spec = OrdinalSpec::integer_scale(categories)?;
            let mut niw = NiwParams::weak(k);
            niw.kappa0 = ov.f64("niw_kappa", niw.kappa0)?;
            niw.nu0 = ov.f64("niw_nu", niw.nu0)?;
            let alpha_tau = ov.f64("alpha_tau", 1.0)?;
            let beta_tau = ov.f64("beta_tau", 1.0)?;
            let fit = fit_oggw(a, k, &spec, &niw, alpha_tau, beta_tau, &cfg.gibbs()?)?;
            trace_outputs(a, fit.trace)?
        }
        nmf_tag => {
            let model = match nmf_tag {
                "gee" => NmfModel::Gee,
                "geea" => NmfModel::Geea,
                "gtt" => NmfModel::Gtt,
                "gttn" => NmfModel::Gttn,
                "grr" => NmfModel::Grr,
                "grrn" => NmfModel::Grrn,
                "gl12" => NmfModel::Gl12,
                "gl22" => NmfModel::Gl22,
                "glinf" => NmfModel::GlInf,
                "gl2inf2" => NmfModel::Gl2Inf2,
                "geg" => NmfModel::Geg,
                "gnvg" => NmfModel::Gnvg,
                "geee" => NmfModel::Geee,
                other => return Err(CliError::Config(format!("unhandled model '{other}'"))),
            };
            let k = need_k(cfg)?;
            let mut h = NmfHyper::default_for(model, k);
            h.exp_lambda_w = ov.f64("exp_lambda_w", h.exp_lambda_w)?;
            h.exp_lambda_z = ov.f64("exp_lambda_z", h.exp_lambda_z)?;
            h.tn_mu = ov.f64("tn_mu", h.tn_mu)?;
            h.tn_tau = ov.f64("tn_tau", h.tn_tau)?;
            h.rn_lambda = ov.f64("rn_lambda", h.rn_lambda)?;
            h.gtn_mu_mu = ov.f64("mu_mu", h.gtn_mu_mu)?;
            h.gtn_tau_mu = ov.f64("tau_mu", h.gtn_tau_mu)?;
            h.gtn_a = ov.f64("hyper_a", h.gtn_a)?;
            h.gtn_b = ov.f64("hyper_b", h.gtn_b)?;
            h.rnsng_alpha = ov.f64("rnsng_alpha", h.rnsng_alpha)?;
            h.rnsng_beta = ov.f64("rnsng_beta", h.rnsng_beta)?;
            h.ard_alpha = ov.f64("ard_alpha", h.ard_alpha)?;
            h.ard_beta = ov.f64("ard_beta", h.ard_beta)?;
            h.norm_lambda = ov.f64("norm_lambda", h.norm_lambda)?;
            h.alpha_sigma = ov.f64("alpha_sigma", h.alpha_sigma)?;
            h.beta_sigma = ov.f64("beta_sigma", h.beta_sigma)?;
            h.tri_lambda_f = ov.f64("tri_lambda_f", h.tri_lambda_f)?;
            h.gauss_lambda_z = ov.f64("gauss_lambda_z", h.gauss_lambda_z)?;
            h.gamma_vol = ov.f64("gamma_vol", h.gamma_vol)?;
            h.tri_l = ov.usize("tri_l", k)?;
            let trace = fit_nmf(model, a, k, &h, &cfg.gibbs()?)?;
            trace_outputs(a, trace)?
        }
    };

    let final_mse = masked_mse(a, &state)?;
    write_trace(&cfg.out.join("trace.csv"), &losses)?;
    write_dense(&cfg.out.join("w.txt"), &state.w, None)?;
    write_dense(&cfg.out.join("z.txt"), &state.z, None)?;
    if let Some(f) = &state.f {
        write_dense(&cfg.out.join("f.txt"), f, None)?;
    }
    write_manifest(cfg, final_mse, None)?;
    Ok(RunOutput {
        final_mse,
        losses,
        selected: None,
        out_dir: cfg.out.clone(),
    })
}

/// Posterior-mean factors from a Gibbs trace (final sample when nothing was
/// retained).
fn trace_outputs(
    a: &MaskedMatrix,
    trace: GibbsTrace,
) -> Result<(FactorState, Vec<f64>), CliError> {
    let state = trace
        .posterior_mean()
        .ok_or_else(|| CliError::Config("no retained samples; increase iters".into()))?;
    let _ = a;
    Ok((state, trace.losses))
}

fn run_id(cfg: &RunConfig, a: &MaskedMatrix, ov: &Overrides) -> Result<RunOutput, CliError> {
    let variant = match (cfg.model.as_str(), cfg.ard) {
        ("gbt", false) => IdVariant::Gbt,
        ("gbtn", false) => IdVariant::Gbtn,
        ("gbt-ard", _) | ("gbt", true) => IdVariant::GbtArd,
        ("gbtn-ard", _) | ("gbtn", true) => IdVariant::GbtnArd,
        ("gbt-aggressive", _) => IdVariant::GbtAggressive,
        ("iid", _) => IdVariant::Iid,
        (other, _) => return Err(CliError::Config(format!("unknown ID model '{other}'"))),
    };
    let mut h = IdHyper::default();
    h.a = ov.f64("id_a", h.a)?;
    h.b = ov.f64("id_b", h.b)?;
    h.mu_kl = ov.f64("id_mu", h.mu_kl)?;
    h.tau_kl = ov.f64("id_tau", h.tau_kl)?;
    h.alpha_sigma = ov.f64("alpha_sigma", h.alpha_sigma)?;
    h.beta_sigma = ov.f64("beta_sigma", h.beta_sigma)?;
    h.mu_mu = ov.f64("mu_mu", h.mu_mu)?;
    h.tau_mu = ov.f64("tau_mu", h.tau_mu)?;
    h.alpha_t = ov.f64("alpha_t", h.alpha_t)?;
    h.beta_t = ov.f64("beta_t", h.beta_t)?;
    h.nu = ov.usize("nu", h.nu)?;
    if let Some(path) = &cfg.importance {
        let scores = load_scores(path)?;
        h.importance = Some(IdHyper::importance_from_scores(&scores));
    }
    let k = if variant.uses_ard() { None } else { Some(need_k(cfg)?) };
    let fit = fit_id(variant, a, k, &h, &cfg.gibbs()?)?;
    let (c, w, j) = post_process(&fit.state, a);

    // masked MSE of the post-processed C W reconstruction
    let recon = c.dot(&w);
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
    let final_mse = ssq / count.max(1) as f64;

    write_trace(&cfg.out.join("trace.csv"), &fit.trace.losses)?;
    write_dense(&cfg.out.join("c.txt"), &c, None)?;
    write_dense(&cfg.out.join("w.txt"), &w, None)?;
    let mut json = String::from("[");
    for (i, idx) in j.iter().enumerate() {
        if i > 0 {
            json.push_str(", ");
        }
        let _ = write!(json, "{idx}");
    }
    json.push_str("]\n");
    std::fs::write(cfg.out.join("indices.json"), json)?;
    write_manifest(cfg, final_mse, Some(j.len()))?;
    Ok(RunOutput {
        final_mse,
        losses: fit.trace.losses,
        selected: Some(j),
        out_dir: cfg.out.clone(),
    })
}

fn write_trace(path: &Path, losses: &[f64]) -> Result<(), CliError> {
    let mut out = String::from("iteration,mse\n");
    for (i, loss) in losses.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, loss);
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_manifest(
    cfg: &RunConfig,
    final_mse: f64,
    selected_count: Option<usize>,
) -> Result<(), CliError> {
    let mut out = String::new();
    let _ = writeln!(out, "model={}", cfg.model);
    if let Some(k) = cfg.k {
        let _ = writeln!(out, "k={k}");
    }
    let _ = writeln!(out, "ard={}", cfg.ard);
    let _ = writeln!(out, "iters={}", cfg.iters);
    let _ = writeln!(out, "burn_in={}", cfg.burn_in);
    let _ = writeln!(out, "thin={}", cfg.thin);
    let _ = writeln!(out, "seed={}", cfg.seed);
    let _ = writeln!(out, "input={}", cfg.input.display());
    let _ = writeln!(out, "format={}", cfg.format);
    if let Some(p) = &cfg.importance {
        let _ = writeln!(out, "importance={}", p.display());
    }
    for (key, value) in &cfg.overrides {
        let _ = writeln!(out, "hyper.{key}={value}");
    }
    let _ = writeln!(out, "final_mse={final_mse}");
    if let Some(count) = selected_count {
        let _ = writeln!(out, "selected_count={count}");
    }
    std::fs::write(cfg.out.join("manifest.txt"), out)?;
    Ok(())
}

/// Recorded and recomputed reconstruction error for an exported run.
pub struct Evaluation {
    pub recorded_mse: Option<f64>,
    pub recomputed_mse: f64,
    pub rmse: f64,
}

/// Reloads exported factors and recomputes the masked reconstruction error
/// against the input data.
pub fn evaluate(input: &Path, format: DataFormat, run_dir: &Path) -> Result<Evaluation, CliError> {
    let a = load_matrix(input, format)?;
    let manifest = std::fs::read_to_string(run_dir.join("manifest.txt"))?;
    let mut recorded = None;
    let mut is_id = false;
    for line in manifest.lines() {
        if let Some(v) = line.strip_prefix("final_mse=") {
            recorded = v.parse().ok();
        }
        if let Some(model) = line.strip_prefix("model=") {
            is_id = ID_MODELS.contains(&model);
        }
    }
    let recon = if is_id {
        let c = crate::io::load_dense(&run_dir.join("c.txt"))?;
        let w = crate::io::load_dense(&run_dir.join("w.txt"))?;
        c.values.dot(&w.values)
    } else {
        let w = crate::io::load_dense(&run_dir.join("w.txt"))?;
        let z = crate::io::load_dense(&run_dir.join("z.txt"))?;
        let f_path = run_dir.join("f.txt");
        if f_path.exists() {
            let f = crate::io::load_dense(&f_path)?;
            w.values.dot(&f.values).dot(&z.values)
        } else {
            w.values.dot(&z.values)
        }
    };
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
        return Err(CliError::Core(matfact::Error::EmptyMask));
    }
    let mse = ssq / count as f64;
    Ok(Evaluation {
        recorded_mse: recorded,
        recomputed_mse: mse,
        rmse: mse.sqrt(),
    })
}

/// Runs every requested model on one input and writes a single CSV of
/// per-iteration losses, one column per model, for external plotting.
pub fn export_plot_data(cfg: &RunConfig, models: &[String]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cfg.out)?;
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for model in models {
        let mut sub = cfg.clone();
        sub.model = model.clone();
        sub.out = cfg.out.join(format!("run-{model}"));
        sub.overrides = cfg
            .overrides
            .iter()
            .filter(|(k, _)| valid_hyper_keys(model).contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let out = run(&sub)?;
        columns.push((model.clone(), out.losses));
    }
    let rows = columns.iter().map(|(_, l)| l.len()).max().unwrap_or(0);
    let mut out = String::from("iteration");
    for (model, _) in &columns {
        let _ = write!(out, ",{model}");
    }
    out.push('\n');
    for i in 0..rows {
        let _ = write!(out, "{}", i + 1);
        for (_, losses) in &columns {
            match losses.get(i) {
                Some(l) => {
                    let _ = write!(out, ",{l}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    let path = cfg.out.join("convergence.csv");
    std::fs::write(&path, out)?;
    Ok(path)
}
