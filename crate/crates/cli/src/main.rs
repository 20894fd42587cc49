use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matfact_cli::run::{FIT_MODELS, ID_MODELS};
use matfact_cli::{CliError, DataFormat, RunConfig};

#[derive(Parser)]
#[command(
    name = "matfact",
    about = "Matrix factorization toolkit: ALS / MU-NMF baselines, Bayesian Gibbs samplers, and interpolative decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a factorization model and export the trace and factors.
    Fit(FitArgs),
    /// Select basis columns with a Bayesian interpolative decomposition.
    IdSelect(FitArgs),
    /// Recompute the reconstruction error of an exported run.
    Evaluate(EvaluateArgs),
    /// Run several models on one input and export their loss series as CSV.
    ExportPlotData(PlotArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value config file; command-line flags win on conflict.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Latent dimension (number of basis columns for ID models).
    #[arg(long)]
    k: Option<usize>,
    /// Let the sampler choose the number of basis columns (ID models).
    #[arg(long)]
    ard: bool,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, value_name = "N")]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input format: triplets ("row,col,value" lines) or dense (rows of
    /// numbers, NA for unobserved).
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Hyperparameter override, repeatable: --set key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Raw importance scores for IID, one real per column.
    #[arg(long)]
    importance: Option<PathBuf>,
    /// Number of parallel seed-offset chains.
    #[arg(long)]
    chains: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "dense")]
    format: String,
    /// Output directory of a previous run (manifest + factors).
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated model tags to compare.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
}

fn build_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default_empty(),
    };
    if let Some(model) = &args.model {
        cfg.model = model.clone();
    }
    if let Some(k) = args.k {
        cfg.k = Some(k);
    }
    if args.ard {
        cfg.ard = true;
    }
    if let Some(iters) = args.iters {
        cfg.iters = iters;
    }
    if let Some(burn_in) = args.burn_in {
        cfg.burn_in = burn_in;
    }
    if let Some(thin) = args.thin {
        cfg.thin = thin;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(input) = &args.input {
        cfg.input = input.clone();
    }
    if let Some(format) = &args.format {
        cfg.format = format.parse()?;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(importance) = &args.importance {
        cfg.importance = Some(importance.clone());
    }
    if let Some(chains) = args.chains {
        cfg.chains = chains;
    }
    let mut overrides: BTreeMap<String, String> = cfg.overrides.clone();
    for kv in &args.set {
        let (key, value) = kv.split_once('=').ok_or_else(|| {
            CliError::Config(format!("--set expects key=value, got '{kv}'"))
        })?;
        overrides.insert(key.trim().to_string(), value.trim().to_string());
    }
    cfg.overrides = overrides;
    if cfg.model.is_empty() {
        return Err(CliError::Config("--model is required".into()));
    }
    if cfg.input.as_os_str().is_empty() {
        return Err(CliError::Config("--input is required".into()));
    }
    if cfg.out.as_os_str().is_empty() {
        return Err(CliError::Config("--out is required".into()));
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => build_config(&args.common).and_then(|cfg| {
            if !FIT_MODELS.contains(&cfg.model.as_str()) {
                return Err(CliError::Config(format!(
                    "'{}' is not a factorization model; use id-select for ID models ({})",
                    cfg.model,
                    ID_MODELS.join(", ")
                )));
            }
            let out = matfact_cli::run(&cfg)?;
            println!("model={} final_mse={}", cfg.model, out.final_mse);
            println!("artifacts written to {}", out.out_dir.display());
            Ok(())
        }),
        Command::IdSelect(args) => build_config(&args.common).and_then(|cfg| {
            if !ID_MODELS.contains(&cfg.model.as_str()) {
                return Err(CliError::Config(format!(
                    "'{}' is not an ID model; valid: {}",
                    cfg.model,
                    ID_MODELS.join(", ")
                )));
            }
            let out = matfact_cli::run(&cfg)?;
            let selected = out.selected.unwrap_or_default();
            println!(
                "model={} final_mse={} selected={:?}",
                cfg.model, out.final_mse, selected
            );
            println!("artifacts written to {}", out.out_dir.display());
            Ok(())
        }),
        Command::Evaluate(args) => args
            .format
            .parse::<DataFormat>()
            .and_then(|format| matfact_cli::evaluate(&args.input, format, &args.run))
            .map(|eval| {
                if let Some(recorded) = eval.recorded_mse {
                    println!("recorded_mse={recorded}");
                }
                println!("recomputed_mse={}", eval.recomputed_mse);
                println!("rmse={}", eval.rmse);
            }),
        Command::ExportPlotData(mut args) => {
            // the per-series tags come from --models; seed the shared config
            // with the first one so validation passes
            if args.common.model.is_none() {
                args.common.model = args.models.first().cloned();
            }
            build_config(&args.common).and_then(|cfg| {
                if args.models.is_empty() {
                    return Err(CliError::Config(
                        "--models must list at least one tag".into(),
                    ));
                }
                let path = matfact_cli::export_plot_data(&cfg, &args.models)?;
                println!("convergence series written to {}", path.display());
                Ok(())
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
