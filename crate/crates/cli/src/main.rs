//! `advi`: fit a zoo model to a JSON dataset and write posterior draws.
//!
//! Exit codes: 0 on success (converged or budget exhausted), 1 on output
//! I/O failure, 2 on a configuration or input error, 3 when the model
//! cannot be evaluated during optimization.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use advi_core::output::Timings;
use advi_core::zoo::required_dims;
use advi_core::{
    draw_posterior, heldout_log_predictive, infer_dims, load_dataset, make_model, run_advi, write_outputs, AdviConfig,
    AdviError, Dims, Hypers, InitMode, Model, OutputPaths, RngStreams, RunManifest,
};
use clap::{Parser, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "advi", version, about = "Automatic differentiation variational inference")]
struct Args {
    /// Zoo model name.
    #[arg(long)]
    model: String,
    /// Training data (JSON object of named scalars, arrays and matrices).
    #[arg(long)]
    data: PathBuf,
    /// Held-out data to score with the posterior predictive.
    #[arg(long)]
    heldout: Option<PathBuf>,
    /// Posterior draws CSV. The manifest is written next to it.
    #[arg(long)]
    output: PathBuf,
    /// ELBO trace CSV.
    #[arg(long)]
    diagnostic: PathBuf,
    #[arg(long, default_value_t = 1)]
    grad_samples: usize,
    #[arg(long, default_value_t = 100)]
    elbo_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: u64,
    /// Relative ELBO change that counts as converged.
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    #[arg(long, default_value_t = 100)]
    eval_every: u64,
    #[arg(long, default_value_t = 0.1)]
    step_scale: f64,
    /// Observations per iteration; the whole dataset when unset.
    #[arg(long)]
    minibatch: Option<usize>,
    /// Posterior draws to write.
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, value_enum, default_value_t = Init::Zero)]
    init: Init,
    /// Model hyperparameter or dimension, `name=value`. Repeatable.
    #[arg(long = "hyper", value_parser = parse_assignment)]
    hypers: Vec<(String, f64)>,
    /// Write real elapsed times into the diagnostics CSV (they are zero
    /// otherwise, which keeps repeated runs byte-identical).
    #[arg(long)]
    wall_clock: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Init {
    Zero,
    Gaussian,
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("`{s}` is not name=value"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("`{value}`: {e}"))?;
    Ok((name.trim().to_owned(), value))
}

enum Failure {
    Config(String),
    Evaluation(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Evaluation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Evaluation(m) | Failure::Io(m) => m,
        }
    }
}

fn config<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

/// Split `--hyper` assignments into hyperparameters and dimensions.
fn split_assignments(model: &str, assignments: &[(String, f64)]) -> Result<(Hypers, Dims), Failure> {
    let dim_names = required_dims(model).map_err(config)?;
    let mut hypers = Hypers::new();
    let mut dims = Dims::new();
    for (name, value) in assignments {
        if dim_names.iter().any(|(d, _)| d == name) {
            if value.fract() != 0.0 || *value < 0.0 {
                return Err(Failure::Config(format!("dimension {name} = {value} is not a count")));
            }
            dims.insert(name.clone(), *value as usize);
        } else {
            hypers.insert(name.clone(), *value);
        }
    }
    Ok((hypers, dims))
}

fn run(args: &Args) -> Result<(), Failure> {
    let (hypers, explicit_dims) = split_assignments(&args.model, &args.hypers)?;
    let data = load_dataset(&args.data).map_err(|e| Failure::Config(format!("{}: {e}", args.data.display())))?;
    let heldout = match &args.heldout {
        Some(path) => Some(load_dataset(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?),
        None => None,
    };
    let dims = infer_dims(&args.model, &data, &explicit_dims).map_err(config)?;
    let model = make_model(&args.model, &hypers, &dims).map_err(config)?;
    if args.draws == 0 {
        return Err(Failure::Config("--draws must be at least 1".into()));
    }

    let advi = AdviConfig {
        grad_samples: args.grad_samples,
        elbo_samples: args.elbo_samples,
        step_scale: args.step_scale,
        threshold: args.threshold,
        eval_interval: args.eval_every,
        max_iterations: args.max_iters,
        seed: args.seed,
        minibatch: args.minibatch,
        init: match args.init {
            Init::Zero => InitMode::Zero,
            Init::Gaussian => InitMode::Gaussian,
        },
        ..AdviConfig::default()
    };

    let start = Instant::now();
    let fit = run_advi(&model, &data, &advi).map_err(|e| match e {
        AdviError::Evaluation {
            iteration,
            reason,
            mu,
            omega,
        } => Failure::Evaluation(format!(
            "evaluation failed at iteration {iteration}: {reason}\n  mu = {mu:?}\n  omega = {omega:?}"
        )),
        other => config(other),
    })?;
    let optimization_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let streams = RngStreams::new(args.seed);
    let draws = draw_posterior(&model, &fit.params, args.draws, &streams).map_err(config)?;
    let sampling_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let report = match &heldout {
        Some(h) => Some(heldout_log_predictive(&model, &draws, h).map_err(config)?),
        None => None,
    };
    let evaluation_ms = start.elapsed().as_secs_f64() * 1e3;

    let final_elbo = fit.trace.last().map(|r| r.elbo);
    let manifest = RunManifest {
        model: model.name().to_owned(),
        hypers,
        dims,
        config: advi.clone(),
        seed: args.seed,
        draws: args.draws,
        data: args.data.clone(),
        heldout: args.heldout.clone(),
        outputs: OutputPaths::new(args.output.clone(), args.diagnostic.clone()),
        iterations: fit.iterations,
        converged: fit.converged,
        clamp_events: fit.clamp_events,
        batch_size: fit.batch_size,
        final_elbo,
        params: fit.params.clone(),
        heldout_report: report.clone(),
        timings: Timings {
            optimization_ms,
            sampling_ms,
            evaluation_ms,
        },
    };
    write_outputs(&draws, &fit.trace, &manifest, args.wall_clock).map_err(|e| Failure::Io(e.to_string()))?;

    let status = if fit.converged {
        "converged"
    } else {
        "iteration budget reached"
    };
    eprintln!("{}: {status} after {} iterations", model.name(), fit.iterations);
    if let Some(elbo) = final_elbo {
        eprintln!("final ELBO {elbo:.6}");
    }
    if fit.clamp_events > 0 {
        eprintln!("omega clamped {} times", fit.clamp_events);
    }
    if let Some(r) = report {
        eprintln!(
            "held-out log predictive {:.6} over {} points, {} draws",
            r.mean_log_predictive, r.n_heldout, r.n_draws
        );
        if let Some(i) = r.worst_index {
            eprintln!("held-out point {i} has zero likelihood under every draw");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("advi: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
