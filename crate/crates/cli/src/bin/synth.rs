//! `advi-synth`: write synthetic datasets for the zoo models as JSON.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use advi_core::{synth, Dataset};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "advi-synth", version, about = "Generate synthetic datasets")]
struct Args {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training split.
    #[arg(long)]
    out: PathBuf,
    /// Held-out split, for generators that produce one.
    #[arg(long)]
    test_out: Option<PathBuf>,
    #[command(subcommand)]
    kind: Kind,
}

#[derive(Subcommand, Debug)]
enum Kind {
    /// iid Poisson counts `x` (poisson_exponential).
    Poisson {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 3.0)]
        rate: f64,
    },
    /// Sparse linear regression (linreg_ard).
    Linreg {
        #[arg(long, default_value_t = 1000)]
        n_train: usize,
        #[arg(long, default_value_t = 100)]
        n_test: usize,
        #[arg(long, default_value_t = 10)]
        d: usize,
        /// Regressors with nonzero weight.
        #[arg(long, default_value_t = 5)]
        active: usize,
        #[arg(long, default_value_t = 1.0)]
        noise_sd: f64,
    },
    /// Isotropic Gaussian clusters (gmm).
    Mixture {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Cluster means, `;`-separated rows of `,`-separated coordinates.
        #[arg(long, default_value = "-4,0;4,0;0,5", allow_hyphen_values = true)]
        means: String,
        #[arg(long, default_value_t = 0.5)]
        sd: f64,
    },
    /// Binary survey responses with grouped covariates (hier_logistic).
    Survey {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Group counts for age, edu, age_edu, state, region_full.
        #[arg(long, value_delimiter = ',', default_value = "4,5,20,50,5")]
        sizes: Vec<usize>,
    },
    /// Low-rank Poisson count matrix (the NMF models).
    Counts {
        #[arg(long, default_value_t = 50)]
        users: usize,
        #[arg(long, default_value_t = 40)]
        items: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        shape: f64,
    },
}

fn parse_means(text: &str) -> Result<Vec<Vec<f64>>, String> {
    let means: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    if means.iter().any(|m| m.len() != means[0].len() || m.is_empty()) {
        return Err("every mean needs the same, nonzero number of coordinates".into());
    }
    Ok(means)
}

fn write(path: &Path, data: &Dataset) -> Result<(), String> {
    fs::write(path, data.to_json_string() + "\n").map_err(|e| format!("{}: {e}", path.display()))
}

fn run(args: &Args) -> Result<(), String> {
    let (train, test) = match &args.kind {
        Kind::Poisson { n, rate } => (synth::poisson_counts(*n, *rate, args.seed), None),
        Kind::Linreg {
            n_train,
            n_test,
            d,
            active,
            noise_sd,
        } => {
            if active > d {
                return Err(format!("--active {active} exceeds --d {d}"));
            }
            let split = synth::linreg(*n_train, *n_test, *d, *active, *noise_sd, args.seed);
            (split.train, Some(split.test))
        }
        Kind::Mixture { n, means, sd } => (synth::mixture(*n, &parse_means(means)?, *sd, args.seed).data, None),
        Kind::Survey { n, sizes } => {
            let sizes: [usize; 5] = sizes
                .as_slice()
                .try_into()
                .map_err(|_| "--sizes takes five group counts".to_string())?;
            if sizes.contains(&0) {
                return Err("group counts must be positive".into());
            }
            (synth::survey(*n, sizes, args.seed), None)
        }
        Kind::Counts { users, items, k, shape } => {
            let m = synth::count_matrix(*users, *items, *k, *shape, args.seed);
            (m.train, Some(m.test))
        }
    };
    write(&args.out, &train)?;
    match (&args.test_out, test) {
        (Some(path), Some(test)) => write(path, &test),
        (Some(_), None) => Err("this generator has no held-out split".into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("advi-synth: {e}");
            ExitCode::from(2)
        }
    }
}
