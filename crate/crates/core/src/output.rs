//! CSV and JSON artifacts of a run.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::advi::{AdviConfig, ElboTrace, PosteriorDraws, VariationalParams};
use crate::error::OutputError;
use crate::eval::EvalReport;
use crate::zoo::{Dims, Hypers};

/// Format like C's `%.17g`: 17 significant digits, trailing zeros dropped,
/// scientific notation when the exponent is below -4 or at least 17.
pub fn format_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Header of column names, then one row per draw.
pub fn write_samples_csv(path: &Path, draws: &PosteriorDraws) -> Result<(), OutputError> {
    let file = fs::File::create(path).map_err(io_error(path))?;
    let mut w = BufWriter::new(file);
    let mut text = draws.columns.join(",");
    text.push('\n');
    for row in &draws.rows {
        let cells: Vec<String> = row.iter().map(|&v| format_g17(v)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    w.write_all(text.as_bytes()).map_err(io_error(path))?;
    w.flush().map_err(io_error(path))
}

/// Read a samples CSV back as (columns, rows).
pub fn read_samples_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), OutputError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    let bad = |detail: String| OutputError::Read {
        path: path.to_path_buf(),
        detail,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("file is empty".into()))?;
    let columns: Vec<String> = header.split(',').map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 2))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != columns.len() {
            return Err(bad(format!(
                "line {} has {} fields, header has {}",
                i + 2,
                row.len(),
                columns.len()
            )));
        }
        rows.push(row);
    }
    Ok((columns, rows))
}

/// `iteration,elapsed_ms,elbo`, one row per trace entry. Elapsed times are
/// written only when `wall_clock` is set and are zero otherwise, so
/// repeated runs produce identical files.
pub fn write_diagnostics_csv(path: &Path, trace: &ElboTrace, wall_clock: bool) -> Result<(), OutputError> {
    let mut text = String::from("iteration,elapsed_ms,elbo\n");
    for row in &trace.rows {
        let ms = if wall_clock { row.elapsed.as_millis() } else { 0 };
        text.push_str(&format!("{},{},{}\n", row.iteration, ms, format_g17(row.elbo)));
    }
    fs::write(path, text).map_err(io_error(path))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub samples: PathBuf,
    pub diagnostics: PathBuf,
    pub manifest: PathBuf,
}

impl OutputPaths {
    /// Manifest next to the samples file: `draws.csv` → `draws.manifest.json`.
    pub fn new(samples: PathBuf, diagnostics: PathBuf) -> Self {
        let manifest = samples.with_extension("manifest.json");
        OutputPaths {
            samples,
            diagnostics,
            manifest,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub optimization_ms: f64,
    pub sampling_ms: f64,
    pub evaluation_ms: f64,
}

/// Everything needed to repeat a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub model: String,
    pub hypers: Hypers,
    pub dims: Dims,
    pub config: AdviConfig,
    pub seed: u64,
    pub draws: usize,
    pub data: PathBuf,
    pub heldout: Option<PathBuf>,
    pub outputs: OutputPaths,
    pub iterations: u64,
    pub converged: bool,
    pub clamp_events: u64,
    pub batch_size: Option<usize>,
    pub final_elbo: Option<f64>,
    pub params: VariationalParams,
    pub heldout_report: Option<EvalReport>,
    pub timings: Timings,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), OutputError> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(path, text).map_err(io_error(path))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, OutputError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| OutputError::Read {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Write the samples CSV, diagnostics CSV, and manifest.
pub fn write_outputs(
    draws: &PosteriorDraws,
    trace: &ElboTrace,
    manifest: &RunManifest,
    wall_clock: bool,
) -> Result<(), OutputError> {
    let paths = &manifest.outputs;
    write_samples_csv(&paths.samples, draws)?;
    write_diagnostics_csv(&paths.diagnostics, trace, wall_clock)?;
    write_manifest(&paths.manifest, manifest)
}
