//! Per-step metrics and their CSV / JSONL persistence.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// SIRs below this are reported at the floor instead of −∞ dB.
pub const SIR_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub k: usize,
    /// Mean over active PUs of the per-user SIR in dB.
    pub pu_sir_db: Option<f64>,
    pub su_sir_db: Option<f64>,
    /// Mean transmitted power (W) over all nodes of the role.
    pub pu_power: Option<f64>,
    pub su_power: Option<f64>,
    pub mean_abs_bellman: Option<f64>,
    pub mean_terminal: Option<f64>,
    /// bits/s/Hz.
    pub spectrum_efficiency: f64,
    pub cumulative_cost: f64,
    pub saturation_count: usize,
}

pub const FIELD_NAMES: [&str; 10] = [
    "k",
    "pu_sir_db",
    "su_sir_db",
    "pu_power",
    "su_power",
    "mean_abs_bellman",
    "mean_terminal",
    "spectrum_efficiency",
    "cumulative_cost",
    "saturation_count",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            _ => Err(format!("unknown format `{s}` (expected csv or jsonl)")),
        }
    }
}

pub fn to_db(sir: f64) -> f64 {
    10.0 * sir.max(SIR_FLOOR).log10()
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Shannon sum rate over active links, normalised by the shared bandwidth.
pub fn spectrum_efficiency(sirs: &[f64], active: &[bool], bandwidth_hz: f64) -> f64 {
    let throughput: f64 = sirs
        .iter()
        .zip(active)
        .filter(|(_, &a)| a)
        .map(|(&r, _)| bandwidth_hz * (1.0 + r).log2())
        .sum();
    throughput / bandwidth_hz
}

/// One user-step of the tracking cost: `(E, ν)` with `E = [R − γ, γ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerm {
    pub e: Vector2<f64>,
    /// Normalised input; `None` marks a terminal term.
    pub nu: Option<f64>,
}

/// Stage costs `EᵀQE + Sν²` plus terminal terms `EᵀP_N E`.
pub fn cumulative_cost(terms: &[CostTerm], q: &Matrix2<f64>, s: f64, p_n: &Matrix2<f64>) -> f64 {
    terms
        .iter()
        .map(|t| match t.nu {
            Some(nu) => (t.e.transpose() * q * t.e)[0] + s * nu * nu,
            None => (t.e.transpose() * p_n * t.e)[0],
        })
        .sum()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn emit_metrics(trace: &[MetricsRecord], path: &Path, format: OutputFormat) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    match format {
        OutputFormat::Csv => write_csv(trace, file).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        }),
        OutputFormat::Jsonl => {
            let mut w = BufWriter::new(file);
            for rec in trace {
                serde_json::to_writer(&mut w, rec).map_err(|source| Error::Json {
                    path: path.to_path_buf(),
                    source,
                })?;
                w.write_all(b"\n").map_err(io_err(path))?;
            }
            w.flush().map_err(io_err(path))
        }
    }
}

/// CSV with an explicit header so that an empty trace still has one.
pub fn write_csv<W: Write>(trace: &[MetricsRecord], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(FIELD_NAMES)?;
    for rec in trace {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<csv::Result<_>>().map_err(csv_err)
}
