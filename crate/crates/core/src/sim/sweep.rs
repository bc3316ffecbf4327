use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{trial_rng, DetectorKind, Simulator, TrialOutcome};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "snr_db,detector,k,n_symbols,ber,llr_mse,sign_mismatch,mean_abs_llr_err,seed,wall_time_s";

/// Aggregate of one detector at one SNR point. Fidelity columns compare
/// against the exhaustive log-MAP LLRs and are empty when no reference was
/// computed; `ber` is empty only on error marker rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub snr_db: f64,
    pub detector: String,
    pub k: usize,
    pub n_symbols: usize,
    pub ber: Option<f64>,
    pub llr_mse: Option<f64>,
    pub sign_mismatch: Option<f64>,
    pub mean_abs_llr_err: Option<f64>,
    pub seed: u64,
    /// Mean detector time per received symbol vector, or 0 when timing is off.
    pub wall_time_s: f64,
}

impl ResultRow {
    pub fn error_marker(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db,
            detector: "error".into(),
            k: 0,
            n_symbols: 0,
            ber: None,
            llr_mse: None,
            sign_mismatch: None,
            mean_abs_llr_err: None,
            seed,
            wall_time_s: 0.0,
        }
    }
}

#[derive(Default)]
struct Accum {
    bits: usize,
    errors: usize,
    compared: usize,
    sq_err: f64,
    abs_err: f64,
    mismatches: usize,
    time_s: f64,
}

/// Folds trial outcomes, in trial order, into one row per detector.
pub fn aggregate(sim: &Simulator, snr_db: f64, trials: &[TrialOutcome]) -> Vec<ResultRow> {
    let n_det = sim.detectors.len();
    let mut acc: Vec<Accum> = (0..n_det).map(|_| Accum::default()).collect();
    for t in trials {
        for (a, out) in acc.iter_mut().zip(&t.outputs) {
            a.bits += t.bits.len();
            a.errors += out
                .llr
                .hard_bits()
                .iter()
                .zip(&t.bits)
                .filter(|(x, y)| x != y)
                .count();
            a.time_s += out.elapsed.as_secs_f64();
            if let Some(reference) = &t.reference {
                for (l, r) in out.llr.as_slice().iter().zip(reference.as_slice()) {
                    let e = l - r;
                    a.sq_err += e * e;
                    a.abs_err += e.abs();
                    a.mismatches += usize::from((*l > 0.0) != (*r > 0.0));
                    a.compared += 1;
                }
            }
        }
    }
    let n_symbols = trials.len() * sim.cfg.n_t;
    sim.detectors
        .iter()
        .zip(acc)
        .map(|(det, a)| {
            let fid = |v: f64| (a.compared > 0).then(|| v / a.compared as f64);
            ResultRow {
                snr_db,
                detector: det.name().to_string(),
                k: det.path_budget(sim.cfg.n_t),
                n_symbols,
                ber: Some(if a.bits == 0 {
                    0.0
                } else {
                    a.errors as f64 / a.bits as f64
                }),
                llr_mse: fid(a.sq_err),
                sign_mismatch: fid(a.mismatches as f64),
                mean_abs_llr_err: fid(a.abs_err),
                seed: sim.cfg.seed,
                wall_time_s: if sim.cfg.report_timing && !trials.is_empty() {
                    a.time_s / trials.len() as f64
                } else {
                    0.0
                },
            }
        })
        .collect()
}

/// Runs every trial of one SNR point. Trial `t` always uses stream
/// `(seed, snr_idx, t)`.
pub fn run_point(sim: &Simulator, snr_idx: usize) -> Result<Vec<TrialOutcome>> {
    let snr_db = sim.cfg.snr_db_list[snr_idx];
    (0..sim.cfg.n_trials)
        .into_par_iter()
        .map(|t| sim.run_trial(snr_db, &mut trial_rng(sim.cfg.seed, snr_idx, t)))
        .collect()
}

/// Rows produced before a failure, plus the failure itself.
#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub error: Option<Error>,
}

impl SweepOutcome {
    pub fn into_result(self) -> Result<Vec<ResultRow>> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.rows),
        }
    }
}

/// Sweeps every SNR point on a pool of `threads` workers (0 = rayon default).
/// On failure the completed rows are kept and an error marker row is
/// appended.
pub fn run_sweep(sim: &Simulator, threads: usize) -> SweepOutcome {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            return SweepOutcome {
                rows: Vec::new(),
                error: Some(Error::Config(format!("thread pool: {e}"))),
            }
        }
    };
    let mut rows = Vec::new();
    for (idx, &snr_db) in sim.cfg.snr_db_list.iter().enumerate() {
        match pool.install(|| run_point(sim, idx)) {
            Ok(trials) => rows.extend(aggregate(sim, snr_db, &trials)),
            Err(e) => {
                rows.push(ResultRow::error_marker(snr_db, sim.cfg.seed));
                return SweepOutcome {
                    rows,
                    error: Some(e),
                };
            }
        }
    }
    SweepOutcome { rows, error: None }
}

/// 17 significant digits.
fn fmt_f64(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("write to string");
}

fn fmt_opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        fmt_f64(out, v);
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        fmt_f64(&mut out, r.snr_db);
        write!(
            out,
            ",{},{},{},",
            r.detector.replace(',', ";"),
            r.k,
            r.n_symbols
        )
        .expect("write");
        fmt_opt(&mut out, r.ber);
        out.push(',');
        fmt_opt(&mut out, r.llr_mse);
        out.push(',');
        fmt_opt(&mut out, r.sign_mismatch);
        out.push(',');
        fmt_opt(&mut out, r.mean_abs_llr_err);
        write!(out, ",{},", r.seed).expect("write");
        fmt_f64(&mut out, r.wall_time_s);
        out.push('\n');
    }
    out
}

pub fn rows_to_json(rows: &[ResultRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialise")
}

pub fn rows_from_json(text: &str) -> Result<Vec<ResultRow>> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown output format {s:?}"))),
        }
    }
}

pub fn emit_results(
    rows: &[ResultRow],
    format: OutputFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => rows_to_csv(rows),
        OutputFormat::Json => rows_to_json(rows),
    };
    fs::write(path, text)?;
    Ok(())
}

/// Sorted absolute LLR errors of one detector against the reference,
/// pooled over trials.
pub fn abs_errors(trials: &[TrialOutcome], det: DetectorKind) -> Vec<f64> {
    let mut errs = Vec::new();
    for t in trials {
        let Some(reference) = &t.reference else {
            continue;
        };
        if let Some(out) = t.outputs.iter().find(|o| o.detector == det) {
            errs.extend(
                out.llr
                    .as_slice()
                    .iter()
                    .zip(reference.as_slice())
                    .map(|(a, b)| (a - b).abs()),
            );
        }
    }
    errs.sort_by(f64::total_cmp);
    errs
}

/// Median of sorted values (mean of the middle pair for even lengths).
pub fn median_sorted(v: &[f64]) -> Option<f64> {
    match v.len() {
        0 => None,
        n if n % 2 == 1 => Some(v[n / 2]),
        n => Some(0.5 * (v[n / 2 - 1] + v[n / 2])),
    }
}
