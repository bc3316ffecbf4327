use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use super::{trial_rng, SimConfig};
use crate::baseline::{candidate_max_log, complex_metric, exact_llrs, lmmse_filter};
use crate::error::Result;
use crate::model::{draw_channel, noise_var_from_snr, transmit, CMatrix, CVector, Constellation};
use crate::search::{
    adjacent_levels, exhaustive_layer_table, extract_layer_metrics, for_each_hypothesis,
    hypothesis_count, kbest_search, minimal_path_set, real_decompose, real_embedding,
    CandidateList, CandidatePath,
};

/// Above this many hypotheses the checks that list every hypothesis are skipped.
const FULL_LIST_LIMIT: u128 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    /// `None` when the check does not apply to this configuration.
    pub passed: Option<bool>,
    pub detail: String,
}

impl fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match self.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> OracleCheck {
    OracleCheck {
        name,
        passed: Some(passed),
        detail,
    }
}

fn skip(name: &'static str, detail: impl Into<String>) -> OracleCheck {
    OracleCheck {
        name,
        passed: None,
        detail: detail.into(),
    }
}

struct Instance {
    h: CMatrix,
    y: CVector,
    s: Vec<Complex64>,
    noise_var: f64,
}

fn instances(cfg: &SimConfig, c: &Constellation, n: usize) -> Result<Vec<Instance>> {
    let snr_db = cfg.snr_db_list.first().copied().unwrap_or(10.0);
    let noise_var = noise_var_from_snr(snr_db, cfg.n_t, c, &cfg.channel_config())?;
    let n_bits = cfg.n_t * c.bits_per_symbol();
    (0..n)
        .map(|t| {
            // streams above any sweep index keep these draws apart from trials
            let mut rng = trial_rng(cfg.seed, usize::MAX >> 24, t);
            let h = draw_channel(&cfg.channel_config(), cfg.n_r, cfg.n_t, &mut rng)?;
            let bits: Vec<u8> = (0..n_bits).map(|_| rng.random_range(0..2)).collect();
            let s = c.modulate(&bits, cfg.n_t)?;
            let y = transmit(&h, &s, noise_var, &mut rng)?;
            Ok(Instance { h, y, s, noise_var })
        })
        .collect()
}

/// All symbol vectors in complex form, enumerated directly over the QAM grid.
fn all_symbol_vectors(c: &Constellation, n_t: usize) -> Vec<Vec<Complex64>> {
    let m = c.levels_per_dim();
    let per_symbol = m * m;
    let total = per_symbol.pow(n_t as u32);
    (0..total)
        .map(|mut idx| {
            (0..n_t)
                .map(|_| {
                    let q = idx % per_symbol;
                    idx /= per_symbol;
                    Complex64::new(c.level(q / m), c.level(q % m))
                })
                .collect()
        })
        .collect()
}

/// Log-MAP by summing over complex symbol vectors, without any real-valued
/// machinery.
fn naive_log_map(inst: &Instance, c: &Constellation, n_t: usize) -> Vec<f64> {
    let vectors = all_symbol_vectors(c, n_t);
    let scores: Vec<(Vec<u8>, f64)> = vectors
        .iter()
        .map(|s| {
            (
                c.demap(s),
                -complex_metric(&inst.h, &inst.y, s) / inst.noise_var,
            )
        })
        .collect();
    let n_bits = n_t * c.bits_per_symbol();
    (0..n_bits)
        .map(|b| {
            let lse = |want: u8| {
                let vals: Vec<f64> = scores
                    .iter()
                    .filter(|(bits, _)| bits[b] == want)
                    .map(|(_, v)| *v)
                    .collect();
                let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
            };
            lse(1) - lse(0)
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs the self-checks that apply to the configuration's dimensions,
/// constellation and channel model.
pub fn run_oracle_suite(cfg: &SimConfig) -> Result<Vec<OracleCheck>> {
    cfg.validate(true)?;
    let c = Constellation::new(cfg.m_c)?;
    let n_t = cfg.n_t;
    let count = hypothesis_count(&c, n_t);
    let mut out = Vec::new();

    let insts = instances(cfg, &c, 100)?;

    let mut worst_rt = 0usize;
    for t in 0..insts.len() {
        let mut rng = trial_rng(cfg.seed ^ 0x5eed, 0, t);
        let bits: Vec<u8> = (0..n_t * c.bits_per_symbol())
            .map(|_| rng.random_range(0..2))
            .collect();
        let back = c.demap(&c.modulate(&bits, n_t)?);
        worst_rt += bits.iter().zip(&back).filter(|(a, b)| a != b).count();
    }
    out.push(check(
        "modulation round trip",
        worst_rt == 0,
        format!("{worst_rt} bit errors"),
    ));

    let mut worst = 0.0f64;
    for inst in &insts {
        let (h_r, y_r) = real_embedding(&inst.h, &inst.y)?;
        let s_r: Vec<f64> = inst
            .s
            .iter()
            .map(|z| z.re)
            .chain(inst.s.iter().map(|z| z.im))
            .collect();
        let r = &y_r - &h_r * nalgebra::DVector::from_vec(s_r);
        worst = worst.max((r.norm_squared() - complex_metric(&inst.h, &inst.y, &inst.s)).abs());
    }
    out.push(check(
        "real embedding preserves metric",
        worst < 1e-9,
        format!("max |diff| {worst:.3e}"),
    ));

    let mut worst = 0.0f64;
    for inst in &insts {
        let dec = real_decompose(&inst.h, &inst.y)?;
        let n = dec.n_real();
        let permuted = nalgebra::DMatrix::from_fn(dec.h_r.nrows(), n, |row, p| {
            dec.h_r[(row, dec.col_perm[p])]
        });
        let err = (&dec.q * &dec.r - permuted).abs().max();
        let lower = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|ij| dec.r[ij].abs())
            .fold(0.0, f64::max);
        worst = worst.max(err.max(lower) / dec.h_r.norm());
    }
    out.push(check(
        "sorted QR reconstructs the channel",
        worst < 1e-12,
        format!("max rel err {worst:.3e}"),
    ));

    if count > FULL_LIST_LIMIT {
        out.push(skip(
            "full-width K-best finds ML",
            format!("{count} hypotheses"),
        ));
        out.push(skip(
            "exhaustive list max-log equals exact max-log",
            format!("{count} hypotheses"),
        ));
    } else {
        let mut misses = 0;
        let mut worst = 0.0f64;
        for inst in insts.iter().take(20) {
            let dec = real_decompose(&inst.h, &inst.y)?;
            let ex = exhaustive_layer_table(&dec.h_r, &dec.y_r, &c, count)?;
            let list = kbest_search(&dec, &c, count as usize)?;
            let best = list.best().expect("nonempty").metric;
            if (best - ex.table.global_min).abs() > 1e-9 * ex.table.global_min.max(1.0) {
                misses += 1;
            }

            let mut paths = Vec::with_capacity(count as usize);
            for_each_hypothesis(&dec.h_r, &dec.y_r, &c, |levels, metric| {
                paths.push(CandidatePath {
                    levels: levels.to_vec(),
                    metric,
                });
            });
            let full = CandidateList::new(paths)?;
            let table = extract_layer_metrics(&full, &c, n_t)?;
            let big = 1e300;
            let from_list = candidate_max_log(&table, inst.noise_var, &c, big)?;
            let (_, max_log) = exact_llrs(&inst.y, &inst.h, inst.noise_var, &c)?;
            worst = worst.max(max_abs_diff(from_list.as_slice(), max_log.as_slice()));
        }
        out.push(check(
            "full-width K-best finds ML",
            misses == 0,
            format!("{misses} of 20 missed"),
        ));
        out.push(check(
            "exhaustive list max-log equals exact max-log",
            worst < 1e-10,
            format!("max |diff| {worst:.3e}"),
        ));
    }

    if count > FULL_LIST_LIMIT {
        out.push(skip(
            "exact log-MAP equals naive enumeration",
            format!("{count} hypotheses"),
        ));
    } else {
        let mut worst = 0.0f64;
        for inst in insts.iter().take(20) {
            let (log_map, _) = exact_llrs(&inst.y, &inst.h, inst.noise_var, &c)?;
            let naive = naive_log_map(inst, &c, n_t);
            worst = worst.max(max_abs_diff(log_map.as_slice(), &naive));
        }
        out.push(check(
            "exact log-MAP equals naive enumeration",
            worst < 1e-10,
            format!("max |diff| {worst:.3e}"),
        ));
    }

    if count > u128::from(cfg.oracle_max_hypotheses) {
        out.push(skip(
            "minimal path set holds exact constrained minima",
            format!("{count} hypotheses"),
        ));
    } else {
        let mut bad = 0;
        for inst in insts.iter().take(10) {
            let dec = real_decompose(&inst.h, &inst.y)?;
            let ex = exhaustive_layer_table(&dec.h_r, &dec.y_r, &c, u128::MAX)?;
            let list = minimal_path_set(&dec, &c, &ex.best)?;
            let table = extract_layer_metrics(&list, &c, n_t)?;
            for (j, &b) in ex.best.iter().enumerate() {
                let row = table.row(j);
                let exact = ex.table.row(j);
                for lv in std::iter::once(b).chain(adjacent_levels(b, c.levels_per_dim())) {
                    match (row[lv], exact[lv]) {
                        (Some(a), Some(e)) if (a - e).abs() <= 1e-9 * e.max(1.0) => {}
                        _ => bad += 1,
                    }
                }
            }
        }
        out.push(check(
            "minimal path set holds exact constrained minima",
            bad == 0,
            format!("{bad} wrong entries over 10 channels"),
        ));
    }

    let mut bad = 0;
    for inst in &insts {
        let f = lmmse_filter(&inst.y, &inst.h, inst.noise_var, &c)?;
        for (g, v) in f.gain.iter().zip(&f.residual_var) {
            if !(*v > 0.0 && *v <= g * c.symbol_energy() * (1.0 + 1e-12) && *g > 0.0 && *g < 1.0) {
                bad += 1;
            }
        }
    }
    out.push(check(
        "LMMSE gain and residual variance bounds",
        bad == 0,
        format!("{bad} violations"),
    ));

    Ok(out)
}
