//! Reference soft detectors.
//!
//! All detectors share one likelihood convention: `p(y | s) ∝
//! exp(-||y - Hs||^2 / noise_var)`, with `noise_var` the variance per complex
//! receive entry, and produce `LLR = ln p(b = 1 | y) - ln p(b = 0 | y)`
//! ordered layer-major, then bit index within the symbol.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CMatrix, CVector, Constellation};
use crate::search::{
    check_enumeration, for_each_hypothesis, real_embedding, LayerMetricTable, Part, RealLayer,
    ENUMERATION_LIMIT,
};

/// Default saturation magnitude for clamped LLRs.
pub const DEFAULT_LAMBDA_MAX: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LlrVector(pub Vec<f64>);

impl LlrVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Hard decisions, `1` where the LLR is positive.
    pub fn hard_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&l| u8::from(l > 0.0)).collect()
    }

    pub fn clamped(mut self, lambda_max: f64) -> Self {
        for v in &mut self.0 {
            *v = v.clamp(-lambda_max, lambda_max);
        }
        self
    }
}

/// Position of bit `k` of real layer `j` inside an LLR vector.
pub fn llr_index(c: &Constellation, n_t: usize, j: usize, k: usize) -> usize {
    let rl = RealLayer {
        layer: j % n_t,
        part: if j < n_t { Part::Re } else { Part::Im },
    };
    let offset = match rl.part {
        Part::Re => 0,
        Part::Im => c.bits_per_dim(),
    };
    rl.layer * c.bits_per_symbol() + offset + k
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-bit LLRs from per-level log weights of every real layer.
fn llrs_from_level_scores(
    scores: &[Vec<f64>],
    c: &Constellation,
    n_t: usize,
    combine: impl Fn(&mut dyn Iterator<Item = f64>) -> f64,
) -> LlrVector {
    let mut out = vec![0.0; n_t * c.bits_per_symbol()];
    for (j, row) in scores.iter().enumerate() {
        for k in 0..c.bits_per_dim() {
            let mut ones = (0..row.len())
                .filter(|&i| c.level_bit(i, k))
                .map(|i| row[i]);
            let mut zeros = (0..row.len())
                .filter(|&i| !c.level_bit(i, k))
                .map(|i| row[i]);
            out[llr_index(c, n_t, j, k)] = combine(&mut ones) - combine(&mut zeros);
        }
    }
    LlrVector(out)
}

fn check_inputs(y: &CVector, h: &CMatrix, noise_var: f64) -> Result<()> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::invalid(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    if y.len() != h.nrows() {
        return Err(Error::invalid(
            "received vector does not match channel rows",
        ));
    }
    Ok(())
}

/// Exhaustive log-MAP and max-log LLRs from one enumeration.
pub fn exact_llrs(
    y: &CVector,
    h: &CMatrix,
    noise_var: f64,
    c: &Constellation,
) -> Result<(LlrVector, LlrVector)> {
    check_inputs(y, h, noise_var)?;
    let n_t = h.ncols();
    check_enumeration(c, n_t, ENUMERATION_LIMIT)?;
    let (h_r, y_r) = real_embedding(h, y)?;
    let n = 2 * n_t;
    let n_levels = c.levels_per_dim();

    let mut metrics = Vec::with_capacity(n_levels.pow(n as u32));
    let mut dmin = vec![vec![f64::INFINITY; n_levels]; n];
    for_each_hypothesis(&h_r, &y_r, c, |levels, m| {
        metrics.push(m);
        for (j, &lv) in levels.iter().enumerate() {
            if m < dmin[j][lv] {
                dmin[j][lv] = m;
            }
        }
    });
    let gmin = dmin[0].iter().copied().fold(f64::INFINITY, f64::min);

    // acc[j][i] = sum over hypotheses with level i on layer j of
    // exp(-(m - dmin[j][i]) / noise_var), so every entry is >= 1
    let spread = dmin
        .iter()
        .flatten()
        .map(|d| (d - gmin) / noise_var)
        .fold(0.0, f64::max);
    let mut acc = vec![vec![0.0; n_levels]; n];
    let mut levels = vec![0usize; n];
    if spread <= 600.0 {
        let boost: Vec<Vec<f64>> = dmin
            .iter()
            .map(|row| row.iter().map(|d| ((d - gmin) / noise_var).exp()).collect())
            .collect();
        for &m in &metrics {
            let w = (-(m - gmin) / noise_var).exp();
            for j in 0..n {
                acc[j][levels[j]] += w * boost[j][levels[j]];
            }
            advance(&mut levels, n_levels);
        }
    } else {
        for &m in &metrics {
            for j in 0..n {
                let d = dmin[j][levels[j]];
                acc[j][levels[j]] += (-(m - d) / noise_var).exp();
            }
            advance(&mut levels, n_levels);
        }
    }

    let log_marginal: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..n_levels)
                .map(|i| -dmin[j][i] / noise_var + acc[j][i].ln())
                .collect()
        })
        .collect();
    let neg_metric: Vec<Vec<f64>> = dmin
        .iter()
        .map(|row| row.iter().map(|d| -d / noise_var).collect())
        .collect();

    let log_map = llrs_from_level_scores(&log_marginal, c, n_t, |it| log_sum_exp(it));
    let max_log = llrs_from_level_scores(&neg_metric, c, n_t, |it| {
        it.fold(f64::NEG_INFINITY, f64::max)
    });
    Ok((log_map, max_log))
}

/// Lexicographic successor, last index fastest (matches enumeration order).
fn advance(levels: &mut [usize], n_levels: usize) {
    for slot in levels.iter_mut().rev() {
        *slot += 1;
        if *slot < n_levels {
            return;
        }
        *slot = 0;
    }
}

pub fn exact_log_map(
    y: &CVector,
    h: &CMatrix,
    noise_var: f64,
    c: &Constellation,
) -> Result<LlrVector> {
    exact_llrs(y, h, noise_var, c).map(|(lm, _)| lm)
}

pub fn exact_max_log(
    y: &CVector,
    h: &CMatrix,
    noise_var: f64,
    c: &Constellation,
) -> Result<LlrVector> {
    exact_llrs(y, h, noise_var, c).map(|(_, ml)| ml)
}

/// Max-log LLRs restricted to the sampled candidates.
///
/// A bit whose counter-hypothesis was never sampled saturates at
/// `±lambda_max` toward the hypothesis that was; all outputs are clamped to
/// `[-lambda_max, lambda_max]`.
pub fn candidate_max_log(
    table: &LayerMetricTable,
    noise_var: f64,
    c: &Constellation,
    lambda_max: f64,
) -> Result<LlrVector> {
    if noise_var.is_nan() || noise_var <= 0.0 {
        return Err(Error::invalid("noise variance must be positive"));
    }
    let n_t = table.n_layers() / 2;
    let mut out = vec![0.0; n_t * c.bits_per_symbol()];
    for (j, row) in table.d.iter().enumerate() {
        for k in 0..c.bits_per_dim() {
            let mut best = [f64::INFINITY; 2];
            for (i, d) in row.iter().enumerate() {
                if let Some(d) = d {
                    let b = usize::from(c.level_bit(i, k));
                    best[b] = best[b].min(*d);
                }
            }
            let llr = match (best[0].is_finite(), best[1].is_finite()) {
                (true, true) => (best[0] - best[1]) / noise_var,
                (false, true) => lambda_max,
                (true, false) => -lambda_max,
                (false, false) => return Err(Error::EmptyRow),
            };
            out[llr_index(c, n_t, j, k)] = llr.clamp(-lambda_max, lambda_max);
        }
    }
    Ok(LlrVector(out))
}

/// Output of the linear MMSE front end.
#[derive(Debug, Clone)]
pub struct LmmseOutput {
    pub z: CVector,
    pub gain: Vec<f64>,
    /// Residual interference-plus-noise variance per stream.
    pub residual_var: Vec<f64>,
}

pub fn lmmse_filter(
    y: &CVector,
    h: &CMatrix,
    noise_var: f64,
    c: &Constellation,
) -> Result<LmmseOutput> {
    check_inputs(y, h, noise_var)?;
    let es = c.symbol_energy();
    let n_t = h.ncols();
    let hh = h.adjoint();
    let reg = &hh * h + CMatrix::identity(n_t, n_t) * Complex64::new(noise_var / es, 0.0);
    let chol = reg.cholesky().ok_or_else(|| {
        Error::DegenerateChannel("regularised Gram matrix not positive definite".into())
    })?;
    let w: CMatrix = chol.solve(&hh);
    let z = &w * y;
    let wh = &w * h;
    let gain: Vec<f64> = (0..n_t).map(|j| wh[(j, j)].re).collect();
    let residual_var = gain.iter().map(|g| (g - g * g) * es).collect();
    Ok(LmmseOutput {
        z,
        gain,
        residual_var,
    })
}

/// LMMSE equalisation followed by per-dimension max-log demapping on
/// `z_j ≈ g_j s_j + e_j`, `e_j ~ CN(0, (g_j - g_j^2) E_s)`.
pub fn lmmse_soft(
    y: &CVector,
    h: &CMatrix,
    noise_var: f64,
    c: &Constellation,
    lambda_max: f64,
) -> Result<LlrVector> {
    let eq = lmmse_filter(y, h, noise_var, c)?;
    let n_t = h.ncols();
    let levels = c.pam_levels();
    let mut scores = vec![vec![0.0; levels.len()]; 2 * n_t];
    for l in 0..n_t {
        let g = eq.gain[l];
        let var = eq.residual_var[l].max(f64::MIN_POSITIVE);
        for (part, obs) in [(0, eq.z[l].re), (n_t, eq.z[l].im)] {
            for (i, x) in levels.iter().enumerate() {
                scores[l + part][i] = -(obs - g * x).powi(2) / var;
            }
        }
    }
    let llr = llrs_from_level_scores(&scores, c, n_t, |it| it.fold(f64::NEG_INFINITY, f64::max));
    Ok(llr.clamped(lambda_max))
}

/// `||y - Hs||^2` for complex vectors; used by the enumeration cross-checks.
pub fn complex_metric(h: &CMatrix, y: &CVector, s: &[Complex64]) -> f64 {
    (y - h * CVector::from_column_slice(s)).norm_squared()
}
