use nalgebra::{DMatrix, DVector};

use super::LayerMetricTable;
use crate::error::{Error, Result};
use crate::model::Constellation;

/// Hard ceiling on exhaustive enumeration, `2^24` hypotheses.
pub const ENUMERATION_LIMIT: u128 = 1 << 24;

/// `(2M)^(2 n_t)`
pub fn hypothesis_count(c: &Constellation, n_t: usize) -> u128 {
    (c.levels_per_dim() as u128).pow(2 * n_t as u32)
}

pub fn check_enumeration(c: &Constellation, n_t: usize, limit: u128) -> Result<()> {
    let hypotheses = hypothesis_count(c, n_t);
    if hypotheses > limit {
        return Err(Error::TooLarge { hypotheses, limit });
    }
    Ok(())
}

/// Visits every lattice hypothesis with its exact metric `||y_r - h_r s||^2`.
///
/// The callback sees level indices in real-layer order. Visiting order is
/// lexicographic in the level indices.
pub fn for_each_hypothesis<F>(
    h_r: &DMatrix<f64>,
    y_r: &DVector<f64>,
    c: &Constellation,
    mut visit: F,
) where
    F: FnMut(&[usize], f64),
{
    let n = h_r.ncols();
    let rows = h_r.nrows();
    let n_levels = c.levels_per_dim();
    // scaled[j][i] = column j times level i
    let scaled: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|j| {
            (0..n_levels)
                .map(|i| h_r.column(j).iter().map(|v| v * c.level(i)).collect())
                .collect()
        })
        .collect();
    let mut residuals = vec![vec![0.0; rows]; n + 1];
    residuals[0].copy_from_slice(y_r.as_slice());
    let mut levels = vec![0usize; n];
    descend(0, &scaled, &mut residuals, &mut levels, &mut visit);
}

fn descend<F>(
    depth: usize,
    scaled: &[Vec<Vec<f64>>],
    residuals: &mut [Vec<f64>],
    levels: &mut [usize],
    visit: &mut F,
) where
    F: FnMut(&[usize], f64),
{
    let n = scaled.len();
    if depth + 1 == n {
        let parent = &residuals[depth];
        for (i, col) in scaled[depth].iter().enumerate() {
            let metric: f64 = parent.iter().zip(col).map(|(r, v)| (r - v) * (r - v)).sum();
            levels[depth] = i;
            visit(levels, metric);
        }
        return;
    }
    for (i, col) in scaled[depth].iter().enumerate() {
        let (head, tail) = residuals.split_at_mut(depth + 1);
        for ((dst, r), v) in tail[0].iter_mut().zip(&head[depth]).zip(col) {
            *dst = r - v;
        }
        levels[depth] = i;
        descend(depth + 1, scaled, residuals, levels, visit);
    }
}

/// Exact constrained minima for every `(real layer, level)`.
#[derive(Debug, Clone)]
pub struct ExhaustiveTable {
    pub table: LayerMetricTable,
    /// `argmin[j][i]` attains `table.d[j][i]`.
    pub argmin: Vec<Vec<Vec<usize>>>,
    pub best: Vec<usize>,
}

pub fn exhaustive_layer_table(
    h_r: &DMatrix<f64>,
    y_r: &DVector<f64>,
    c: &Constellation,
    limit: u128,
) -> Result<ExhaustiveTable> {
    let n = h_r.ncols();
    check_enumeration(c, n / 2, limit)?;
    let n_levels = c.levels_per_dim();
    let mut d = vec![vec![f64::INFINITY; n_levels]; n];
    let mut argmin = vec![vec![Vec::new(); n_levels]; n];
    let mut best = (f64::INFINITY, Vec::new());
    for_each_hypothesis(h_r, y_r, c, |levels, metric| {
        for (j, &lv) in levels.iter().enumerate() {
            // strict comparison keeps the lexicographically first minimiser
            if metric < d[j][lv] {
                d[j][lv] = metric;
                argmin[j][lv].clear();
                argmin[j][lv].extend_from_slice(levels);
            }
        }
        if metric < best.0 {
            best = (metric, levels.to_vec());
        }
    });
    let d = d
        .into_iter()
        .map(|row| row.into_iter().map(Some).collect())
        .collect();
    Ok(ExhaustiveTable {
        table: LayerMetricTable {
            d,
            global_min: best.0,
        },
        argmin,
        best: best.1,
    })
}
