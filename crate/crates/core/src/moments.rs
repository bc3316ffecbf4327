//! Per-layer marginal posterior statistics.
//!
//! A sampled metric row `D_i` (minimum path metric with level `X_i` on one
//! real layer) is first rearranged so that its induced probabilities
//! `p_i ∝ exp(-D_i)` follow the rank order of a Gaussian centred on the best
//! level. A quadratic `D(X) = (X - mu)^2 / (2 sigma2) + const` is then fitted
//! through the consecutive differences
//!
//! ```text
//! D_{i+1} - D_i = (2 / sigma2) X_i + (2 / sigma2) (1 - mu)
//! ```
//!
//! which holds exactly on the odd-integer lattice because
//! `X_{i+1}^2 - X_i^2 = 4 (X_i + 1)`.

use crate::error::{Error, Result};
use crate::model::Constellation;
use crate::search::{LayerMetricTable, Part};

/// Variance assigned when a layer cannot be fitted.
pub const SIGMA2_FLOOR: f64 = 0.25;

const MIN_CURVATURE: f64 = 1e-12;

/// Positions `0..k` ranked by distance from `peak`, nearer first, ties to the
/// left.
pub fn gaussian_target_order(k: usize, peak: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&i| (i.abs_diff(peak), i));
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortTransform {
    /// `perm[i]` is where the metric found at level `i` is moved to.
    pub perm: Vec<usize>,
    pub displaced_fraction: f64,
}

/// Rearranges the present entries of a metric row into Gaussian rank order.
///
/// The smallest metric stays at its level (the peak); the remaining present
/// metrics are dealt out in ascending order to present positions at
/// increasing distance from the peak. Positions at equal distance form one
/// group whose target probabilities are equal, so inside a group an entry
/// that already belongs there keeps its place. Absent positions are left
/// untouched.
pub fn ot_sort_transform(row: &[Option<f64>]) -> Result<(SortTransform, Vec<Option<f64>>)> {
    let present: Vec<usize> = (0..row.len()).filter(|&i| row[i].is_some()).collect();
    if present.is_empty() {
        return Err(Error::EmptyRow);
    }
    let value = |i: usize| row[i].expect("present");

    let mut by_metric = present.clone();
    by_metric.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
    let peak = by_metric[0];

    let mut targets = present.clone();
    targets.sort_by_key(|&i| (i.abs_diff(peak), i));

    let mut perm: Vec<usize> = (0..row.len()).collect();
    let mut start = 0;
    while start < targets.len() {
        let dist = targets[start].abs_diff(peak);
        let mut end = start;
        while end < targets.len() && targets[end].abs_diff(peak) == dist {
            end += 1;
        }
        let group = &targets[start..end];
        let sources = &by_metric[start..end];
        let mut free: Vec<usize> = group
            .iter()
            .copied()
            .filter(|g| !sources.contains(g))
            .collect();
        free.reverse();
        for &src in sources {
            perm[src] = if group.contains(&src) {
                src
            } else {
                free.pop().expect("group size")
            };
        }
        start = end;
    }

    let mut out = row.to_vec();
    for &src in &present {
        out[perm[src]] = row[src];
    }
    let moved = perm.iter().enumerate().filter(|&(i, &p)| i != p).count();
    let transform = SortTransform {
        perm,
        displaced_fraction: moved as f64 / row.len() as f64,
    };
    Ok((transform, out))
}

/// `sum q_i ln(q_i / p_i)` with `0 ln(0/.) = 0`.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::Domain("distributions differ in length".into()));
    }
    for (name, v) in [("q", q), ("p", p)] {
        if v.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::Domain(format!(
                "{name} has negative or non-finite entries"
            )));
        }
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("{name} sums to {total}")));
        }
    }
    let mut acc = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return Err(Error::Domain("p vanishes where q does not".into()));
        }
        acc += qi * (qi / pi).ln();
    }
    Ok(acc.max(0.0))
}

fn moments_from_line(slope: f64, intercept: f64) -> Result<(f64, f64)> {
    if slope.is_nan() || slope <= MIN_CURVATURE {
        return Err(Error::NonConvexFit(slope));
    }
    Ok((1.0 - intercept / slope, 2.0 / slope))
}

/// Least-squares fit of `D_{i+1} - D_i = a X_i + b` over every pair of
/// consecutive present levels; returns `(mu, sigma2) = (1 - b/a, 2/a)`.
pub fn fit_moments_ls(levels: &[f64], row: &[Option<f64>]) -> Result<(f64, f64)> {
    if levels.len() != row.len() {
        return Err(Error::invalid("levels and metric row differ in length"));
    }
    let pairs: Vec<(f64, f64)> = (0..row.len().saturating_sub(1))
        .filter_map(|i| match (row[i], row[i + 1]) {
            (Some(lo), Some(hi)) => Some((levels[i], hi - lo)),
            _ => None,
        })
        .collect();
    if pairs.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "{} consecutive differences, need 2",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_d = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxd: f64 = pairs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_d)).sum();
    let slope = sxd / sxx;
    moments_from_line(slope, mean_d - slope * mean_x)
}

/// Exact solve through three consecutive levels `x - 2, x, x + 2`.
pub fn fit_moments_three_point(
    x_center: f64,
    f_minus: f64,
    f_center: f64,
    f_plus: f64,
) -> Result<(f64, f64)> {
    let lower = f_center - f_minus;
    let upper = f_plus - f_center;
    if upper.is_nan() || lower.is_nan() || upper <= lower {
        return Err(Error::NonConvexFit((upper - lower) / 2.0));
    }
    let slope = (upper - lower) / 2.0;
    moments_from_line(slope, upper - slope * x_center)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerMoments {
    pub layer: usize,
    pub mu: f64,
    pub sigma2: f64,
    /// Fraction of levels moved by the sort transform.
    pub transform_feature: f64,
    /// False when the fit failed and the floor fallback was used.
    pub fitted: bool,
}

fn fit_row(levels: &[f64], row: &[Option<f64>]) -> Result<(f64, f64)> {
    let present: Vec<usize> = (0..row.len()).filter(|&i| row[i].is_some()).collect();
    if let [a, b, c] = present[..] {
        if b == a + 1 && c == b + 1 {
            let v = |i: usize| row[i].expect("present");
            return fit_moments_three_point(levels[b], v(a), v(b), v(c));
        }
    }
    fit_moments_ls(levels, row)
}

/// Sort-transform and moment fit for every real layer of a table.
pub fn mpps_layer_statistics(
    table: &LayerMetricTable,
    c: &Constellation,
) -> Result<Vec<LayerMoments>> {
    let levels = c.pam_levels();
    table
        .d
        .iter()
        .enumerate()
        .map(|(j, row)| {
            if row.len() != levels.len() {
                return Err(Error::invalid("table row does not match the constellation"));
            }
            let (transform, sorted) = ot_sort_transform(row)?;
            let (mu, sigma2, fitted) = match fit_row(levels, &sorted) {
                Ok((mu, sigma2)) if mu.is_finite() && sigma2.is_finite() => (mu, sigma2, true),
                Ok(_) | Err(Error::NonConvexFit(_)) | Err(Error::InsufficientSamples(_)) => {
                    let peak = (0..row.len())
                        .filter(|&i| row[i].is_some())
                        .min_by(|&a, &b| row[a].unwrap().total_cmp(&row[b].unwrap()))
                        .expect("row checked non-empty");
                    (levels[peak], SIGMA2_FLOOR, false)
                }
                Err(e) => return Err(e),
            };
            Ok(LayerMoments {
                layer: j,
                mu,
                sigma2,
                transform_feature: transform.displaced_fraction,
                fitted,
            })
        })
        .collect()
}

/// Number of network inputs per complex layer.
pub const FEATURE_DIM: usize = 7;

/// `[mu_re, mu_im, sigma2_re, sigma2_im, T_re, T_im, noise_var]` for every
/// complex layer.
pub fn layer_features(moments: &[LayerMoments], noise_var: f64) -> Vec<[f64; FEATURE_DIM]> {
    let n_t = moments.len() / 2;
    (0..n_t)
        .map(|l| {
            let re = &moments[crate::search::real_layer_index(l, Part::Re, n_t)];
            let im = &moments[crate::search::real_layer_index(l, Part::Im, n_t)];
            [
                re.mu,
                im.mu,
                re.sigma2,
                im.sigma2,
                re.transform_feature,
                im.transform_feature,
                noise_var,
            ]
        })
        .collect()
}
