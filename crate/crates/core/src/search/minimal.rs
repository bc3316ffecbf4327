use super::{
    exhaustive_layer_table, hypothesis_count, kbest_constrained, CandidateList, CandidatePath,
    RealDecomposition,
};
use crate::error::{Error, Result};
use crate::model::Constellation;

/// Above this many hypotheses the constrained minima are found by a pinned
/// K-best re-search instead of enumeration.
pub const MINIMAL_SET_EXHAUSTIVE_LIMIT: u128 = 1 << 20;

/// Breadth of the pinned re-search used beyond the exhaustive limit.
pub const CONSTRAINED_KBEST_WIDTH: usize = 64;

/// Number of complex-equivalent paths needed to fit every layer: the best
/// path plus two neighbours per real dimension.
pub fn minimal_path_budget(n_t: usize) -> usize {
    4 * n_t + 1
}

/// The two levels closest to `idx`: both neighbours in the interior, the
/// next two inward at either edge.
pub fn adjacent_levels(idx: usize, n_levels: usize) -> Vec<usize> {
    if n_levels < 2 {
        return Vec::new();
    }
    if n_levels == 2 {
        return vec![1 - idx];
    }
    if idx == 0 {
        vec![1, 2]
    } else if idx + 1 == n_levels {
        vec![idx - 1, idx - 2]
    } else {
        vec![idx - 1, idx + 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstrainedMinima {
    Exhaustive,
    KBest(usize),
}

impl ConstrainedMinima {
    pub fn auto(c: &Constellation, n_t: usize) -> Self {
        if hypothesis_count(c, n_t) <= MINIMAL_SET_EXHAUSTIVE_LIMIT {
            ConstrainedMinima::Exhaustive
        } else {
            ConstrainedMinima::KBest(CONSTRAINED_KBEST_WIDTH)
        }
    }
}

pub fn minimal_path_set(
    dec: &RealDecomposition,
    c: &Constellation,
    best: &[usize],
) -> Result<CandidateList> {
    minimal_path_set_with(dec, c, best, ConstrainedMinima::auto(c, dec.n_t()))
}

/// The best path plus, for every real layer, the constrained-minimum paths at
/// the two levels adjacent to the best path's level on that layer.
pub fn minimal_path_set_with(
    dec: &RealDecomposition,
    c: &Constellation,
    best: &[usize],
    how: ConstrainedMinima,
) -> Result<CandidateList> {
    let n = dec.n_real();
    if best.len() != n || best.iter().any(|&lv| lv >= c.levels_per_dim()) {
        return Err(Error::invalid("best path does not match the lattice"));
    }
    let mut paths = vec![CandidatePath {
        levels: best.to_vec(),
        metric: dec.path_metric(c, best),
    }];
    match how {
        ConstrainedMinima::Exhaustive => {
            let ex = exhaustive_layer_table(&dec.h_r, &dec.y_r, c, u128::MAX)?;
            for (j, &b) in best.iter().enumerate() {
                for lv in adjacent_levels(b, c.levels_per_dim()) {
                    let levels = ex.argmin[j][lv].clone();
                    let metric = dec.path_metric(c, &levels);
                    paths.push(CandidatePath { levels, metric });
                }
            }
        }
        ConstrainedMinima::KBest(k) => {
            for (j, &b) in best.iter().enumerate() {
                for lv in adjacent_levels(b, c.levels_per_dim()) {
                    let list = kbest_constrained(dec, c, k, Some((j, lv)))?;
                    if let Some(p) = list.best() {
                        paths.push(p.clone());
                    }
                }
            }
        }
    }
    CandidateList::new(paths)
}
