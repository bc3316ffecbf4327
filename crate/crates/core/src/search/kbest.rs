use std::cmp::Ordering;

use super::{CandidateList, CandidatePath, RealDecomposition};
use crate::error::{Error, Result};
use crate::model::Constellation;

struct Partial {
    /// Level indices in detection order: `levels[d]` sits at QR position
    /// `n - 1 - d`.
    levels: Vec<usize>,
    metric: f64,
}

fn partial_order(a: &Partial, b: &Partial) -> Ordering {
    a.metric
        .total_cmp(&b.metric)
        .then_with(|| a.levels.last().cmp(&b.levels.last()))
        .then_with(|| a.levels.cmp(&b.levels))
}

/// Breadth-first K-best tree search over the sorted-QR lattice.
///
/// Layers are detected from the last QR position (strongest column) to the
/// first; after each layer only the `k` lowest accumulated metrics survive.
/// Returned metrics are recomputed exactly as `||y - Hs||^2`.
pub fn kbest_search(dec: &RealDecomposition, c: &Constellation, k: usize) -> Result<CandidateList> {
    kbest_constrained(dec, c, k, None)
}

/// K-best search with real layer `fixed.0` pinned to level index `fixed.1`.
pub fn kbest_constrained(
    dec: &RealDecomposition,
    c: &Constellation,
    k: usize,
    fixed: Option<(usize, usize)>,
) -> Result<CandidateList> {
    if k == 0 {
        return Err(Error::invalid("K-best breadth must be at least 1"));
    }
    let n = dec.n_real();
    if let Some((j, lv)) = fixed {
        if j >= n || lv >= c.levels_per_dim() {
            return Err(Error::invalid(format!(
                "constraint ({j}, {lv}) out of range"
            )));
        }
    }

    let mut survivors = vec![Partial {
        levels: Vec::with_capacity(n),
        metric: 0.0,
    }];
    for depth in 0..n {
        let pos = n - 1 - depth;
        let layer = dec.col_perm[pos];
        let allowed: Vec<usize> = match fixed {
            Some((j, lv)) if j == layer => vec![lv],
            _ => (0..c.levels_per_dim()).collect(),
        };
        let diag = dec.r[(pos, pos)];
        let mut children = Vec::with_capacity(survivors.len() * allowed.len());
        for parent in &survivors {
            // interference from the already-detected positions pos+1..n
            let mut target = dec.z[pos];
            for (d, &lv) in parent.levels.iter().enumerate() {
                target -= dec.r[(pos, n - 1 - d)] * c.level(lv);
            }
            for &lv in &allowed {
                let e = target - diag * c.level(lv);
                let mut levels = Vec::with_capacity(n);
                levels.extend_from_slice(&parent.levels);
                levels.push(lv);
                children.push(Partial {
                    levels,
                    metric: parent.metric + e * e,
                });
            }
        }
        if children.len() > k {
            children.select_nth_unstable_by(k - 1, partial_order);
            children.truncate(k);
        }
        children.sort_by(partial_order);
        survivors = children;
    }

    let paths = survivors
        .into_iter()
        .map(|p| {
            let mut levels = vec![0; n];
            for (d, lv) in p.levels.into_iter().enumerate() {
                levels[dec.col_perm[n - 1 - d]] = lv;
            }
            let metric = dec.path_metric(c, &levels);
            CandidatePath { levels, metric }
        })
        .collect();
    CandidateList::new(paths)
}
