use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::model::Constellation;

/// A full hypothesis: one level index per real layer, and its metric.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    pub levels: Vec<usize>,
    pub metric: f64,
}

fn path_order(a: &CandidatePath, b: &CandidatePath) -> Ordering {
    a.metric
        .total_cmp(&b.metric)
        .then_with(|| a.levels.cmp(&b.levels))
}

/// Sampled hypotheses, ascending by metric and free of duplicates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateList {
    paths: Vec<CandidatePath>,
}

impl CandidateList {
    pub fn new(mut paths: Vec<CandidatePath>) -> Result<Self> {
        if let Some(p) = paths
            .iter()
            .find(|p| !(p.metric >= 0.0 && p.metric.is_finite()))
        {
            return Err(Error::invalid(format!(
                "path metric must be finite and >= 0, got {}",
                p.metric
            )));
        }
        if let Some(first) = paths.first() {
            let n = first.levels.len();
            if paths.iter().any(|p| p.levels.len() != n) {
                return Err(Error::invalid("candidate paths have inconsistent lengths"));
            }
        }
        // identical level vectors carry identical metrics, so sorting by
        // levels first puts duplicates next to each other
        paths.sort_by(|a, b| a.levels.cmp(&b.levels));
        paths.dedup_by(|a, b| a.levels == b.levels);
        paths.sort_by(path_order);
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[CandidatePath] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn best(&self) -> Option<&CandidatePath> {
        self.paths.first()
    }

    pub fn merge(&self, other: &CandidateList) -> Result<CandidateList> {
        let mut all = self.paths.clone();
        all.extend(other.paths.iter().cloned());
        CandidateList::new(all)
    }

    /// Order-sensitive digest of the list contents, used to check that two
    /// detectors were fed the same sample set.
    pub fn content_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.paths.len().hash(&mut h);
        for p in &self.paths {
            p.levels.hash(&mut h);
            p.metric.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Per real layer, per level: the smallest sampled metric, if any path
/// visited that level.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMetricTable {
    pub d: Vec<Vec<Option<f64>>>,
    pub global_min: f64,
}

impl LayerMetricTable {
    pub fn n_layers(&self) -> usize {
        self.d.len()
    }

    pub fn row(&self, j: usize) -> &[Option<f64>] {
        &self.d[j]
    }

    pub fn present_count(&self, j: usize) -> usize {
        self.d[j].iter().filter(|v| v.is_some()).count()
    }

    /// Entrywise minimum of two tables over the same lattice.
    pub fn merge(&self, other: &LayerMetricTable) -> LayerMetricTable {
        let d = self
            .d
            .iter()
            .zip(&other.d)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| match (x, y) {
                        (Some(x), Some(y)) => Some(x.min(*y)),
                        (Some(x), None) | (None, Some(x)) => Some(*x),
                        (None, None) => None,
                    })
                    .collect()
            })
            .collect();
        LayerMetricTable {
            d,
            global_min: self.global_min.min(other.global_min),
        }
    }
}

pub fn extract_layer_metrics(
    cands: &CandidateList,
    c: &Constellation,
    n_t: usize,
) -> Result<LayerMetricTable> {
    let best = cands
        .best()
        .ok_or_else(|| Error::invalid("candidate list is empty"))?;
    let n_real = 2 * n_t;
    if best.levels.len() != n_real {
        return Err(Error::invalid(format!(
            "paths have {} real layers, expected {}",
            best.levels.len(),
            n_real
        )));
    }
    let mut d = vec![vec![None; c.levels_per_dim()]; n_real];
    for path in cands.paths() {
        for (j, &lv) in path.levels.iter().enumerate() {
            let slot: &mut Option<f64> = &mut d[j][lv];
            match slot {
                Some(v) if *v <= path.metric => {}
                _ => *slot = Some(path.metric),
            }
        }
    }
    Ok(LayerMetricTable {
        d,
        global_min: best.metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(levels: &[usize], metric: f64) -> CandidatePath {
        CandidatePath {
            levels: levels.to_vec(),
            metric,
        }
    }

    #[test]
    fn list_is_sorted_and_deduplicated() {
        let list = CandidateList::new(vec![
            path(&[1, 0], 3.0),
            path(&[0, 0], 1.0),
            path(&[1, 0], 3.0),
            path(&[0, 1], 1.0),
        ])
        .unwrap();
        assert_eq!(list.len(), 3);
        assert_eq!(list.paths()[0].levels, vec![0, 0]);
        assert_eq!(list.paths()[1].levels, vec![0, 1]);
        assert!(CandidateList::new(vec![path(&[0], -1.0)]).is_err());
        assert!(CandidateList::new(vec![path(&[0], f64::NAN)]).is_err());
    }

    #[test]
    fn single_path_table() {
        let c = Constellation::new(4).unwrap();
        let list = CandidateList::new(vec![path(&[0, 3, 1, 2], 2.5)]).unwrap();
        let t = extract_layer_metrics(&list, &c, 2).unwrap();
        for j in 0..4 {
            assert_eq!(t.present_count(j), 1);
        }
        assert_eq!(t.d[1][3], Some(2.5));
        assert_eq!(t.global_min, 2.5);
        assert!(extract_layer_metrics(&CandidateList::default(), &c, 2).is_err());
    }

    #[test]
    fn merged_lists_give_entrywise_min() {
        let c = Constellation::new(2).unwrap();
        let a = CandidateList::new(vec![path(&[0, 1], 1.0), path(&[1, 1], 4.0)]).unwrap();
        let b = CandidateList::new(vec![path(&[1, 0], 2.0), path(&[1, 1], 4.0)]).unwrap();
        let ta = extract_layer_metrics(&a, &c, 1).unwrap();
        let tb = extract_layer_metrics(&b, &c, 1).unwrap();
        let tm = extract_layer_metrics(&a.merge(&b).unwrap(), &c, 1).unwrap();
        assert_eq!(tm, ta.merge(&tb));
    }

    #[test]
    fn hash_tracks_content() {
        let a = CandidateList::new(vec![path(&[0, 1], 1.0)]).unwrap();
        let b = CandidateList::new(vec![path(&[0, 1], 1.0)]).unwrap();
        let c = CandidateList::new(vec![path(&[1, 1], 1.0)]).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
