use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpps::baseline::complex_metric;
use mpps::model::{draw_channel, transmit, CMatrix, CVector, ChannelModelConfig, Constellation};
use mpps::search::{
    adjacent_levels, exhaustive_layer_table, extract_layer_metrics, for_each_hypothesis,
    kbest_search, minimal_path_budget, minimal_path_set, minimal_path_set_with, real_decompose,
    CandidateList, CandidatePath, ConstrainedMinima,
};

fn instance(
    rng: &mut ChaCha8Rng,
    c: &Constellation,
    n_t: usize,
    noise_var: f64,
) -> (CMatrix, CVector) {
    let h = draw_channel(&ChannelModelConfig::iid_rayleigh(), n_t, n_t, rng).unwrap();
    let bits: Vec<u8> = (0..n_t * c.bits_per_symbol())
        .map(|_| rng.random_range(0..2))
        .collect();
    let s = c.modulate(&bits, n_t).unwrap();
    let y = transmit(&h, &s, noise_var, rng).unwrap();
    (h, y)
}

/// Complex symbol vector for level indices in real-layer order.
fn symbols(c: &Constellation, levels: &[usize]) -> Vec<Complex64> {
    let n_t = levels.len() / 2;
    (0..n_t)
        .map(|l| Complex64::new(c.level(levels[l]), c.level(levels[l + n_t])))
        .collect()
}

/// Constrained minima by direct complex enumeration over the whole lattice.
fn brute_constrained_minima(h: &CMatrix, y: &CVector, c: &Constellation) -> (Vec<Vec<f64>>, f64) {
    let n = 2 * h.ncols();
    let m = c.levels_per_dim();
    let mut d = vec![vec![f64::INFINITY; m]; n];
    let mut best = f64::INFINITY;
    let total = m.pow(n as u32);
    for mut code in 0..total {
        let mut levels = vec![0; n];
        for lv in levels.iter_mut() {
            *lv = code % m;
            code /= m;
        }
        let metric = complex_metric(h, y, &symbols(c, &levels));
        best = best.min(metric);
        for (j, &lv) in levels.iter().enumerate() {
            d[j][lv] = d[j][lv].min(metric);
        }
    }
    (d, best)
}

#[test]
fn real_metric_matches_complex_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = Constellation::new(4).unwrap();
    for _ in 0..1000 {
        let n_t = rng.random_range(1..=4);
        let (h, y) = instance(&mut rng, &c, n_t, 0.5);
        let dec = real_decompose(&h, &y).unwrap();
        let levels: Vec<usize> = (0..2 * n_t).map(|_| rng.random_range(0..4)).collect();
        let diff =
            (dec.path_metric(&c, &levels) - complex_metric(&h, &y, &symbols(&c, &levels))).abs();
        assert!(diff < 1e-9, "{diff}");
    }
}

#[test]
fn identity_channel_embedding() {
    let h = CMatrix::identity(2, 2);
    let y = CVector::from_vec(vec![Complex64::new(0.7, -0.1), Complex64::new(-2.2, 1.5)]);
    let dec = real_decompose(&h, &y).unwrap();
    assert_eq!(dec.h_r, nalgebra::DMatrix::identity(4, 4));
    let c = Constellation::new(4).unwrap();
    for levels in [[0, 1, 2, 3], [3, 3, 0, 1]] {
        let diff =
            (dec.path_metric(&c, &levels) - complex_metric(&h, &y, &symbols(&c, &levels))).abs();
        assert!(diff < 1e-12);
    }
}

#[test]
fn rank_deficient_channel_is_rejected() {
    let mut h = CMatrix::identity(2, 2);
    h[(1, 1)] = Complex64::new(0.0, 0.0);
    assert!(real_decompose(&h, &CVector::zeros(2)).is_err());
}

#[test]
fn full_width_kbest_finds_ml() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = Constellation::new(2).unwrap();
    for _ in 0..100 {
        let (h, y) = instance(&mut rng, &c, 2, 1.0);
        let dec = real_decompose(&h, &y).unwrap();
        let list = kbest_search(&dec, &c, 16).unwrap();
        assert_eq!(list.len(), 16);
        let (_, best) = brute_constrained_minima(&h, &y, &c);
        assert!((list.paths()[0].metric - best).abs() < 1e-9);
    }
}

#[test]
fn kbest_contract_on_4x4_16qam() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = Constellation::new(4).unwrap();
    for _ in 0..50 {
        let (h, y) = instance(&mut rng, &c, 4, 2.0);
        let dec = real_decompose(&h, &y).unwrap();
        let list = kbest_search(&dec, &c, 24).unwrap();
        assert!(list.len() <= 24 && !list.is_empty());
        for w in list.paths().windows(2) {
            assert!(w[0].metric <= w[1].metric);
            assert_ne!(w[0].levels, w[1].levels);
        }
        for p in list.paths() {
            assert!((p.metric - dec.path_metric(&c, &p.levels)).abs() < 1e-9);
        }
    }
}

#[test]
fn exhaustive_table_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m_c in [2, 4] {
        let c = Constellation::new(m_c).unwrap();
        for _ in 0..20 {
            let (h, y) = instance(&mut rng, &c, 2, 0.8);
            let dec = real_decompose(&h, &y).unwrap();
            let (brute, best) = brute_constrained_minima(&h, &y, &c);

            let mut paths = Vec::new();
            for_each_hypothesis(&dec.h_r, &dec.y_r, &c, |levels, metric| {
                paths.push(CandidatePath {
                    levels: levels.to_vec(),
                    metric,
                });
            });
            let table = extract_layer_metrics(&CandidateList::new(paths).unwrap(), &c, 2).unwrap();
            let ex = exhaustive_layer_table(&dec.h_r, &dec.y_r, &c, u128::MAX).unwrap();
            assert!((table.global_min - best).abs() < 1e-9);
            for (j, brute_row) in brute.iter().enumerate() {
                for (i, want) in brute_row.iter().enumerate() {
                    assert!((table.row(j)[i].unwrap() - want).abs() < 1e-9);
                    assert!((ex.table.row(j)[i].unwrap() - want).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn minimal_set_holds_exact_neighbour_minima() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m_c in [2, 4] {
        let c = Constellation::new(m_c).unwrap();
        for _ in 0..30 {
            let (h, y) = instance(&mut rng, &c, 2, 0.6);
            let dec = real_decompose(&h, &y).unwrap();
            let (brute, _) = brute_constrained_minima(&h, &y, &c);
            let ex = exhaustive_layer_table(&dec.h_r, &dec.y_r, &c, u128::MAX).unwrap();
            let list = minimal_path_set(&dec, &c, &ex.best).unwrap();
            assert!(list.len() <= minimal_path_budget(2));
            let table = extract_layer_metrics(&list, &c, 2).unwrap();
            for (j, &b) in ex.best.iter().enumerate() {
                for lv in std::iter::once(b).chain(adjacent_levels(b, c.levels_per_dim())) {
                    let got = table.row(j)[lv].expect("neighbour present");
                    assert!((got - brute[j][lv]).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn pinned_kbest_minimal_set_is_close_to_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let c = Constellation::new(4).unwrap();
    let mut exact_hits = 0;
    let mut entries = 0;
    for _ in 0..20 {
        let (h, y) = instance(&mut rng, &c, 3, 0.5);
        let dec = real_decompose(&h, &y).unwrap();
        let ex = exhaustive_layer_table(&dec.h_r, &dec.y_r, &c, u128::MAX).unwrap();
        let list = minimal_path_set_with(&dec, &c, &ex.best, ConstrainedMinima::KBest(64)).unwrap();
        let table = extract_layer_metrics(&list, &c, 3).unwrap();
        for (j, &b) in ex.best.iter().enumerate() {
            for lv in adjacent_levels(b, 4) {
                let got = table.row(j)[lv].unwrap();
                let want = ex.table.row(j)[lv].unwrap();
                assert!(got >= want - 1e-9);
                entries += 1;
                exact_hits += usize::from((got - want).abs() < 1e-9);
            }
        }
    }
    assert!(exact_hits * 10 >= entries * 9, "{exact_hits} of {entries}");
}

#[test]
fn budgets_follow_four_nt_plus_one() {
    assert_eq!(minimal_path_budget(4), 17);
    assert_eq!(minimal_path_budget(1), 5);
}

#[test]
fn adjacent_levels_are_one_sided_at_edges() {
    assert_eq!(adjacent_levels(0, 4), vec![1, 2]);
    assert_eq!(adjacent_levels(3, 4), vec![2, 1]);
    assert_eq!(adjacent_levels(2, 8), vec![1, 3]);
    assert_eq!(adjacent_levels(1, 2), vec![0]);
}

fn arb_paths() -> impl Strategy<Value = Vec<Vec<usize>>> {
    proptest::collection::vec(proptest::collection::vec(0usize..4, 4), 1..30)
}

/// A metric that depends only on the levels, as a real lattice metric does.
fn toy_metric(levels: &[usize]) -> f64 {
    levels
        .iter()
        .enumerate()
        .map(|(j, &lv)| ((lv * 7 + j * 3) % 11) as f64 * 1.3)
        .sum()
}

fn list_of(paths: &[Vec<usize>]) -> CandidateList {
    CandidateList::new(
        paths
            .iter()
            .map(|levels| CandidatePath {
                levels: levels.clone(),
                metric: toy_metric(levels),
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn adding_candidates_never_worsens_table(a in arb_paths(), b in arb_paths()) {
        let c = Constellation::new(4).unwrap();
        let ta = extract_layer_metrics(&list_of(&a), &c, 2).unwrap();
        let mut all = a.clone();
        all.extend(b.iter().cloned());
        let tab = extract_layer_metrics(&list_of(&all), &c, 2).unwrap();
        for j in 0..4 {
            for i in 0..4 {
                if let Some(v) = ta.row(j)[i] {
                    prop_assert!(tab.row(j)[i].unwrap() <= v);
                }
            }
        }
        let tb = extract_layer_metrics(&list_of(&b), &c, 2).unwrap();
        let merged = ta.merge(&tb);
        prop_assert_eq!(merged.d, tab.d);
    }

    #[test]
    fn table_rows_respect_global_minimum(a in arb_paths()) {
        let c = Constellation::new(4).unwrap();
        let t = extract_layer_metrics(&list_of(&a), &c, 2).unwrap();
        for j in 0..4 {
            let row: Vec<f64> = t.row(j).iter().flatten().copied().collect();
            prop_assert!(row.iter().all(|&v| v >= t.global_min));
            prop_assert!(row.contains(&t.global_min));
        }
    }
}
