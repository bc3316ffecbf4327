use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpps::baseline::{
    candidate_max_log, complex_metric, exact_llrs, lmmse_filter, lmmse_soft, LlrVector,
};
use mpps::model::{
    draw_channel, noise_var_from_snr, transmit, CMatrix, CVector, ChannelModelConfig, Constellation,
};
use mpps::search::LayerMetricTable;

struct Instance {
    h: CMatrix,
    y: CVector,
    bits: Vec<u8>,
}

fn instance(rng: &mut ChaCha8Rng, c: &Constellation, n_t: usize, noise_var: f64) -> Instance {
    let h = draw_channel(&ChannelModelConfig::iid_rayleigh(), n_t, n_t, rng).unwrap();
    let bits: Vec<u8> = (0..n_t * c.bits_per_symbol())
        .map(|_| rng.random_range(0..2))
        .collect();
    let s = c.modulate(&bits, n_t).unwrap();
    let y = transmit(&h, &s, noise_var, rng).unwrap();
    Instance { h, y, bits }
}

/// Log-MAP and max-log by enumerating bit words and modulating each one.
fn naive_llrs(inst: &Instance, c: &Constellation, noise_var: f64) -> (Vec<f64>, Vec<f64>) {
    let n_t = inst.h.ncols();
    let n_bits = n_t * c.bits_per_symbol();
    let scores: Vec<(Vec<u8>, f64)> = (0..1u64 << n_bits)
        .map(|w| {
            let bits: Vec<u8> = (0..n_bits).map(|b| ((w >> b) & 1) as u8).collect();
            let s = c.modulate(&bits, n_t).unwrap();
            let score = -complex_metric(&inst.h, &inst.y, &s) / noise_var;
            (bits, score)
        })
        .collect();
    let mut log_map = Vec::new();
    let mut max_log = Vec::new();
    for b in 0..n_bits {
        let side = |want: u8| -> Vec<f64> {
            scores
                .iter()
                .filter(|(bits, _)| bits[b] == want)
                .map(|(_, v)| *v)
                .collect()
        };
        let lse = |v: &[f64]| {
            let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
        };
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (one, zero) = (side(1), side(0));
        log_map.push(lse(&one) - lse(&zero));
        max_log.push(max(&one) - max(&zero));
    }
    (log_map, max_log)
}

#[test]
fn exact_llrs_match_bit_word_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (m_c, n_t) in [(2, 1), (2, 2), (4, 1), (4, 2), (2, 3)] {
        let c = Constellation::new(m_c).unwrap();
        for _ in 0..30 {
            let noise_var = rng.random_range(0.05..3.0);
            let inst = instance(&mut rng, &c, n_t, noise_var);
            let (lm, ml) = exact_llrs(&inst.y, &inst.h, noise_var, &c).unwrap();
            let (nlm, nml) = naive_llrs(&inst, &c, noise_var);
            for i in 0..lm.len() {
                let tol = 1e-9 * nlm[i].abs().max(1.0);
                assert!(
                    (lm.0[i] - nlm[i]).abs() < tol,
                    "log-MAP bit {i}: {} vs {}",
                    lm.0[i],
                    nlm[i]
                );
                assert!(
                    (ml.0[i] - nml[i]).abs() < tol,
                    "max-log bit {i}: {} vs {}",
                    ml.0[i],
                    nml[i]
                );
            }
        }
    }
}

#[test]
fn scalar_qpsk_has_closed_form_llr() {
    let c = Constellation::new(2).unwrap();
    let h = CMatrix::identity(1, 1);
    for noise_var in [0.1, 1.0, 4.0] {
        for step in -20..=20 {
            let re = f64::from(step) * 0.15;
            let y = CVector::from_vec(vec![Complex64::new(re, -0.4)]);
            let (lm, ml) = exact_llrs(&y, &h, noise_var, &c).unwrap();
            assert!((lm.0[0] - 4.0 * re / noise_var).abs() < 1e-10);
            assert!((ml.0[0] - 4.0 * re / noise_var).abs() < 1e-10);
            assert!((lm.0[1] + 1.6 / noise_var).abs() < 1e-10);
        }
    }
}

#[test]
fn scalar_hand_computed_values() {
    let c = Constellation::new(2).unwrap();
    let h = CMatrix::identity(1, 1);
    let (lm, ml) = exact_llrs(
        &CVector::from_vec(vec![Complex64::new(0.3, 0.0)]),
        &h,
        1.0,
        &c,
    )
    .unwrap();
    assert!((lm.0[0] - 1.2).abs() < 1e-12 && (ml.0[0] - 1.2).abs() < 1e-12);
    assert_eq!(lm.0[1], 0.0);
    assert_eq!(ml.0[1], 0.0);
}

#[test]
fn max_log_gap_shrinks_with_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let c = Constellation::new(4).unwrap();
    for _ in 0..20 {
        let inst = instance(&mut rng, &c, 2, 0.0);
        let gaps: Vec<f64> = [1.0, 0.1, 0.01]
            .iter()
            .map(|&nv| {
                let (lm, ml) = exact_llrs(&inst.y, &inst.h, nv, &c).unwrap();
                lm.0.iter()
                    .zip(&ml.0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(
            gaps[1] <= gaps[0] + 1e-12 && gaps[2] <= gaps[1] + 1e-12,
            "{gaps:?}"
        );
    }
}

#[test]
fn exact_llrs_survive_large_metric_spreads() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let c = Constellation::new(4).unwrap();
    for noise_var in [1e-3, 1e-5] {
        for _ in 0..20 {
            let inst = instance(&mut rng, &c, 2, noise_var);
            let (lm, ml) = exact_llrs(&inst.y, &inst.h, noise_var, &c).unwrap();
            for (a, b) in lm.0.iter().zip(&ml.0) {
                assert!(a.is_finite() && b.is_finite());
                // at most ln(#hypotheses) apart
                assert!((a - b).abs() <= 256f64.ln() + 1e-9);
            }
            assert_eq!(lm.hard_bits(), inst.bits);
        }
    }
}

#[test]
fn max_log_signs_agree_with_log_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let c = Constellation::new(4).unwrap();
    // 18 dB, the middle of the usual sweep; measured agreement is 99.6%
    let noise_var = noise_var_from_snr(18.0, 2, &c, &ChannelModelConfig::iid_rayleigh()).unwrap();
    let (mut agree, mut total) = (0usize, 0usize);
    for _ in 0..10_000 {
        let inst = instance(&mut rng, &c, 2, noise_var);
        let (lm, ml) = exact_llrs(&inst.y, &inst.h, noise_var, &c).unwrap();
        agree += lm
            .hard_bits()
            .iter()
            .zip(ml.hard_bits())
            .filter(|(a, b)| **a == *b)
            .count();
        total += lm.len();
    }
    eprintln!("sign agreement {agree} of {total}");
    assert!(agree as f64 >= 0.99 * total as f64, "{agree} of {total}");
}

#[test]
fn candidate_max_log_saturates_missing_counter_hypotheses() {
    let c = Constellation::new(4).unwrap();
    // levels 2 and 3 carry MSB 1, levels 0 and 1 carry MSB 0
    let table = LayerMetricTable {
        d: vec![
            vec![None, None, Some(1.0), Some(3.0)],
            vec![Some(0.0), Some(2.0), None, None],
        ],
        global_min: 0.0,
    };
    let llr = candidate_max_log(&table, 0.5, &c, 8.0).unwrap();
    assert_eq!(llr.0[0], 8.0);
    assert_eq!(llr.0[2], -8.0);
    let full = LayerMetricTable {
        d: vec![
            vec![Some(0.0), Some(100.0), Some(0.5), Some(1.0)],
            vec![Some(0.0); 4],
        ],
        global_min: 0.0,
    };
    let llr = candidate_max_log(&full, 1.0, &c, 8.0).unwrap();
    assert_eq!(llr.0[0], -0.5);
    let side = |bit: bool| {
        (0..4)
            .filter(|&i| c.level_bit(i, 1) == bit)
            .map(|i| full.d[0][i].unwrap())
            .fold(f64::INFINITY, f64::min)
    };
    assert_eq!(llr.0[1], (side(false) - side(true)).clamp(-8.0, 8.0));
    let bad = LayerMetricTable {
        d: vec![vec![None; 4], vec![Some(0.0); 4]],
        global_min: 0.0,
    };
    assert!(candidate_max_log(&bad, 1.0, &c, 8.0).is_err());
}

#[test]
fn lmmse_gain_and_variance_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let c = Constellation::new(4).unwrap();
    for _ in 0..500 {
        let noise_var = 10f64.powf(rng.random_range(-3.0..2.0));
        let inst = instance(&mut rng, &c, 4, noise_var);
        let f = lmmse_filter(&inst.y, &inst.h, noise_var, &c).unwrap();
        for (g, v) in f.gain.iter().zip(&f.residual_var) {
            assert!(*g > 0.0 && *g < 1.0);
            assert!(*v > 0.0 && *v <= g * c.symbol_energy());
        }
    }
}

#[test]
fn lmmse_recovers_bits_at_high_snr() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let c = Constellation::new(4).unwrap();
    for _ in 0..200 {
        let inst = instance(&mut rng, &c, 2, 1e-6);
        let llr = lmmse_soft(&inst.y, &inst.h, 1e-6, &c, 50.0).unwrap();
        assert_eq!(llr.hard_bits(), inst.bits);
        assert!(llr.0.iter().all(|v| v.abs() <= 50.0));
    }
}

#[test]
fn bad_noise_variance_is_rejected() {
    let c = Constellation::new(2).unwrap();
    let h = CMatrix::identity(1, 1);
    let y = CVector::zeros(1);
    assert!(exact_llrs(&y, &h, 0.0, &c).is_err());
    assert!(lmmse_soft(&y, &h, f64::NAN, &c, 10.0).is_err());
}

proptest! {
    #[test]
    fn scalar_msb_llr_increases_with_observation(a in -8.0f64..8.0, d in 0.01f64..2.0, noise_var in 0.05f64..5.0) {
        let c = Constellation::new(4).unwrap();
        let h = CMatrix::identity(1, 1);
        let llr = |re: f64| -> LlrVector {
            exact_llrs(&CVector::from_vec(vec![Complex64::new(re, 0.3)]), &h, noise_var, &c).unwrap().0
        };
        prop_assert!(llr(a + d).0[0] > llr(a).0[0]);
    }

    #[test]
    fn clamping_bounds_every_entry(v in proptest::collection::vec(-1e6f64..1e6, 1..20), lim in 0.1f64..100.0) {
        let out = LlrVector(v.clone()).clamped(lim);
        for (a, b) in v.iter().zip(&out.0) {
            prop_assert!(b.abs() <= lim);
            prop_assert!(a.abs() > lim || a == b);
        }
    }
}
