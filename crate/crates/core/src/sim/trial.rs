use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DetectorKind, SimConfig};
use crate::baseline::{candidate_max_log, exact_llrs, lmmse_soft, LlrVector};
use crate::error::{Error, Result};
use crate::model::{draw_channel, noise_var_from_snr, transmit, CMatrix, CVector, Constellation};
use crate::net::{mpps_llrs, MlpModel};
use crate::search::{
    exhaustive_layer_table, extract_layer_metrics, kbest_search, minimal_path_set, real_decompose,
    CandidateList, LayerMetricTable, RealDecomposition,
};

#[derive(Debug, Clone)]
pub struct DetectorOutput {
    pub detector: DetectorKind,
    pub llr: LlrVector,
    /// Digest of the candidate list the detector consumed, if any.
    pub candidate_hash: Option<u64>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub bits: Vec<u8>,
    pub noise_var: f64,
    /// Exhaustive log-MAP LLRs, when enumeration is within the limit.
    pub reference: Option<LlrVector>,
    pub outputs: Vec<DetectorOutput>,
}

/// Everything that stays fixed across trials of one experiment.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub cfg: SimConfig,
    pub constellation: Constellation,
    pub detectors: Vec<DetectorKind>,
    pub model: Option<MlpModel>,
}

/// One stream per `(seed, snr index, trial index)`, independent of the order
/// in which trials are executed.
pub fn trial_rng(seed: u64, snr_idx: usize, trial_idx: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((snr_idx as u64) << 40) | trial_idx as u64);
    rng
}

struct ChannelUse {
    bits: Vec<u8>,
    h: CMatrix,
    y: CVector,
    dec: RealDecomposition,
}

impl Simulator {
    pub fn new(cfg: SimConfig, model: Option<MlpModel>) -> Result<Self> {
        cfg.validate(model.is_some())?;
        let constellation = Constellation::new(cfg.m_c)?;
        if let Some(m) = &model {
            if m.out_dim != constellation.bits_per_symbol() {
                return Err(Error::Config(format!(
                    "model emits {} LLRs per symbol but m_c = {}",
                    m.out_dim, cfg.m_c
                )));
            }
        }
        let detectors = cfg.detector_kinds()?;
        Ok(Self {
            cfg,
            constellation,
            detectors,
            model,
        })
    }

    fn draw_use(&self, noise_var: f64, rng: &mut ChaCha8Rng) -> Result<ChannelUse> {
        let c = &self.constellation;
        let n_bits = self.cfg.n_t * c.bits_per_symbol();
        loop {
            let h = draw_channel(&self.cfg.channel_config(), self.cfg.n_r, self.cfg.n_t, rng)?;
            let bits: Vec<u8> = (0..n_bits).map(|_| rng.random_range(0..2)).collect();
            let s = c.modulate(&bits, self.cfg.n_t)?;
            let y = transmit(&h, &s, noise_var, rng)?;
            match real_decompose(&h, &y) {
                Ok(dec) => return Ok(ChannelUse { bits, h, y, dec }),
                // rank-deficient draws have probability zero; redraw
                Err(Error::DegenerateChannel(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }

    /// One channel use: every configured detector sees the same `(y, H,
    /// noise_var)`, and list detectors with equal budgets share one list.
    pub fn run_trial(&self, snr_db: f64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let c = &self.constellation;
        let n_t = self.cfg.n_t;
        let lambda_max = self.cfg.lambda_max;
        let noise_var = noise_var_from_snr(snr_db, n_t, c, &self.cfg.channel_config())?;
        let ChannelUse { bits, h, y, dec } = self.draw_use(noise_var, rng)?;

        let need_exact = self.cfg.reference_available(c)
            || self
                .detectors
                .iter()
                .any(|d| matches!(d, DetectorKind::ExactLogMap | DetectorKind::ExactMaxLog));
        let (exact, exact_time) = if need_exact {
            let t0 = Instant::now();
            let pair = exact_llrs(&y, &h, noise_var, c)?;
            (Some(pair), t0.elapsed())
        } else {
            (None, Duration::ZERO)
        };

        let mut lists: HashMap<usize, (CandidateList, LayerMetricTable, Duration)> = HashMap::new();
        let mut outputs = Vec::with_capacity(self.detectors.len());
        for &det in &self.detectors {
            let (llr, candidate_hash, elapsed) = match det {
                DetectorKind::ExactLogMap => (
                    exact.as_ref().expect("computed").0.clone(),
                    None,
                    exact_time,
                ),
                DetectorKind::ExactMaxLog => (
                    exact.as_ref().expect("computed").1.clone(),
                    None,
                    exact_time,
                ),
                DetectorKind::Lmmse => {
                    let t0 = Instant::now();
                    let llr = lmmse_soft(&y, &h, noise_var, c, lambda_max)?;
                    (llr, None, t0.elapsed())
                }
                DetectorKind::CandidateMaxLog { k } | DetectorKind::Mpps { k } => {
                    if let Entry::Vacant(slot) = lists.entry(k) {
                        let t0 = Instant::now();
                        let list = kbest_search(&dec, c, k)?;
                        let table = extract_layer_metrics(&list, c, n_t)?;
                        slot.insert((list, table, t0.elapsed()));
                    }
                    // the shared search time is charged to every consumer
                    let (list, table, search_time) = &lists[&k];
                    let t0 = Instant::now();
                    let llr = match det {
                        DetectorKind::Mpps { .. } => {
                            mpps_llrs(self.model.as_ref().expect("validated"), table, c, noise_var)?
                        }
                        _ => candidate_max_log(table, noise_var, c, lambda_max)?,
                    };
                    (llr, Some(list.content_hash()), t0.elapsed() + *search_time)
                }
                DetectorKind::MppsIdeal => {
                    let t0 = Instant::now();
                    let ex = exhaustive_layer_table(&dec.h_r, &dec.y_r, c, u128::MAX)?;
                    let list = minimal_path_set(&dec, c, &ex.best)?;
                    let table = extract_layer_metrics(&list, c, n_t)?;
                    let llr = mpps_llrs(
                        self.model.as_ref().expect("validated"),
                        &table,
                        c,
                        noise_var,
                    )?;
                    (llr, Some(list.content_hash()), t0.elapsed())
                }
            };
            outputs.push(DetectorOutput {
                detector: det,
                llr,
                candidate_hash,
                elapsed,
            });
        }

        let reference = if self.cfg.reference_available(c) {
            exact.map(|(lm, _)| lm)
        } else {
            None
        };
        Ok(TrialOutcome {
            bits,
            noise_var,
            reference,
            outputs,
        })
    }
}
