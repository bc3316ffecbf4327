use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SimConfig;
use crate::error::{Error, Result};
use crate::net::{build_dataset, init_model, train, MlpModel};

/// Model and per-epoch loss of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: MlpModel,
    pub loss_trace: Vec<f64>,
    pub n_samples: usize,
}

/// Labels `cfg.train_samples` per-layer samples with exhaustive log-MAP
/// LLRs over the configured scenario and fits a fresh network to them.
pub fn train_from_config(cfg: &SimConfig) -> Result<TrainReport> {
    cfg.validate(true)?;
    if cfg.train_samples == 0 {
        return Err(Error::Config("train_samples must be at least 1".into()));
    }
    let n_uses = cfg.train_samples.div_ceil(cfg.n_t);
    let spec = cfg.dataset_spec();
    if spec.snr_db_min.is_nan() || spec.snr_db_max.is_nan() || spec.snr_db_min > spec.snr_db_max {
        return Err(Error::Config("training SNR range is empty".into()));
    }
    let dataset = build_dataset(&spec, n_uses, cfg.seed)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_rng.set_stream(u64::MAX);
    let init = init_model(cfg.hidden_dim, cfg.m_c, cfg.lambda_max, &mut init_rng)?;
    let (model, loss_trace) = train(&init, &dataset, &cfg.train_config())?;
    Ok(TrainReport {
        model,
        loss_trace,
        n_samples: dataset.len(),
    })
}
