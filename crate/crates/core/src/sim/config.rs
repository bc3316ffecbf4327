use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelKind, ChannelModelConfig, Constellation};
use crate::net::{DatasetSpec, TrainConfig, DEFAULT_HIDDEN_DIM};
use crate::search::{hypothesis_count, minimal_path_budget, ENUMERATION_LIMIT};

pub const SEED_ENV: &str = "MPPS_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    ExactLogMap,
    ExactMaxLog,
    CandidateMaxLog { k: usize },
    Lmmse,
    Mpps { k: usize },
    MppsIdeal,
}

impl DetectorKind {
    /// Parses `name` or `name:k`; list-based detectors default to `k_budget`.
    pub fn parse(s: &str, k_budget: usize) -> Result<Self> {
        let (name, k) = match s.split_once(':') {
            Some((name, k)) => {
                let k = k
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad path budget in detector {s:?}")))?;
                (name.trim(), Some(k))
            }
            None => (s.trim(), None),
        };
        let with_k = |k: Option<usize>| k.unwrap_or(k_budget);
        let kind = match name {
            "exact_log_map" => DetectorKind::ExactLogMap,
            "exact_max_log" => DetectorKind::ExactMaxLog,
            "candidate_max_log" => DetectorKind::CandidateMaxLog { k: with_k(k) },
            "lmmse" => DetectorKind::Lmmse,
            "mpps" => DetectorKind::Mpps { k: with_k(k) },
            "mpps_ideal" => DetectorKind::MppsIdeal,
            _ => return Err(Error::Config(format!("unknown detector {name:?}"))),
        };
        if k.is_some()
            && !matches!(
                kind,
                DetectorKind::CandidateMaxLog { .. } | DetectorKind::Mpps { .. }
            )
        {
            return Err(Error::Config(format!(
                "detector {name:?} takes no path budget"
            )));
        }
        Ok(kind)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::ExactLogMap => "exact_log_map",
            DetectorKind::ExactMaxLog => "exact_max_log",
            DetectorKind::CandidateMaxLog { .. } => "candidate_max_log",
            DetectorKind::Lmmse => "lmmse",
            DetectorKind::Mpps { .. } => "mpps",
            DetectorKind::MppsIdeal => "mpps_ideal",
        }
    }

    /// Number of sampled paths the detector consumes (0 for non-list detectors).
    pub fn path_budget(&self, n_t: usize) -> usize {
        match self {
            DetectorKind::CandidateMaxLog { k } | DetectorKind::Mpps { k } => *k,
            DetectorKind::MppsIdeal => minimal_path_budget(n_t),
            _ => 0,
        }
    }

    pub fn needs_enumeration(&self) -> bool {
        matches!(
            self,
            DetectorKind::ExactLogMap | DetectorKind::ExactMaxLog | DetectorKind::MppsIdeal
        )
    }

    pub fn needs_model(&self) -> bool {
        matches!(self, DetectorKind::Mpps { .. } | DetectorKind::MppsIdeal)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorKind::CandidateMaxLog { k } | DetectorKind::Mpps { k } => {
                write!(f, "{}:{}", self.name(), k)
            }
            _ => f.write_str(self.name()),
        }
    }
}

fn default_k() -> usize {
    24
}
fn default_lambda_max() -> f64 {
    crate::baseline::DEFAULT_LAMBDA_MAX
}
fn default_oracle_limit() -> u64 {
    1 << 20
}
fn default_train_samples() -> usize {
    50_000
}
fn default_hidden() -> usize {
    DEFAULT_HIDDEN_DIM
}
fn default_epochs() -> usize {
    200
}
fn default_batch() -> usize {
    128
}
fn default_step() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

/// Flat JSON experiment description shared by every CLI subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_t: usize,
    pub n_r: usize,
    pub m_c: usize,
    pub channel: ChannelKind,
    #[serde(default)]
    pub rho_t: f64,
    #[serde(default)]
    pub rho_r: f64,
    pub snr_db_list: Vec<f64>,
    pub n_trials: usize,
    pub detectors: Vec<String>,
    #[serde(default = "default_k")]
    pub k_budget: usize,
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model_path: Option<String>,
    /// Fill `wall_time_s`; off by default so output files are reproducible.
    #[serde(default)]
    pub report_timing: bool,
    /// Exhaustive log-MAP reference is computed only up to this many
    /// hypotheses per channel use.
    #[serde(default = "default_oracle_limit")]
    pub oracle_max_hypotheses: u64,

    /// Training set size in per-layer samples.
    #[serde(default = "default_train_samples")]
    pub train_samples: usize,
    #[serde(default)]
    pub train_snr_db_min: Option<f64>,
    #[serde(default)]
    pub train_snr_db_max: Option<f64>,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_step")]
    pub step_size: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
}

impl SimConfig {
    /// A config with every optional field at its default.
    pub fn new(
        n_t: usize,
        n_r: usize,
        m_c: usize,
        channel: ChannelModelConfig,
        snr_db_list: Vec<f64>,
        n_trials: usize,
        detectors: &[&str],
    ) -> Self {
        Self {
            n_t,
            n_r,
            m_c,
            channel: channel.kind,
            rho_t: channel.rho_t,
            rho_r: channel.rho_r,
            snr_db_list,
            n_trials,
            detectors: detectors.iter().map(|s| s.to_string()).collect(),
            k_budget: default_k(),
            lambda_max: default_lambda_max(),
            seed: 0,
            model_path: None,
            report_timing: false,
            oracle_max_hypotheses: default_oracle_limit(),
            train_samples: default_train_samples(),
            train_snr_db_min: None,
            train_snr_db_max: None,
            hidden_dim: default_hidden(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            step_size: default_step(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and applies the `MPPS_SEED` override.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = Self::from_json(&fs::read_to_string(path)?)?;
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.seed = seed.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV} is not a 64-bit integer: {seed:?}"))
            })?;
        }
        Ok(cfg)
    }

    pub fn channel_config(&self) -> ChannelModelConfig {
        ChannelModelConfig {
            kind: self.channel,
            rho_t: self.rho_t,
            rho_r: self.rho_r,
        }
    }

    pub fn detector_kinds(&self) -> Result<Vec<DetectorKind>> {
        self.detectors
            .iter()
            .map(|d| DetectorKind::parse(d, self.k_budget))
            .collect()
    }

    pub fn reference_available(&self, c: &Constellation) -> bool {
        let n = hypothesis_count(c, self.n_t);
        n <= u128::from(self.oracle_max_hypotheses) && n <= ENUMERATION_LIMIT
    }

    /// Structural checks; `with_model` says whether a network is available.
    pub fn validate(&self, with_model: bool) -> Result<()> {
        if self.n_t == 0 || self.n_r < self.n_t {
            return Err(Error::Config(format!(
                "need n_r >= n_t >= 1, got {}x{}",
                self.n_r, self.n_t
            )));
        }
        let c = Constellation::new(self.m_c).map_err(|e| Error::Config(e.to_string()))?;
        self.channel_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        if self.lambda_max.is_nan() || self.lambda_max <= 0.0 {
            return Err(Error::Config("lambda_max must be positive".into()));
        }
        let kinds = self.detector_kinds()?;
        if kinds.is_empty() {
            return Err(Error::Config("detector list is empty".into()));
        }
        for kind in &kinds {
            if kind.path_budget(self.n_t) == 0
                && matches!(
                    kind,
                    DetectorKind::CandidateMaxLog { .. } | DetectorKind::Mpps { .. }
                )
            {
                return Err(Error::Config(format!(
                    "{kind} needs a positive path budget"
                )));
            }
            if kind.needs_enumeration() && !self.reference_available(&c) {
                return Err(Error::Config(format!(
                    "{kind} needs exhaustive enumeration of {} hypotheses, above the configured limit",
                    hypothesis_count(&c, self.n_t)
                )));
            }
            if kind.needs_model() && !with_model {
                return Err(Error::Config(format!(
                    "{kind} needs a model (model_path or --model)"
                )));
            }
        }
        Ok(())
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        let lo = self
            .snr_db_list
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .snr_db_list
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        DatasetSpec {
            n_t: self.n_t,
            n_r: self.n_r,
            m_c: self.m_c,
            channel: self.channel_config(),
            k_budget: self.k_budget,
            snr_db_min: self.train_snr_db_min.unwrap_or(lo),
            snr_db_max: self.train_snr_db_max.unwrap_or(hi),
            lambda_max: self.lambda_max,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            step_size: self.step_size,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            seed: self.seed,
        }
    }
}
