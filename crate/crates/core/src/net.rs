//! One-hidden-layer network mapping per-layer moment features to symbol LLRs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baseline::{exact_log_map, LlrVector};
use crate::error::{Error, Result};
use crate::model::{draw_channel, noise_var_from_snr, transmit, ChannelModelConfig, Constellation};
use crate::moments::{layer_features, mpps_layer_statistics, FEATURE_DIM};
use crate::search::{extract_layer_metrics, kbest_search, real_decompose, LayerMetricTable};

pub const MODEL_VERSION: &str = "mppsnet-v1";
pub const DEFAULT_HIDDEN_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub m_c: usize,
    pub lambda_max: f64,
    /// `hidden_dim x in_dim`, row-major
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `out_dim x hidden_dim`, row-major
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub feat_mean: Vec<f64>,
    pub feat_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub features: Vec<f64>,
    pub label: Vec<f64>,
}

/// Gradient with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros_like(m: &MlpModel) -> Self {
        Self {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: vec![0.0; m.b2.len()],
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }
}

impl MlpModel {
    /// All-zero weights with identity standardisation.
    pub fn zeros(hidden_dim: usize, m_c: usize, lambda_max: f64) -> Self {
        Self {
            in_dim: FEATURE_DIM,
            hidden_dim,
            out_dim: m_c,
            m_c,
            lambda_max,
            w1: vec![0.0; hidden_dim * FEATURE_DIM],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; m_c * hidden_dim],
            b2: vec![0.0; m_c],
            feat_mean: vec![0.0; FEATURE_DIM],
            feat_std: vec![1.0; FEATURE_DIM],
        }
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Mutable access to parameter `idx` in `w1, b1, w2, b2` order.
    pub fn param_mut(&mut self, mut idx: usize) -> &mut f64 {
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            if idx < v.len() {
                return &mut v[idx];
            }
            idx -= v.len();
        }
        panic!("parameter index out of range")
    }

    fn params_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.in_dim {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.in_dim,
                features.len()
            )));
        }
        Ok(())
    }

    fn hidden(&self, features: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = features
            .iter()
            .zip(self.feat_mean.iter().zip(&self.feat_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        (0..self.hidden_dim)
            .map(|h| {
                let row = &self.w1[h * self.in_dim..(h + 1) * self.in_dim];
                let pre: f64 = row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + self.b1[h];
                pre.tanh()
            })
            .collect()
    }

    fn output(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|o| {
                let row = &self.w2[o * self.hidden_dim..(o + 1) * self.hidden_dim];
                row.iter().zip(hidden).map(|(w, a)| w * a).sum::<f64>() + self.b2[o]
            })
            .collect()
    }

    /// Network output before saturation.
    pub fn forward_raw(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_input(features)?;
        Ok(self.output(&self.hidden(features)))
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        let lm = self.lambda_max;
        Ok(self
            .forward_raw(features)?
            .into_iter()
            .map(|v| v.clamp(-lm, lm))
            .collect())
    }

    fn validate(&self) -> Result<()> {
        let dims_ok = self.w1.len() == self.hidden_dim * self.in_dim
            && self.b1.len() == self.hidden_dim
            && self.w2.len() == self.out_dim * self.hidden_dim
            && self.b2.len() == self.out_dim
            && self.feat_mean.len() == self.in_dim
            && self.feat_std.len() == self.in_dim;
        if !dims_ok {
            return Err(Error::Format("inconsistent model dimensions".into()));
        }
        let all = [
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
            &self.feat_mean,
            &self.feat_std,
        ];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Format("non-finite model parameter".into()));
        }
        if self.feat_std.iter().any(|&s| s <= 0.0) {
            return Err(Error::Format("feature scale must be positive".into()));
        }
        Ok(())
    }
}

/// Glorot-uniform weights, zero biases, identity standardisation.
pub fn init_model<R: Rng + ?Sized>(
    hidden_dim: usize,
    m_c: usize,
    lambda_max: f64,
    rng: &mut R,
) -> Result<MlpModel> {
    if hidden_dim == 0 {
        return Err(Error::invalid("hidden_dim must be at least 1"));
    }
    let mut m = MlpModel::zeros(hidden_dim, m_c, lambda_max);
    let r1 = (6.0 / (m.in_dim + hidden_dim) as f64).sqrt();
    for w in &mut m.w1 {
        *w = rng.random_range(-r1..=r1);
    }
    let r2 = (6.0 / (hidden_dim + m.out_dim) as f64).sqrt();
    for w in &mut m.w2 {
        *w = rng.random_range(-r2..=r2);
    }
    Ok(m)
}

/// Mean squared error over every output of every sample, and its exact
/// gradient. Uses the unsaturated output.
pub fn grad_l2(m: &MlpModel, batch: &[TrainSample]) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut g = Gradients::zeros_like(m);
    let scale = 1.0 / (batch.len() * m.out_dim) as f64;
    let mut loss = 0.0;
    for sample in batch {
        m.check_input(&sample.features)?;
        if sample.label.len() != m.out_dim {
            return Err(Error::invalid(
                "label length does not match the output layer",
            ));
        }
        let x: Vec<f64> = sample
            .features
            .iter()
            .zip(m.feat_mean.iter().zip(&m.feat_std))
            .map(|(v, (mu, s))| (v - mu) / s)
            .collect();
        let hidden = m.hidden(&sample.features);
        let out = m.output(&hidden);
        let mut back = vec![0.0; m.hidden_dim];
        for (o, (y, t)) in out.iter().zip(&sample.label).enumerate() {
            let err = y - t;
            loss += err * err * scale;
            let d_out = 2.0 * err * scale;
            g.b2[o] += d_out;
            for h in 0..m.hidden_dim {
                g.w2[o * m.hidden_dim + h] += d_out * hidden[h];
                back[h] += d_out * m.w2[o * m.hidden_dim + h];
            }
        }
        for h in 0..m.hidden_dim {
            let d_pre = back[h] * (1.0 - hidden[h] * hidden[h]);
            g.b1[h] += d_pre;
            for (i, xi) in x.iter().enumerate() {
                g.w1[h * m.in_dim + i] += d_pre * xi;
            }
        }
    }
    Ok((g, loss))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            step_size: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

/// Per-feature mean and standard deviation; degenerate scales become 1.
pub fn fit_standardization(dataset: &[TrainSample]) -> (Vec<f64>, Vec<f64>) {
    let dim = dataset[0].features.len();
    let n = dataset.len() as f64;
    let mut mean = vec![0.0; dim];
    for s in dataset {
        for (m, v) in mean.iter_mut().zip(&s.features) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; dim];
    for s in dataset {
        for ((acc, v), m) in var.iter_mut().zip(&s.features).zip(&mean) {
            *acc += (v - m) * (v - m) / n;
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = v.sqrt();
            if s > 1e-12 * (1.0 + s) && s.is_finite() {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Adam on the L2 loss. Returns the trained model and the mean loss of
/// every epoch.
pub fn train(
    model: &MlpModel,
    dataset: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch_size must be at least 1"));
    }
    let mut m = model.clone();
    let (mean, std) = fit_standardization(dataset);
    m.feat_mean = mean;
    m.feat_std = std;

    let mut first = Gradients::zeros_like(&m).flatten();
    let mut second = first.clone();
    let mut step = 0i32;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| dataset[i].clone()));
            let (g, loss) = grad_l2(&m, &batch)?;
            epoch_loss += loss * chunk.len() as f64;

            step += 1;
            let bc1 = 1.0 - cfg.beta1.powi(step);
            let bc2 = 1.0 - cfg.beta2.powi(step);
            let grads = g.flatten();
            let mut idx = 0;
            for param in m.params_mut() {
                for p in param.iter_mut() {
                    let gi = grads[idx];
                    first[idx] = cfg.beta1 * first[idx] + (1.0 - cfg.beta1) * gi;
                    second[idx] = cfg.beta2 * second[idx] + (1.0 - cfg.beta2) * gi * gi;
                    let m_hat = first[idx] / bc1;
                    let v_hat = second[idx] / bc2;
                    *p -= cfg.step_size * m_hat / (v_hat.sqrt() + cfg.epsilon);
                    idx += 1;
                }
            }
        }
        let epoch_loss = epoch_loss / dataset.len() as f64;
        if !epoch_loss.is_finite() || epoch_loss > 1e6 {
            return Err(Error::TrainingDiverged {
                epoch,
                loss: epoch_loss,
            });
        }
        trace.push(epoch_loss);
    }
    Ok((m, trace))
}

/// Network inference for every complex layer of a metric table.
pub fn mpps_llrs(
    model: &MlpModel,
    table: &LayerMetricTable,
    c: &Constellation,
    noise_var: f64,
) -> Result<LlrVector> {
    if model.out_dim != c.bits_per_symbol() {
        return Err(Error::invalid(format!(
            "model emits {} LLRs per symbol, constellation carries {} bits",
            model.out_dim,
            c.bits_per_symbol()
        )));
    }
    let moments = mpps_layer_statistics(table, c)?;
    let mut out = Vec::with_capacity(table.n_layers() / 2 * c.bits_per_symbol());
    for feat in layer_features(&moments, noise_var) {
        out.extend(model.forward(&feat)?);
    }
    Ok(LlrVector(out))
}

/// Scenario used to label training data with exhaustive log-MAP LLRs.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub n_t: usize,
    pub n_r: usize,
    pub m_c: usize,
    pub channel: ChannelModelConfig,
    pub k_budget: usize,
    pub snr_db_min: f64,
    pub snr_db_max: f64,
    pub lambda_max: f64,
}

fn labelled_channel_use(
    spec: &DatasetSpec,
    c: &Constellation,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TrainSample>> {
    let snr_db = if spec.snr_db_max > spec.snr_db_min {
        rng.random_range(spec.snr_db_min..spec.snr_db_max)
    } else {
        spec.snr_db_min
    };
    let noise_var = noise_var_from_snr(snr_db, spec.n_t, c, &spec.channel)?;
    let h = draw_channel(&spec.channel, spec.n_r, spec.n_t, rng)?;
    let bits: Vec<u8> = (0..spec.n_t * c.bits_per_symbol())
        .map(|_| rng.random_range(0..2))
        .collect();
    let s = c.modulate(&bits, spec.n_t)?;
    let y = transmit(&h, &s, noise_var, rng)?;

    let dec = real_decompose(&h, &y)?;
    let cands = kbest_search(&dec, c, spec.k_budget)?;
    let table = extract_layer_metrics(&cands, c, spec.n_t)?;
    let moments = mpps_layer_statistics(&table, c)?;
    let labels = exact_log_map(&y, &h, noise_var, c)?.clamped(spec.lambda_max);
    let m_c = c.bits_per_symbol();
    Ok(layer_features(&moments, noise_var)
        .into_iter()
        .enumerate()
        .map(|(l, feat)| TrainSample {
            features: feat.to_vec(),
            label: labels.0[l * m_c..(l + 1) * m_c].to_vec(),
        })
        .collect())
}

/// Draws `n_channel_uses` independent channel uses and returns one sample per
/// complex layer. Channel use `t` is driven by its own stream of `seed`, so
/// the result does not depend on the thread count.
pub fn build_dataset(
    spec: &DatasetSpec,
    n_channel_uses: usize,
    seed: u64,
) -> Result<Vec<TrainSample>> {
    let c = Constellation::new(spec.m_c)?;
    crate::search::check_enumeration(&c, spec.n_t, crate::search::ENUMERATION_LIMIT)?;
    if spec.k_budget == 0 {
        return Err(Error::invalid("k_budget must be at least 1"));
    }
    let per_use: Vec<Vec<TrainSample>> = (0..n_channel_uses)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            // degenerate draws are redrawn from the same stream
            loop {
                match labelled_channel_use(spec, &c, &mut rng) {
                    Err(Error::DegenerateChannel(_)) => continue,
                    other => return other,
                }
            }
        })
        .collect::<Result<_>>()?;
    Ok(per_use.into_iter().flatten().collect())
}

fn fmt_value(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("write to string");
}

fn push_line(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        fmt_value(out, *v);
    }
    out.push('\n');
}

/// Text serialisation: a header line followed by one line per parameter
/// array (`feat_mean, feat_std, w1, b1, w2, b2`).
pub fn model_to_string(m: &MlpModel) -> String {
    let mut out = String::new();
    write!(
        out,
        "{} {} {} {} {} ",
        MODEL_VERSION, m.in_dim, m.hidden_dim, m.out_dim, m.m_c
    )
    .expect("write to string");
    fmt_value(&mut out, m.lambda_max);
    out.push('\n');
    for arr in [&m.feat_mean, &m.feat_std, &m.w1, &m.b1, &m.w2, &m.b2] {
        push_line(&mut out, arr);
    }
    out
}

fn parse_line(line: Option<&str>, expected: usize, what: &str) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| Error::Format(format!("missing {what} line")))?;
    let values = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Format(format!("{what}: bad value {t:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::Format(format!(
            "{what}: expected {expected} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn model_from_str(text: &str) -> Result<MlpModel> {
    // a file cut inside the last line can still parse as numbers
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(Error::Format(
            "model file does not end with a newline; truncated?".into(),
        ));
    }
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty model file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.first() != Some(&MODEL_VERSION) {
        return Err(Error::Format(format!(
            "expected version {MODEL_VERSION}, got {:?}",
            fields.first()
        )));
    }
    if fields.len() != 6 {
        return Err(Error::Format(
            "header must carry 5 fields after the version".into(),
        ));
    }
    let dim = |i: usize| -> Result<usize> {
        fields[i]
            .parse()
            .map_err(|_| Error::Format(format!("bad header field {:?}", fields[i])))
    };
    let (in_dim, hidden_dim, out_dim, m_c) = (dim(1)?, dim(2)?, dim(3)?, dim(4)?);
    let lambda_max: f64 = fields[5]
        .parse()
        .map_err(|_| Error::Format(format!("bad lambda_max {:?}", fields[5])))?;
    let m = MlpModel {
        in_dim,
        hidden_dim,
        out_dim,
        m_c,
        lambda_max,
        feat_mean: parse_line(lines.next(), in_dim, "feat_mean")?,
        feat_std: parse_line(lines.next(), in_dim, "feat_std")?,
        w1: parse_line(lines.next(), hidden_dim * in_dim, "w1")?,
        b1: parse_line(lines.next(), hidden_dim, "b1")?,
        w2: parse_line(lines.next(), out_dim * hidden_dim, "w2")?,
        b2: parse_line(lines.next(), out_dim, "b2")?,
    };
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::Format("trailing data after b2".into()));
    }
    if in_dim != FEATURE_DIM || out_dim != m_c {
        return Err(Error::Format(format!(
            "unsupported shape: {in_dim} inputs, {out_dim} outputs for m_c = {m_c}"
        )));
    }
    m.validate()?;
    Ok(m)
}

pub fn save_model(m: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_string(m))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    model_from_str(&fs::read_to_string(path)?)
}
