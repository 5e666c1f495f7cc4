//! Flat-parameter trajectory predictor.
//!
//! A two-layer fully connected network: flattened `T x F` history features ->
//! `hidden_width` rectified units -> `H x 2` future waypoints. Every protocol
//! layer treats the model as an opaque [`ParameterVector`]; this module is the
//! only place that knows the layout.
//!
//! Waypoints are expressed in the local frame anchored at the last observed
//! position, so a zero parameter vector predicts zero displacement and targets
//! stay at highway-scale magnitudes regardless of where the track sits.

use crate::error::{Result, SfdlError};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Flat array of model weights; the unit exchanged by every protocol step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    /// Wrap a weight array, rejecting non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SfdlError::NonFinite { index });
        }
        Ok(Self { values })
    }

    /// All-zero vector of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// FNV-1a digest of the raw weight bits, hex encoded. Used by round
    /// checkpoints to identify a model without storing it.
    pub fn digest(&self) -> String {
        const FNV_OFFSET: u64 = 0xcbf29ce484222325;
        const FNV_PRIME: u64 = 0x100000001b3;
        let mut h = FNV_OFFSET;
        for v in &self.values {
            for b in v.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(FNV_PRIME);
            }
        }
        format!("{h:016x}")
    }
}

/// One training/evaluation sample: `T x F` history features (time-major,
/// flattened) and `H` future `(x, y)` waypoints in the local frame, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub history: Vec<f64>,
    pub target: Vec<[f64; 2]>,
}

impl TrajectorySample {
    pub fn new(history: Vec<f64>, target: Vec<[f64; 2]>) -> Result<Self> {
        if history.iter().any(|v| !v.is_finite()) || target.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(SfdlError::invalid("sample contains non-finite values"));
        }
        Ok(Self { history, target })
    }
}

/// Which update rule local training uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Exact `w - lr * grad`; the verification path.
    PlainGradient,
    /// Adam with the usual moment estimates; the performance path.
    #[default]
    AdaptiveMoment,
}

/// Architecture and training hyper-parameters of the onboard predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    /// History length T.
    pub time_steps: usize,
    /// Features per history step F.
    pub input_features: usize,
    pub hidden_width: usize,
    /// Head width of the full-scale network this predictor stands in for.
    /// Recorded for dataset compatibility; the reference head emits (x, y)
    /// waypoints directly.
    pub output_features: usize,
    /// Prediction horizon H (waypoints at 0.5 s spacing).
    pub horizon: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub batch_size: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            time_steps: 10,
            input_features: 9,
            hidden_width: 32,
            output_features: 5,
            horizon: 10,
            learning_rate: 1e-4,
            optimizer: Optimizer::AdaptiveMoment,
            batch_size: 4,
        }
    }
}

impl PredictorConfig {
    /// Flattened input width T*F.
    pub fn input_dim(&self) -> usize {
        self.time_steps * self.input_features
    }

    /// Output width 2*H.
    pub fn output_dim(&self) -> usize {
        2 * self.horizon
    }

    /// Total parameter count: W1 + b1 + W2 + b2.
    pub fn param_dim(&self) -> usize {
        let (i, h, o) = (self.input_dim(), self.hidden_width, self.output_dim());
        h * i + h + o * h + o
    }

    pub fn validate(&self) -> Result<()> {
        if self.time_steps == 0
            || self.input_features == 0
            || self.hidden_width == 0
            || self.horizon == 0
        {
            return Err(SfdlError::config("predictor dimensions must be positive"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(SfdlError::config("learning_rate must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(SfdlError::config("batch_size must be >= 1"));
        }
        Ok(())
    }

    fn check_params(&self, params: &ParameterVector) -> Result<()> {
        if params.dim() != self.param_dim() {
            return Err(SfdlError::config(format!(
                "parameter dimension {} does not match architecture dimension {}",
                params.dim(),
                self.param_dim()
            )));
        }
        Ok(())
    }

    fn check_sample(&self, sample: &TrajectorySample) -> Result<()> {
        if sample.history.len() != self.input_dim() {
            return Err(SfdlError::config(format!(
                "sample history length {} does not match T*F = {}",
                sample.history.len(),
                self.input_dim()
            )));
        }
        if sample.target.len() != self.horizon {
            return Err(SfdlError::config(format!(
                "sample target length {} does not match horizon {}",
                sample.target.len(),
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Uniform init in [-0.1, 0.1] from a seeded stream.
pub fn init_params(config: &PredictorConfig, rng: &mut ChaCha8Rng) -> ParameterVector {
    let values = (0..config.param_dim())
        .map(|_| rng.random_range(-0.1..0.1))
        .collect();
    ParameterVector { values }
}

// Parameter layout offsets: [W1 (h x i) | b1 (h) | W2 (o x h) | b2 (o)],
// both weight matrices row-major.
struct Layout {
    i: usize,
    h: usize,
    o: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl Layout {
    fn of(config: &PredictorConfig) -> Self {
        let (i, h, o) = (config.input_dim(), config.hidden_width, config.output_dim());
        Self {
            i,
            h,
            o,
            w1: 0,
            b1: h * i,
            w2: h * i + h,
            b2: h * i + h + o * h,
        }
    }
}

fn forward(p: &[f64], l: &Layout, x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
    for j in 0..l.h {
        let row = &p[l.w1 + j * l.i..l.w1 + (j + 1) * l.i];
        let mut acc = p[l.b1 + j];
        for (w, xi) in row.iter().zip(x) {
            acc += w * xi;
        }
        hidden[j] = if acc > 0.0 { acc } else { 0.0 };
    }
    for o in 0..l.o {
        let row = &p[l.w2 + o * l.h..l.w2 + (o + 1) * l.h];
        let mut acc = p[l.b2 + o];
        for (w, hj) in row.iter().zip(hidden.iter()) {
            acc += w * hj;
        }
        out[o] = acc;
    }
}

/// Predicted `(x, y)` waypoint per horizon step, local frame.
pub fn predict(
    params: &ParameterVector,
    sample: &TrajectorySample,
    config: &PredictorConfig,
) -> Result<Vec<[f64; 2]>> {
    config.check_params(params)?;
    config.check_sample(sample)?;
    let l = Layout::of(config);
    let mut hidden = vec![0.0; l.h];
    let mut out = vec![0.0; l.o];
    forward(&params.values, &l, &sample.history, &mut hidden, &mut out);
    if let Some(index) = out.iter().position(|v| !v.is_finite()) {
        return Err(SfdlError::NonFinite { index });
    }
    Ok(out.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}

/// Mean squared Euclidean waypoint deviation over a batch.
///
/// Averages over every (sample, waypoint) pair, so a single sample off by
/// `(3, 4)` at one horizon step contributes `25 / H`.
pub fn loss(
    params: &ParameterVector,
    batch: &[TrajectorySample],
    config: &PredictorConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(SfdlError::invalid("loss over an empty batch"));
    }
    config.check_params(params)?;
    let l = Layout::of(config);
    let mut hidden = vec![0.0; l.h];
    let mut out = vec![0.0; l.o];
    let mut acc = 0.0;
    for sample in batch {
        config.check_sample(sample)?;
        forward(&params.values, &l, &sample.history, &mut hidden, &mut out);
        for (h, t) in sample.target.iter().enumerate() {
            let dx = out[2 * h] - t[0];
            let dy = out[2 * h + 1] - t[1];
            acc += dx * dx + dy * dy;
        }
    }
    Ok(acc / (batch.len() * config.horizon) as f64)
}

/// Analytic gradient of [`loss`] with respect to every parameter.
pub fn loss_gradient(
    params: &ParameterVector,
    batch: &[TrajectorySample],
    config: &PredictorConfig,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(SfdlError::invalid("gradient over an empty batch"));
    }
    config.check_params(params)?;
    let l = Layout::of(config);
    let p = &params.values;
    let mut grad = vec![0.0; p.len()];
    let mut hidden = vec![0.0; l.h];
    let mut out = vec![0.0; l.o];
    let mut d_out = vec![0.0; l.o];
    let mut d_hidden = vec![0.0; l.h];
    let norm = 1.0 / (batch.len() * config.horizon) as f64;

    for sample in batch {
        config.check_sample(sample)?;
        forward(p, &l, &sample.history, &mut hidden, &mut out);
        for (h, t) in sample.target.iter().enumerate() {
            d_out[2 * h] = 2.0 * (out[2 * h] - t[0]) * norm;
            d_out[2 * h + 1] = 2.0 * (out[2 * h + 1] - t[1]) * norm;
        }
        for o in 0..l.o {
            let g = d_out[o];
            grad[l.b2 + o] += g;
            let row = l.w2 + o * l.h;
            for j in 0..l.h {
                grad[row + j] += g * hidden[j];
            }
        }
        for j in 0..l.h {
            // rectifier gate: units at exactly zero pass no gradient
            if hidden[j] > 0.0 {
                let mut acc = 0.0;
                for o in 0..l.o {
                    acc += d_out[o] * p[l.w2 + o * l.h + j];
                }
                d_hidden[j] = acc;
            } else {
                d_hidden[j] = 0.0;
            }
        }
        for j in 0..l.h {
            let g = d_hidden[j];
            if g == 0.0 {
                continue;
            }
            grad[l.b1 + j] += g;
            let row = l.w1 + j * l.i;
            for (i, xi) in sample.history.iter().enumerate() {
                grad[row + i] += g * xi;
            }
        }
    }
    Ok(grad)
}

/// One plain-gradient step: `params - learning_rate * grad`.
pub fn train_step(
    params: &ParameterVector,
    batch: &[TrajectorySample],
    config: &PredictorConfig,
) -> Result<ParameterVector> {
    if batch.is_empty() {
        return Err(SfdlError::invalid("train_step over an empty batch"));
    }
    let grad = loss_gradient(params, batch, config)?;
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(SfdlError::NonFinite { index });
    }
    let values: Vec<f64> = params
        .values
        .iter()
        .zip(&grad)
        .map(|(w, g)| w - config.learning_rate * g)
        .collect();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(SfdlError::NonFinite { index });
    }
    Ok(ParameterVector { values })
}

/// Adam moment estimates for one model. Fresh state each communication round.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
        }
    }
}

/// One Adam step with the configured learning rate.
pub fn train_step_adam(
    params: &ParameterVector,
    batch: &[TrajectorySample],
    config: &PredictorConfig,
    state: &mut AdamState,
) -> Result<ParameterVector> {
    if batch.is_empty() {
        return Err(SfdlError::invalid("train_step over an empty batch"));
    }
    if state.m.len() != params.dim() {
        return Err(SfdlError::config(
            "optimizer state dimension does not match parameters",
        ));
    }
    let grad = loss_gradient(params, batch, config)?;
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(SfdlError::NonFinite { index });
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - ADAM_BETA1.powf(t);
    let bc2 = 1.0 - ADAM_BETA2.powf(t);
    let mut values = Vec::with_capacity(params.dim());
    #[allow(clippy::needless_range_loop)]
    for i in 0..params.dim() {
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * grad[i];
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        values.push(params.values[i] - config.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS));
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(SfdlError::NonFinite { index });
    }
    Ok(ParameterVector { values })
}

/// Runs one local epoch: the batch split into `batch_size` minibatches,
/// stepped in order with the configured optimizer.
pub fn train_epoch(
    params: &ParameterVector,
    samples: &[TrajectorySample],
    config: &PredictorConfig,
) -> Result<ParameterVector> {
    if samples.is_empty() {
        return Err(SfdlError::invalid("train_epoch over an empty dataset"));
    }
    let mut current = params.clone();
    let mut adam = AdamState::new(params.dim());
    for minibatch in samples.chunks(config.batch_size.max(1)) {
        current = match config.optimizer {
            Optimizer::PlainGradient => train_step(&current, minibatch, config)?,
            Optimizer::AdaptiveMoment => train_step_adam(&current, minibatch, config, &mut adam)?,
        };
    }
    Ok(current)
}
