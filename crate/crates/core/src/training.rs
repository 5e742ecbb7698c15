//! Teacher-forced training with Adam, exponential decay and early stopping.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{segment, DataError, Minibatch, SegmentationConfig, Sequence};
use crate::metrics::{batch_loss, LossBreakdown, LossMode, MetricError};
use crate::neural::{Backend, Eager, Gradients, LstmState, NeuralError, ParamSet, Tape, Tensor, Var};
use crate::odenet::{Architecture, Model, ModelError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite gradient for parameter '{0}'")]
    NonFiniteGradient(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(
        "epoch {epoch}: {skipped} of {total} subsequences diverged (limit {limit:.1}%); \
         first failure: {first}"
    )]
    Aborted {
        epoch: usize,
        skipped: usize,
        total: usize,
        limit: f64,
        first: String,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Adam moments and hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros = || params.tensors().iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update; leaves everything untouched on a bad gradient.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &Gradients,
    opt: &mut OptimizerState,
    lr: f64,
) -> Result<(), TrainError> {
    if grads.0.len() != params.len() || opt.m.len() != params.len() {
        return Err(TrainError::Config("gradient and parameter lists differ".into()));
    }
    for (name, (g, p)) in params.names().iter().zip(grads.0.iter().zip(params.tensors())) {
        if g.shape() != p.shape() {
            return Err(TrainError::Config(format!("gradient shape mismatch for '{name}'")));
        }
        if !g.is_finite() {
            return Err(TrainError::NonFiniteGradient(name.clone()));
        }
    }
    opt.step += 1;
    let t = opt.step as i32;
    let (b1, b2) = (opt.beta1, opt.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, p) in params.tensors_mut().iter_mut().enumerate() {
        let g = grads.0[i].data();
        let m = opt.m[i].data_mut();
        for (mk, gk) in m.iter_mut().zip(g) {
            *mk = b1 * *mk + (1.0 - b1) * gk;
        }
        let v = opt.v[i].data_mut();
        for (vk, gk) in v.iter_mut().zip(g) {
            *vk = b2 * *vk + (1.0 - b2) * gk * gk;
        }
        let (m, v) = (opt.m[i].data(), opt.v[i].data());
        for (k, pk) in p.data_mut().iter_mut().enumerate() {
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            *pk -= lr * m_hat / (v_hat.sqrt() + opt.eps);
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub initial_lr: f64,
    /// Multiplies the learning rate after every epoch.
    pub decay: f64,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Validate every this many epochs; the last epoch is always validated.
    pub validate_every: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            initial_lr: 1e-3,
            decay: 0.999,
            max_epochs: 300,
            patience: 50,
            validate_every: 1,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.initial_lr >= 0.0 && self.initial_lr.is_finite()) {
            return Err(TrainError::Config(format!("learning rate must be >= 0, got {}", self.initial_lr)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(TrainError::Config(format!("decay must lie in (0, 1], got {}", self.decay)));
        }
        if self.patience == 0 || self.validate_every == 0 || self.max_epochs == 0 {
            return Err(TrainError::Config(
                "max_epochs, patience and validate_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub schedule: TrainSchedule,
    pub loss: LossMode,
    pub batch_size: usize,
    pub segmentation: SegmentationConfig,
    /// Global gradient norm limit; 0 disables clipping.
    pub grad_clip: f64,
    /// Fraction of diverged subsequences per epoch that aborts training.
    pub max_skip_fraction: f64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schedule: TrainSchedule::default(),
            loss: LossMode::Combined,
            batch_size: 32,
            segmentation: SegmentationConfig::default(),
            grad_clip: 1.0,
            max_skip_fraction: 0.01,
            shuffle: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochStats {
    /// Mean loss over the gradient steps taken.
    pub mean_loss: f64,
    pub steps: usize,
    /// Subsequence batches dropped because the forward pass diverged.
    pub diverged: usize,
    /// Subsequence batches dropped because their target was silent.
    pub silent: usize,
    pub first_failure: Option<String>,
}

impl EpochStats {
    pub fn attempted(&self) -> usize {
        self.steps + self.diverged + self.silent
    }
}

/// Per-step predictions of state channel 0 and their tape handles.
struct Recorded<V> {
    handles: Vec<V>,
    preds: Vec<Vec<f64>>,
}

fn run_subsequence<B: Backend>(
    model: &Model,
    backend: &mut B,
    params: &[B::Value],
    inputs: &[&[f64]],
    y0: &[Vec<f64>],
    lstm_state: Option<LstmState<Tensor>>,
) -> Result<(Recorded<B::Value>, Option<LstmState<Tensor>>), ModelError> {
    let batch = inputs.len();
    let len = inputs[0].len() - 1;
    let dim = model.state_dim;
    let y0 = Tensor::new(vec![batch, dim], y0.iter().flatten().copied().collect())?;
    let mut rec = Recorded {
        handles: Vec::with_capacity(len),
        preds: vec![Vec::with_capacity(len); batch],
    };
    let outcome = model.run_with_context(backend, params, inputs, &y0, lstm_state, |b, _, v| {
        let t = b.value(v);
        for (item, p) in rec.preds.iter_mut().enumerate() {
            p.push(t.data()[item * t.cols()]);
        }
        rec.handles.push(v.clone());
    })?;
    Ok((rec, outcome.lstm_state))
}

/// Loss of one subsequence batch over its valid samples.
fn masked_loss(
    mode: LossMode,
    targets: &[Vec<f64>],
    preds: &[Vec<f64>],
    valid: &[usize],
) -> Result<(LossBreakdown, Vec<Vec<f64>>), MetricError> {
    let t: Vec<&[f64]> = targets.iter().zip(valid).map(|(y, &n)| &y[..n]).collect();
    let p: Vec<&[f64]> = preds.iter().zip(valid).map(|(y, &n)| &y[..n]).collect();
    batch_loss(mode, &t, &p)
}

fn is_divergence(e: &ModelError) -> bool {
    matches!(
        e,
        ModelError::Solver(crate::solvers::SolverError::Diverged { .. })
            | ModelError::Solver(crate::solvers::SolverError::NonFinite { .. })
    )
}

/// Gradients of a loss recorded through `handles`, given the loss gradient
/// with respect to channel 0 of every emitted state.
fn backprop(tape: &mut Tape, handles: &[Var], loss: f64, dloss: &[Vec<f64>], dim: usize) -> Result<Gradients, TrainError> {
    let batch = dloss.len();
    let local: Vec<Tensor> = (0..handles.len())
        .map(|n| {
            let mut g = vec![0.0; batch * dim];
            for (item, d) in dloss.iter().enumerate() {
                if n < d.len() {
                    g[item * dim] = d[n];
                }
            }
            Tensor::new(vec![batch, dim], g)
        })
        .collect::<Result<_, _>>()?;
    let root = tape.reduce_scalar(handles, loss, local)?;
    Ok(tape.backward(root)?)
}

/// Loss of one teacher-forced batch and its gradient for every parameter.
///
/// `inputs` items hold the context sample followed by the subsequence,
/// `y0` the state at the context sample and `targets` the channel-0 values
/// to predict.
pub fn loss_and_gradients(
    model: &Model,
    inputs: &[&[f64]],
    y0: &[Vec<f64>],
    targets: &[Vec<f64>],
    mode: LossMode,
) -> Result<(f64, Gradients), TrainError> {
    let mut tape = Tape::new();
    let vars = tape.register_params(&model.params);
    let (rec, _) = run_subsequence(model, &mut tape, &vars, inputs, y0, None)?;
    let t: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let p: Vec<&[f64]> = rec.preds.iter().map(Vec::as_slice).collect();
    let (loss, dloss) = batch_loss(mode, &t, &p)?;
    let grads = backprop(&mut tape, &rec.handles, loss.total, &dloss, model.state_dim)?;
    Ok((loss.total, grads))
}

/// One pass over the minibatches with a gradient step after every subsequence.
///
/// The initial state of every subsequence comes from the targets. The LSTM
/// carries its (detached) hidden state from one subsequence to the next
/// inside a minibatch and restarts from zero for each minibatch.
pub fn train_epoch(
    model: &mut Model,
    minibatches: &[Minibatch],
    cfg: &TrainConfig,
    opt: &mut OptimizerState,
    lr: f64,
) -> Result<EpochStats, TrainError> {
    let mut stats = EpochStats::default();
    let mut loss_sum = 0.0;
    let is_lstm = matches!(model.arch, Architecture::Lstm { .. });
    for mb in minibatches {
        let mut lstm_state: Option<LstmState<Tensor>> = None;
        for sb in &mb.subsequences {
            let mut tape = Tape::new();
            let vars = tape.register_params(&model.params);
            let inputs: Vec<&[f64]> = sb.inputs.iter().map(Vec::as_slice).collect();
            let (rec, next_state) =
                match run_subsequence(model, &mut tape, &vars, &inputs, &sb.y0, lstm_state.take()) {
                    Ok(r) => r,
                    Err(e) if is_divergence(&e) => {
                        stats.diverged += 1;
                        stats.first_failure.get_or_insert_with(|| {
                            format!("minibatch subsequence {}: {e}", sb.index)
                        });
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
            if is_lstm {
                lstm_state = next_state;
            }
            let (loss, dloss) = match masked_loss(cfg.loss, &sb.targets, &rec.preds, &sb.valid) {
                Ok(l) => l,
                Err(MetricError::ZeroEnergy) => {
                    stats.silent += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            if !loss.total.is_finite() {
                stats.diverged += 1;
                stats.first_failure.get_or_insert_with(|| format!("subsequence {}: loss {}", sb.index, loss.total));
                continue;
            }
            let mut grads = backprop(&mut tape, &rec.handles, loss.total, &dloss, model.state_dim)?;
            if cfg.grad_clip > 0.0 {
                grads.clip_global_norm(cfg.grad_clip);
            }
            adam_step(&mut model.params, &grads, opt, lr)?;
            loss_sum += loss.total;
            stats.steps += 1;
        }
    }
    stats.mean_loss = if stats.steps > 0 {
        loss_sum / stats.steps as f64
    } else {
        f64::NAN
    };
    Ok(stats)
}

/// Pooled loss over whole sequences, each started from its context state.
///
/// Sequences are run in batches without gradients; returns infinity when the
/// model diverges on any of them.
pub fn validate(model: &Model, sequences: &[Sequence], mode: LossMode, batch_size: usize) -> Result<f64, TrainError> {
    if sequences.is_empty() {
        return Err(TrainError::Config("validation set is empty".into()));
    }
    let mut targets: Vec<Vec<f64>> = Vec::with_capacity(sequences.len());
    let mut preds: Vec<Vec<f64>> = Vec::with_capacity(sequences.len());
    for group in sequences.chunks(batch_size.max(1)) {
        let longest = group.iter().map(Sequence::len).max().unwrap_or(0);
        let padded: Vec<Vec<f64>> = group
            .iter()
            .map(|s| {
                let mut x = Vec::with_capacity(longest + 1);
                x.push(s.context_input);
                x.extend_from_slice(&s.input);
                x.resize(longest + 1, 0.0);
                x
            })
            .collect();
        let inputs: Vec<&[f64]> = padded.iter().map(Vec::as_slice).collect();
        let y0: Vec<Vec<f64>> = group.iter().map(|s| s.context_state.clone()).collect();
        let mut eager = Eager;
        let rec = match run_subsequence(model, &mut eager, model.params.tensors(), &inputs, &y0, None) {
            Ok((rec, _)) => rec,
            Err(e) if is_divergence(&e) => return Ok(f64::INFINITY),
            Err(e) => return Err(e.into()),
        };
        for (s, mut p) in group.iter().zip(rec.preds) {
            p.truncate(s.len());
            targets.push(s.target.channel(0));
            preds.push(p);
        }
    }
    let t: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let p: Vec<&[f64]> = preds.iter().map(Vec::as_slice).collect();
    let (loss, _) = batch_loss(mode, &t, &p)?;
    Ok(if loss.total.is_finite() { loss.total } else { f64::INFINITY })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` on epochs that skipped validation.
    pub val_loss: Option<f64>,
    pub lr: f64,
    pub diverged: usize,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Parameters with the lowest validation loss seen.
    pub best_params: ParamSet,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Full training run; leaves `model` holding the best parameters.
///
/// Deterministic for a given model, data, config and seed.
pub fn fit<F>(
    model: &mut Model,
    train: &[Sequence],
    val: &[Sequence],
    cfg: &TrainConfig,
    seed: u64,
    mut on_epoch: F,
) -> Result<FitResult, TrainError>
where
    F: FnMut(&EpochRecord),
{
    cfg.schedule.validate()?;
    if train.is_empty() {
        return Err(TrainError::Config("training set is empty".into()));
    }
    let mut opt = OptimizerState::new(&model.params);
    let mut lr = cfg.schedule.initial_lr;
    let mut best_params = model.params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut history = Vec::new();
    let mut stopped_early = false;
    let unshuffled = if cfg.shuffle {
        None
    } else {
        Some(segment(train, &cfg.segmentation, cfg.batch_size, None)?)
    };
    for epoch in 1..=cfg.schedule.max_epochs {
        let shuffled;
        let batches = match &unshuffled {
            Some(b) => b,
            None => {
                shuffled = segment(train, &cfg.segmentation, cfg.batch_size, Some(epoch_seed(seed, epoch)))?;
                &shuffled
            }
        };
        let stats = train_epoch(model, batches, cfg, &mut opt, lr)?;
        let attempted = stats.attempted().max(1);
        if stats.diverged as f64 > cfg.max_skip_fraction * attempted as f64 {
            return Err(TrainError::Aborted {
                epoch,
                skipped: stats.diverged,
                total: attempted,
                limit: 100.0 * cfg.max_skip_fraction,
                first: stats.first_failure.unwrap_or_default(),
            });
        }
        let lr_used = lr;
        lr *= cfg.schedule.decay;
        let last = epoch == cfg.schedule.max_epochs;
        let val_loss = if epoch % cfg.schedule.validate_every == 0 || last {
            Some(validate(model, val, cfg.loss, cfg.batch_size)?)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            train_loss: stats.mean_loss,
            val_loss,
            lr: lr_used,
            diverged: stats.diverged,
        };
        on_epoch(&record);
        history.push(record);
        if let Some(v) = val_loss {
            if v < best_val {
                best_val = v;
                best_epoch = epoch;
                best_params = model.params.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.schedule.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    model.params = best_params.clone();
    Ok(FitResult {
        best_params,
        best_epoch,
        best_val_loss: best_val,
        history,
        stopped_early,
    })
}

/// History as CSV with header `epoch,train_loss,val_loss,lr`.
pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<(), TrainError> {
    let io = |e: std::io::Error| TrainError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "epoch,train_loss,val_loss,lr").map_err(io)?;
    for r in history {
        let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
        writeln!(f, "{},{},{},{}", r.epoch, r.train_loss, val, r.lr).map_err(io)?;
    }
    f.flush().map_err(io)
}
