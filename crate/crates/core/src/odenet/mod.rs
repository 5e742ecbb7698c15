//! ODENet and its baselines as sample-rate-aware sequence models.
//!
//! Every architecture maps an excitation sequence and an initial state to a
//! state trajectory. Time is normalized so one training-rate sample is one
//! unit; playing back at another rate only changes the step `Δτ`.

mod excitation;
mod presets;

pub use excitation::{BatchExcitation, ExcitationInterpolator};
pub use presets::Preset;

use thiserror::Error;

use crate::neural::{
    lstm_step, mlp_forward_with, Activation, Backend, Checkpoint, Eager, LstmSpec, LstmState,
    MlpSpec, ModelKind, NeuralError, ParamSet, SpecDocument, Tensor, FORMAT_VERSION,
};
use crate::signal::StateTrajectory;
use crate::solvers::{self, IntegrationStats, Scheme, SolverConfig, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl ModelError {
    /// Sample index at which integration blew up, if that is what happened.
    pub fn divergence_step(&self) -> Option<usize> {
        match self {
            ModelError::Solver(SolverError::Diverged { step, .. }) => Some(*step),
            _ => None,
        }
    }
}

/// Normalized step for playback at a given rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeNormalization {
    pub step: f64,
}

impl TimeNormalization {
    pub fn new(training_rate_hz: f64, playback_rate_hz: f64) -> Result<Self, ModelError> {
        if !(playback_rate_hz > 0.0 && playback_rate_hz.is_finite()) {
            return Err(ModelError::Contract(format!(
                "playback rate must be positive, got {playback_rate_hz}"
            )));
        }
        Ok(Self {
            step: training_rate_hz / playback_rate_hz,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Architecture {
    /// Network output is `dy/dτ`, integrated by the configured solver.
    OdeNet { net: MlpSpec, time_channel: bool },
    /// Residual update `y[n+1] = y[n] + h·f(x[n+1], y[n])`.
    Stn { net: MlpSpec },
    /// Recurrent baseline; unaware of the sampling rate.
    Lstm { net: LstmSpec },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub state_dim: usize,
    pub params: ParamSet,
    pub training_rate_hz: f64,
    /// `solver.step` holds the current `Δτ`.
    pub solver: SolverConfig,
}

/// What a batched run leaves behind besides the emitted states.
#[derive(Clone, Debug, Default)]
pub struct BatchOutcome {
    pub stats: IntegrationStats,
    pub lstm_state: Option<LstmState<Tensor>>,
}

impl Model {
    pub fn new(
        arch: Architecture,
        state_dim: usize,
        params: ParamSet,
        training_rate_hz: f64,
        scheme: Scheme,
    ) -> Result<Self, ModelError> {
        if state_dim == 0 {
            return Err(ModelError::Contract("state_dim must be positive".into()));
        }
        if !(training_rate_hz > 0.0) {
            return Err(ModelError::Contract("training rate must be positive".into()));
        }
        let (inputs, outputs, expected_inputs, layout) = match &arch {
            Architecture::OdeNet { net, time_channel } => (
                net.input_dim(),
                net.output_dim(),
                state_dim + 1 + usize::from(*time_channel),
                net.param_layout(),
            ),
            Architecture::Stn { net } => {
                (net.input_dim(), net.output_dim(), state_dim + 1, net.param_layout())
            }
            Architecture::Lstm { net } => (net.input_size, net.output_size, 1, net.param_layout()),
        };
        if inputs != expected_inputs || outputs != state_dim {
            return Err(ModelError::Contract(format!(
                "network maps {inputs} -> {outputs} but the model needs {expected_inputs} -> {state_dim}"
            )));
        }
        if params.len() != layout.len()
            || params
                .tensors()
                .iter()
                .zip(&layout)
                .any(|(t, (_, shape, _))| t.shape() != shape.as_slice())
        {
            return Err(ModelError::Contract("parameters do not match the architecture".into()));
        }
        Ok(Self {
            arch,
            state_dim,
            params,
            training_rate_hz,
            solver: SolverConfig::new(scheme, 1.0),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self.arch {
            Architecture::OdeNet { .. } => ModelKind::Odenet,
            Architecture::Stn { .. } => ModelKind::Stn,
            Architecture::Lstm { .. } => ModelKind::Lstm,
        }
    }

    pub fn is_rate_informed(&self) -> bool {
        !matches!(self.arch, Architecture::Lstm { .. })
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn step(&self) -> f64 {
        self.solver.step
    }

    /// Points `Δτ` at `rate_hz`; parameters are untouched.
    pub fn set_playback_rate(&mut self, rate_hz: f64) -> Result<TimeNormalization, ModelError> {
        let t = TimeNormalization::new(self.training_rate_hz, rate_hz)?;
        self.solver.step = t.step;
        Ok(t)
    }

    pub fn with_playback_rate(&self, rate_hz: f64) -> Result<Self, ModelError> {
        let mut m = self.clone();
        m.set_playback_rate(rate_hz)?;
        Ok(m)
    }

    /// Network output at excitation `vin` and state `y`, in state units per
    /// training-rate sample. `tau` only matters with a time channel.
    pub fn derivative_eval(&self, tau: f64, vin: f64, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        let net = match &self.arch {
            Architecture::OdeNet { net, .. } | Architecture::Stn { net } => net,
            Architecture::Lstm { .. } => {
                return Err(ModelError::Contract("an LSTM has no derivative field".into()))
            }
        };
        if y.len() != self.state_dim {
            return Err(ModelError::Contract(format!(
                "state has {} entries, model expects {}",
                y.len(),
                self.state_dim
            )));
        }
        let mut row = vec![vin];
        row.extend_from_slice(y);
        if let Architecture::OdeNet { time_channel: true, .. } = self.arch {
            row.push(tau / self.training_rate_hz);
        }
        let mut eager = Eager;
        let out = mlp_forward_with(&mut eager, net, self.params.tensors(), &Tensor::row(&row))?;
        Ok(out.into_data())
    }

    /// Runs a batch over equally long excitations and emits every state.
    ///
    /// For ODENet and STN, index 0 is `y0` (a `batch × state_dim` tensor) and
    /// index `n` is the state at excitation sample `n`. The LSTM ignores `y0`
    /// and emits its output after consuming sample `n`, continuing from
    /// `lstm_state` when given.
    pub fn run_batch<B, E>(
        &self,
        backend: &mut B,
        params: &[B::Value],
        excitation: &BatchExcitation<'_>,
        y0: &Tensor,
        lstm_state: Option<LstmState<Tensor>>,
        mut emit: E,
    ) -> Result<BatchOutcome, ModelError>
    where
        B: Backend,
        E: FnMut(&B, usize, &B::Value),
    {
        let batch = excitation.batch();
        let n = excitation.len();
        if !matches!(self.arch, Architecture::Lstm { .. })
            && (y0.rows() != batch || y0.cols() != self.state_dim)
        {
            return Err(ModelError::Contract(format!(
                "initial state must be {batch} x {}, got {:?}",
                self.state_dim,
                y0.shape()
            )));
        }
        match &self.arch {
            Architecture::OdeNet { net, time_channel } => {
                let rate = self.training_rate_hz;
                let time_channel = *time_channel;
                let mut rhs = |b: &mut B, tau: f64, y: &B::Value| -> Result<B::Value, SolverError> {
                    let x = b.constant(excitation.at(tau));
                    let input = if time_channel {
                        let t = b.constant(Tensor::new(vec![batch, 1], vec![tau / rate; batch])?);
                        b.concat(&[&x, y, &t])?
                    } else {
                        b.concat(&[&x, y])?
                    };
                    Ok(mlp_forward_with(b, net, params, &input)?)
                };
                let y0 = backend.constant(y0.clone());
                let stats = solvers::integrate(backend, &mut rhs, y0, n - 1, &self.solver, emit)?;
                Ok(BatchOutcome {
                    stats,
                    lstm_state: None,
                })
            }
            Architecture::Stn { net } => {
                let h = self.solver.step;
                let mut y = backend.constant(y0.clone());
                emit(backend, 0, &y);
                for k in 0..n - 1 {
                    let x = backend.constant(excitation.sample(k + 1));
                    let input = backend.concat(&[&x, &y])?;
                    let f = mlp_forward_with(backend, net, params, &input)?;
                    y = backend.lin_comb(&y, &[(h, &f)])?;
                    let m = backend.value(&y).max_abs();
                    if !m.is_finite() || m > self.solver.divergence_bound {
                        return Err(SolverError::Diverged {
                            step: k + 1,
                            tau: (k + 1) as f64 * h,
                        }
                        .into());
                    }
                    emit(backend, k + 1, &y);
                }
                Ok(BatchOutcome {
                    stats: IntegrationStats {
                        steps: n - 1,
                        derivative_evals: n - 1,
                        nonconverged: 0,
                    },
                    lstm_state: None,
                })
            }
            Architecture::Lstm { net } => {
                let init = lstm_state.unwrap_or_else(|| {
                    let (h, c) = net.zero_state(batch);
                    LstmState { h, c }
                });
                let mut state = LstmState {
                    h: backend.constant(init.h),
                    c: backend.constant(init.c),
                };
                for k in 0..n {
                    let x = backend.constant(excitation.sample(k));
                    let (out, next) = lstm_step(backend, net, params, &x, &state)?;
                    state = next;
                    emit(backend, k, &out);
                }
                Ok(BatchOutcome {
                    stats: IntegrationStats::default(),
                    lstm_state: Some(LstmState {
                        h: backend.value(&state.h).clone(),
                        c: backend.value(&state.c).clone(),
                    }),
                })
            }
        }
    }

    /// Predictions for `inputs[1..]` given the preceding sample as context.
    ///
    /// `inputs` items hold the context excitation sample followed by the
    /// subsequence; `y0` is the state at the context sample. `emit` receives
    /// `p = 0..len-1`, the prediction for subsequence sample `p`.
    pub fn run_with_context<B, E>(
        &self,
        backend: &mut B,
        params: &[B::Value],
        inputs: &[&[f64]],
        y0: &Tensor,
        lstm_state: Option<LstmState<Tensor>>,
        mut emit: E,
    ) -> Result<BatchOutcome, ModelError>
    where
        B: Backend,
        E: FnMut(&B, usize, &B::Value),
    {
        if inputs.iter().any(|x| x.len() < 2) {
            return Err(ModelError::Contract("context runs need at least one sample".into()));
        }
        let h = self.solver.step;
        match self.arch {
            Architecture::Lstm { .. } => {
                let ex = BatchExcitation::new(inputs.iter().map(|x| &x[1..]).collect(), h)?;
                self.run_batch(backend, params, &ex, y0, lstm_state, emit)
            }
            _ => {
                let ex = BatchExcitation::new(inputs.to_vec(), h)?;
                self.run_batch(backend, params, &ex, y0, None, |b, n, v| {
                    if n > 0 {
                        emit(b, n - 1, v)
                    }
                })
            }
        }
    }

    /// Processes one sequence from state `y0`; the trajectory has one frame
    /// per input sample and frame 0 is `y0` (the LSTM's first output instead).
    pub fn forward(&self, x: &[f64], y0: &[f64]) -> Result<StateTrajectory, ModelError> {
        let mut traj = StateTrajectory::with_capacity(self.state_dim, x.len());
        self.forward_each(x, y0, |_, s| traj.push(s))?;
        Ok(traj)
    }

    /// [`Model::forward`] streaming each frame to `emit` instead of storing it.
    pub fn forward_each<E>(&self, x: &[f64], y0: &[f64], mut emit: E) -> Result<IntegrationStats, ModelError>
    where
        E: FnMut(usize, &[f64]),
    {
        if y0.len() != self.state_dim {
            return Err(ModelError::Contract(format!(
                "initial state has {} entries, model expects {}",
                y0.len(),
                self.state_dim
            )));
        }
        let ex = BatchExcitation::new(vec![x], self.solver.step)?;
        let y0 = Tensor::row(y0);
        let mut eager = Eager;
        let out = self.run_batch(&mut eager, self.params.tensors(), &ex, &y0, None, |_, n, v| {
            emit(n, v.data())
        })?;
        Ok(out.stats)
    }

    /// Residual-network update with the current input and previous output.
    pub fn stn_forward(&self, x: &[f64], y0: &[f64]) -> Result<StateTrajectory, ModelError> {
        if !matches!(self.arch, Architecture::Stn { .. }) {
            return Err(ModelError::Contract("stn_forward needs an STN model".into()));
        }
        self.forward(x, y0)
    }

    /// LSTM output channel 0 for every input sample, state reset at the start.
    pub fn lstm_forward_seq(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        if !matches!(self.arch, Architecture::Lstm { .. }) {
            return Err(ModelError::Contract("lstm_forward_seq needs an LSTM model".into()));
        }
        Ok(self.forward(x, &vec![0.0; self.state_dim])?.channel(0))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let (layer_sizes, bias, hidden_size, activation, time_channel) = match &self.arch {
            Architecture::OdeNet { net, time_channel } => (
                Some(net.layer_sizes.clone()),
                Some(net.bias.clone()),
                None,
                Some(net.activation),
                *time_channel,
            ),
            Architecture::Stn { net } => (
                Some(net.layer_sizes.clone()),
                Some(net.bias.clone()),
                None,
                Some(net.activation),
                false,
            ),
            Architecture::Lstm { net } => (None, None, Some(net.hidden_size), None, false),
        };
        Checkpoint {
            format_version: FORMAT_VERSION,
            model_kind: self.kind(),
            spec: SpecDocument {
                state_dim: self.state_dim,
                layer_sizes,
                bias,
                hidden_size,
                time_channel,
            },
            activation,
            parameters: Checkpoint::entries_from(&self.params),
            training_sample_rate_hz: self.training_rate_hz,
            solver_scheme: match self.arch {
                Architecture::OdeNet { .. } => Some(self.solver.scheme),
                _ => None,
            },
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, ModelError> {
        let spec = &ck.spec;
        let mlp = || -> Result<MlpSpec, ModelError> {
            let sizes = spec
                .layer_sizes
                .clone()
                .ok_or_else(|| ModelError::Contract("checkpoint lacks layer_sizes".into()))?;
            let activation: Activation = ck
                .activation
                .ok_or_else(|| ModelError::Contract("checkpoint lacks activation".into()))?;
            let mut net = MlpSpec::new(sizes, activation)?;
            if let Some(bias) = &spec.bias {
                net = net.with_bias(bias.clone())?;
            }
            Ok(net)
        };
        let arch = match ck.model_kind {
            ModelKind::Odenet => Architecture::OdeNet {
                net: mlp()?,
                time_channel: spec.time_channel,
            },
            ModelKind::Stn => Architecture::Stn { net: mlp()? },
            ModelKind::Lstm => {
                let hidden = spec
                    .hidden_size
                    .ok_or_else(|| ModelError::Contract("checkpoint lacks hidden_size".into()))?;
                Architecture::Lstm {
                    net: LstmSpec::new(1, hidden, spec.state_dim)?,
                }
            }
        };
        Model::new(
            arch,
            spec.state_dim,
            ck.params()?,
            ck.training_sample_rate_hz,
            ck.solver_scheme.unwrap_or(Scheme::Fe),
        )
    }
}
