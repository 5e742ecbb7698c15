use odenet_va::circuit::CircuitError;
use odenet_va::data::DataError;
use odenet_va::evaluation::EvalError;
use odenet_va::neural::NeuralError;
use odenet_va::odenet::ModelError;
use odenet_va::training::TrainError;
use thiserror::Error;

/// Failure of one CLI invocation, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("training aborted: {0}")]
    Aborted(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Aborted(_) => 4,
        }
    }
}

impl From<CircuitError> for CliError {
    fn from(e: CircuitError) -> Self {
        match e {
            CircuitError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => CliError::Io(e.to_string()),
            DataError::Contract(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Neural(n) => n.into(),
            ModelError::Solver(_) => CliError::Aborted(e.to_string()),
            ModelError::Contract(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Aborted { .. } | TrainError::NonFiniteGradient(_) => CliError::Aborted(e.to_string()),
            TrainError::Io { .. } => CliError::Io(e.to_string()),
            TrainError::Data(d) => d.into(),
            TrainError::Neural(n) => n.into(),
            TrainError::Model(m) if m.divergence_step().is_some() => CliError::Aborted(m.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Config(_) | TrainError::Metric(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            EvalError::Circuit(c) => c.into(),
            EvalError::Data(d) => d.into(),
            EvalError::Io { .. } => CliError::Io(e.to_string()),
            EvalError::Metric(_) | EvalError::Config(_) => CliError::Config(e.to_string()),
        }
    }
}
