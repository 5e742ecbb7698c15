//! Versioned JSON checkpoint documents.
//!
//! Keys are emitted in struct declaration order so two checkpoints of the same
//! model diff cleanly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::params::ParamSet;
use super::tensor::Tensor;
use super::NeuralError;
use crate::solvers::Scheme;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Odenet,
    Stn,
    Lstm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Odenet => "odenet",
            ModelKind::Stn => "stn",
            ModelKind::Lstm => "lstm",
        }
    }
}

/// Architecture description stored alongside the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecDocument {
    pub state_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_size: Option<usize>,
    #[serde(default)]
    pub time_channel: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Row-major values.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model_kind: ModelKind,
    pub spec: SpecDocument,
    pub activation: Option<Activation>,
    pub parameters: Vec<ParamEntry>,
    pub training_sample_rate_hz: f64,
    pub solver_scheme: Option<Scheme>,
}

impl Checkpoint {
    pub fn params(&self) -> Result<ParamSet, NeuralError> {
        let entries = self
            .parameters
            .iter()
            .map(|p| Ok((p.name.clone(), Tensor::new(p.shape.clone(), p.values.clone())?)))
            .collect::<Result<Vec<_>, NeuralError>>()?;
        Ok(ParamSet::from_tensors(entries))
    }

    pub fn entries_from(params: &ParamSet) -> Vec<ParamEntry> {
        params
            .names()
            .iter()
            .zip(params.tensors())
            .map(|(n, t)| ParamEntry {
                name: n.clone(),
                shape: t.shape().to_vec(),
                values: t.data().to_vec(),
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        if ck.format_version != FORMAT_VERSION {
            return Err(NeuralError::Checkpoint(format!(
                "unsupported checkpoint format_version {}",
                ck.format_version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let text = fs::read_to_string(path)
            .map_err(|e| NeuralError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
