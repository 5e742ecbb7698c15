//! Structured-text run configurations. Every field has a default, so a
//! config file only needs the values it changes.

use std::fs;
use std::path::{Path, PathBuf};

use odenet_va::circuit::{ProgramConfig, SplitFractions};
use odenet_va::evaluation::{DEFAULT_RATES, DEFAULT_SEGMENT_LEN};
use odenet_va::solvers::Scheme;
use odenet_va::training::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesizeConfig {
    pub circuit: String,
    pub seed: u64,
    pub rate_hz: f64,
    pub oversample: usize,
    pub clips: usize,
    pub clip_duration_s: f64,
    pub fractions: SplitFractions,
    pub program: ProgramConfig,
}

impl Default for SynthesizeConfig {
    fn default() -> Self {
        Self {
            circuit: "clipper1".into(),
            seed: 0,
            rate_hz: 44100.0,
            oversample: 32,
            clips: 1,
            clip_duration_s: 10.0,
            fractions: SplitFractions::default(),
            program: ProgramConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub dataset: PathBuf,
    pub model: String,
    /// Replaces the preset's solver; ODENet models only.
    pub solver: Option<Scheme>,
    pub seed: u64,
    pub training: TrainConfig,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset"),
            model: "odenet9-fe".into(),
            solver: None,
            seed: 0,
            training: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub dataset: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub rates: Vec<f64>,
    pub segmented: bool,
    pub segment_len: usize,
    pub solver: Option<Scheme>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset"),
            checkpoints: Vec::new(),
            rates: DEFAULT_RATES.to_vec(),
            segmented: false,
            segment_len: DEFAULT_SEGMENT_LEN,
            solver: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConfig {
    pub checkpoint: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
    /// Playback rate; `None` uses the input file's rate.
    pub rate_hz: Option<f64>,
    pub solver: Option<Scheme>,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        Self {
            checkpoint: PathBuf::new(),
            input: PathBuf::new(),
            output: PathBuf::new(),
            rate_hz: None,
            solver: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Artifact {
    Field,
    Spectrum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisualizeConfig {
    pub artifact: Artifact,
    pub checkpoint: Option<PathBuf>,
    /// Circuit used as the oracle; for fields it replaces the checkpoint.
    pub oracle: Option<String>,
    pub y2: Vec<f64>,
    pub resolution: usize,
    pub verify_symmetry: bool,
    pub rates: Vec<f64>,
    pub fft_size: usize,
    pub duration_s: f64,
    pub amplitude: f64,
}

impl Default for VisualizeConfig {
    fn default() -> Self {
        Self {
            artifact: Artifact::Field,
            checkpoint: None,
            oracle: None,
            y2: vec![0.0],
            resolution: 101,
            verify_symmetry: false,
            rates: vec![22050.0, 44100.0],
            fft_size: 8192,
            duration_s: 1.0,
            amplitude: 1.0,
        }
    }
}

/// Parses `path`, or returns the defaults when no file is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Writes the effective configuration next to a run's outputs.
pub fn write_resolved<T: Serialize>(path: &Path, cfg: &T) -> Result<(), CliError> {
    let text = toml::to_string_pretty(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Comma-separated sampling rates in Hz.
#[derive(Clone, Debug, PartialEq)]
pub struct RateList(pub Vec<f64>);

impl std::str::FromStr for RateList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|r| {
                let r = r.trim();
                r.parse::<f64>().map_err(|_| format!("'{r}' is not a sampling rate"))
            })
            .collect::<Result<_, _>>()
            .map(RateList)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c: TrainRunConfig = toml::from_str("model = \"stn3x4\"\n[training.schedule]\nmax_epochs = 3\n").unwrap();
        assert_eq!(c.model, "stn3x4");
        assert_eq!(c.training.schedule.max_epochs, 3);
        assert_eq!(c.training.schedule.patience, 50);
        assert_eq!(c.training.batch_size, 32);
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = SynthesizeConfig::default();
        let text = toml::to_string_pretty(&c).unwrap();
        assert_eq!(toml::from_str::<SynthesizeConfig>(&text).unwrap(), c);
        let e = EvaluateConfig {
            solver: Some(Scheme::Abm),
            ..EvaluateConfig::default()
        };
        assert_eq!(toml::from_str::<EvaluateConfig>(&toml::to_string_pretty(&e).unwrap()).unwrap(), e);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<SynthesizeConfig>("circut = \"clipper1\"").is_err());
    }

    #[test]
    fn rate_lists() {
        assert_eq!("22050, 44100".parse::<RateList>().unwrap().0, vec![22050.0, 44100.0]);
        assert!("44.1k".parse::<RateList>().is_err());
    }
}
