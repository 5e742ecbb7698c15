use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{write_wav, write_wav_channels};
use crate::signal::AudioSequence;

use super::{reference_integrate, Circuit, CircuitError, DiodeParams};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Fractions of every input clip assigned to each split, in clip order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        // 80:20 train/test, then 80:20 train/validation inside the first part
        Self {
            train: 0.64,
            val: 0.16,
            test: 0.20,
        }
    }
}

impl SplitFractions {
    /// Sample boundaries `[0, a, b, n]` of a clip of length `n`.
    pub fn boundaries(&self, n: usize) -> [usize; 4] {
        let total = self.train + self.val + self.test;
        let a = (n as f64 * self.train / total).round() as usize;
        let b = (n as f64 * (self.train + self.val) / total).round() as usize;
        [0, a.min(n), b.min(n), n]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest directory.
    pub input_path: String,
    pub target_path: String,
    pub split: Split,
    pub rate_hz: f64,
    pub circuit: String,
    pub diode_params: DiodeParams,
    pub oversample: usize,
    pub num_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub circuit: Circuit,
    pub state_dim: usize,
    pub rate_hz: f64,
    pub oversample: usize,
    pub fractions: SplitFractions,
    pub entries: Vec<ManifestEntry>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CircuitError {
    CircuitError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl Manifest {
    pub fn entries_for(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn samples_in(&self, split: Split) -> usize {
        self.entries_for(split).map(|e| e.num_samples).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, CircuitError> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_json()).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// Reads `manifest.json` from a dataset directory (or the file itself).
    pub fn load(path: &Path) -> Result<Self, CircuitError> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&file).map_err(|e| io_err(&file, e))?;
        serde_json::from_str(&text).map_err(|e| io_err(&file, e))
    }
}

/// Runs the circuit over every input, splits each clip into train,
/// validation and test portions, and writes input/target WAV pairs plus a
/// manifest into `out_dir`.
///
/// Each portion is simulated from rest on its own so every file starts at
/// the zero state.
pub fn synthesize_dataset(
    circuit: &Circuit,
    inputs: &[AudioSequence],
    rate_hz: f64,
    oversample: usize,
    fractions: SplitFractions,
    out_dir: &Path,
) -> Result<Manifest, CircuitError> {
    circuit.diode().validate()?;
    if let Some(bad) = inputs.iter().find(|x| x.rate_hz != rate_hz) {
        return Err(CircuitError::Config(format!(
            "input at {} Hz does not match dataset rate {rate_hz} Hz",
            bad.rate_hz
        )));
    }
    if inputs.iter().any(|x| x.samples.iter().any(|v| !v.is_finite())) {
        return Err(CircuitError::Config("inputs must be finite".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut entries = Vec::new();
    for (i, clip) in inputs.iter().enumerate() {
        let bounds = fractions.boundaries(clip.len());
        for (k, split) in Split::ALL.into_iter().enumerate() {
            let (a, b) = (bounds[k], bounds[k + 1]);
            if b <= a {
                continue;
            }
            let part = AudioSequence::new(clip.samples[a..b].to_vec(), rate_hz);
            let target = reference_integrate(circuit, &part, oversample)?;
            let input_name = format!("clip{i:03}_{}_input.wav", split.name());
            let target_name = format!("clip{i:03}_{}_target.wav", split.name());
            let input_path = out_dir.join(&input_name);
            let target_path = out_dir.join(&target_name);
            write_wav(&input_path, &part).map_err(|e| io_err(&input_path, e))?;
            let channels: Vec<Vec<f64>> = (0..target.state_dim()).map(|c| target.channel(c)).collect();
            write_wav_channels(&target_path, &channels, rate_hz).map_err(|e| io_err(&target_path, e))?;
            entries.push(ManifestEntry {
                input_path: input_name,
                target_path: target_name,
                split,
                rate_hz,
                circuit: circuit.name().to_string(),
                diode_params: circuit.diode(),
                oversample,
                num_samples: b - a,
            });
        }
    }
    let manifest = Manifest {
        circuit: *circuit,
        state_dim: circuit.state_dim(),
        rate_hz,
        oversample,
        fractions,
        entries,
    };
    manifest.save(out_dir)?;
    Ok(manifest)
}
