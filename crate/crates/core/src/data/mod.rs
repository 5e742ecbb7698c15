//! Audio files, resampling and training-batch assembly.

mod resample;
mod segment;
mod wav;

pub use resample::resample;
pub use segment::{
    cut_sequences, segment, Clip, Minibatch, SegmentationConfig, Sequence, SubsequenceBatch,
};
pub use wav::{load_wav, load_wav_channels, write_wav, write_wav_channels};

use std::path::Path;

use thiserror::Error;

use crate::circuit::{Manifest, Split};
use crate::signal::{AudioSequence, StateTrajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Loads the input/target pairs of one split, in manifest order.
pub fn load_split(dir: &Path, manifest: &Manifest, split: Split) -> Result<Vec<Clip>, DataError> {
    manifest
        .entries_for(split)
        .map(|e| {
            let input = load_wav(&dir.join(&e.input_path))?;
            let (channels, rate) = load_wav_channels(&dir.join(&e.target_path))?;
            if rate != input.rate_hz {
                return Err(DataError::Contract(format!(
                    "{}: target rate {rate} differs from input rate {}",
                    e.target_path, input.rate_hz
                )));
            }
            if channels.len() != manifest.state_dim {
                return Err(DataError::Contract(format!(
                    "{}: {} state channels, manifest says {}",
                    e.target_path,
                    channels.len(),
                    manifest.state_dim
                )));
            }
            Clip::new(input.samples, StateTrajectory::from_channels(&channels))
        })
        .collect()
}

/// Concatenated inputs of one split.
pub fn concat_inputs(clips: &[Clip], rate_hz: f64) -> AudioSequence {
    AudioSequence::new(clips.iter().flat_map(|c| c.input.iter().copied()).collect(), rate_hz)
}
