//! Sample containers shared by every module.

use serde::{Deserialize, Serialize};

/// Mono sample vector at a known rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AudioSequence {
    pub samples: Vec<f64>,
    pub rate_hz: f64,
}

impl AudioSequence {
    pub fn new(samples: Vec<f64>, rate_hz: f64) -> Self {
        Self { samples, rate_hz }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Frame-major state vectors, one frame per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct StateTrajectory {
    state_dim: usize,
    data: Vec<f64>,
}

impl StateTrajectory {
    pub fn new(state_dim: usize) -> Self {
        assert!(state_dim > 0, "state_dim must be positive");
        Self {
            state_dim,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(state_dim: usize, frames: usize) -> Self {
        let mut t = Self::new(state_dim);
        t.data.reserve(frames * state_dim);
        t
    }

    /// Builds from frame-major data; `data.len()` must be a multiple of `state_dim`.
    pub fn from_frames(state_dim: usize, data: Vec<f64>) -> Self {
        assert!(state_dim > 0 && data.len() % state_dim == 0, "ragged trajectory");
        Self { state_dim, data }
    }

    /// Interleaves per-channel vectors of equal length.
    pub fn from_channels(channels: &[Vec<f64>]) -> Self {
        let dim = channels.len();
        let n = channels.first().map_or(0, Vec::len);
        assert!(channels.iter().all(|c| c.len() == n), "channels differ in length");
        let mut data = Vec::with_capacity(n * dim);
        for i in 0..n {
            data.extend(channels.iter().map(|c| c[i]));
        }
        Self::from_frames(dim, data)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.state_dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, frame: &[f64]) {
        assert_eq!(frame.len(), self.state_dim, "frame width");
        self.data.extend_from_slice(frame);
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        &self.data[n * self.state_dim..(n + 1) * self.state_dim]
    }

    pub fn frames(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.state_dim)
    }

    pub fn channel(&self, k: usize) -> Vec<f64> {
        assert!(k < self.state_dim, "channel out of range");
        self.data.iter().skip(k).step_by(self.state_dim).copied().collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Frames `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> StateTrajectory {
        Self::from_frames(
            self.state_dim,
            self.data[start * self.state_dim..end * self.state_dim].to_vec(),
        )
    }

    pub fn extend(&mut self, other: &StateTrajectory) {
        assert_eq!(other.state_dim, self.state_dim, "state_dim");
        self.data.extend_from_slice(&other.data);
    }
}
