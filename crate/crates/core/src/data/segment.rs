//! Cutting clips into fixed-length sequences and the sequences into
//! teacher-forced subsequence batches.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::signal::StateTrajectory;

use super::DataError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub sequence_len: usize,
    pub subsequence_len: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            sequence_len: 22050,
            subsequence_len: 2048,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.sequence_len == 0 || self.subsequence_len == 0 {
            return Err(DataError::Contract("segment lengths must be positive".into()));
        }
        if self.subsequence_len > self.sequence_len {
            return Err(DataError::Contract(
                "subsequence_len must not exceed sequence_len".into(),
            ));
        }
        Ok(())
    }

    pub fn subsequences_per_sequence(&self) -> usize {
        self.sequence_len.div_ceil(self.subsequence_len)
    }
}

/// Input samples with the aligned target states, starting from rest.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    pub input: Vec<f64>,
    pub target: StateTrajectory,
}

impl Clip {
    pub fn new(input: Vec<f64>, target: StateTrajectory) -> Result<Self, DataError> {
        if input.len() != target.len() {
            return Err(DataError::Contract(format!(
                "input has {} samples but target has {} frames",
                input.len(),
                target.len()
            )));
        }
        Ok(Self { input, target })
    }
}

/// A window of a clip plus the sample just before it.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub input: Vec<f64>,
    pub target: StateTrajectory,
    /// Input and state one sample before `input[0]`; the rest state at a clip start.
    pub context_input: f64,
    pub context_state: Vec<f64>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }
}

/// Cuts every clip into windows of `sequence_len`; a shorter tail is kept.
pub fn cut_sequences(
    clips: &[Clip],
    cfg: &SegmentationConfig,
    state_dim: usize,
) -> Result<Vec<Sequence>, DataError> {
    cfg.validate()?;
    let mut out = Vec::new();
    for clip in clips {
        if clip.target.state_dim() != state_dim {
            return Err(DataError::Contract(format!(
                "target has {} state channels, model needs {state_dim}",
                clip.target.state_dim()
            )));
        }
        let mut start = 0;
        while start < clip.input.len() {
            let end = (start + cfg.sequence_len).min(clip.input.len());
            let (context_input, context_state) = if start == 0 {
                (0.0, vec![0.0; state_dim])
            } else {
                (clip.input[start - 1], clip.target.frame(start - 1).to_vec())
            };
            out.push(Sequence {
                input: clip.input[start..end].to_vec(),
                target: clip.target.slice(start, end),
                context_input,
                context_state,
            });
            start = end;
        }
    }
    Ok(out)
}

/// One gradient step's worth of data: subsequence `k` of every sequence in a minibatch.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsequenceBatch {
    /// Position of this subsequence inside its sequences.
    pub index: usize,
    pub len: usize,
    /// Per item: the context sample followed by `len` input samples.
    pub inputs: Vec<Vec<f64>>,
    /// Per item: teacher-forced state at the context sample.
    pub y0: Vec<Vec<f64>>,
    /// Per item: `len` target output samples (state channel 0).
    pub targets: Vec<Vec<f64>>,
    /// Per item: number of real (unpadded) samples, at most `len`.
    pub valid: Vec<usize>,
}

impl SubsequenceBatch {
    pub fn batch(&self) -> usize {
        self.inputs.len()
    }

    pub fn valid_samples(&self) -> usize {
        self.valid.iter().sum()
    }
}

/// Sequences processed together, subsequence by subsequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Minibatch {
    pub subsequences: Vec<SubsequenceBatch>,
}

/// Groups sequences into minibatches of `batch_size` and slices them into
/// subsequences. With a seed the sequence order is shuffled first; samples
/// inside a sequence are never reordered. Items shorter than the batch are
/// zero-padded and masked through `valid`.
pub fn segment(
    sequences: &[Sequence],
    cfg: &SegmentationConfig,
    batch_size: usize,
    shuffle_seed: Option<u64>,
) -> Result<Vec<Minibatch>, DataError> {
    cfg.validate()?;
    if batch_size == 0 {
        return Err(DataError::Contract("batch_size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut batches = Vec::new();
    for group in order.chunks(batch_size) {
        let items: Vec<&Sequence> = group.iter().map(|&i| &sequences[i]).collect();
        let longest = items.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut subsequences = Vec::new();
        let mut start = 0;
        let mut index = 0;
        while start < longest {
            let len = cfg.subsequence_len.min(longest - start);
            let mut sb = SubsequenceBatch {
                index,
                len,
                inputs: Vec::with_capacity(items.len()),
                y0: Vec::with_capacity(items.len()),
                targets: Vec::with_capacity(items.len()),
                valid: Vec::with_capacity(items.len()),
            };
            for s in &items {
                let n = s.len();
                let valid = n.saturating_sub(start).min(len);
                // context is the last real sample at or before start - 1
                let (cx, cy) = match start.min(n) {
                    0 => (s.context_input, s.context_state.clone()),
                    c => (s.input[c - 1], s.target.frame(c - 1).to_vec()),
                };
                let mut input = Vec::with_capacity(len + 1);
                input.push(cx);
                let mut target = Vec::with_capacity(len);
                for i in 0..len {
                    let k = start + i;
                    if i < valid {
                        input.push(s.input[k]);
                        target.push(s.target.frame(k)[0]);
                    } else {
                        input.push(0.0);
                        target.push(0.0);
                    }
                }
                sb.inputs.push(input);
                sb.y0.push(cy);
                sb.targets.push(target);
                sb.valid.push(valid);
            }
            subsequences.push(sb);
            start += len;
            index += 1;
        }
        batches.push(Minibatch { subsequences });
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_clip(n: usize, dim: usize) -> Clip {
        let input: Vec<f64> = (0..n).map(|k| k as f64).collect();
        let channels: Vec<Vec<f64>> = (0..dim)
            .map(|c| (0..n).map(|k| (k * 10 + c) as f64).collect())
            .collect();
        Clip::new(input, StateTrajectory::from_channels(&channels)).unwrap()
    }

    #[test]
    fn full_sequence_gives_eleven_subsequences() {
        let cfg = SegmentationConfig::default();
        let seqs = cut_sequences(&[ramp_clip(22050, 1)], &cfg, 1).unwrap();
        let mb = segment(&seqs, &cfg, 4, None).unwrap();
        assert_eq!(mb.len(), 1);
        let subs = &mb[0].subsequences;
        assert_eq!(subs.len(), 11);
        assert_eq!(subs[10].len, 1570);
        assert!(subs[..10].iter().all(|s| s.len == 2048));
    }

    #[test]
    fn teacher_forcing_uses_preceding_sample() {
        let cfg = SegmentationConfig {
            sequence_len: 100,
            subsequence_len: 30,
        };
        let seqs = cut_sequences(&[ramp_clip(250, 2)], &cfg, 2).unwrap();
        assert_eq!(seqs.len(), 3);
        assert_eq!(seqs[0].context_state, vec![0.0, 0.0]);
        assert_eq!(seqs[1].context_state, vec![990.0, 991.0]);
        let mb = segment(&seqs, &cfg, 8, None).unwrap();
        let subs = &mb[0].subsequences;
        // first subsequence of the clip starts from rest
        assert_eq!(subs[0].y0[0], vec![0.0, 0.0]);
        assert_eq!(subs[0].inputs[0][0], 0.0);
        for k in 1..subs.len() {
            let start = 100 + k * 30;
            assert_eq!(subs[k].y0[1], vec![((start - 1) * 10) as f64, ((start - 1) * 10 + 1) as f64]);
            assert_eq!(subs[k].inputs[1][0], (start - 1) as f64);
            // boundary consistency with the previous subsequence
            let prev = &subs[k - 1];
            assert_eq!(subs[k].y0[1][0], *prev.targets[1].last().unwrap());
        }
    }

    #[test]
    fn short_tail_is_padded_and_masked() {
        let cfg = SegmentationConfig {
            sequence_len: 100,
            subsequence_len: 30,
        };
        let seqs = cut_sequences(&[ramp_clip(250, 1)], &cfg, 1).unwrap();
        let mb = segment(&seqs, &cfg, 3, None).unwrap();
        let subs = &mb[0].subsequences;
        assert_eq!(subs.len(), 4);
        // third sequence holds 50 samples
        assert_eq!(subs.iter().map(|s| s.valid[2]).collect::<Vec<_>>(), vec![30, 20, 0, 0]);
        assert_eq!(subs[1].targets[2][19], 2490.0);
        assert_eq!(subs[1].targets[2][20], 0.0);
    }

    #[test]
    fn subsequences_reconstruct_sequence() {
        let cfg = SegmentationConfig {
            sequence_len: 64,
            subsequence_len: 10,
        };
        let seqs = cut_sequences(&[ramp_clip(64, 1)], &cfg, 1).unwrap();
        let mb = segment(&seqs, &cfg, 1, None).unwrap();
        let rebuilt: Vec<f64> = mb[0].subsequences.iter().flat_map(|s| s.inputs[0][1..].to_vec()).collect();
        assert_eq!(rebuilt, seqs[0].input);
    }

    #[test]
    fn shuffle_permutes_whole_sequences() {
        let cfg = SegmentationConfig {
            sequence_len: 10,
            subsequence_len: 10,
        };
        let seqs = cut_sequences(&[ramp_clip(200, 1)], &cfg, 1).unwrap();
        let a = segment(&seqs, &cfg, 20, Some(3)).unwrap();
        let b = segment(&seqs, &cfg, 20, Some(3)).unwrap();
        assert_eq!(a, b);
        let firsts: Vec<f64> = a[0].subsequences[0].inputs.iter().map(|x| x[1]).collect();
        assert_ne!(firsts, (0..20).map(|k| (k * 10) as f64).collect::<Vec<_>>());
        for x in &a[0].subsequences[0].inputs {
            assert!(x[1..].windows(2).all(|w| w[1] == w[0] + 1.0));
        }
    }

    #[test]
    fn wrong_state_width_is_a_contract_error() {
        let cfg = SegmentationConfig::default();
        assert!(cut_sequences(&[ramp_clip(10, 1)], &cfg, 2).is_err());
    }
}
