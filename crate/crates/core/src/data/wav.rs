use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::signal::AudioSequence;

use super::DataError;

fn io(path: &Path, e: impl std::fmt::Display) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn check_rate(rate_hz: f64) -> Result<u32, DataError> {
    if rate_hz > 0.0 && rate_hz.fract() == 0.0 && rate_hz <= u32::MAX as f64 {
        Ok(rate_hz as u32)
    } else {
        Err(DataError::Contract(format!("WAV needs an integer sample rate, got {rate_hz}")))
    }
}

/// Writes equal-length channels as interleaved 32-bit float.
pub fn write_wav_channels(path: &Path, channels: &[Vec<f64>], rate_hz: f64) -> Result<(), DataError> {
    if channels.is_empty() || channels.len() > u16::MAX as usize {
        return Err(DataError::Contract("a WAV file needs at least one channel".into()));
    }
    let n = channels[0].len();
    if channels.iter().any(|c| c.len() != n) {
        return Err(DataError::Contract("WAV channels differ in length".into()));
    }
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate: check_rate(rate_hz)?,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path, spec).map_err(|e| io(path, e))?;
    for i in 0..n {
        for c in channels {
            w.write_sample(c[i] as f32).map_err(|e| io(path, e))?;
        }
    }
    w.finalize().map_err(|e| io(path, e))
}

/// Writes a mono 32-bit float WAV.
pub fn write_wav(path: &Path, seq: &AudioSequence) -> Result<(), DataError> {
    write_wav_channels(path, std::slice::from_ref(&seq.samples), seq.rate_hz)
}

/// Reads every channel as `f64` in `[-1, 1)` for PCM, unscaled for float.
///
/// Any decoding error, including a truncated data chunk, fails the whole read.
pub fn load_wav_channels(path: &Path) -> Result<(Vec<Vec<f64>>, f64), DataError> {
    let reader = WavReader::open(path).map_err(|e| io(path, e))?;
    let spec = reader.spec();
    let nch = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| io(path, e))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<Result<_, _>>()
                .map_err(|e| io(path, e))?
        }
        (fmt, bits) => {
            return Err(io(path, format!("unsupported WAV encoding {fmt:?} {bits}-bit")));
        }
    };
    if nch == 0 || interleaved.len() % nch != 0 {
        return Err(io(path, "sample data does not fill whole frames"));
    }
    let frames = interleaved.len() / nch;
    let mut channels = vec![Vec::with_capacity(frames); nch];
    for frame in interleaved.chunks_exact(nch) {
        for (c, v) in channels.iter_mut().zip(frame) {
            c.push(*v);
        }
    }
    Ok((channels, f64::from(spec.sample_rate)))
}

/// Reads a mono WAV; multi-channel files are rejected.
pub fn load_wav(path: &Path) -> Result<AudioSequence, DataError> {
    let (mut channels, rate) = load_wav_channels(path)?;
    if channels.len() != 1 {
        return Err(io(path, format!("expected mono audio, found {} channels", channels.len())));
    }
    Ok(AudioSequence::new(channels.remove(0), rate))
}
