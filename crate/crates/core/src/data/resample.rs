//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc.

use crate::signal::AudioSequence;

use super::DataError;

/// Filter half-width in samples at the lower of the two rates.
const HALF_WIDTH_LOW_RATE: f64 = 64.0;
/// Cutoff as a fraction of the lower rate; the passband ends at 0.45.
const CUTOFF: f64 = 0.475;
/// Kaiser shape for roughly 100 dB stopband attenuation.
const KAISER_BETA: f64 = 10.0;
/// Phase tables above this many phases are computed on the fly.
const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

struct Kernel {
    /// Normalized cutoff in cycles per input sample, times two.
    fc: f64,
    half_width: f64,
    taps: i64,
    i0_beta: f64,
}

impl Kernel {
    fn new(old: f64, new: f64) -> Self {
        let ratio = (old / new).max(1.0);
        let half_width = HALF_WIDTH_LOW_RATE * ratio;
        Self {
            fc: 2.0 * CUTOFF * old.min(new) / old,
            half_width,
            taps: half_width.ceil() as i64,
            i0_beta: bessel_i0(KAISER_BETA),
        }
    }

    /// Unit-DC-gain taps for input offsets `1 - taps ..= taps` around an
    /// output that lies `frac` input samples past its base index.
    fn phase(&self, frac: f64) -> Vec<f64> {
        let mut h: Vec<f64> = (1 - self.taps..=self.taps)
            .map(|k| {
                let t = k as f64 - frac;
                let r = t / self.half_width;
                if r.abs() >= 1.0 {
                    0.0
                } else {
                    self.fc * sinc(self.fc * t) * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta
                }
            })
            .collect();
        let sum: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= sum);
        h
    }
}

/// Converts `seq` to `new_rate` (integer Hz rates).
///
/// Output sample `m` sits at time `m / new_rate`; the output covers the
/// input's time span, so it has `floor((N-1)·new/old) + 1` samples. Samples
/// beyond either end are treated as repeats of the edge sample.
pub fn resample(seq: &AudioSequence, new_rate: f64) -> Result<AudioSequence, DataError> {
    let as_int = |r: f64| -> Result<u64, DataError> {
        if r > 0.0 && r.fract() == 0.0 {
            Ok(r as u64)
        } else {
            Err(DataError::Contract(format!("resampling needs positive integer rates, got {r}")))
        }
    };
    let (old, new) = (as_int(seq.rate_hz)?, as_int(new_rate)?);
    if old == new || seq.is_empty() {
        return Ok(AudioSequence::new(seq.samples.clone(), new_rate));
    }
    let g = gcd(old, new);
    let (up, down) = (new / g, old / g);
    let n = seq.len() as u64;
    let out_len = (n - 1) * up / down + 1;
    let kernel = Kernel::new(old as f64, new as f64);
    let table: Option<Vec<Vec<f64>>> =
        (up <= MAX_TABLE_PHASES).then(|| (0..up).map(|r| kernel.phase(r as f64 / up as f64)).collect());
    let x = &seq.samples;
    let last = x.len() as i64 - 1;
    let mut out = Vec::with_capacity(out_len as usize);
    for m in 0..out_len {
        let pos = m * down;
        let (base, r) = ((pos / up) as i64, pos % up);
        let owned;
        let taps = match &table {
            Some(t) => &t[r as usize],
            None => {
                owned = kernel.phase(r as f64 / up as f64);
                &owned
            }
        };
        let mut acc = 0.0;
        for (j, h) in taps.iter().enumerate() {
            let idx = (base + 1 - kernel.taps + j as i64).clamp(0, last);
            acc += h * x[idx as usize];
        }
        out.push(acc);
    }
    Ok(AudioSequence::new(out, new_rate))
}
