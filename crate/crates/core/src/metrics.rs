//! Training losses and evaluation metrics.
//!
//! Batch losses pool every item into one ratio: the ESR of a batch is the
//! total error energy over the total target energy, never a mean of ratios.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PREEMPHASIS_COEFF: f64 = 0.85;
/// SDR reported for a residual with zero energy.
pub const SDR_CAP_DB: f64 = 200.0;
/// Level assigned to spectral bins with zero magnitude.
pub const SPECTRUM_FLOOR_DB: f64 = -300.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("target has zero energy")]
    ZeroEnergy,
    #[error("length mismatch: target {target}, prediction {prediction}")]
    LengthMismatch { target: usize, prediction: usize },
    #[error("FFT size must be a power of two, got {0}")]
    FftSize(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub esr: f64,
    pub dc: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// Pre-emphasized ESR plus the DC term.
    Combined,
    /// ESR on the raw signals.
    Esr,
}

impl std::str::FromStr for LossMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "combined" => Ok(LossMode::Combined),
            "esr" => Ok(LossMode::Esr),
            other => Err(format!("unknown loss mode '{other}' (expected combined or esr)")),
        }
    }
}

/// `y[n] = x[n] - 0.85·x[n-1]` with `x[-1] = 0`.
pub fn preemphasis(x: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    x.iter()
        .map(|&v| {
            let out = v - PREEMPHASIS_COEFF * prev;
            prev = v;
            out
        })
        .collect()
}

fn check_len(y: &[f64], y_hat: &[f64]) -> Result<(), MetricError> {
    if y.len() == y_hat.len() {
        Ok(())
    } else {
        Err(MetricError::LengthMismatch {
            target: y.len(),
            prediction: y_hat.len(),
        })
    }
}

fn energies(y: &[f64], y_hat: &[f64]) -> (f64, f64) {
    y.iter().zip(y_hat).fold((0.0, 0.0), |(s, e), (a, b)| (s + a * a, e + (a - b) * (a - b)))
}

/// Error energy over target energy, without pre-emphasis.
pub fn esr(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricError> {
    check_len(y, y_hat)?;
    let (signal, error) = energies(y, y_hat);
    if signal == 0.0 {
        return Err(MetricError::ZeroEnergy);
    }
    Ok(error / signal)
}

/// Squared mean residual over mean target power.
pub fn dc_loss(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricError> {
    check_len(y, y_hat)?;
    let (signal, _) = energies(y, y_hat);
    if signal == 0.0 {
        return Err(MetricError::ZeroEnergy);
    }
    let n = y.len() as f64;
    let mean: f64 = y.iter().zip(y_hat).map(|(a, b)| a - b).sum::<f64>() / n;
    Ok(mean * mean / (signal / n))
}

/// ESR of the pre-emphasized pair plus the DC term of the raw pair.
pub fn combined_loss(y: &[f64], y_hat: &[f64]) -> Result<LossBreakdown, MetricError> {
    check_len(y, y_hat)?;
    let esr = esr(&preemphasis(y), &preemphasis(y_hat))?;
    let dc = dc_loss(y, y_hat)?;
    Ok(LossBreakdown {
        esr,
        dc,
        total: esr + dc,
    })
}

/// Signal-to-residual ratio in dB, at most [`SDR_CAP_DB`].
pub fn sdr(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricError> {
    check_len(y, y_hat)?;
    let (signal, error) = energies(y, y_hat);
    if signal == 0.0 {
        return Err(MetricError::ZeroEnergy);
    }
    if error == 0.0 {
        return Ok(SDR_CAP_DB);
    }
    Ok((10.0 * (signal / error).log10()).min(SDR_CAP_DB))
}

/// Pooled loss over a batch and its gradient with respect to every prediction.
///
/// Items may differ in length (masked tails are simply not passed in); each
/// item is pre-emphasized on its own from a zero history.
pub fn batch_loss(
    mode: LossMode,
    targets: &[&[f64]],
    preds: &[&[f64]],
) -> Result<(LossBreakdown, Vec<Vec<f64>>), MetricError> {
    if targets.len() != preds.len() {
        return Err(MetricError::LengthMismatch {
            target: targets.len(),
            prediction: preds.len(),
        });
    }
    for (y, p) in targets.iter().zip(preds) {
        check_len(y, p)?;
    }
    let coeff = match mode {
        LossMode::Combined => PREEMPHASIS_COEFF,
        LossMode::Esr => 0.0,
    };
    // ESR term on (optionally) pre-emphasized signals
    let filtered = |x: &[f64]| -> Vec<f64> {
        if coeff == 0.0 {
            x.to_vec()
        } else {
            preemphasis(x)
        }
    };
    let mut signal = 0.0;
    let mut error = 0.0;
    let mut residuals = Vec::with_capacity(targets.len());
    for (y, p) in targets.iter().zip(preds) {
        let (yf, pf) = (filtered(y), filtered(p));
        let (s, e) = energies(&yf, &pf);
        signal += s;
        error += e;
        residuals.push(yf.iter().zip(&pf).map(|(a, b)| a - b).collect::<Vec<_>>());
    }
    if signal == 0.0 {
        return Err(MetricError::ZeroEnergy);
    }
    let esr = error / signal;
    let mut grads: Vec<Vec<f64>> = residuals
        .iter()
        .map(|r| {
            // d/dp[n] of sum e_f² where e_f[n] = e[n] - c·e[n-1]
            let g: Vec<f64> = r.iter().map(|e| -2.0 * e / signal).collect();
            (0..g.len())
                .map(|n| g[n] - coeff * g.get(n + 1).copied().unwrap_or(0.0))
                .collect()
        })
        .collect();

    let dc = match mode {
        LossMode::Esr => 0.0,
        LossMode::Combined => {
            let count: usize = targets.iter().map(|y| y.len()).sum();
            let n = count as f64;
            let power: f64 = targets.iter().flat_map(|y| y.iter()).map(|v| v * v).sum::<f64>() / n;
            let mean: f64 = targets
                .iter()
                .zip(preds)
                .flat_map(|(y, p)| y.iter().zip(p.iter()).map(|(a, b)| a - b))
                .sum::<f64>()
                / n;
            let d = -2.0 * mean / (n * power);
            grads.iter_mut().flatten().for_each(|g| *g += d);
            mean * mean / power
        }
    };
    Ok((
        LossBreakdown {
            esr,
            dc,
            total: esr + dc,
        },
        grads,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            // periodic Hann, exact at bin centres
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

/// Peak-normalized magnitude spectrum in dB with `fft_size / 2 + 1` bins.
///
/// Signals longer than one frame are averaged in power over half-overlapping
/// frames; shorter signals are zero-padded. Silent bins sit at
/// [`SPECTRUM_FLOOR_DB`].
pub fn magnitude_spectrum(x: &[f64], window: Window, fft_size: usize) -> Result<Vec<f64>, MetricError> {
    if fft_size < 2 || !fft_size.is_power_of_two() {
        return Err(MetricError::FftSize(fft_size));
    }
    let w = window.coefficients(fft_size);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(fft_size);
    let bins = fft_size / 2 + 1;
    let mut power = vec![0.0; bins];
    let hop = fft_size / 2;
    let mut start = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    loop {
        for (k, c) in buf.iter_mut().enumerate() {
            let v = x.get(start + k).copied().unwrap_or(0.0);
            *c = Complex::new(v * w[k], 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        if start + fft_size >= x.len() {
            break;
        }
        start += hop;
    }
    let peak = power.iter().cloned().fold(0.0_f64, f64::max);
    Ok(power
        .iter()
        .map(|&p| {
            if p == 0.0 || peak == 0.0 {
                SPECTRUM_FLOOR_DB
            } else {
                (10.0 * (p / peak).log10()).max(SPECTRUM_FLOOR_DB)
            }
        })
        .collect())
}

/// Centre frequency of each bin returned by [`magnitude_spectrum`].
pub fn spectrum_frequencies(fft_size: usize, rate_hz: f64) -> Vec<f64> {
    (0..=fft_size / 2).map(|k| k as f64 * rate_hz / fft_size as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn preemphasis_examples() {
        assert_eq!(preemphasis(&[1.0, 0.0, 0.0]), vec![1.0, -0.85, 0.0]);
        let dc = preemphasis(&[2.0; 4]);
        assert_eq!(dc[0], 2.0);
        assert!(dc[1..].iter().all(|v| (v - 0.3).abs() < 1e-15));
        assert_eq!(preemphasis(&[0.0; 3]), vec![0.0; 3]);
    }

    #[test]
    fn esr_examples() {
        let y = [0.3, -0.2, 0.5];
        assert_eq!(esr(&y, &y).unwrap(), 0.0);
        assert_eq!(esr(&[2.0], &[1.0]).unwrap(), 0.25);
        assert_eq!(esr(&y, &[0.0; 3]).unwrap(), 1.0);
        assert_eq!(esr(&[0.0; 3], &y), Err(MetricError::ZeroEnergy));
        assert!(esr(&y, &[0.0; 2]).is_err());
    }

    #[test]
    fn dc_examples() {
        assert_eq!(dc_loss(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        let y = [0.5, -0.25, 0.75, 0.1];
        let eps = 1e-3;
        let y_hat: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { eps } else { -eps }).collect();
        assert!(dc_loss(&y, &y_hat).unwrap().abs() < 1e-30);
    }

    #[test]
    fn combined_separates_offset_from_transient() {
        let y = vec![0.4; 44100];
        let y_hat: Vec<f64> = y.iter().map(|v| v + 0.1).collect();
        let b = combined_loss(&y, &y_hat).unwrap();
        assert_eq!(b.total, b.esr + b.dc);
        // the filter passes DC at gain 0.15, so the offset shows up after the transient too
        let tail = 44099.0 * 0.15f64.powi(2);
        let expected_esr = (0.01 + tail * 0.01) / (0.16 + tail * 0.16);
        assert!((b.esr - expected_esr).abs() < 1e-12);
        assert!((b.dc - 0.0625).abs() < 1e-12);
        assert_eq!(combined_loss(&y, &y).unwrap().total, 0.0);
    }

    #[test]
    fn sdr_examples() {
        let y = [1.0, -2.0, 0.5];
        assert_eq!(sdr(&y, &y).unwrap(), SDR_CAP_DB);
        assert!(sdr(&y, &[0.0; 3]).unwrap().abs() < 1e-12);
        let y = [10.0];
        assert!((sdr(&y, &[9.0]).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_of_bin_centred_sine() {
        let n = 1024;
        let x: Vec<f64> = (0..n).map(|k| (2.0 * std::f64::consts::PI * 37.0 * k as f64 / n as f64).sin()).collect();
        let s = magnitude_spectrum(&x, Window::Hann, n).unwrap();
        assert_eq!(s.len(), n / 2 + 1);
        let argmax = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(argmax, 37);
        assert_eq!(s[37], 0.0);
        assert!(magnitude_spectrum(&vec![0.0; 100], Window::Hann, 64).unwrap().iter().all(|&v| v == SPECTRUM_FLOOR_DB));
        assert!(magnitude_spectrum(&x, Window::Hann, 1000).is_err());
    }

    fn finite_difference_check(mode: LossMode) {
        let targets = [vec![0.3, -0.5, 0.8, 0.1], vec![0.2, 0.4]];
        let preds = [vec![0.1, -0.4, 0.6, 0.3], vec![-0.1, 0.5]];
        let t: Vec<&[f64]> = targets.iter().map(|v| v.as_slice()).collect();
        let p: Vec<&[f64]> = preds.iter().map(|v| v.as_slice()).collect();
        let (_, grads) = batch_loss(mode, &t, &p).unwrap();
        let eps = 1e-6;
        for i in 0..preds.len() {
            for n in 0..preds[i].len() {
                let mut hi = preds.clone();
                hi[i][n] += eps;
                let mut lo = preds.clone();
                lo[i][n] -= eps;
                let f = |q: &[Vec<f64>]| {
                    let q: Vec<&[f64]> = q.iter().map(|v| v.as_slice()).collect();
                    batch_loss(mode, &t, &q).unwrap().0.total
                };
                let fd = (f(&hi) - f(&lo)) / (2.0 * eps);
                assert!((fd - grads[i][n]).abs() < 1e-7 * fd.abs().max(1.0), "{mode:?} {i} {n}: {fd} vs {}", grads[i][n]);
            }
        }
    }

    #[test]
    fn batch_gradients_match_finite_differences() {
        finite_difference_check(LossMode::Combined);
        finite_difference_check(LossMode::Esr);
    }

    #[test]
    fn single_item_batch_matches_scalar_losses() {
        let y = [0.3, -0.5, 0.8, 0.1];
        let p = [0.1, -0.4, 0.6, 0.3];
        let (b, _) = batch_loss(LossMode::Combined, &[&y], &[&p]).unwrap();
        assert_eq!(b, combined_loss(&y, &p).unwrap());
        let (b, _) = batch_loss(LossMode::Esr, &[&y], &[&p]).unwrap();
        assert_eq!(b.total, esr(&y, &p).unwrap());
        assert_eq!(b.dc, 0.0);
    }

    proptest! {
        #[test]
        fn sdr_is_negative_log_raw_esr(v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..64)) {
            let (y, p): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            prop_assume!(y.iter().any(|a| *a != 0.0) && y != p);
            let e = esr(&y, &p).unwrap();
            let s = sdr(&y, &p).unwrap();
            prop_assume!(s < SDR_CAP_DB);
            prop_assert!((s + 10.0 * e.log10()).abs() < 1e-9);
        }

        #[test]
        fn losses_are_scale_invariant(v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..32), c in 0.1f64..10.0) {
            let (y, p): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            prop_assume!(y.iter().map(|a| a * a).sum::<f64>() > 1e-6);
            let ys: Vec<f64> = y.iter().map(|a| a * c).collect();
            let ps: Vec<f64> = p.iter().map(|a| a * c).collect();
            let (a, b) = (combined_loss(&y, &p).unwrap(), combined_loss(&ys, &ps).unwrap());
            prop_assert!((a.esr - b.esr).abs() <= 1e-9 * a.esr.max(1e-12));
            prop_assert!((a.dc - b.dc).abs() <= 1e-9 * a.dc.max(1e-12));
            prop_assert!(a.esr >= 0.0 && a.dc >= 0.0);
        }

        #[test]
        fn preemphasis_is_linear(v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..32), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let (x, z): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let mixed: Vec<f64> = x.iter().zip(&z).map(|(p, q)| a * p + b * q).collect();
            let lhs = preemphasis(&mixed);
            let (px, pz) = (preemphasis(&x), preemphasis(&z));
            for k in 0..lhs.len() {
                prop_assert!((lhs[k] - (a * px[k] + b * pz[k])).abs() < 1e-12);
            }
        }
    }
}
