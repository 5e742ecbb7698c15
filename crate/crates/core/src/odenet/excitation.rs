use crate::neural::Tensor;

use super::ModelError;

/// Distance from an integer index below which a query snaps to the grid, so
/// `n·Δτ / Δτ` lands exactly on sample `n`.
const GRID_SNAP: f64 = 1e-9;

fn locate(pos: f64, n: usize) -> (usize, f64) {
    let last = (n - 1) as f64;
    let pos = pos.clamp(0.0, last);
    let nearest = pos.round();
    if (pos - nearest).abs() < GRID_SNAP {
        return (nearest as usize, 0.0);
    }
    let i = pos.floor() as usize;
    (i, pos - i as f64)
}

fn lerp(x: &[f64], i: usize, frac: f64) -> f64 {
    if frac == 0.0 {
        x[i]
    } else {
        x[i] + frac * (x[i + 1] - x[i])
    }
}

/// Linear interpolation of input samples at solver time points.
///
/// Sample `k` sits at normalized time `k·spacing`; queries outside the
/// sample range clamp to the first or last sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationInterpolator {
    samples: Vec<f64>,
    spacing: f64,
}

impl ExcitationInterpolator {
    pub fn new(samples: Vec<f64>, spacing: f64) -> Result<Self, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::Contract("excitation is empty".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(ModelError::Contract(format!("invalid excitation spacing {spacing}")));
        }
        Ok(Self { samples, spacing })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn at(&self, tau: f64) -> f64 {
        let (i, frac) = locate(tau / self.spacing, self.samples.len());
        lerp(&self.samples, i, frac)
    }
}

/// Equal-length excitations for a batch, evaluated together.
#[derive(Clone, Debug)]
pub struct BatchExcitation<'a> {
    items: Vec<&'a [f64]>,
    spacing: f64,
}

impl<'a> BatchExcitation<'a> {
    pub fn new(items: Vec<&'a [f64]>, spacing: f64) -> Result<Self, ModelError> {
        let n = items.first().map_or(0, |x| x.len());
        if n == 0 || items.iter().any(|x| x.len() != n) {
            return Err(ModelError::Contract(
                "batch excitations must be non-empty and equally long".into(),
            ));
        }
        Ok(Self { items, spacing })
    }

    pub fn batch(&self) -> usize {
        self.items.len()
    }

    pub fn len(&self) -> usize {
        self.items[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Interpolated inputs as a `batch × 1` tensor.
    pub fn at(&self, tau: f64) -> Tensor {
        let (i, frac) = locate(tau / self.spacing, self.len());
        let data = self.items.iter().map(|x| lerp(x, i, frac)).collect();
        Tensor::new(vec![self.items.len(), 1], data).expect("batch column")
    }

    /// Raw samples at integer index `n` as a `batch × 1` tensor.
    pub fn sample(&self, n: usize) -> Tensor {
        let data = self.items.iter().map(|x| x[n]).collect();
        Tensor::new(vec![self.items.len(), 1], data).expect("batch column")
    }
}
