//! Dense row-major `f64` tensors and the small set of kernels the models need.
//!
//! Everything the networks do reduces to batched affine maps, element-wise
//! activations, linear combinations and column slicing. Tensors used by the
//! models are rank 1 (biases) or rank 2 (`batch × features`, weights as
//! `out × in`).

use super::activation::Activation;
use super::NeuralError;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NeuralError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NeuralError::Shape(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// A `rows × cols` matrix from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NeuralError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// A single-row matrix.
    pub fn row(values: &[f64]) -> Self {
        Self {
            shape: vec![1, values.len()],
            data: values.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading dimension for rank ≥ 2, otherwise 1.
    pub fn rows(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[0]
        } else {
            1
        }
    }

    /// Trailing dimension (row length).
    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

fn shape_err(msg: String) -> NeuralError {
    NeuralError::Shape(msg)
}

/// `x · wᵀ + b` for `x: B×in`, `w: out×in`, `b: [out]`.
pub fn affine(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor, NeuralError> {
    if w.shape.len() != 2 {
        return Err(shape_err(format!("weight must be rank 2, got {:?}", w.shape)));
    }
    let (out, inp) = (w.shape[0], w.shape[1]);
    if x.cols() != inp {
        return Err(shape_err(format!(
            "affine input has {} features, weight expects {}",
            x.cols(),
            inp
        )));
    }
    if let Some(b) = b {
        if b.len() != out {
            return Err(shape_err(format!("bias has {} entries, expected {}", b.len(), out)));
        }
    }
    let batch = x.rows();
    let mut y = vec![0.0; batch * out];
    for r in 0..batch {
        let xr = &x.data[r * inp..(r + 1) * inp];
        let yr = &mut y[r * out..(r + 1) * out];
        for (o, yv) in yr.iter_mut().enumerate() {
            let wo = &w.data[o * inp..(o + 1) * inp];
            let mut acc = match b {
                Some(b) => b.data[o],
                None => 0.0,
            };
            for (xi, wi) in xr.iter().zip(wo) {
                acc += xi * wi;
            }
            *yv = acc;
        }
    }
    Ok(Tensor {
        shape: vec![batch, out],
        data: y,
    })
}

pub fn activation(x: &Tensor, kind: Activation) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|&v| kind.eval(v)).collect(),
    }
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<(), NeuralError> {
    if a.data.len() != b.data.len() || a.rows() != b.rows() {
        return Err(shape_err(format!("shape mismatch {:?} vs {:?}", a.shape, b.shape)));
    }
    Ok(())
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, NeuralError> {
    same_shape(a, b)?;
    Ok(Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect(),
    })
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor, NeuralError> {
    same_shape(a, b)?;
    Ok(Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    })
}

/// `base + Σ cᵢ·termᵢ`, accumulated left to right.
pub fn lin_comb(base: &Tensor, terms: &[(f64, &Tensor)]) -> Result<Tensor, NeuralError> {
    let mut out = base.clone();
    for (c, t) in terms {
        same_shape(base, t)?;
        for (o, v) in out.data.iter_mut().zip(&t.data) {
            *o += c * v;
        }
    }
    Ok(out)
}

/// Column-wise concatenation of matrices with equal row counts.
pub fn concat(parts: &[&Tensor]) -> Result<Tensor, NeuralError> {
    let rows = parts.first().map(|p| p.rows()).unwrap_or(0);
    if parts.iter().any(|p| p.rows() != rows) {
        return Err(shape_err("concat parts differ in row count".into()));
    }
    let cols: usize = parts.iter().map(|p| p.cols()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for p in parts {
            let c = p.cols();
            data.extend_from_slice(&p.data[r * c..(r + 1) * c]);
        }
    }
    Ok(Tensor {
        shape: vec![rows, cols],
        data,
    })
}

/// Columns `start..start+len` of a matrix.
pub fn columns(x: &Tensor, start: usize, len: usize) -> Result<Tensor, NeuralError> {
    let cols = x.cols();
    if start + len > cols {
        return Err(shape_err(format!(
            "column range {}..{} out of {} columns",
            start,
            start + len,
            cols
        )));
    }
    let rows = x.rows();
    let mut data = Vec::with_capacity(rows * len);
    for r in 0..rows {
        data.extend_from_slice(&x.data[r * cols + start..r * cols + start + len]);
    }
    Ok(Tensor {
        shape: vec![rows, len],
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_matches_hand_product() {
        let x = Tensor::matrix(2, 2, vec![1.0, 2.0, -1.0, 0.5]).unwrap();
        let w = Tensor::matrix(1, 2, vec![3.0, -1.0]).unwrap();
        let b = Tensor::new(vec![1], vec![0.5]).unwrap();
        let y = affine(&x, &w, Some(&b)).unwrap();
        assert_eq!(y.shape(), &[2, 1]);
        assert_eq!(y.data(), &[1.5, -3.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        let x = Tensor::matrix(1, 3, vec![0.0; 3]).unwrap();
        let w = Tensor::matrix(1, 2, vec![0.0; 2]).unwrap();
        assert!(affine(&x, &w, None).is_err());
        assert!(columns(&x, 2, 2).is_err());
    }

    #[test]
    fn concat_then_columns_round_trips() {
        let a = Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap();
        let b = Tensor::matrix(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = concat(&[&a, &b]).unwrap();
        assert_eq!(c.data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        assert_eq!(columns(&c, 1, 2).unwrap(), b);
        assert_eq!(columns(&c, 0, 1).unwrap(), a);
    }
}
