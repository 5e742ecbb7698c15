use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::tensor::Tensor;
use super::NeuralError;

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn from_tensors(entries: Vec<(String, Tensor)>) -> Self {
        let (names, tensors) = entries.into_iter().unzip();
        Self { names, tensors }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.shape().to_vec()))
                .collect(),
        }
    }

    pub fn check_compatible(&self, other: &[Tensor]) -> Result<(), NeuralError> {
        if other.len() != self.tensors.len()
            || self
                .tensors
                .iter()
                .zip(other)
                .any(|(a, b)| a.shape() != b.shape())
        {
            return Err(NeuralError::Shape("parameter layout mismatch".into()));
        }
        Ok(())
    }

    /// SHA-256 over names, shapes and the exact bit patterns of all values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.names.iter().zip(&self.tensors) {
            h.update(name.as_bytes());
            for d in t.shape() {
                h.update((*d as u64).to_le_bytes());
            }
            for v in t.data() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex_string(&h.finalize())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Draws tensors uniformly in `±bound` for each `(name, shape, bound)` entry.
///
/// The same seed always yields the same parameters.
pub fn init_uniform(layout: &[(String, Vec<usize>, f64)], seed: u64) -> ParamSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = layout
        .iter()
        .map(|(name, shape, bound)| {
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| rng.gen_range(-*bound..=*bound)).collect();
            (
                name.clone(),
                Tensor::new(shape.clone(), data).expect("layout shape"),
            )
        })
        .collect();
    ParamSet::from_tensors(entries)
}

/// The ±1/√fan_in bound used for every layer.
pub fn fan_in_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in.max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Vec<(String, Vec<usize>, f64)> {
        vec![
            ("w0".into(), vec![9, 2], fan_in_bound(2)),
            ("b0".into(), vec![9], fan_in_bound(2)),
            ("w1".into(), vec![1, 9], fan_in_bound(9)),
        ]
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = init_uniform(&layout(), 7);
        let b = init_uniform(&layout(), 7);
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn different_seeds_differ() {
        assert_ne!(init_uniform(&layout(), 1), init_uniform(&layout(), 2));
    }

    #[test]
    fn samples_respect_fan_in_bound() {
        let p = init_uniform(&layout(), 3);
        let bound2 = 1.0 / 2f64.sqrt();
        assert!(p.tensors()[0].data().iter().all(|v| v.abs() <= bound2));
        assert!(p.tensors()[2].data().iter().all(|v| v.abs() <= 1.0 / 3.0));
        // the draws actually use the range rather than collapsing near zero
        assert!(p.tensors()[0].max_abs() > 0.5 * bound2);
    }
}
