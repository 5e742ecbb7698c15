//! Execution backends for model code.
//!
//! Model forward passes are written once against [`Backend`]. [`Eager`]
//! computes values and forgets them; [`super::Tape`] records every operation so
//! gradients can be pulled back afterwards. Both call the same kernels in
//! [`super::tensor`], so the values they produce are bit-identical.

use super::activation::Activation;
use super::tensor::{self, Tensor};
use super::NeuralError;

pub trait Backend {
    type Value: Clone;

    /// Lifts a tensor into the backend without tracking gradients.
    fn constant(&mut self, t: Tensor) -> Self::Value;
    fn value<'a>(&'a self, v: &'a Self::Value) -> &'a Tensor;
    fn affine(
        &mut self,
        x: &Self::Value,
        w: &Self::Value,
        b: Option<&Self::Value>,
    ) -> Result<Self::Value, NeuralError>;
    fn activation(&mut self, x: &Self::Value, kind: Activation) -> Self::Value;
    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, NeuralError>;
    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, NeuralError>;
    fn lin_comb(
        &mut self,
        base: &Self::Value,
        terms: &[(f64, &Self::Value)],
    ) -> Result<Self::Value, NeuralError>;
    fn concat(&mut self, parts: &[&Self::Value]) -> Result<Self::Value, NeuralError>;
    fn columns(
        &mut self,
        x: &Self::Value,
        start: usize,
        len: usize,
    ) -> Result<Self::Value, NeuralError>;
}

/// Gradient-free evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Eager;

impl Backend for Eager {
    type Value = Tensor;

    fn constant(&mut self, t: Tensor) -> Tensor {
        t
    }

    fn value<'a>(&'a self, v: &'a Tensor) -> &'a Tensor {
        v
    }

    fn affine(&mut self, x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor, NeuralError> {
        tensor::affine(x, w, b)
    }

    fn activation(&mut self, x: &Tensor, kind: Activation) -> Tensor {
        tensor::activation(x, kind)
    }

    fn add(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, NeuralError> {
        tensor::add(a, b)
    }

    fn mul(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, NeuralError> {
        tensor::mul(a, b)
    }

    fn lin_comb(&mut self, base: &Tensor, terms: &[(f64, &Tensor)]) -> Result<Tensor, NeuralError> {
        tensor::lin_comb(base, terms)
    }

    fn concat(&mut self, parts: &[&Tensor]) -> Result<Tensor, NeuralError> {
        tensor::concat(parts)
    }

    fn columns(&mut self, x: &Tensor, start: usize, len: usize) -> Result<Tensor, NeuralError> {
        tensor::columns(x, start, len)
    }
}
