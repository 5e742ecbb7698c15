use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::backend::{Backend, Eager};
use super::params::{fan_in_bound, init_uniform, ParamSet};
use super::tensor::Tensor;
use super::NeuralError;

/// Single-layer LSTM followed by a linear projection of the hidden state.
///
/// Gates are packed as `[input, forget, cell, output]` along the first
/// weight dimension and both input and recurrent biases are kept, so an
/// 8-unit cell with a one-sample projection has 361 parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub input_size: usize,
    pub hidden_size: usize,
    pub output_size: usize,
}

const W_IH: usize = 0;
const W_HH: usize = 1;
const B_IH: usize = 2;
const B_HH: usize = 3;
const W_OUT: usize = 4;
const B_OUT: usize = 5;

impl LstmSpec {
    pub fn new(input_size: usize, hidden_size: usize, output_size: usize) -> Result<Self, NeuralError> {
        if input_size == 0 || hidden_size == 0 || output_size == 0 {
            return Err(NeuralError::Spec("LSTM sizes must be positive".into()));
        }
        Ok(Self {
            input_size,
            hidden_size,
            output_size,
        })
    }

    pub fn param_layout(&self) -> Vec<(String, Vec<usize>, f64)> {
        let h = self.hidden_size;
        let bound = fan_in_bound(h);
        vec![
            ("cell.weight_ih".into(), vec![4 * h, self.input_size], bound),
            ("cell.weight_hh".into(), vec![4 * h, h], bound),
            ("cell.bias_ih".into(), vec![4 * h], bound),
            ("cell.bias_hh".into(), vec![4 * h], bound),
            ("proj.weight".into(), vec![self.output_size, h], bound),
            ("proj.bias".into(), vec![self.output_size], bound),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.param_layout()
            .iter()
            .map(|(_, s, _)| s.iter().product::<usize>())
            .sum()
    }

    pub fn init(&self, seed: u64) -> ParamSet {
        init_uniform(&self.param_layout(), seed)
    }

    pub fn zero_state(&self, batch: usize) -> (Tensor, Tensor) {
        (
            Tensor::zeros(vec![batch, self.hidden_size]),
            Tensor::zeros(vec![batch, self.hidden_size]),
        )
    }
}

#[derive(Clone, Debug)]
pub struct LstmState<V> {
    pub h: V,
    pub c: V,
}

/// One recurrence step on a `batch × input_size` input.
///
/// Returns the projected output and the next state.
pub fn step<B: Backend>(
    backend: &mut B,
    spec: &LstmSpec,
    params: &[B::Value],
    x: &B::Value,
    state: &LstmState<B::Value>,
) -> Result<(B::Value, LstmState<B::Value>), NeuralError> {
    if params.len() != 6 {
        return Err(NeuralError::Shape(format!("LSTM needs 6 parameter tensors, got {}", params.len())));
    }
    let h = spec.hidden_size;
    let gi = backend.affine(x, &params[W_IH], Some(&params[B_IH]))?;
    let gh = backend.affine(&state.h, &params[W_HH], Some(&params[B_HH]))?;
    let gates = backend.add(&gi, &gh)?;
    let i = backend.columns(&gates, 0, h)?;
    let f = backend.columns(&gates, h, h)?;
    let g = backend.columns(&gates, 2 * h, h)?;
    let o = backend.columns(&gates, 3 * h, h)?;
    let i = backend.activation(&i, Activation::Sigmoid);
    let f = backend.activation(&f, Activation::Sigmoid);
    let g = backend.activation(&g, Activation::Tanh);
    let o = backend.activation(&o, Activation::Sigmoid);
    let fc = backend.mul(&f, &state.c)?;
    let ig = backend.mul(&i, &g)?;
    let c = backend.add(&fc, &ig)?;
    let tc = backend.activation(&c, Activation::Tanh);
    let h_next = backend.mul(&o, &tc)?;
    let out = backend.affine(&h_next, &params[W_OUT], Some(&params[B_OUT]))?;
    Ok((out, LstmState { h: h_next, c }))
}

/// Gradient-free single-sample step for a one-input cell.
pub fn lstm_forward(
    spec: &LstmSpec,
    params: &ParamSet,
    x_t: f64,
    state: &LstmState<Tensor>,
) -> Result<(Vec<f64>, LstmState<Tensor>), NeuralError> {
    if state.h.cols() != spec.hidden_size || state.c.cols() != spec.hidden_size {
        return Err(NeuralError::Shape("LSTM state width differs from hidden size".into()));
    }
    let mut eager = Eager;
    let x = Tensor::row(&[x_t]);
    let (out, next) = step(&mut eager, spec, params.tensors(), &x, state)?;
    Ok((out.into_data(), next))
}
