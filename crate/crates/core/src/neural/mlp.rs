use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::backend::{Backend, Eager};
use super::params::{fan_in_bound, init_uniform, ParamSet};
use super::tensor::Tensor;
use super::NeuralError;

/// Fully connected network with one activation for all hidden layers and a
/// linear output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Widths from input to output, e.g. `[2, 9, 9, 1]`.
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    /// One flag per weight layer (`layer_sizes.len() - 1` entries).
    pub bias: Vec<bool>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self, NeuralError> {
        let n = layer_sizes.len().saturating_sub(1);
        let spec = Self {
            layer_sizes,
            activation,
            bias: vec![true; n],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_bias(mut self, bias: Vec<bool>) -> Result<Self, NeuralError> {
        self.bias = bias;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.layer_sizes.len() < 2 {
            return Err(NeuralError::Spec("an MLP needs at least two layer sizes".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(NeuralError::Spec("layer sizes must be positive".into()));
        }
        if self.bias.len() != self.layer_sizes.len() - 1 {
            return Err(NeuralError::Spec(format!(
                "{} bias flags for {} weight layers",
                self.bias.len(),
                self.layer_sizes.len() - 1
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_layout(&self) -> Vec<(String, Vec<usize>, f64)> {
        let mut layout = Vec::new();
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let bound = fan_in_bound(fan_in);
            layout.push((format!("layer{l}.weight"), vec![fan_out, fan_in], bound));
            if self.bias[l] {
                layout.push((format!("layer{l}.bias"), vec![fan_out], bound));
            }
        }
        layout
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
}

/// Runs the network on a `batch × input_dim` value.
///
/// `params` must follow [`MlpSpec::param_layout`] order.
pub fn forward<B: Backend>(
    backend: &mut B,
    spec: &MlpSpec,
    params: &[B::Value],
    input: &B::Value,
) -> Result<B::Value, NeuralError> {
    if backend.value(input).cols() != spec.input_dim() {
        return Err(NeuralError::Shape(format!(
            "network expects {} inputs, got {}",
            spec.input_dim(),
            backend.value(input).cols()
        )));
    }
    let mut h = input.clone();
    let mut p = 0;
    for l in 0..spec.num_layers() {
        let w = params
            .get(p)
            .ok_or_else(|| NeuralError::Shape("missing weight tensor".into()))?;
        p += 1;
        let b = if spec.bias[l] {
            p += 1;
            Some(
                params
                    .get(p - 1)
                    .ok_or_else(|| NeuralError::Shape("missing bias tensor".into()))?,
            )
        } else {
            None
        };
        h = backend.affine(&h, w, b)?;
        if l + 1 < spec.num_layers() {
            h = backend.activation(&h, spec.activation);
        }
    }
    Ok(h)
}

/// Gradient-free forward pass over a batch.
pub fn mlp_forward(spec: &MlpSpec, params: &ParamSet, input: &Tensor) -> Result<Tensor, NeuralError> {
    let mut eager = Eager;
    forward(&mut eager, spec, params.tensors(), input)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_zero() {
        let spec = MlpSpec::new(vec![2, 9, 9, 1], Activation::Relu).unwrap();
        let params = spec.init(0).zeros_like();
        let y = mlp_forward(&spec, &params, &Tensor::row(&[0.3, -2.0])).unwrap();
        assert_eq!(y.data(), &[0.0]);
    }

    #[test]
    fn identity_network() {
        let spec = MlpSpec::new(vec![1, 1], Activation::Relu)
            .unwrap()
            .with_bias(vec![false])
            .unwrap();
        let params = ParamSet::from_tensors(vec![(
            "layer0.weight".into(),
            Tensor::matrix(1, 1, vec![1.0]).unwrap(),
        )]);
        let y = mlp_forward(&spec, &params, &Tensor::row(&[0.7])).unwrap();
        assert_eq!(y.data(), &[0.7]);
    }

    #[test]
    fn two_layer_relu_hand_evaluation() {
        // w1 = [[1], [-1]], w2 = [[1, 1]], x = 1  ⇒  relu(1) + relu(-1) = 1
        let spec = MlpSpec::new(vec![1, 2, 1], Activation::Relu)
            .unwrap()
            .with_bias(vec![false, false])
            .unwrap();
        let params = ParamSet::from_tensors(vec![
            ("layer0.weight".into(), Tensor::matrix(2, 1, vec![1.0, -1.0]).unwrap()),
            ("layer1.weight".into(), Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap()),
        ]);
        let y = mlp_forward(&spec, &params, &Tensor::row(&[1.0])).unwrap();
        assert_eq!(y.data(), &[1.0]);
    }

    #[test]
    fn input_dimension_is_checked() {
        let spec = MlpSpec::new(vec![2, 3, 1], Activation::Tanh).unwrap();
        let params = spec.init(1);
        assert!(matches!(
            mlp_forward(&spec, &params, &Tensor::row(&[1.0, 2.0, 3.0])),
            Err(NeuralError::Shape(_))
        ));
    }

    #[test]
    fn reference_model_parameter_counts() {
        let odenet9 = MlpSpec::new(vec![2, 9, 9, 1], Activation::Relu).unwrap();
        assert_eq!(odenet9.param_count(), 127);
        let stn = MlpSpec::new(vec![2, 4, 4, 4, 1], Activation::Tanh)
            .unwrap()
            .with_bias(vec![false, true, false, false])
            .unwrap();
        assert_eq!(stn.param_count(), 48);
        let odenet30 = MlpSpec::new(vec![3, 30, 30, 2], Activation::Softsign).unwrap();
        assert_eq!(odenet30.param_count(), 1112);
        let odenet20 = MlpSpec::new(vec![3, 20, 20, 2], Activation::Softsign).unwrap();
        assert_eq!(odenet20.param_count(), 542);
    }

    #[test]
    fn forward_is_pure() {
        let spec = MlpSpec::new(vec![3, 30, 30, 2], Activation::Softsign).unwrap();
        let params = spec.init(11);
        let x = Tensor::matrix(2, 3, vec![0.1, -0.2, 0.3, 1.0, 0.0, -1.0]).unwrap();
        let a = mlp_forward(&spec, &params, &x).unwrap();
        let b = mlp_forward(&spec, &params, &x).unwrap();
        assert_eq!(a, b);
    }
}
