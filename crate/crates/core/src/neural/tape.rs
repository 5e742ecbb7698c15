//! Reverse-mode differentiation over recorded tensor operations.
//!
//! A [`Tape`] is a Wengert list: every operation appends a node holding its
//! value and the indices of its inputs. Because inputs always precede their
//! consumers, a single reverse sweep over the node list visits each operation
//! exactly once and in reverse order.

use super::activation::Activation;
use super::backend::Backend;
use super::params::ParamSet;
use super::tensor::{self, Tensor};
use super::NeuralError;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Affine { x: Var, w: Var, b: Option<Var> },
    Activation { x: Var, kind: Activation },
    Add(Var, Var),
    Mul(Var, Var),
    LinComb { base: Var, terms: Vec<(f64, Var)> },
    Concat(Vec<Var>),
    Columns { x: Var, start: usize },
    /// Scalar whose partial derivatives with respect to `inputs` were
    /// computed outside the tape (e.g. a sequence loss).
    Reduce { inputs: Vec<Var>, local: Vec<Tensor> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<Var>,
}

/// Gradients aligned with the registration order of [`Tape::register_params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<Tensor>);

impl Gradients {
    pub fn global_norm(&self) -> f64 {
        self.0.iter().map(Tensor::squared_norm).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm does not exceed `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for g in &mut self.0 {
                g.scale_in_place(s);
            }
        }
        norm
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Registers every tensor of `params` as a trainable leaf.
    pub fn register_params(&mut self, params: &ParamSet) -> Vec<Var> {
        params
            .tensors()
            .iter()
            .map(|t| {
                let v = self.push(t.clone(), Op::Leaf, true);
                self.params.push(v);
                v
            })
            .collect()
    }

    /// Records a scalar node whose gradient with respect to each input is given.
    pub fn reduce_scalar(
        &mut self,
        inputs: &[Var],
        value: f64,
        local: Vec<Tensor>,
    ) -> Result<Var, NeuralError> {
        if inputs.len() != local.len() {
            return Err(NeuralError::Contract(
                "reduce_scalar needs one local gradient per input".into(),
            ));
        }
        for (v, g) in inputs.iter().zip(&local) {
            if self.nodes[v.0].value.len() != g.len() {
                return Err(NeuralError::Shape("local gradient shape mismatch".into()));
            }
        }
        let rg = inputs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::scalar(value),
            Op::Reduce {
                inputs: inputs.to_vec(),
                local,
            },
            rg,
        ))
    }

    /// Pulls the gradient of the scalar `loss` back to every registered parameter.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NeuralError> {
        let root = &self.nodes[loss.0];
        if root.value.len() != 1 {
            return Err(NeuralError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::Affine { x, w, b } => {
                    let xv = &self.nodes[x.0].value;
                    let wv = &self.nodes[w.0].value;
                    let (out, inp) = (wv.shape()[0], wv.shape()[1]);
                    let batch = xv.rows();
                    if self.rg(*x) {
                        let dx = self.slot(&mut grads, *x);
                        for r in 0..batch {
                            let gr = &g[r * out..(r + 1) * out];
                            let dxr = &mut dx[r * inp..(r + 1) * inp];
                            for (o, &go) in gr.iter().enumerate() {
                                if go == 0.0 {
                                    continue;
                                }
                                let wo = &wv.data()[o * inp..(o + 1) * inp];
                                for (d, wi) in dxr.iter_mut().zip(wo) {
                                    *d += go * wi;
                                }
                            }
                        }
                    }
                    if self.rg(*w) {
                        let dw = self.slot(&mut grads, *w);
                        for r in 0..batch {
                            let gr = &g[r * out..(r + 1) * out];
                            let xr = &xv.data()[r * inp..(r + 1) * inp];
                            for (o, &go) in gr.iter().enumerate() {
                                if go == 0.0 {
                                    continue;
                                }
                                let dwo = &mut dw[o * inp..(o + 1) * inp];
                                for (d, xi) in dwo.iter_mut().zip(xr) {
                                    *d += go * xi;
                                }
                            }
                        }
                    }
                    if let Some(b) = b {
                        if self.rg(*b) {
                            let db = self.slot(&mut grads, *b);
                            for r in 0..batch {
                                for (d, go) in db.iter_mut().zip(&g[r * out..(r + 1) * out]) {
                                    *d += go;
                                }
                            }
                        }
                    }
                }
                Op::Activation { x, kind } => {
                    if self.rg(*x) {
                        let xv = self.nodes[x.0].value.data();
                        let yv = node.value.data();
                        let dx = self.slot(&mut grads, *x);
                        for k in 0..g.len() {
                            dx[k] += g[k] * kind.derivative(xv[k], yv[k]);
                        }
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        if self.rg(v) {
                            let d = self.slot(&mut grads, v);
                            for (dk, gk) in d.iter_mut().zip(&g) {
                                *dk += gk;
                            }
                        }
                    }
                }
                Op::Mul(a, b) => {
                    for (v, other) in [(*a, *b), (*b, *a)] {
                        if self.rg(v) {
                            let ov = self.nodes[other.0].value.data();
                            let d = self.slot(&mut grads, v);
                            for k in 0..g.len() {
                                d[k] += g[k] * ov[k];
                            }
                        }
                    }
                }
                Op::LinComb { base, terms } => {
                    if self.rg(*base) {
                        let d = self.slot(&mut grads, *base);
                        for (dk, gk) in d.iter_mut().zip(&g) {
                            *dk += gk;
                        }
                    }
                    for &(c, t) in terms {
                        if self.rg(t) {
                            let d = self.slot(&mut grads, t);
                            for (dk, gk) in d.iter_mut().zip(&g) {
                                *dk += c * gk;
                            }
                        }
                    }
                }
                Op::Concat(parts) => {
                    let rows = node.value.rows();
                    let total = node.value.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let c = self.nodes[p.0].value.cols();
                        if self.rg(p) {
                            let d = self.slot(&mut grads, p);
                            for r in 0..rows {
                                for j in 0..c {
                                    d[r * c + j] += g[r * total + offset + j];
                                }
                            }
                        }
                        offset += c;
                    }
                }
                Op::Columns { x, start } => {
                    if self.rg(*x) {
                        let rows = node.value.rows();
                        let len = node.value.cols();
                        let total = self.nodes[x.0].value.cols();
                        let d = self.slot(&mut grads, *x);
                        for r in 0..rows {
                            for j in 0..len {
                                d[r * total + start + j] += g[r * len + j];
                            }
                        }
                    }
                }
                Op::Reduce { inputs, local } => {
                    let s = g[0];
                    for (v, lg) in inputs.iter().zip(local) {
                        if self.rg(*v) {
                            let d = self.slot(&mut grads, *v);
                            for (dk, lk) in d.iter_mut().zip(lg.data()) {
                                *dk += s * lk;
                            }
                        }
                    }
                }
            }
        }

        let out = self
            .params
            .iter()
            .map(|p| {
                let shape = self.nodes[p.0].value.shape().to_vec();
                match grads.get_mut(p.0).and_then(Option::take) {
                    Some(g) => Tensor::new(shape, g).expect("gradient buffer matches parameter"),
                    None => Tensor::zeros(shape),
                }
            })
            .collect();
        Ok(Gradients(out))
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> &'g mut [f64] {
        let n = self.nodes[v.0].value.len();
        grads[v.0].get_or_insert_with(|| vec![0.0; n])
    }
}

impl Backend for Tape {
    type Value = Var;

    fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    fn value<'a>(&'a self, v: &'a Var) -> &'a Tensor {
        &self.nodes[v.0].value
    }

    fn affine(&mut self, x: &Var, w: &Var, b: Option<&Var>) -> Result<Var, NeuralError> {
        let value = tensor::affine(
            &self.nodes[x.0].value,
            &self.nodes[w.0].value,
            b.map(|b| &self.nodes[b.0].value),
        )?;
        let rg = self.rg(*x) || self.rg(*w) || b.is_some_and(|b| self.rg(*b));
        Ok(self.push(
            value,
            Op::Affine {
                x: *x,
                w: *w,
                b: b.copied(),
            },
            rg,
        ))
    }

    fn activation(&mut self, x: &Var, kind: Activation) -> Var {
        let value = tensor::activation(&self.nodes[x.0].value, kind);
        let rg = self.rg(*x);
        self.push(value, Op::Activation { x: *x, kind }, rg)
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var, NeuralError> {
        let value = tensor::add(&self.nodes[a.0].value, &self.nodes[b.0].value)?;
        let rg = self.rg(*a) || self.rg(*b);
        Ok(self.push(value, Op::Add(*a, *b), rg))
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var, NeuralError> {
        let value = tensor::mul(&self.nodes[a.0].value, &self.nodes[b.0].value)?;
        let rg = self.rg(*a) || self.rg(*b);
        Ok(self.push(value, Op::Mul(*a, *b), rg))
    }

    fn lin_comb(&mut self, base: &Var, terms: &[(f64, &Var)]) -> Result<Var, NeuralError> {
        let tv: Vec<(f64, &Tensor)> = terms
            .iter()
            .map(|(c, v)| (*c, &self.nodes[v.0].value))
            .collect();
        let value = tensor::lin_comb(&self.nodes[base.0].value, &tv)?;
        let rg = self.rg(*base) || terms.iter().any(|(_, v)| self.rg(**v));
        let terms = terms.iter().map(|(c, v)| (*c, **v)).collect();
        Ok(self.push(value, Op::LinComb { base: *base, terms }, rg))
    }

    fn concat(&mut self, parts: &[&Var]) -> Result<Var, NeuralError> {
        let tv: Vec<&Tensor> = parts.iter().map(|v| &self.nodes[v.0].value).collect();
        let value = tensor::concat(&tv)?;
        let rg = parts.iter().any(|v| self.rg(**v));
        Ok(self.push(value, Op::Concat(parts.iter().map(|v| **v).collect()), rg))
    }

    fn columns(&mut self, x: &Var, start: usize, len: usize) -> Result<Var, NeuralError> {
        let value = tensor::columns(&self.nodes[x.0].value, start, len)?;
        let rg = self.rg(*x);
        Ok(self.push(value, Op::Columns { x: *x, start }, rg))
    }
}
