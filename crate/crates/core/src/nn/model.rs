use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::kernels::{self, Window};
use super::spec::{LayerSpec, ModelSpec};
use crate::error::{shape_err, Error, Result};
use crate::rng::{substream, Stream};
use crate::{Scalar, Tensor};

/// Sequential model: an architecture plus its parameter tensors.
///
/// Parameters are stored flat in layer order, weight before bias, which is
/// also the order of checkpoint blocks and of [`Gradients`].
#[derive(Clone, Debug, PartialEq)]
pub struct Model<F> {
    spec: ModelSpec,
    params: Vec<Tensor<F>>,
    /// Index of each layer's weight tensor in `params`.
    slots: Vec<Option<usize>>,
    seed: u64,
}

/// Per-parameter gradients, aligned with [`Model::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<F>(pub Vec<Tensor<F>>);

impl<F: Scalar> Gradients<F> {
    pub fn iter(&self) -> core::slice::Iter<'_, Tensor<F>> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Tensor::is_finite)
    }
}

/// Activations recorded by [`Model::forward`] for the following backward pass.
#[derive(Clone, Debug, Default)]
pub struct Tape<F> {
    inputs: Vec<Tensor<F>>,
    argmax: Vec<Vec<usize>>,
    output_shape: Vec<usize>,
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Self {
            inputs: Vec::new(),
            argmax: Vec::new(),
            output_shape: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn clear(&mut self) {
        self.inputs.clear();
        self.argmax.clear();
        self.output_shape.clear();
    }
}

fn slots_for(spec: &ModelSpec) -> Vec<Option<usize>> {
    let mut next = 0;
    spec.layers
        .iter()
        .map(|l| {
            l.param_shapes().map(|_| {
                let s = next;
                next += 2;
                s
            })
        })
        .collect()
}

/// Builds a model with fan-in scaled uniform weights, `U(-b, b)` with
/// `b = sqrt(6 / fan_in)`, and zero biases. Deterministic in `seed`.
pub fn init_weights<F: Scalar>(spec: &ModelSpec, seed: u64) -> Result<Model<F>> {
    spec.validate()?;
    let mut rng = substream(seed, Stream::Init, spec.depth_tag as u64, 0);
    let mut params = Vec::new();
    for layer in &spec.layers {
        if let Some([ws, bs]) = layer.param_shapes() {
            let bound = libm::sqrt(6.0 / layer.fan_in() as f64);
            let len = ws.iter().product();
            let w = (0..len)
                .map(|_| F::from_f64(rng.gen_range(-bound..bound)))
                .collect();
            params.push(Tensor::from_parts_unchecked(ws, w));
            params.push(Tensor::zeros(&bs));
        }
    }
    Ok(Model {
        slots: slots_for(spec),
        spec: spec.clone(),
        params,
        seed,
    })
}

impl<F: Scalar> Model<F> {
    /// Rebuilds a model from stored parameters, checking every shape.
    pub fn from_params(spec: ModelSpec, params: Vec<Tensor<F>>, seed: u64) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() {
            return Err(shape_err(
                "parameters",
                format!("expected {} tensors, got {}", shapes.len(), params.len()),
            ));
        }
        for (i, (s, p)) in shapes.iter().zip(&params).enumerate() {
            if s.as_slice() != p.shape() {
                return Err(shape_err(
                    format!("parameter {i}"),
                    format!("expected {s:?}, got {:?}", p.shape()),
                ));
            }
        }
        Ok(Self {
            slots: slots_for(&spec),
            spec,
            params,
            seed,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn depth_tag(&self) -> u32 {
        self.spec.depth_tag
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes()
    }

    pub fn params(&self) -> &[Tensor<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.params
    }

    pub fn cast<G: Scalar>(&self) -> Model<G> {
        Model {
            spec: self.spec.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            slots: self.slots.clone(),
            seed: self.seed,
        }
    }

    /// FNV-1a over the bit patterns of all parameters.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.params.iter().flat_map(|p| p.data()) {
            for b in v.as_f64().to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    fn check_input(&self, x: &Tensor<F>) -> Result<()> {
        if x.shape().len() != self.spec.input_shape.len() + 1 || x.shape()[1..] != self.spec.input_shape[..] {
            return Err(shape_err(
                "input",
                format!(
                    "model expects [batch, {:?}], got {:?}",
                    self.spec.input_shape,
                    x.shape()
                ),
            ));
        }
        Ok(())
    }

    /// Computes logits `[batch, classes]` and records activations on `tape`.
    pub fn forward(&self, x: &Tensor<F>, tape: &mut Tape<F>) -> Result<Tensor<F>> {
        tape.clear();
        let out = self.run(x, Some(tape))?;
        tape.output_shape = out.shape().to_vec();
        Ok(out)
    }

    /// Inference without recording activations.
    pub fn predict(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        self.run(x, None)
    }

    fn run(&self, x: &Tensor<F>, mut tape: Option<&mut Tape<F>>) -> Result<Tensor<F>> {
        self.check_input(x)?;
        let n = x.batch();
        let mut shape = self.spec.input_shape.clone();
        let mut cur = x.clone();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let (next, arg) = match *layer {
                LayerSpec::Dense { .. } => {
                    let s = self.slots[i].expect("dense layer has parameters");
                    let y = kernels::dense_forward(cur.data(), n, self.params[s].data(), self.params[s + 1].data());
                    (y, Vec::new())
                }
                LayerSpec::Conv2d {
                    kernel,
                    stride,
                    padding,
                    ..
                } => {
                    let s = self.slots[i].expect("conv layer has parameters");
                    let g = window(&shape, kernel, stride, padding);
                    let y = kernels::conv2d_forward(cur.data(), n, g, self.params[s].data(), self.params[s + 1].data());
                    (y, Vec::new())
                }
                LayerSpec::Relu => (
                    cur.data()
                        .iter()
                        .map(|&v| if v > F::zero() { v } else { F::zero() })
                        .collect(),
                    Vec::new(),
                ),
                LayerSpec::MaxPool2d { kernel, stride } => {
                    kernels::maxpool_forward(cur.data(), n, window(&shape, kernel, stride, 0))
                }
                LayerSpec::Flatten => (cur.data().to_vec(), Vec::new()),
            };
            shape = layer
                .output_shape(&shape)
                .map_err(|d| shape_err(format!("layer {i}"), d))?;
            let mut full = vec![n];
            full.extend_from_slice(&shape);
            let next = Tensor::from_parts_unchecked(full, next);
            if let Some(t) = tape.as_deref_mut() {
                t.inputs.push(core::mem::replace(&mut cur, next));
                t.argmax.push(arg);
            } else {
                cur = next;
            }
        }
        Ok(cur)
    }

    /// Backpropagates `grad_logits` (dLoss/dlogits) through the activations
    /// recorded by the last [`Model::forward`] call on `tape`.
    pub fn backward(&self, tape: &Tape<F>, grad_logits: &Tensor<F>) -> Result<Gradients<F>> {
        if tape.is_empty() {
            return Err(Error::State(String::from("backward called before forward")));
        }
        if tape.inputs.len() != self.spec.layers.len() {
            return Err(Error::State(String::from("tape was recorded by a different model")));
        }
        if grad_logits.shape() != tape.output_shape.as_slice() {
            return Err(shape_err(
                "loss gradient",
                format!("expected {:?}, got {:?}", tape.output_shape, grad_logits.shape()),
            ));
        }
        let n = grad_logits.batch();
        let mut grads: Vec<Tensor<F>> = self.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut delta = grad_logits.data().to_vec();
        for (i, layer) in self.spec.layers.iter().enumerate().rev() {
            let input = &tape.inputs[i];
            let in_shape = &input.shape()[1..];
            delta = match *layer {
                LayerSpec::Dense { out_features, .. } => {
                    let s = self.slots[i].expect("dense layer has parameters");
                    let (dx, dw, db) = kernels::dense_backward(input.data(), &delta, self.params[s].data(), out_features);
                    grads[s] = Tensor::from_parts_unchecked(self.params[s].shape().to_vec(), dw);
                    grads[s + 1] = Tensor::from_parts_unchecked(self.params[s + 1].shape().to_vec(), db);
                    dx
                }
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    ..
                } => {
                    let s = self.slots[i].expect("conv layer has parameters");
                    let g = window(in_shape, kernel, stride, padding);
                    let (dx, dw, db) =
                        kernels::conv2d_backward(input.data(), &delta, n, g, self.params[s].data(), out_channels);
                    grads[s] = Tensor::from_parts_unchecked(self.params[s].shape().to_vec(), dw);
                    grads[s + 1] = Tensor::from_parts_unchecked(self.params[s + 1].shape().to_vec(), db);
                    dx
                }
                LayerSpec::Relu => delta
                    .iter()
                    .zip(input.data())
                    .map(|(&d, &v)| if v > F::zero() { d } else { F::zero() })
                    .collect(),
                LayerSpec::MaxPool2d { .. } => kernels::maxpool_backward(&delta, &tape.argmax[i], input.len()),
                LayerSpec::Flatten => delta,
            };
        }
        Ok(Gradients(grads))
    }
}

fn window(shape: &[usize], kernel: usize, stride: usize, padding: usize) -> Window {
    Window {
        channels: shape[0],
        h: shape[1],
        w: shape[2],
        kernel,
        stride,
        padding,
    }
}
