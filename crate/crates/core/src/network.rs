//! Fully connected ReLU network for the nonparametric risk term `g(z)`.
//!
//! Hidden layers use ReLU followed by inverted dropout in training mode; the
//! output layer is the identity so that `g` can take negative values. All
//! parameters live in one flat vector (per layer: the `fan_out × fan_in`
//! weight matrix row-major, then the bias), which is what the optimizer and
//! the finite-difference tests operate on.

use alloc::format;
#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::survival::RiskIndex;

/// Version tag written into serialized networks.
pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkArch {
    pub input_dim: usize,
    /// Widths of the hidden layers. Empty means `g` is affine in `z`.
    pub hidden_widths: Vec<usize>,
    pub dropout: f64,
}

impl NetworkArch {
    /// `depth` hidden layers of equal `width`.
    pub fn uniform(input_dim: usize, depth: usize, width: usize, dropout: f64) -> Self {
        Self {
            input_dim,
            hidden_widths: vec![width; depth],
            dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("network input dimension is 0".into()));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::InvalidArgument("hidden layer of width 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }

    /// `[r, p_2, …, p_L, 1]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_widths);
        dims.push(1);
        dims
    }

    pub fn n_params(&self) -> usize {
        self.layer_dims().windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl Layer {
    #[inline]
    fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset..self.offset + self.fan_in * self.fan_out]
    }

    #[inline]
    fn bias<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.fan_in * self.fan_out;
        &params[start..start + self.fan_out]
    }

    fn size(&self) -> usize {
        self.fan_out * (self.fan_in + 1)
    }
}

fn layout(arch: &NetworkArch) -> Vec<Layer> {
    let mut offset = 0;
    arch.layer_dims()
        .windows(2)
        .map(|w| {
            let layer = Layer {
                fan_in: w[0],
                fan_out: w[1],
                offset,
            };
            offset += layer.size();
            layer
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, raw output.
    Train,
    /// No dropout, output shifted by the centering offset.
    Eval,
}

/// Per-sample multipliers applied to each hidden layer's activations: 0 for a
/// dropped unit, `1/(1 − rate)` for a kept one.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    layers: Vec<Vec<f64>>,
}

impl DropoutMask {
    pub fn ones(arch: &NetworkArch, n: usize) -> Self {
        Self {
            layers: arch.hidden_widths.iter().map(|&w| vec![1.0; n * w]).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(arch: &NetworkArch, n: usize, rng: &mut R) -> Self {
        let rate = arch.dropout;
        if rate == 0.0 {
            return Self::ones(arch, n);
        }
        let keep = 1.0 / (1.0 - rate);
        Self {
            layers: arch
                .hidden_widths
                .iter()
                .map(|&w| {
                    (0..n * w)
                        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                        .collect()
                })
                .collect(),
        }
    }

    /// Explicit multipliers, `layers[l]` being row-major `n × width_l`.
    pub fn from_layers(layers: Vec<Vec<f64>>) -> Self {
        Self { layers }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: NetworkArch,
    layers: Vec<Layer>,
    params: Vec<f64>,
    center_offset: f64,
}

/// Intermediate values kept for backpropagation.
struct Trace {
    /// Input to each layer (`z` for the first), row-major `n × fan_in`.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Network {
    /// Xavier-uniform weights on `±√(6/(fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(arch: NetworkArch, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let layers = layout(&arch);
        let mut params = vec![0.0; arch.n_params()];
        for layer in &layers {
            let bound = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            for w in &mut params[layer.offset..layer.offset + layer.fan_in * layer.fan_out] {
                *w = (2.0 * rng.random::<f64>() - 1.0) * bound;
            }
        }
        Ok(Self {
            arch,
            layers,
            params,
            center_offset: 0.0,
        })
    }

    /// Network with every weight and bias set to zero.
    pub fn zeros(arch: NetworkArch) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            layers: layout(&arch),
            params: vec![0.0; arch.n_params()],
            arch,
            center_offset: 0.0,
        })
    }

    /// Network from per-layer `(weights, bias)` with weights row-major
    /// `fan_out × fan_in`.
    pub fn from_layers(arch: NetworkArch, layers: &[(Vec<f64>, Vec<f64>)], center_offset: f64) -> Result<Self> {
        arch.validate()?;
        let shape = layout(&arch);
        if layers.len() != shape.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} layers given, architecture has {}",
                layers.len(),
                shape.len()
            )));
        }
        let mut params = Vec::with_capacity(arch.n_params());
        for (k, ((w, b), s)) in layers.iter().zip(&shape).enumerate() {
            if w.len() != s.fan_in * s.fan_out || b.len() != s.fan_out {
                return Err(Error::DimensionMismatch(format!(
                    "layer {}: {} weights and {} biases, expected {}x{}",
                    k,
                    w.len(),
                    b.len(),
                    s.fan_out,
                    s.fan_in
                )));
            }
            params.extend_from_slice(w);
            params.extend_from_slice(b);
        }
        if params.iter().any(|v| !v.is_finite()) || !center_offset.is_finite() {
            return Err(Error::InvalidArgument("non-finite network parameter".into()));
        }
        Ok(Self {
            arch,
            layers: shape,
            params,
            center_offset,
        })
    }

    pub fn arch(&self) -> &NetworkArch {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn center_offset(&self) -> f64 {
        self.center_offset
    }

    pub fn set_center_offset(&mut self, offset: f64) {
        self.center_offset = offset;
    }

    /// `(weights, bias)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let layer = &self.layers[l];
        (layer.weights(&self.params), layer.bias(&self.params))
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    fn check_input(&self, z: &Matrix) -> Result<()> {
        if z.ncols() != self.arch.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "network expects {} inputs, got {}",
                self.arch.input_dim,
                z.ncols()
            )));
        }
        Ok(())
    }

    fn run(&self, z: &Matrix, mask: Option<&DropoutMask>) -> Trace {
        let n = z.nrows();
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut current = z.as_slice().to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let w = layer.weights(&self.params);
            let b = layer.bias(&self.params);
            let (fi, fo) = (layer.fan_in, layer.fan_out);
            let mut z_out = vec![0.0; n * fo];
            for i in 0..n {
                let a = &current[i * fi..(i + 1) * fi];
                for k in 0..fo {
                    let row = &w[k * fi..(k + 1) * fi];
                    z_out[i * fo + k] = b[k] + row.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            if l == last {
                inputs.push(current);
                return Trace {
                    inputs,
                    pre,
                    output: z_out,
                };
            }
            let mut act: Vec<f64> = z_out.iter().map(|&v| v.max(0.0)).collect();
            if let Some(mask) = mask {
                for (a, m) in act.iter_mut().zip(&mask.layers[l]) {
                    *a *= m;
                }
            }
            inputs.push(core::mem::replace(&mut current, act));
            pre.push(z_out);
        }
        unreachable!("a network always has an output layer")
    }

    /// `g(z)` for every row of `z`.
    pub fn forward<R: Rng + ?Sized>(&self, z: &Matrix, mode: Mode, rng: &mut R) -> Result<Vec<f64>> {
        match mode {
            Mode::Eval => self.eval(z),
            Mode::Train => {
                let mask = DropoutMask::sample(&self.arch, z.nrows(), rng);
                self.forward_masked(z, &mask)
            }
        }
    }

    /// Deterministic evaluation: no dropout, centering offset subtracted.
    pub fn eval(&self, z: &Matrix) -> Result<Vec<f64>> {
        let mut out = self.eval_raw(z)?;
        for v in &mut out {
            *v -= self.center_offset;
        }
        Ok(out)
    }

    /// Evaluation without dropout and without the centering offset.
    pub fn eval_raw(&self, z: &Matrix) -> Result<Vec<f64>> {
        self.check_input(z)?;
        Ok(self.run(z, None).output)
    }

    /// Raw (uncentered) output under an explicit dropout mask.
    pub fn forward_masked(&self, z: &Matrix, mask: &DropoutMask) -> Result<Vec<f64>> {
        self.check_input(z)?;
        self.check_mask(mask, z.nrows())?;
        Ok(self.run(z, Some(mask)).output)
    }

    fn check_mask(&self, mask: &DropoutMask, n: usize) -> Result<()> {
        let ok = mask.layers.len() == self.arch.hidden_widths.len()
            && mask
                .layers
                .iter()
                .zip(&self.arch.hidden_widths)
                .all(|(m, &w)| m.len() == n * w);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("dropout mask does not match network".into()))
        }
    }

    /// Backpropagates `d_out = ∂L/∂g(zᵢ)` through the network evaluated
    /// under `mask`, returning `∂L/∂Θ` in the flat parameter layout.
    pub fn backward(&self, z: &Matrix, mask: &DropoutMask, d_out: &[f64]) -> Result<Vec<f64>> {
        self.check_input(z)?;
        self.check_mask(mask, z.nrows())?;
        if d_out.len() != z.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} output gradients for {} rows",
                d_out.len(),
                z.nrows()
            )));
        }
        let trace = self.run(z, Some(mask));
        Ok(self.backprop(&trace, mask, d_out))
    }

    fn backprop(&self, trace: &Trace, mask: &DropoutMask, d_out: &[f64]) -> Vec<f64> {
        let n = d_out.len();
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = d_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = self.layers[l];
            let (fi, fo) = (layer.fan_in, layer.fan_out);
            let input = &trace.inputs[l];
            {
                let (gw, gb) = grad[layer.offset..layer.offset + layer.size()].split_at_mut(fi * fo);
                for i in 0..n {
                    let a = &input[i * fi..(i + 1) * fi];
                    for k in 0..fo {
                        let d = delta[i * fo + k];
                        if d == 0.0 {
                            continue;
                        }
                        gb[k] += d;
                        for (g, x) in gw[k * fi..(k + 1) * fi].iter_mut().zip(a) {
                            *g += d * x;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            // delta for the previous hidden layer: Wᵀδ through mask and ReLU
            let w = layer.weights(&self.params);
            let pre = &trace.pre[l - 1];
            let m = &mask.layers[l - 1];
            let mut prev = vec![0.0; n * fi];
            for i in 0..n {
                for k in 0..fo {
                    let d = delta[i * fo + k];
                    if d == 0.0 {
                        continue;
                    }
                    for (c, p) in prev[i * fi..(i + 1) * fi].iter_mut().zip(&w[k * fi..(k + 1) * fi]) {
                        *c += d * p;
                    }
                }
            }
            for ((c, &z), &mk) in prev.iter_mut().zip(pre).zip(m) {
                if z <= 0.0 {
                    *c = 0.0;
                } else {
                    *c *= mk;
                }
            }
            delta = prev;
        }
        grad
    }

    /// Partial-likelihood loss `q(ξ + g)` and its gradient in the network
    /// parameters, with `ξ` held fixed and `g` evaluated under `mask`.
    pub fn loss_and_grad(&self, z: &Matrix, index: &RiskIndex, xi: &[f64], mask: &DropoutMask) -> Result<(f64, Vec<f64>)> {
        self.check_input(z)?;
        self.check_mask(mask, z.nrows())?;
        if xi.len() != z.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} linear predictors for {} rows",
                xi.len(),
                z.nrows()
            )));
        }
        let trace = self.run(z, Some(mask));
        let eta: Vec<f64> = xi.iter().zip(&trace.output).map(|(a, b)| a + b).collect();
        let d = index.derivatives(&eta)?;
        Ok((d.loss, self.backprop(&trace, mask, &d.grad)))
    }

    /// Sets the centering offset so the eval-mode outputs over `z` average 0.
    pub fn center(&mut self, z: &Matrix) -> Result<()> {
        let raw = self.eval_raw(z)?;
        self.center_offset = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
        Ok(())
    }
}

/// `∂q/∂Θ` with a dropout mask sampled once and shared by the forward and
/// backward passes.
pub fn grad_params<R: Rng + ?Sized>(
    net: &Network,
    z: &Matrix,
    index: &RiskIndex,
    xi: &[f64],
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let mask = DropoutMask::sample(net.arch(), z.nrows(), rng);
    net.loss_and_grad(z, index, xi, &mask)
}

/// On-disk form of a [`Network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub version: u32,
    pub arch: NetworkArch,
    pub layers: Vec<LayerFile>,
    pub center_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    /// `fan_out` rows of `fan_in` weights.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| LayerFile {
                weights: l
                    .weights(&net.params)
                    .chunks(l.fan_in)
                    .map(<[f64]>::to_vec)
                    .collect(),
                bias: l.bias(&net.params).to_vec(),
            })
            .collect();
        Self {
            version: NETWORK_FORMAT_VERSION,
            arch: net.arch.clone(),
            layers,
            center_offset: net.center_offset,
        }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        if file.version != NETWORK_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported network format version {}",
                file.version
            )));
        }
        let layers: Vec<(Vec<f64>, Vec<f64>)> = file
            .layers
            .into_iter()
            .map(|l| (l.weights.concat(), l.bias))
            .collect();
        Network::from_layers(file.arch, &layers, file.center_offset)
    }
}

impl Serialize for Network {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        NetworkFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Network {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let file = NetworkFile::deserialize(deserializer)?;
        Network::try_from(file).map_err(serde::de::Error::custom)
    }
}
