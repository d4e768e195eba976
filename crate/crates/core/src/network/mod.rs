//! KAN forward/backward engine and the MLP baseline.
//!
//! Every branch `φ_{p→q}` of a layer computes
//! `w_{q,p} · silu(z) + s_{q,p} · Σ_j c_{q,p,j} B_j(z)`, and output `q`
//! of the layer sums its branches over all inputs `p`. Layers carry no bias.

mod checkpoint;
mod mlp;

pub use checkpoint::{CheckpointHeader, CHECKPOINT_MAGIC};
pub use mlp::{MlpLayer, MlpNetwork, MlpTrace};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::spline::{fit_coefficients_ridge, KnotGrid, SplineError, DEFAULT_RIDGE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("branch ({p}, {q}) out of range for a {in_dim}->{out_dim} layer")]
    BranchOutOfRange {
        p: usize,
        q: usize,
        in_dim: usize,
        out_dim: usize,
    },
    #[error("invalid layer dimensions {0:?}")]
    InvalidDims(Vec<usize>),
    #[error("non-finite input at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("trace does not belong to this network: {0}")]
    StaleTrace(String),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error(transparent)]
    Spline(#[from] SplineError),
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
pub fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
pub fn silu_derivative(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// Initialization hyperparameters of a KAN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanInit {
    pub range: (f64, f64),
    pub grid_size: usize,
    pub order: usize,
    pub base_weight_scale: f64,
    pub spline_weight_scale: f64,
    pub noise_scale: f64,
}

impl Default for KanInit {
    fn default() -> Self {
        Self {
            range: (-1.0, 1.0),
            grid_size: 5,
            order: 3,
            base_weight_scale: 1.0,
            spline_weight_scale: 1.0,
            noise_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanLayer {
    in_dim: usize,
    out_dim: usize,
    grid: KnotGrid,
    /// `[q * in_dim + p]`
    pub base_weights: Vec<f64>,
    /// `[(q * in_dim + p) * num_basis + j]`
    pub spline_coeffs: Vec<f64>,
    /// `[q * in_dim + p]`
    pub spline_scalers: Vec<f64>,
}

impl KanLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, grid: KnotGrid) -> Self {
        let branches = in_dim * out_dim;
        Self {
            in_dim,
            out_dim,
            spline_coeffs: vec![0.0; branches * grid.num_basis()],
            grid,
            base_weights: vec![0.0; branches],
            spline_scalers: vec![0.0; branches],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    pub fn num_branches(&self) -> usize {
        self.in_dim * self.out_dim
    }

    pub fn num_params(&self) -> usize {
        self.num_branches() * (2 + self.grid.num_basis())
    }

    #[inline]
    pub fn branch_index(&self, p: usize, q: usize) -> usize {
        q * self.in_dim + p
    }

    pub fn coeffs(&self, p: usize, q: usize) -> &[f64] {
        let nb = self.grid.num_basis();
        let b = self.branch_index(p, q);
        &self.spline_coeffs[b * nb..(b + 1) * nb]
    }

    pub fn coeffs_mut(&mut self, p: usize, q: usize) -> &mut [f64] {
        let nb = self.grid.num_basis();
        let b = self.branch_index(p, q);
        &mut self.spline_coeffs[b * nb..(b + 1) * nb]
    }

    /// `φ_{p→q}(z)`.
    pub fn branch_eval(&self, p: usize, q: usize, z: f64) -> Result<f64, NetworkError> {
        if p >= self.in_dim || q >= self.out_dim {
            return Err(NetworkError::BranchOutOfRange {
                p,
                q,
                in_dim: self.in_dim,
                out_dim: self.out_dim,
            });
        }
        Ok(self.branch_value(p, q, z))
    }

    #[inline]
    fn branch_value(&self, p: usize, q: usize, z: f64) -> f64 {
        let b = self.branch_index(p, q);
        self.base_weights[b] * silu(z) + self.spline_scalers[b] * self.grid.spline_value(self.coeffs(p, q), z)
    }

    /// Spline part only, `s_{q,p} · Σ_j c_{q,p,j} B_j(z)`.
    pub fn spline_part(&self, p: usize, q: usize, z: f64) -> f64 {
        self.spline_scalers[self.branch_index(p, q)] * self.grid.spline_value(self.coeffs(p, q), z)
    }

    fn forward(&self, input: &Matrix, mut branches: Option<&mut Matrix>) -> Matrix {
        let nb = self.grid.num_basis();
        let mut out = Matrix::zeros(input.rows(), self.out_dim);
        for b in 0..input.rows() {
            for p in 0..self.in_dim {
                let z = input.get(b, p);
                let base = silu(z);
                let local = self.grid.local_basis(z);
                for q in 0..self.out_dim {
                    let br = self.branch_index(p, q);
                    let coeffs = &self.spline_coeffs[br * nb..(br + 1) * nb];
                    let spline = local.as_ref().map_or(0.0, |lb| self.grid.local_dot(lb, coeffs));
                    let phi = self.base_weights[br] * base + self.spline_scalers[br] * spline;
                    if let Some(m) = branches.as_deref_mut() {
                        m.set(b, br, phi);
                    }
                    let o = out.get(b, q) + phi;
                    out.set(b, q, o);
                }
            }
        }
        out
    }

    fn backward(&self, input: &Matrix, output_grad: &Matrix, grad: &mut LayerGradient) -> Matrix {
        let nb = self.grid.num_basis();
        let mut input_grad = Matrix::zeros(input.rows(), self.in_dim);
        for b in 0..input.rows() {
            for p in 0..self.in_dim {
                let z = input.get(b, p);
                let base = silu(z);
                let dbase = silu_derivative(z);
                let local = self.grid.local_basis(z);
                let dlocal = self.grid.local_derivative(z);
                let mut dz = 0.0;
                for q in 0..self.out_dim {
                    let g = output_grad.get(b, q);
                    if g == 0.0 {
                        continue;
                    }
                    let br = self.branch_index(p, q);
                    let coeffs = &self.spline_coeffs[br * nb..(br + 1) * nb];
                    let scaler = self.spline_scalers[br];
                    grad.base_weights[br] += g * base;
                    dz += g * self.base_weights[br] * dbase;
                    if let Some(lb) = &local {
                        grad.spline_scalers[br] += g * self.grid.local_dot(lb, coeffs);
                        let cg = &mut grad.spline_coeffs[br * nb..(br + 1) * nb];
                        for r in 0..lb.len {
                            let j = lb.first + r as isize;
                            if j >= 0 && (j as usize) < nb {
                                cg[j as usize] += g * scaler * lb.values[r];
                            }
                        }
                    }
                    if let Some(ld) = &dlocal {
                        dz += g * scaler * self.grid.local_dot(ld, coeffs);
                    }
                }
                input_grad.set(b, p, dz);
            }
        }
        input_grad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanNetwork {
    layers: Vec<KanLayer>,
}

/// Per-layer record of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `pre_activations[l]` is the `[batch × in_dim]` input to layer `l`.
    pub pre_activations: Vec<Matrix>,
    /// `branch_outputs[l]` is `[batch × (out_dim · in_dim)]`, column `q * in_dim + p`.
    pub branch_outputs: Option<Vec<Matrix>>,
    pub output: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub base_weights: Vec<f64>,
    pub spline_coeffs: Vec<f64>,
    pub spline_scalers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGradient>,
    pub input: Matrix,
}

impl GradientSet {
    /// Gradients flattened in [`KanNetwork::params`] order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.base_weights);
            out.extend_from_slice(&l.spline_coeffs);
            out.extend_from_slice(&l.spline_scalers);
        }
        out
    }
}

/// Noise targets the initial splines were fitted to, per layer in
/// branch-major order with `G + 1` samples per branch.
#[derive(Debug, Clone)]
pub struct InitNoise {
    pub layers: Vec<Vec<f64>>,
}

impl KanNetwork {
    pub fn from_layers(layers: Vec<KanLayer>) -> Result<Self, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::InvalidDims(vec![]));
        }
        for w in layers.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(NetworkError::InvalidDims(
                    layers.iter().map(|l| l.in_dim).chain([layers.last().unwrap().out_dim]).collect(),
                ));
            }
        }
        Ok(Self { layers })
    }

    /// All-zero network over the given widths.
    pub fn zeros(dims: &[usize], grid: &KnotGrid) -> Result<Self, NetworkError> {
        validate_dims(dims)?;
        Self::from_layers(dims.windows(2).map(|w| KanLayer::zeros(w[0], w[1], grid.clone())).collect())
    }

    pub fn init(dims: &[usize], init: &KanInit, seed: u64) -> Result<Self, NetworkError> {
        Self::init_with_noise(dims, init, seed).map(|(net, _)| net)
    }

    /// Seeded initialization: fan-in uniform base weights scaled by
    /// `base_weight_scale`, splines least-squares fitted to uniform noise
    /// `(u - 1/2) · noise_scale` on the interior knots, scalers set to
    /// `spline_weight_scale`.
    pub fn init_with_noise(dims: &[usize], init: &KanInit, seed: u64) -> Result<(Self, InitNoise), NetworkError> {
        validate_dims(dims)?;
        let grid = KnotGrid::new(init.range.0, init.range.1, init.grid_size, init.order)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        let mut noise_record = Vec::with_capacity(dims.len() - 1);
        let xs = grid.interior_points().to_vec();
        for w in dims.windows(2) {
            let (in_dim, out_dim) = (w[0], w[1]);
            let mut layer = KanLayer::zeros(in_dim, out_dim, grid.clone());
            let bound = 1.0 / (in_dim as f64).sqrt();
            for v in &mut layer.base_weights {
                *v = rng.random_range(-bound..bound) * init.base_weight_scale;
            }
            let mut layer_noise = Vec::with_capacity(layer.num_branches() * xs.len());
            for q in 0..out_dim {
                for p in 0..in_dim {
                    let noise: Vec<f64> = xs
                        .iter()
                        .map(|_| (rng.random::<f64>() - 0.5) * init.noise_scale)
                        .collect();
                    let coeffs = fit_coefficients_ridge(&grid, &xs, &noise, DEFAULT_RIDGE)?;
                    layer.coeffs_mut(p, q).copy_from_slice(&coeffs);
                    layer_noise.extend_from_slice(&noise);
                }
            }
            layer.spline_scalers.fill(init.spline_weight_scale);
            layers.push(layer);
            noise_record.push(layer_noise);
        }
        Ok((Self { layers }, InitNoise { layers: noise_record }))
    }

    pub fn layers(&self) -> &[KanLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [KanLayer] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.layers.iter().map(|l| l.in_dim).collect();
        d.push(self.layers.last().map_or(0, |l| l.out_dim));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(KanLayer::num_params).sum()
    }

    /// Parameters flattened layer by layer: base weights, spline
    /// coefficients, then scalers.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.base_weights);
            out.extend_from_slice(&l.spline_coeffs);
            out.extend_from_slice(&l.spline_scalers);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params(), "parameter vector length");
        let mut off = 0;
        for l in &mut self.layers {
            for block in [&mut l.base_weights, &mut l.spline_coeffs, &mut l.spline_scalers] {
                let n = block.len();
                block.copy_from_slice(&params[off..off + n]);
                off += n;
            }
        }
    }

    fn check_batch(&self, batch: &Matrix) -> Result<(), NetworkError> {
        if batch.cols() != self.input_dim() {
            return Err(NetworkError::DimensionMismatch {
                expected: self.input_dim(),
                got: batch.cols(),
                context: "batch columns vs first-layer input width",
            });
        }
        for r in 0..batch.rows() {
            if let Some(c) = batch.row(r).iter().position(|v| !v.is_finite()) {
                return Err(NetworkError::NonFiniteInput { row: r, col: c });
            }
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardTrace, NetworkError> {
        self.forward_impl(batch, false)
    }

    /// Forward pass that also records every branch output.
    pub fn forward_with_branches(&self, batch: &Matrix) -> Result<ForwardTrace, NetworkError> {
        self.forward_impl(batch, true)
    }

    fn forward_impl(&self, batch: &Matrix, keep_branches: bool) -> Result<ForwardTrace, NetworkError> {
        self.check_batch(batch)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut branches = keep_branches.then(Vec::new);
        let mut h = batch.clone();
        for layer in &self.layers {
            let mut bm = keep_branches.then(|| Matrix::zeros(h.rows(), layer.num_branches()));
            let next = layer.forward(&h, bm.as_mut());
            if let (Some(all), Some(m)) = (branches.as_mut(), bm) {
                all.push(m);
            }
            pre.push(h);
            h = next;
        }
        Ok(ForwardTrace {
            pre_activations: pre,
            branch_outputs: branches,
            output: h,
        })
    }

    pub fn predict(&self, batch: &Matrix) -> Result<Matrix, NetworkError> {
        self.forward(batch).map(|t| t.output)
    }

    pub fn backward(&self, trace: &ForwardTrace, output_grad: &Matrix) -> Result<GradientSet, NetworkError> {
        if trace.pre_activations.len() != self.layers.len() {
            return Err(NetworkError::StaleTrace(format!(
                "trace has {} layers, network has {}",
                trace.pre_activations.len(),
                self.layers.len()
            )));
        }
        for (l, (layer, h)) in self.layers.iter().zip(&trace.pre_activations).enumerate() {
            if h.cols() != layer.in_dim || h.rows() != trace.output.rows() {
                return Err(NetworkError::StaleTrace(format!("layer {l} input is {:?}", h.shape())));
            }
        }
        if output_grad.shape() != (trace.output.rows(), self.output_dim()) {
            return Err(NetworkError::StaleTrace(format!(
                "output gradient {:?} vs output {:?}",
                output_grad.shape(),
                trace.output.shape()
            )));
        }
        let mut grads: Vec<LayerGradient> = self
            .layers
            .iter()
            .map(|l| LayerGradient {
                base_weights: vec![0.0; l.base_weights.len()],
                spline_coeffs: vec![0.0; l.spline_coeffs.len()],
                spline_scalers: vec![0.0; l.spline_scalers.len()],
            })
            .collect();
        let mut g = output_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            g = layer.backward(&trace.pre_activations[l], &g, &mut grads[l]);
        }
        Ok(GradientSet { layers: grads, input: g })
    }
}

fn validate_dims(dims: &[usize]) -> Result<(), NetworkError> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(NetworkError::InvalidDims(dims.to_vec()));
    }
    Ok(())
}

/// KAN with default spline scales.
pub fn init_kan(dims: &[usize], grid_size: usize, order: usize, seed: u64) -> Result<KanNetwork, NetworkError> {
    let init = KanInit {
        grid_size,
        order,
        ..KanInit::default()
    };
    KanNetwork::init(dims, &init, seed)
}

/// Common surface of the trainable networks.
pub trait Model: Clone + Send + Sync {
    type Trace;

    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn num_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]);
    fn forward_traced(&self, batch: &Matrix) -> Result<Self::Trace, NetworkError>;
    fn trace_output(trace: &Self::Trace) -> &Matrix;
    /// Flattened parameter gradient for the given output gradient.
    fn param_gradient(&self, trace: &Self::Trace, output_grad: &Matrix) -> Result<Vec<f64>, NetworkError>;

    fn predict(&self, batch: &Matrix) -> Result<Matrix, NetworkError> {
        self.forward_traced(batch).map(|t| Self::trace_output(&t).clone())
    }
}

impl Model for KanNetwork {
    type Trace = ForwardTrace;

    fn input_dim(&self) -> usize {
        KanNetwork::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        KanNetwork::output_dim(self)
    }

    fn num_params(&self) -> usize {
        KanNetwork::num_params(self)
    }

    fn params(&self) -> Vec<f64> {
        KanNetwork::params(self)
    }

    fn set_params(&mut self, params: &[f64]) {
        KanNetwork::set_params(self, params)
    }

    fn forward_traced(&self, batch: &Matrix) -> Result<ForwardTrace, NetworkError> {
        self.forward(batch)
    }

    fn trace_output(trace: &ForwardTrace) -> &Matrix {
        &trace.output
    }

    fn param_gradient(&self, trace: &ForwardTrace, output_grad: &Matrix) -> Result<Vec<f64>, NetworkError> {
        self.backward(trace, output_grad).map(|g| g.flatten())
    }
}
