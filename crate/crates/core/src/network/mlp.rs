//! Plain MLP baseline: affine layers with SiLU between them, linear head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{silu, silu_derivative, Model, NetworkError};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `[o * in_dim + i]`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    layers: Vec<MlpLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpTrace {
    /// Input to each layer (post-activation of the previous one).
    pub pre_activations: Vec<Matrix>,
    /// Affine outputs of each hidden layer before SiLU.
    pub hidden_affine: Vec<Matrix>,
    pub output: Matrix,
}

impl MlpNetwork {
    pub fn from_layers(layers: Vec<MlpLayer>) -> Result<Self, NetworkError> {
        let dims: Vec<usize> = layers
            .iter()
            .map(|l| l.in_dim)
            .chain(layers.last().map(|l| l.out_dim))
            .collect();
        if layers.is_empty()
            || layers.windows(2).any(|w| w[0].out_dim != w[1].in_dim)
            || layers
                .iter()
                .any(|l| l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim)
        {
            return Err(NetworkError::InvalidDims(dims));
        }
        Ok(Self { layers })
    }

    /// Fan-in uniform weights and biases in `±1/sqrt(fan_in)`.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self, NetworkError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(NetworkError::InvalidDims(dims.to_vec()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                MlpLayer {
                    in_dim: w[0],
                    out_dim: w[1],
                    weights: (0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)).collect(),
                    bias: (0..w[1]).map(|_| rng.random_range(-bound..bound)).collect(),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[MlpLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [MlpLayer] {
        &mut self.layers
    }

    pub fn forward(&self, batch: &Matrix) -> Result<MlpTrace, NetworkError> {
        if batch.cols() != self.layers[0].in_dim {
            return Err(NetworkError::DimensionMismatch {
                expected: self.layers[0].in_dim,
                got: batch.cols(),
                context: "batch columns vs first-layer input width",
            });
        }
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut affine = Vec::with_capacity(last);
        let mut h = batch.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Matrix::zeros(h.rows(), layer.out_dim);
            for b in 0..h.rows() {
                let x = h.row(b);
                for o in 0..layer.out_dim {
                    let w = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    let v: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + layer.bias[o];
                    z.set(b, o, v);
                }
            }
            pre.push(h);
            if l < last {
                let mut a = z.clone();
                a.as_mut_slice().iter_mut().for_each(|v| *v = silu(*v));
                affine.push(z);
                h = a;
            } else {
                h = z;
            }
        }
        Ok(MlpTrace {
            pre_activations: pre,
            hidden_affine: affine,
            output: h,
        })
    }

    /// Flattened parameter gradient (weights then bias, per layer) and the input gradient.
    pub fn backward(&self, trace: &MlpTrace, output_grad: &Matrix) -> Result<(Vec<f64>, Matrix), NetworkError> {
        if trace.pre_activations.len() != self.layers.len()
            || output_grad.shape() != trace.output.shape()
            || trace.output.cols() != self.layers.last().unwrap().out_dim
        {
            return Err(NetworkError::StaleTrace("MLP trace shape mismatch".into()));
        }
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        let mut g = output_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let h = &trace.pre_activations[l];
            let (gw, gb) = &mut grads[l];
            let mut gin = Matrix::zeros(h.rows(), layer.in_dim);
            for b in 0..h.rows() {
                for o in 0..layer.out_dim {
                    let go = g.get(b, o);
                    gb[o] += go;
                    for i in 0..layer.in_dim {
                        gw[o * layer.in_dim + i] += go * h.get(b, i);
                        let v = gin.get(b, i) + go * layer.weights[o * layer.in_dim + i];
                        gin.set(b, i, v);
                    }
                }
            }
            if l > 0 {
                let z = &trace.hidden_affine[l - 1];
                for b in 0..gin.rows() {
                    for i in 0..gin.cols() {
                        gin.set(b, i, gin.get(b, i) * silu_derivative(z.get(b, i)));
                    }
                }
            }
            g = gin;
        }
        let flat = grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect();
        Ok((flat, g))
    }
}

impl Model for MlpNetwork {
    type Trace = MlpTrace;

    fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params(), "parameter vector length");
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + n]);
            off += n;
            let n = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + n]);
            off += n;
        }
    }

    fn forward_traced(&self, batch: &Matrix) -> Result<MlpTrace, NetworkError> {
        self.forward(batch)
    }

    fn trace_output(trace: &MlpTrace) -> &Matrix {
        &trace.output
    }

    fn param_gradient(&self, trace: &MlpTrace, output_grad: &Matrix) -> Result<Vec<f64>, NetworkError> {
        self.backward(trace, output_grad).map(|(g, _)| g)
    }
}
