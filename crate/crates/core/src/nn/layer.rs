//! Layer kinds and their batch forward/backward passes.
//!
//! Activations are batch-major matrices (`N x D`). Convolution and pooling
//! layers read their input as `positions x channels`, row-major within a
//! sample, and emit `positions x filters` in the same arrangement, so a
//! window of `width` consecutive positions is one contiguous slice.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConvAxis {
    Frequency,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Sigmoid,
    Relu,
    Linear,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(format!("unknown activation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Dense {
        n_in: usize,
        n_out: usize,
    },
    Conv1d {
        axis: ConvAxis,
        positions: usize,
        in_channels: usize,
        n_filters: usize,
        filter_width: usize,
    },
    /// Non-overlapping max-pooling; trailing positions that do not fill a
    /// whole pool are dropped.
    MaxPool1d {
        positions: usize,
        channels: usize,
        pool_size: usize,
    },
    Activation(Activation),
    Softmax,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        match *self {
            LayerSpec::Dense { n_in, n_out } => {
                positive("dense n_in", n_in)?;
                positive("dense n_out", n_out)
            }
            LayerSpec::Conv1d {
                positions,
                in_channels,
                n_filters,
                filter_width,
                ..
            } => {
                positive("conv positions", positions)?;
                positive("conv in_channels", in_channels)?;
                positive("conv n_filters", n_filters)?;
                positive("conv filter_width", filter_width)?;
                if filter_width > positions {
                    return Err(Error::config(format!(
                        "filter width {filter_width} exceeds input extent {positions}"
                    )));
                }
                Ok(())
            }
            LayerSpec::MaxPool1d {
                positions,
                channels,
                pool_size,
            } => {
                positive("pool positions", positions)?;
                positive("pool channels", channels)?;
                positive("pool size", pool_size)?;
                if pool_size > positions {
                    return Err(Error::config(format!(
                        "pool size {pool_size} exceeds input extent {positions}"
                    )));
                }
                Ok(())
            }
            LayerSpec::Activation(_) | LayerSpec::Softmax => Ok(()),
        }
    }

    /// Input width, or `None` for element-wise layers.
    pub fn in_dim(&self) -> Option<usize> {
        match *self {
            LayerSpec::Dense { n_in, .. } => Some(n_in),
            LayerSpec::Conv1d {
                positions,
                in_channels,
                ..
            } => Some(positions * in_channels),
            LayerSpec::MaxPool1d {
                positions,
                channels,
                ..
            } => Some(positions * channels),
            LayerSpec::Activation(_) | LayerSpec::Softmax => None,
        }
    }

    pub fn out_dim(&self, in_dim: usize) -> usize {
        match *self {
            LayerSpec::Dense { n_out, .. } => n_out,
            LayerSpec::Conv1d {
                positions,
                n_filters,
                filter_width,
                ..
            } => (positions - filter_width + 1) * n_filters,
            LayerSpec::MaxPool1d {
                positions,
                channels,
                pool_size,
            } => (positions / pool_size) * channels,
            LayerSpec::Activation(_) | LayerSpec::Softmax => in_dim,
        }
    }

    /// Shapes of the weight and bias tensors.
    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        match *self {
            LayerSpec::Dense { n_in, n_out } => vec![(n_out, n_in), (1, n_out)],
            LayerSpec::Conv1d {
                in_channels,
                n_filters,
                filter_width,
                ..
            } => vec![(n_filters, filter_width * in_channels), (1, n_filters)],
            _ => Vec::new(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::MaxPool1d { .. } => "maxpool1d",
            LayerSpec::Activation(_) => "activation",
            LayerSpec::Softmax => "softmax",
        }
    }
}

/// A layer spec together with its parameters (weight, then bias).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: Vec<Matrix>,
}

#[derive(Debug)]
pub(crate) enum LayerCache {
    Dense { input: Matrix },
    Conv { cols: Matrix, batch: usize },
    Pool { argmax: Vec<usize>, in_dim: usize },
    Sigmoid { output: Matrix },
    Relu { input: Matrix },
    Linear,
    Softmax { output: Matrix },
}

impl Layer {
    /// Glorot-uniform weights drawn at single precision, zero bias.
    pub fn init(spec: LayerSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let (fan_in, fan_out) = match spec {
            LayerSpec::Dense { n_in, n_out } => (n_in, n_out),
            LayerSpec::Conv1d {
                in_channels,
                n_filters,
                filter_width,
                ..
            } => (filter_width * in_channels, filter_width * n_filters),
            _ => (0, 0),
        };
        let params = spec
            .param_shapes()
            .into_iter()
            .enumerate()
            .map(|(i, shape)| {
                if i == 0 {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
                    Array2::from_shape_simple_fn(shape, || rng.random_range(-limit..=limit) as f64)
                } else {
                    Array2::zeros(shape)
                }
            })
            .collect();
        Ok(Self { spec, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    pub(crate) fn forward(&self, x: ArrayView2<f64>, index: usize, train: bool) -> Result<(Matrix, Option<LayerCache>)> {
        if let Some(expected) = self.spec.in_dim() {
            if x.ncols() != expected {
                return Err(Error::Dimension {
                    layer: index,
                    expected,
                    got: x.ncols(),
                });
            }
        }
        let n = x.nrows();
        let out = match self.spec {
            LayerSpec::Dense { .. } => {
                let y = x.dot(&self.params[0].t()) + &self.params[1];
                let cache = train.then(|| LayerCache::Dense { input: x.to_owned() });
                (y, cache)
            }
            LayerSpec::Conv1d {
                positions,
                in_channels,
                n_filters,
                filter_width,
                ..
            } => {
                let q = positions - filter_width + 1;
                let span = filter_width * in_channels;
                let mut cols = Array2::zeros((n * q, span));
                for i in 0..n {
                    let row = x.row(i);
                    for p in 0..q {
                        cols.row_mut(i * q + p)
                            .assign(&row.slice(s![p * in_channels..p * in_channels + span]));
                    }
                }
                let y = cols.dot(&self.params[0].t()) + &self.params[1];
                let y = y
                    .into_shape_with_order((n, q * n_filters))
                    .expect("contiguous conv output");
                let cache = train.then_some(LayerCache::Conv { cols, batch: n });
                (y, cache)
            }
            LayerSpec::MaxPool1d {
                positions,
                channels,
                pool_size,
            } => {
                let q = positions / pool_size;
                let mut y = Array2::zeros((n, q * channels));
                let mut argmax = if train { vec![0; n * q * channels] } else { Vec::new() };
                for i in 0..n {
                    let row = x.row(i);
                    for p in 0..q {
                        for c in 0..channels {
                            let mut best = (p * pool_size) * channels + c;
                            for k in 1..pool_size {
                                let idx = (p * pool_size + k) * channels + c;
                                if row[idx] > row[best] {
                                    best = idx;
                                }
                            }
                            y[[i, p * channels + c]] = row[best];
                            if train {
                                argmax[(i * q + p) * channels + c] = best;
                            }
                        }
                    }
                }
                let cache = train.then_some(LayerCache::Pool {
                    argmax,
                    in_dim: x.ncols(),
                });
                (y, cache)
            }
            LayerSpec::Activation(Activation::Sigmoid) => {
                let y = x.mapv(sigmoid);
                let cache = train.then(|| LayerCache::Sigmoid { output: y.clone() });
                (y, cache)
            }
            LayerSpec::Activation(Activation::Relu) => {
                let y = x.mapv(|v| v.max(0.0));
                let cache = train.then(|| LayerCache::Relu { input: x.to_owned() });
                (y, cache)
            }
            LayerSpec::Activation(Activation::Linear) => (x.to_owned(), train.then_some(LayerCache::Linear)),
            LayerSpec::Softmax => {
                let y = softmax_rows(x);
                let cache = train.then(|| LayerCache::Softmax { output: y.clone() });
                (y, cache)
            }
        };
        if !out.0.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence(format!("non-finite output at layer {index}")));
        }
        Ok(out)
    }

    /// Returns the input gradient and accumulates parameter gradients into
    /// `grads` (one slot per parameter tensor of this layer). Without
    /// `need_dx`, layers with parameters skip the input gradient and return
    /// an empty matrix.
    pub(crate) fn backward(&self, cache: LayerCache, dy: Matrix, grads: &mut [Matrix], need_dx: bool) -> Matrix {
        match (&self.spec, cache) {
            (LayerSpec::Dense { .. }, LayerCache::Dense { input }) => {
                grads[0] += &dy.t().dot(&input);
                grads[1] += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
                if !need_dx {
                    return Array2::zeros((0, 0));
                }
                dy.dot(&self.params[0])
            }
            (
                LayerSpec::Conv1d {
                    positions,
                    in_channels,
                    n_filters,
                    filter_width,
                    ..
                },
                LayerCache::Conv { cols, batch },
            ) => {
                let q = positions - filter_width + 1;
                let span = filter_width * in_channels;
                let dy = dy
                    .into_shape_with_order((batch * q, *n_filters))
                    .expect("contiguous conv gradient");
                grads[0] += &dy.t().dot(&cols);
                grads[1] += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
                if !need_dx {
                    return Array2::zeros((0, 0));
                }
                let dcols = dy.dot(&self.params[0]);
                let mut dx = Array2::zeros((batch, positions * in_channels));
                for i in 0..batch {
                    let mut row = dx.row_mut(i);
                    for p in 0..q {
                        let mut window = row.slice_mut(s![p * in_channels..p * in_channels + span]);
                        window += &dcols.row(i * q + p);
                    }
                }
                dx
            }
            (LayerSpec::MaxPool1d { .. }, LayerCache::Pool { argmax, in_dim }) => {
                let (n, out_dim) = dy.dim();
                let mut dx = Array2::zeros((n, in_dim));
                for i in 0..n {
                    for j in 0..out_dim {
                        dx[[i, argmax[i * out_dim + j]]] += dy[[i, j]];
                    }
                }
                dx
            }
            (_, LayerCache::Sigmoid { output }) => {
                let mut dx = dy;
                dx.zip_mut_with(&output, |d, &y| *d *= y * (1.0 - y));
                dx
            }
            (_, LayerCache::Relu { input }) => {
                let mut dx = dy;
                dx.zip_mut_with(&input, |d, &x| {
                    if x <= 0.0 {
                        *d = 0.0
                    }
                });
                dx
            }
            (_, LayerCache::Linear) => dy,
            (_, LayerCache::Softmax { output }) => {
                let dot = (&dy * &output).sum_axis(Axis(1)).insert_axis(Axis(1));
                (dy - &dot) * &output
            }
            (spec, _) => unreachable!("cache does not belong to {spec:?}"),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_rows(x: ArrayView2<f64>) -> Matrix {
    let mut y = x.to_owned();
    for mut row in y.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    y
}

pub(crate) fn zero_like(params: &[Matrix]) -> Vec<Matrix> {
    params.iter().map(|p| Array2::zeros(p.raw_dim())).collect()
}
