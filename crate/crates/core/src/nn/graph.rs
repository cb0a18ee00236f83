//! Multi-stream layered networks.
//!
//! A [`NetworkGraph`] has one or more input streams, each reading either
//! the acoustic or the articulatory input through an optional column
//! permutation, followed by its own layers. Stream outputs are
//! concatenated in stream order (feature-map fusion) and fed to a shared
//! trunk of layers.

use ndarray::{concatenate, s, Array2, Axis};

use super::layer::{zero_like, Layer, LayerCache, LayerSpec};
use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputSource {
    Acoustic,
    Articulatory,
}

/// Column arrangement applied to a stream's input before its first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputView {
    Identity,
    /// Spliced `[context][stream][band]` columns regrouped as
    /// `[band][stream][context]`, i.e. bands become convolution positions
    /// and every (stream, context) pair becomes a channel.
    BandMajor {
        n_bands: usize,
        n_streams: usize,
        context: usize,
    },
}

impl InputView {
    /// `perm[out] = in` column map, or `None` for the identity.
    fn permutation(&self) -> Option<Vec<usize>> {
        match *self {
            InputView::Identity => None,
            InputView::BandMajor {
                n_bands,
                n_streams,
                context,
            } => {
                let mut perm = Vec::with_capacity(n_bands * n_streams * context);
                for b in 0..n_bands {
                    for s in 0..n_streams {
                        for c in 0..context {
                            perm.push(c * n_streams * n_bands + s * n_bands + b);
                        }
                    }
                }
                Some(perm)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub source: InputSource,
    pub view: InputView,
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

/// Widths around the fusion point of a two-stream graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionLayout {
    pub freq_stream_dims: usize,
    pub time_stream_dims: usize,
    pub fused_dims: usize,
}

/// Per-frame inputs. `tv` is required only by graphs with an articulatory
/// stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub acoustic: Matrix,
    pub tv: Option<Matrix>,
}

impl ModelInput {
    pub fn acoustic(acoustic: Matrix) -> Self {
        Self { acoustic, tv: None }
    }

    pub fn with_tv(acoustic: Matrix, tv: Matrix) -> Self {
        Self {
            acoustic,
            tv: Some(tv),
        }
    }

    pub fn n_frames(&self) -> usize {
        self.acoustic.nrows()
    }

    /// Selects the given rows from every present input.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            acoustic: self.acoustic.select(Axis(0), rows),
            tv: self.tv.as_ref().map(|t| t.select(Axis(0), rows)),
        }
    }
}

/// Parameter gradients, in [`NetworkGraph::params`] order, plus the
/// gradient with respect to each input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<Matrix>,
    pub acoustic_input: Option<Matrix>,
    pub tv_input: Option<Matrix>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug)]
struct GraphCache {
    streams: Vec<Vec<LayerCache>>,
    stream_dims: Vec<usize>,
    trunk: Vec<LayerCache>,
}

#[derive(Debug)]
pub struct NetworkGraph {
    pub streams: Vec<Stream>,
    pub trunk: Vec<Layer>,
    fusion: Option<FusionLayout>,
    perms: Vec<Option<Vec<usize>>>,
    cache: Option<GraphCache>,
}

impl Clone for NetworkGraph {
    fn clone(&self) -> Self {
        Self {
            streams: self.streams.clone(),
            trunk: self.trunk.clone(),
            fusion: self.fusion,
            perms: self.perms.clone(),
            cache: None,
        }
    }
}

impl PartialEq for NetworkGraph {
    fn eq(&self, other: &Self) -> bool {
        self.streams == other.streams && self.trunk == other.trunk
    }
}

fn chain(layers: &[Layer], mut dim: usize, first_index: usize) -> Result<usize> {
    for (i, layer) in layers.iter().enumerate() {
        layer.spec.validate()?;
        if let Some(expected) = layer.spec.in_dim() {
            if expected != dim {
                return Err(Error::Dimension {
                    layer: first_index + i,
                    expected,
                    got: dim,
                });
            }
        }
        for (p, shape) in layer.params.iter().zip(layer.spec.param_shapes()) {
            if p.dim() != shape {
                return Err(Error::shape(format!(
                    "layer {}: parameter shape {:?}, expected {shape:?}",
                    first_index + i,
                    p.dim()
                )));
            }
        }
        dim = layer.spec.out_dim(dim);
    }
    Ok(dim)
}

impl NetworkGraph {
    pub fn new(streams: Vec<Stream>, trunk: Vec<Layer>) -> Result<Self> {
        if streams.is_empty() {
            return Err(Error::config("a network needs at least one input stream"));
        }
        let mut index = 0;
        let mut stream_dims = Vec::with_capacity(streams.len());
        let mut perms = Vec::with_capacity(streams.len());
        for stream in &streams {
            let perm = stream.view.permutation();
            if let Some(p) = &perm {
                if p.len() != stream.input_dim {
                    return Err(Error::shape(format!(
                        "input view covers {} columns, stream input has {}",
                        p.len(),
                        stream.input_dim
                    )));
                }
            }
            perms.push(perm);
            stream_dims.push(chain(&stream.layers, stream.input_dim, index)?);
            index += stream.layers.len();
        }
        let fused: usize = stream_dims.iter().sum();
        chain(&trunk, fused, index)?;
        let fusion = (stream_dims.len() == 2).then(|| FusionLayout {
            freq_stream_dims: stream_dims[0],
            time_stream_dims: stream_dims[1],
            fused_dims: fused,
        });
        Ok(Self {
            streams,
            trunk,
            fusion,
            perms,
            cache: None,
        })
    }

    pub fn fusion(&self) -> Option<FusionLayout> {
        self.fusion
    }

    /// Output width of each stream, i.e. the widths concatenated at fusion.
    pub fn stream_out_dims(&self) -> Vec<usize> {
        self.streams
            .iter()
            .map(|s| {
                s.layers
                    .iter()
                    .fold(s.input_dim, |d, l| l.spec.out_dim(d))
            })
            .collect()
    }

    pub fn fused_dim(&self) -> usize {
        self.stream_out_dims().iter().sum()
    }

    pub fn output_dim(&self) -> usize {
        self.trunk.iter().fold(self.fused_dim(), |d, l| l.spec.out_dim(d))
    }

    pub fn input_dim(&self, source: InputSource) -> Option<usize> {
        self.streams
            .iter()
            .find(|s| s.source == source)
            .map(|s| s.input_dim)
    }

    pub fn needs_tv(&self) -> bool {
        self.input_dim(InputSource::Articulatory).is_some()
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.streams
            .iter()
            .flat_map(|s| s.layers.iter())
            .chain(self.trunk.iter())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.streams
            .iter_mut()
            .flat_map(|s| s.layers.iter_mut())
            .chain(self.trunk.iter_mut())
    }

    pub fn params(&self) -> Vec<&Matrix> {
        self.layers().flat_map(|l| l.params.iter()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers_mut().flat_map(|l| l.params.iter_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(Layer::param_count).sum()
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    fn ends_in_softmax(&self) -> bool {
        matches!(self.trunk.last(), Some(l) if l.spec == LayerSpec::Softmax)
    }

    fn stream_input<'a>(&self, input: &'a ModelInput, i: usize) -> Result<&'a Matrix> {
        let stream = &self.streams[i];
        let x = match stream.source {
            InputSource::Acoustic => &input.acoustic,
            InputSource::Articulatory => input
                .tv
                .as_ref()
                .ok_or_else(|| Error::Input("network has an articulatory stream but no TV input was given".into()))?,
        };
        if x.ncols() != stream.input_dim {
            return Err(Error::Dimension {
                layer: self.streams[..i].iter().map(|s| s.layers.len()).sum(),
                expected: stream.input_dim,
                got: x.ncols(),
            });
        }
        if x.nrows() != input.acoustic.nrows() {
            return Err(Error::shape(format!(
                "acoustic input has {} frames, TV input has {}",
                input.acoustic.nrows(),
                x.nrows()
            )));
        }
        Ok(x)
    }

    fn run(&self, input: &ModelInput, train: bool, logits: bool) -> Result<(Matrix, Option<GraphCache>)> {
        let mut index = 0;
        let mut outputs = Vec::with_capacity(self.streams.len());
        let mut stream_caches = Vec::with_capacity(self.streams.len());
        for (i, stream) in self.streams.iter().enumerate() {
            let x = self.stream_input(input, i)?;
            let mut h = match &self.perms[i] {
                Some(perm) => gather_columns(x, perm),
                None => x.clone(),
            };
            let mut caches = Vec::with_capacity(stream.layers.len());
            for layer in &stream.layers {
                let (y, c) = layer.forward(h.view(), index, train)?;
                caches.extend(c);
                h = y;
                index += 1;
            }
            outputs.push(h);
            stream_caches.push(caches);
        }
        let stream_dims: Vec<usize> = outputs.iter().map(|o| o.ncols()).collect();
        let mut h = if outputs.len() == 1 {
            outputs.pop().unwrap()
        } else {
            let views: Vec<_> = outputs.iter().map(|o| o.view()).collect();
            concatenate(Axis(1), &views).expect("stream outputs share a frame count")
        };

        let n_trunk = if logits && self.ends_in_softmax() {
            self.trunk.len() - 1
        } else {
            self.trunk.len()
        };
        let mut trunk_caches = Vec::with_capacity(n_trunk);
        for layer in &self.trunk[..n_trunk] {
            let (y, c) = layer.forward(h.view(), index, train)?;
            trunk_caches.extend(c);
            h = y;
            index += 1;
        }
        let cache = train.then_some(GraphCache {
            streams: stream_caches,
            stream_dims,
            trunk: trunk_caches,
        });
        Ok((h, cache))
    }

    /// Full forward pass. Train mode caches activations for [`Self::backward`];
    /// eval mode caches nothing and drops any stale cache.
    pub fn forward(&mut self, input: &ModelInput, mode: Mode) -> Result<Matrix> {
        let (y, cache) = self.run(input, mode == Mode::Train, false)?;
        self.cache = cache;
        Ok(y)
    }

    /// Like [`Self::forward`] but stops before a trailing softmax layer.
    pub fn forward_logits(&mut self, input: &ModelInput, mode: Mode) -> Result<Matrix> {
        let (y, cache) = self.run(input, mode == Mode::Train, true)?;
        self.cache = cache;
        Ok(y)
    }

    /// Eval-mode forward on a shared graph.
    pub fn predict(&self, input: &ModelInput) -> Result<Matrix> {
        Ok(self.run(input, false, false)?.0)
    }

    pub fn predict_logits(&self, input: &ModelInput) -> Result<Matrix> {
        Ok(self.run(input, false, true)?.0)
    }

    /// Backpropagates `loss_grad` (gradient with respect to the output of the
    /// last train-mode forward) and consumes the cached activations.
    pub fn backward(&mut self, loss_grad: &Matrix) -> Result<Gradients> {
        self.backward_with(loss_grad, true)
    }

    /// [`Self::backward`] without the input gradients, which saves the
    /// most expensive product of each stream's first layer.
    pub fn backward_params(&mut self, loss_grad: &Matrix) -> Result<Gradients> {
        self.backward_with(loss_grad, false)
    }

    fn backward_with(&mut self, loss_grad: &Matrix, need_input: bool) -> Result<Gradients> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a train-mode forward".into()))?;
        let mut grads: Vec<Vec<Matrix>> = self.layers().map(|l| zero_like(&l.params)).collect();
        let n_stream_layers: usize = self.streams.iter().map(|s| s.layers.len()).sum();

        let mut dy = loss_grad.clone();
        let trunk_feeds_params = need_input || n_stream_layers > 0;
        for (j, c) in cache.trunk.into_iter().enumerate().rev() {
            let need_dx = j > 0 || trunk_feeds_params;
            dy = self.trunk[j].backward(c, dy, &mut grads[n_stream_layers + j], need_dx);
        }
        if !need_input {
            if n_stream_layers > 0 {
                let mut col = 0;
                let mut first = 0;
                for (i, caches) in cache.streams.into_iter().enumerate() {
                    let stream = &self.streams[i];
                    let width = cache.stream_dims[i];
                    let mut g = dy.slice(s![.., col..col + width]).to_owned();
                    col += width;
                    for (j, c) in caches.into_iter().enumerate().rev() {
                        g = stream.layers[j].backward(c, g, &mut grads[first + j], j > 0);
                    }
                    first += stream.layers.len();
                }
            }
            return Ok(Gradients {
                params: grads.into_iter().flatten().collect(),
                acoustic_input: None,
                tv_input: None,
            });
        }

        let mut acoustic: Option<Matrix> = None;
        let mut tv: Option<Matrix> = None;
        let mut col = 0;
        let mut first = 0;
        for (i, caches) in cache.streams.into_iter().enumerate() {
            let stream = &self.streams[i];
            let width = cache.stream_dims[i];
            let mut g = dy.slice(s![.., col..col + width]).to_owned();
            col += width;
            for (j, c) in caches.into_iter().enumerate().rev() {
                g = stream.layers[j].backward(c, g, &mut grads[first + j], true);
            }
            first += stream.layers.len();
            let g = match &self.perms[i] {
                Some(perm) => {
                    let mut raw = Array2::zeros((g.nrows(), stream.input_dim));
                    for (mut dst, src) in raw.rows_mut().into_iter().zip(g.rows()) {
                        for (&to, &v) in perm.iter().zip(src) {
                            dst[to] += v;
                        }
                    }
                    raw
                }
                None => g,
            };
            let slot = match stream.source {
                InputSource::Acoustic => &mut acoustic,
                InputSource::Articulatory => &mut tv,
            };
            match slot {
                Some(acc) => *acc += &g,
                None => *slot = Some(g),
            }
        }

        Ok(Gradients {
            params: grads.into_iter().flatten().collect(),
            acoustic_input: acoustic,
            tv_input: tv,
        })
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            params: self.params().into_iter().map(|p| Array2::zeros(p.raw_dim())).collect(),
            acoustic_input: None,
            tv_input: None,
        }
    }

    /// `p <- p - lr * g / batch_size`, with the result rounded to single
    /// precision so parameters always survive a checkpoint bit-exactly.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64, batch_size: usize) -> Result<()> {
        if !(lr >= 0.0) || batch_size == 0 {
            return Err(Error::config(format!(
                "sgd needs lr >= 0 and a positive batch size, got lr={lr} batch={batch_size}"
            )));
        }
        if !grads.is_finite() {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        let scale = lr / batch_size as f64;
        let mut params = self.params_mut();
        if params.len() != grads.params.len() {
            return Err(Error::shape(format!(
                "{} gradient tensors for {} parameters",
                grads.params.len(),
                params.len()
            )));
        }
        for (p, g) in params.iter_mut().zip(&grads.params) {
            if p.dim() != g.dim() {
                return Err(Error::shape("gradient shape does not match parameter"));
            }
            p.zip_mut_with(g, |w, &d| *w = (*w - scale * d) as f32 as f64);
        }
        Ok(())
    }

    /// One line per layer boundary, in evaluation order.
    pub fn shape_ledger(&self) -> Vec<LedgerEntry> {
        let mut out = Vec::new();
        for (i, stream) in self.streams.iter().enumerate() {
            let mut dim = stream.input_dim;
            for layer in &stream.layers {
                let next = layer.spec.out_dim(dim);
                out.push(LedgerEntry {
                    place: Place::Stream(i),
                    spec: layer.spec.clone(),
                    in_dim: dim,
                    out_dim: next,
                });
                dim = next;
            }
        }
        let mut dim = self.fused_dim();
        for layer in &self.trunk {
            let next = layer.spec.out_dim(dim);
            out.push(LedgerEntry {
                place: Place::Trunk,
                spec: layer.spec.clone(),
                in_dim: dim,
                out_dim: next,
            });
            dim = next;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Place {
    Stream(usize),
    Trunk,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub place: Place,
    pub spec: LayerSpec,
    pub in_dim: usize,
    pub out_dim: usize,
}

/// `out[:, j] = x[:, perm[j]]`, walked row by row.
fn gather_columns(x: &Matrix, perm: &[usize]) -> Matrix {
    let mut out = Array2::zeros((x.nrows(), perm.len()));
    for (mut dst, src) in out.rows_mut().into_iter().zip(x.rows()) {
        for (d, &from) in dst.iter_mut().zip(perm) {
            *d = src[from];
        }
    }
    out
}

/// Free-function form of [`NetworkGraph::sgd_step`].
pub fn sgd_step(net: &mut NetworkGraph, grads: &Gradients, lr: f64, batch_size: usize) -> Result<()> {
    net.sgd_step(grads, lr, batch_size)
}
