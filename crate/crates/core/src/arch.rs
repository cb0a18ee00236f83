//! The four acoustic-model topologies.
//!
//! All four share the same dense trunk (`n_hidden_layers` x `hidden_width`,
//! then a softmax over `n_classes`) and differ only in the streams feeding
//! it:
//!
//! | kind  | streams                                                    |
//! |-------|------------------------------------------------------------|
//! | dnn   | spliced filterbank features, unchanged                     |
//! | cnn   | frequency convolution over the filterbank                  |
//! | tfcnn | frequency convolution + time convolution, both on FB       |
//! | fcnn  | frequency convolution on FB + time convolution on TVs      |
//!
//! For frequency convolution the 40 bands are positions and every
//! (stream, context frame) pair is a channel: 40 x 51 at 17 frames with
//! deltas. Time convolution uses the context frames as positions.

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::nn::{
    Activation, ConvAxis, InputSource, InputView, Layer, LayerSpec, Matrix, NetworkGraph, Stream,
};

pub use crate::nn::FusionLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchKind {
    Dnn,
    Cnn,
    Tfcnn,
    Fcnn,
}

impl ArchKind {
    pub const ALL: [ArchKind; 4] = [ArchKind::Dnn, ArchKind::Cnn, ArchKind::Tfcnn, ArchKind::Fcnn];

    pub fn name(&self) -> &'static str {
        match self {
            ArchKind::Dnn => "dnn",
            ArchKind::Cnn => "cnn",
            ArchKind::Tfcnn => "tfcnn",
            ArchKind::Fcnn => "fcnn",
        }
    }

    pub fn uses_tv(&self) -> bool {
        *self == ArchKind::Fcnn
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ArchKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown architecture {s:?} (dnn, cnn, tfcnn, fcnn)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvStreamSpec {
    pub n_filters: usize,
    pub filter_width: usize,
    pub pool_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcousticLayout {
    pub bands: usize,
    pub streams: usize,
    pub context: usize,
}

impl AcousticLayout {
    pub fn dim(&self) -> usize {
        self.bands * self.streams * self.context
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TvLayout {
    pub tvs: usize,
    pub context: usize,
}

impl TvLayout {
    pub fn dim(&self) -> usize {
        self.tvs * self.context
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchSpec {
    pub kind: ArchKind,
    pub n_hidden_layers: usize,
    pub hidden_width: usize,
    pub n_classes: usize,
    pub acoustic: AcousticLayout,
    pub tv: Option<TvLayout>,
    pub freq_conv: ConvStreamSpec,
    /// Time convolution: over acoustic frames for tfcnn, over TVs for fcnn.
    pub time_conv: ConvStreamSpec,
    pub activation: Activation,
    pub seed: u64,
}

/// Network sizing. `Paper` builds full-size graphs; `Toy` maps each
/// full-size width through [`Scale::TOY_WIDTHS`] so every shape path is
/// still exercised at desk scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scale {
    Toy,
    Paper,
}

impl Scale {
    /// Full-size width and its toy counterpart.
    pub const TOY_WIDTHS: [(usize, usize); 4] = [(1024, 64), (2048, 128), (200, 16), (75, 8)];

    pub fn width(&self, full: usize) -> usize {
        match self {
            Scale::Paper => full,
            Scale::Toy => Self::TOY_WIDTHS
                .iter()
                .find(|(f, _)| *f == full)
                .map_or(full, |&(_, t)| t),
        }
    }

    pub fn apply(&self, spec: &ArchSpec) -> ArchSpec {
        let mut out = spec.clone();
        out.hidden_width = self.width(spec.hidden_width);
        out.freq_conv.n_filters = self.width(spec.freq_conv.n_filters);
        out.time_conv.n_filters = self.width(spec.time_conv.n_filters);
        out
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scale::Toy => "toy",
            Scale::Paper => "paper",
        }
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "toy" => Ok(Scale::Toy),
            "paper" => Ok(Scale::Paper),
            other => Err(format!("unknown scale {other:?} (toy, paper)")),
        }
    }
}

impl ArchSpec {
    /// 4 x 1024 trunk with full-size convolution streams.
    pub fn new(kind: ArchKind, n_classes: usize) -> Self {
        Self {
            kind,
            n_hidden_layers: 4,
            hidden_width: 1024,
            n_classes,
            acoustic: AcousticLayout {
                bands: 40,
                streams: 3,
                context: 17,
            },
            tv: Some(TvLayout { tvs: 8, context: 17 }),
            freq_conv: ConvStreamSpec {
                n_filters: 200,
                filter_width: 8,
                pool_size: 3,
            },
            time_conv: ConvStreamSpec {
                n_filters: 75,
                filter_width: 5,
                pool_size: 5,
            },
            activation: Activation::Sigmoid,
            seed: 0,
        }
    }

    /// 6 x 2048 trunk, the large-data configuration.
    pub fn large(kind: ArchKind, n_classes: usize) -> Self {
        Self {
            n_hidden_layers: 6,
            hidden_width: 2048,
            ..Self::new(kind, n_classes)
        }
    }

    pub fn scaled(&self, scale: Scale) -> Self {
        scale.apply(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::config("n_classes must be at least 2"));
        }
        if self.n_hidden_layers > 0 && self.hidden_width == 0 {
            return Err(Error::config("hidden_width must be positive"));
        }
        if self.acoustic.dim() == 0 {
            return Err(Error::config("acoustic layout must be non-empty"));
        }
        if self.kind == ArchKind::Fcnn {
            match self.tv {
                None => return Err(Error::config("fcnn needs a tv_layout")),
                Some(tv) if tv.dim() == 0 => return Err(Error::config("tv_layout must be non-empty")),
                _ => {}
            }
        }
        Ok(())
    }

    /// Every field, one `key = value` line each; parses back with
    /// [`ArchSpec::from_config`].
    pub fn to_config(&self) -> String {
        let tv = match self.tv {
            Some(tv) => format!("{}x{}", tv.tvs, tv.context),
            None => "none".into(),
        };
        format!(
            "kind = {}\nn_hidden_layers = {}\nhidden_width = {}\nn_classes = {}\n\
             bands = {}\nstreams = {}\ncontext = {}\ntv_layout = {}\n\
             freq_filters = {}\nfreq_width = {}\nfreq_pool = {}\n\
             time_filters = {}\ntime_width = {}\ntime_pool = {}\n\
             activation = {}\nseed = {}\n",
            self.kind,
            self.n_hidden_layers,
            self.hidden_width,
            self.n_classes,
            self.acoustic.bands,
            self.acoustic.streams,
            self.acoustic.context,
            tv,
            self.freq_conv.n_filters,
            self.freq_conv.filter_width,
            self.freq_conv.pool_size,
            self.time_conv.n_filters,
            self.time_conv.filter_width,
            self.time_conv.pool_size,
            self.activation.name(),
            self.seed,
        )
    }

    /// Overrides fields from `kv`, consuming the keys it recognizes.
    pub fn apply_config(&mut self, kv: &mut KeyValues) -> Result<()> {
        let mut kind = self.kind.name().to_string();
        kv.take("kind", &mut kind)?;
        self.kind = kind.parse().map_err(Error::Config)?;
        kv.take("n_hidden_layers", &mut self.n_hidden_layers)?;
        kv.take("hidden_width", &mut self.hidden_width)?;
        kv.take("n_classes", &mut self.n_classes)?;
        kv.take("bands", &mut self.acoustic.bands)?;
        kv.take("streams", &mut self.acoustic.streams)?;
        kv.take("context", &mut self.acoustic.context)?;
        if let Some(tv) = kv.take_str("tv_layout") {
            self.tv = if tv == "none" {
                None
            } else {
                let (a, b) = tv
                    .split_once('x')
                    .ok_or_else(|| Error::config(format!("tv_layout {tv:?}: expected <tvs>x<context> or none")))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::config(format!("tv_layout {tv:?}: {e}")))
                };
                Some(TvLayout {
                    tvs: parse(a)?,
                    context: parse(b)?,
                })
            };
        }
        kv.take("freq_filters", &mut self.freq_conv.n_filters)?;
        kv.take("freq_width", &mut self.freq_conv.filter_width)?;
        kv.take("freq_pool", &mut self.freq_conv.pool_size)?;
        kv.take("time_filters", &mut self.time_conv.n_filters)?;
        kv.take("time_width", &mut self.time_conv.filter_width)?;
        kv.take("time_pool", &mut self.time_conv.pool_size)?;
        kv.take("activation", &mut self.activation)?;
        kv.take("seed", &mut self.seed)?;
        Ok(())
    }

    pub fn from_config(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut spec = ArchSpec::new(ArchKind::Dnn, 2);
        spec.apply_config(&mut kv)?;
        kv.finish()?;
        Ok(spec)
    }
}

fn conv_stream(
    source: InputSource,
    view: InputView,
    input_dim: usize,
    axis: ConvAxis,
    positions: usize,
    channels: usize,
    conv: ConvStreamSpec,
    activation: Activation,
    rng: &mut ChaCha8Rng,
) -> Result<Stream> {
    let conv_spec = LayerSpec::Conv1d {
        axis,
        positions,
        in_channels: channels,
        n_filters: conv.n_filters,
        filter_width: conv.filter_width,
    };
    conv_spec.validate()?;
    let pool = LayerSpec::MaxPool1d {
        positions: positions - conv.filter_width + 1,
        channels: conv.n_filters,
        pool_size: conv.pool_size,
    };
    Ok(Stream {
        source,
        view,
        input_dim,
        layers: vec![
            Layer::init(conv_spec, rng)?,
            Layer::init(LayerSpec::Activation(activation), rng)?,
            Layer::init(pool, rng)?,
        ],
    })
}

fn freq_stream(spec: &ArchSpec, rng: &mut ChaCha8Rng) -> Result<Stream> {
    let a = spec.acoustic;
    conv_stream(
        InputSource::Acoustic,
        InputView::BandMajor {
            n_bands: a.bands,
            n_streams: a.streams,
            context: a.context,
        },
        a.dim(),
        ConvAxis::Frequency,
        a.bands,
        a.streams * a.context,
        spec.freq_conv,
        spec.activation,
        rng,
    )
}

fn trunk(spec: &ArchSpec, fused: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Layer>> {
    let mut layers = Vec::with_capacity(2 * spec.n_hidden_layers + 2);
    let mut dim = fused;
    for _ in 0..spec.n_hidden_layers {
        layers.push(Layer::init(
            LayerSpec::Dense {
                n_in: dim,
                n_out: spec.hidden_width,
            },
            rng,
        )?);
        layers.push(Layer::init(LayerSpec::Activation(spec.activation), rng)?);
        dim = spec.hidden_width;
    }
    layers.push(Layer::init(
        LayerSpec::Dense {
            n_in: dim,
            n_out: spec.n_classes,
        },
        rng,
    )?);
    layers.push(Layer::init(LayerSpec::Softmax, rng)?);
    Ok(layers)
}

fn stream_width(s: &Stream) -> usize {
    s.layers.iter().fold(s.input_dim, |d, l| l.spec.out_dim(d))
}

fn assemble(spec: &ArchSpec, streams: Vec<Stream>, rng: &mut ChaCha8Rng) -> Result<NetworkGraph> {
    let fused = streams.iter().map(stream_width).sum();
    let trunk = trunk(spec, fused, rng)?;
    NetworkGraph::new(streams, trunk)
}

fn expect_kind(spec: &ArchSpec, kind: ArchKind) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::config(format!(
            "spec is for {}, not {kind}",
            spec.kind
        )));
    }
    Ok(())
}

pub fn build_dnn(spec: &ArchSpec) -> Result<NetworkGraph> {
    expect_kind(spec, ArchKind::Dnn)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let stream = Stream {
        source: InputSource::Acoustic,
        view: InputView::Identity,
        input_dim: spec.acoustic.dim(),
        layers: vec![],
    };
    assemble(spec, vec![stream], &mut rng)
}

pub fn build_cnn(spec: &ArchSpec) -> Result<NetworkGraph> {
    expect_kind(spec, ArchKind::Cnn)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let stream = freq_stream(spec, &mut rng)?;
    assemble(spec, vec![stream], &mut rng)
}

pub fn build_tfcnn(spec: &ArchSpec) -> Result<NetworkGraph> {
    expect_kind(spec, ArchKind::Tfcnn)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = spec.acoustic;
    let freq = freq_stream(spec, &mut rng)?;
    let time = conv_stream(
        InputSource::Acoustic,
        InputView::Identity,
        a.dim(),
        ConvAxis::Time,
        a.context,
        a.bands * a.streams,
        spec.time_conv,
        spec.activation,
        &mut rng,
    )?;
    assemble(spec, vec![freq, time], &mut rng)
}

pub fn build_fcnn(spec: &ArchSpec) -> Result<NetworkGraph> {
    expect_kind(spec, ArchKind::Fcnn)?;
    let tv = spec.tv.expect("validated");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let freq = freq_stream(spec, &mut rng)?;
    let time = conv_stream(
        InputSource::Articulatory,
        InputView::Identity,
        tv.dim(),
        ConvAxis::Time,
        tv.context,
        tv.tvs,
        spec.time_conv,
        spec.activation,
        &mut rng,
    )?;
    assemble(spec, vec![freq, time], &mut rng)
}

pub fn build(spec: &ArchSpec) -> Result<NetworkGraph> {
    match spec.kind {
        ArchKind::Dnn => build_dnn(spec),
        ArchKind::Cnn => build_cnn(spec),
        ArchKind::Tfcnn => build_tfcnn(spec),
        ArchKind::Fcnn => build_fcnn(spec),
    }
}

/// Per-frame concatenation, frequency maps first.
pub fn fuse_feature_maps(freq_maps: &Matrix, time_maps: &Matrix) -> Result<(Matrix, FusionLayout)> {
    if freq_maps.nrows() != time_maps.nrows() {
        return Err(Error::shape(format!(
            "frequency stream has {} frames, time stream has {}",
            freq_maps.nrows(),
            time_maps.nrows()
        )));
    }
    let fused = concatenate(Axis(1), &[freq_maps.view(), time_maps.view()]).expect("frame counts match");
    let layout = FusionLayout {
        freq_stream_dims: freq_maps.ncols(),
        time_stream_dims: time_maps.ncols(),
        fused_dims: fused.ncols(),
    };
    Ok((fused, layout))
}
