//! The speech-inversion network: spliced NMC frames in, 8 TVs out.
//!
//! Topology: the 40 x 17 spliced coefficients are viewed band-major, a
//! frequency convolution (width 8) and non-overlapping max-pool over 3
//! follow, then dense hidden layers and a linear 8-way output trained on
//! squared error. Predictions are clamped into [0, 1].

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::corpus::{Condition, ParallelCorpus, Split};
use super::tv::{TvTrajectory, N_TVS};
use crate::arch::Scale;
use crate::dsp::{FrontEnd, NormStats, SpliceSpec, Waveform, N_BANDS};
use crate::error::{Error, Result};
use crate::nn::{
    Activation, ConvAxis, InputSource, InputView, Layer, LayerSpec, Matrix, ModelInput, NetworkGraph,
    Stream,
};
use crate::training::{fit, Dataset, EpochRecord, Sequence, Targets, TrainConfig, TrainState};

pub const INVERSION_MAGIC: &[u8; 4] = b"INV1";

#[derive(Debug, Clone, PartialEq)]
pub struct InversionConfig {
    pub n_filters: usize,
    pub filter_width: usize,
    pub pool_size: usize,
    pub n_hidden_layers: usize,
    pub hidden_width: usize,
    pub activation: Activation,
    pub splice: SpliceSpec,
    pub seed: u64,
    pub train: TrainConfig,
}

impl InversionConfig {
    /// Full-size network (200 filters, 3 x 2048), shrunk by `scale`.
    ///
    /// ReLU with a small step: squared error on [0, 1] targets gives weak
    /// output gradients, and a sigmoid stack stays on the predict-the-mean
    /// plateau, while ReLU at the acoustic models' 0.008 diverges.
    pub fn new(scale: Scale) -> Self {
        Self {
            n_filters: scale.width(200),
            filter_width: 8,
            pool_size: 3,
            n_hidden_layers: 3,
            hidden_width: scale.width(2048),
            activation: Activation::Relu,
            splice: SpliceSpec::default(),
            seed: 0,
            train: TrainConfig {
                initial_lr: 0.0005,
                ..TrainConfig::default()
            },
        }
    }
}

pub fn inversion_network(cfg: &InversionConfig) -> Result<NetworkGraph> {
    let context = cfg.splice.width();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let conv = LayerSpec::Conv1d {
        axis: ConvAxis::Frequency,
        positions: N_BANDS,
        in_channels: context,
        n_filters: cfg.n_filters,
        filter_width: cfg.filter_width,
    };
    conv.validate()?;
    let positions = N_BANDS - cfg.filter_width + 1;
    let stream = Stream {
        source: InputSource::Acoustic,
        view: InputView::BandMajor {
            n_bands: N_BANDS,
            n_streams: 1,
            context,
        },
        input_dim: N_BANDS * context,
        layers: vec![
            Layer::init(conv, &mut rng)?,
            Layer::init(LayerSpec::Activation(cfg.activation), &mut rng)?,
            Layer::init(
                LayerSpec::MaxPool1d {
                    positions,
                    channels: cfg.n_filters,
                    pool_size: cfg.pool_size,
                },
                &mut rng,
            )?,
        ],
    };
    let mut dim = (positions / cfg.pool_size) * cfg.n_filters;
    let mut trunk = Vec::new();
    for _ in 0..cfg.n_hidden_layers {
        trunk.push(Layer::init(LayerSpec::Dense { n_in: dim, n_out: cfg.hidden_width }, &mut rng)?);
        trunk.push(Layer::init(LayerSpec::Activation(cfg.activation), &mut rng)?);
        dim = cfg.hidden_width;
    }
    trunk.push(Layer::init(LayerSpec::Dense { n_in: dim, n_out: N_TVS }, &mut rng)?);
    NetworkGraph::new(vec![stream], trunk)
}

/// A trained inversion network with its frozen input normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionModel {
    pub net: NetworkGraph,
    pub stats: Option<NormStats>,
    pub splice: SpliceSpec,
}

impl InversionModel {
    /// Layout: `INV1`, splice left and right (`u32`), normalization text
    /// length (`u32`, 0 when absent) and text, then the NNG1 image.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = INVERSION_MAGIC.to_vec();
        out.extend_from_slice(&(self.splice.left as u32).to_le_bytes());
        out.extend_from_slice(&(self.splice.right as u32).to_le_bytes());
        let text = self.stats.as_ref().map(NormStats::to_text).unwrap_or_default();
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&self.net.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |at: usize| -> Result<usize> {
            bytes
                .get(at..at + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
                .ok_or_else(|| Error::Corrupt("inversion model header truncated".into()))
        };
        let magic = bytes.get(..4).ok_or_else(|| Error::Corrupt("inversion model header truncated".into()))?;
        if magic != INVERSION_MAGIC {
            return Err(Error::Version {
                expected: String::from_utf8_lossy(INVERSION_MAGIC).into_owned(),
                found: String::from_utf8_lossy(magic).into_owned(),
            });
        }
        let splice = SpliceSpec {
            left: word(4)?,
            right: word(8)?,
        };
        let len = word(12)?;
        let text = bytes
            .get(16..16 + len)
            .ok_or_else(|| Error::Corrupt("normalization block truncated".into()))?;
        let stats = if len == 0 {
            None
        } else {
            let text = std::str::from_utf8(text).map_err(|e| Error::Corrupt(e.to_string()))?;
            Some(NormStats::from_text(text)?)
        };
        let net = NetworkGraph::from_bytes(&bytes[16 + len..])?;
        Ok(Self { net, stats, splice })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// TVs from already extracted (unnormalized) NMC frames.
    pub fn predict_features(&self, nmc: &Matrix, frame_shift: f64) -> Result<TvTrajectory> {
        let stats = self
            .stats
            .as_ref()
            .ok_or_else(|| Error::State("inversion model has no frozen normalization statistics".into()))?;
        if stats.dim() != nmc.ncols() {
            return Err(Error::shape(format!(
                "model expects {} coefficients, got {}",
                stats.dim(),
                nmc.ncols()
            )));
        }
        let seq = Sequence {
            acoustic: stats.apply(nmc),
            tv: None,
            targets: Targets::Values(Matrix::zeros((nmc.nrows(), N_TVS))),
        };
        let ds = Dataset::new(vec![seq], self.splice)?;
        let rows: Vec<usize> = (0..ds.len()).collect();
        let input: ModelInput = ds.batch(&rows).input;
        TvTrajectory::clamped(self.net.predict(&input)?, frame_shift)
    }
}

/// NMC, frozen normalization, splicing, forward pass, clamp.
pub fn invert(model: &InversionModel, audio: &Waveform) -> Result<TvTrajectory> {
    if model.stats.is_none() {
        return Err(Error::State("inversion model has no frozen normalization statistics".into()));
    }
    let f = FrontEnd::Nmc.extract(audio)?;
    model.predict_features(f.frames(), f.frame_shift())
}

/// `(nmc, tv)` pairs of every clean and noisy copy in `split`, truncated to
/// a common frame count.
pub fn nmc_pairs(corpus: &ParallelCorpus, split: Split) -> Result<Vec<(Matrix, Matrix)>> {
    use rayon::prelude::*;
    let utts: Vec<_> = corpus.split(split).collect();
    let per_utt = utts
        .par_iter()
        .map(|u| {
            [Condition::Clean, Condition::Noisy]
                .into_iter()
                .map(|c| {
                    let f = FrontEnd::Nmc.extract(u.audio(c))?.into_frames();
                    let n = f.nrows().min(u.tv.n_frames());
                    Ok((
                        f.slice(ndarray::s![..n, ..]).to_owned(),
                        u.tv.frames().slice(ndarray::s![..n, ..]).to_owned(),
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_utt.into_iter().flatten().collect())
}

fn value_dataset(pairs: &[(Matrix, Matrix)], stats: &NormStats, splice: SpliceSpec) -> Result<Dataset> {
    let seqs = pairs
        .iter()
        .map(|(x, y)| Sequence::reconciled(stats.apply(x), None, Targets::Values(y.clone())))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(seqs, splice)
}

/// Trains on `(nmc, tv)` pairs; normalization statistics come from the
/// training pairs only.
pub fn train_inversion_from_pairs(
    train: &[(Matrix, Matrix)],
    cv: &[(Matrix, Matrix)],
    cfg: &InversionConfig,
) -> Result<(InversionModel, TrainState, Vec<EpochRecord>)> {
    if train.is_empty() || cv.is_empty() {
        return Err(Error::State("inversion training needs non-empty train and cv sets".into()));
    }
    let stats = NormStats::pooled(train.iter().map(|p| &p.0))?;
    let train_ds = value_dataset(train, &stats, cfg.splice)?;
    let cv_ds = value_dataset(cv, &stats, cfg.splice)?;
    let net = inversion_network(cfg)?;
    let (net, state, records) = fit(net, &train_ds, &cv_ds, &cfg.train)?;
    Ok((
        InversionModel {
            net,
            stats: Some(stats),
            splice: cfg.splice,
        },
        state,
        records,
    ))
}

pub fn train_inversion_model(
    corpus: &ParallelCorpus,
    cfg: &InversionConfig,
) -> Result<(InversionModel, TrainState, Vec<EpochRecord>)> {
    let train = nmc_pairs(corpus, Split::Train)?;
    let cv = nmc_pairs(corpus, Split::Cv)?;
    train_inversion_from_pairs(&train, &cv, cfg)
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "pearson needs equal lengths");
    let n = a.len() as f64;
    if a.is_empty() {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Per-TV Pearson r between stacked predictions and references.
pub fn per_tv_pearson(pred: &[Matrix], truth: &[Matrix]) -> [Option<f64>; N_TVS] {
    let mut out = [None; N_TVS];
    for (ch, slot) in out.iter_mut().enumerate() {
        let p: Vec<f64> = pred.iter().flat_map(|m| m.column(ch).to_vec()).collect();
        let t: Vec<f64> = truth.iter().flat_map(|m| m.column(ch).to_vec()).collect();
        *slot = pearson(&p, &t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> InversionConfig {
        let mut cfg = InversionConfig::new(Scale::Toy);
        cfg.hidden_width = 16;
        cfg.n_filters = 4;
        cfg
    }

    #[test]
    fn network_shapes() {
        let net = inversion_network(&InversionConfig::new(Scale::Paper)).unwrap();
        assert_eq!(net.stream_out_dims(), vec![11 * 200]);
        assert_eq!(net.output_dim(), 8);
        let toy = inversion_network(&InversionConfig::new(Scale::Toy)).unwrap();
        assert_eq!(toy.stream_out_dims(), vec![11 * 16]);
    }

    #[test]
    fn missing_stats_is_a_state_error() {
        let model = InversionModel {
            net: inversion_network(&tiny_cfg()).unwrap(),
            stats: None,
            splice: SpliceSpec::default(),
        };
        let w = Waveform::silence(4000, 16000).unwrap();
        assert!(matches!(invert(&model, &w), Err(Error::State(_))));
    }

    #[test]
    fn silence_inverts_to_bounded_values_deterministically() {
        let model = InversionModel {
            net: inversion_network(&tiny_cfg()).unwrap(),
            stats: Some(NormStats {
                mean: ndarray::Array1::zeros(40),
                std: ndarray::Array1::ones(40),
            }),
            splice: SpliceSpec::default(),
        };
        let w = Waveform::silence(4000, 16000).unwrap();
        let a = invert(&model, &w).unwrap();
        assert_eq!(a.frames().ncols(), 8);
        assert!(a.frames().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a, invert(&model, &w).unwrap());

        let back = InversionModel::from_bytes(&model.to_bytes()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]), None);
    }
}
