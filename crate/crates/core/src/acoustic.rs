//! Frame-classification acoustic models over labelled utterances: feature
//! preparation, training with frozen normalization, and scoring.
//!
//! Filterbank inputs and (when the architecture wants them) TV inputs are
//! z-normalized with statistics from the training utterances; the
//! statistics travel with the model file.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::arch::{build, ArchSpec};
use crate::dsp::{FrontEnd, NormStats, SpliceSpec};
use crate::error::{Error, Result};
use crate::eval::{greedy_decode, levenshtein_wer, FramePosteriors, WerReport};
use crate::inversion::{class_tokens, invert, Condition, InversionModel, ParallelCorpus, Split};
use crate::nn::{put_u32, ByteReader, Matrix, NetworkGraph};
use crate::training::{
    argmax, train, Dataset, EpochRecord, Sequence, Targets, TrainCheckpoint, TrainConfig, TrainState,
};

pub const ACOUSTIC_MAGIC: &[u8; 4] = b"AMD1";

/// Where the articulatory stream comes from.
#[derive(Debug, Clone, Copy)]
pub enum TvSource<'a> {
    None,
    GroundTruth,
    Inverted(&'a InversionModel),
}

/// One utterance ready for an acoustic model: unnormalized filterbank
/// frames, optional TV frames, frame labels and the reference tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledUtterance {
    pub id: String,
    pub fbank: Matrix,
    pub tv: Option<Matrix>,
    pub labels: Vec<usize>,
    pub tokens: Vec<String>,
}

/// Features for every utterance of `split`, recorded under `condition`.
pub fn labelled_utterances(
    corpus: &ParallelCorpus,
    split: Split,
    condition: Condition,
    tv: TvSource,
) -> Result<Vec<LabelledUtterance>> {
    let utts: Vec<_> = corpus.split(split).collect();
    utts.par_iter()
        .map(|u| {
            let audio = u.audio(condition);
            let tv = match tv {
                TvSource::None => None,
                TvSource::GroundTruth => Some(u.tv.frames().clone()),
                TvSource::Inverted(model) => Some(invert(model, audio)?.frames().clone()),
            };
            Ok(LabelledUtterance {
                id: format!("{}-{}", u.id, condition.name()),
                fbank: FrontEnd::Fbank.extract(audio)?.into_frames(),
                tv,
                labels: u.labels.clone(),
                tokens: u.tokens.clone(),
            })
        })
        .collect()
}

/// Splice taken from the acoustic context width of `spec`.
pub fn splice_for(spec: &ArchSpec) -> Result<SpliceSpec> {
    let context = spec.acoustic.context;
    if context == 0 {
        return Err(Error::config("acoustic context must be positive"));
    }
    if let Some(tv) = spec.tv.filter(|_| spec.kind.uses_tv()) {
        if tv.context != context {
            return Err(Error::config(format!(
                "tv context {} differs from acoustic context {context}",
                tv.context
            )));
        }
    }
    let left = (context - 1) / 2;
    Ok(SpliceSpec {
        left,
        right: context - 1 - left,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticModel {
    pub spec: ArchSpec,
    pub net: NetworkGraph,
    pub acoustic_stats: NormStats,
    pub tv_stats: Option<NormStats>,
}

/// Frame accuracy and token error rate over a set of utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticReport {
    pub n_frames: usize,
    pub n_correct: usize,
    pub wer: WerReport,
}

impl AcousticReport {
    pub fn frame_accuracy(&self) -> f64 {
        self.n_correct as f64 / self.n_frames.max(1) as f64
    }
}

fn put_text(out: &mut Vec<u8>, text: &str) {
    put_u32(out, text.len());
    out.extend_from_slice(text.as_bytes());
}

fn get_text(r: &mut ByteReader) -> Result<String> {
    let n = r.usize()?;
    String::from_utf8(r.take(n)?.to_vec()).map_err(|e| Error::Corrupt(e.to_string()))
}

impl AcousticModel {
    pub fn splice(&self) -> SpliceSpec {
        splice_for(&self.spec).expect("validated when built")
    }

    fn sequence(&self, u: &LabelledUtterance) -> Result<Sequence> {
        let tv = if self.spec.kind.uses_tv() {
            let stats = self.tv_stats.as_ref().ok_or_else(|| Error::State("model has no tv statistics".into()))?;
            let tv = u
                .tv
                .as_ref()
                .ok_or_else(|| Error::Input(format!("{}: no tract variables", u.id)))?;
            Some(stats.apply(tv))
        } else {
            None
        };
        Sequence::reconciled(
            self.acoustic_stats.apply(&u.fbank),
            tv,
            Targets::Classes(u.labels.clone()),
        )
    }

    pub fn dataset(&self, utts: &[LabelledUtterance]) -> Result<Dataset> {
        let seqs = utts.iter().map(|u| self.sequence(u)).collect::<Result<Vec<_>>>()?;
        Dataset::new(seqs, self.splice())
    }

    /// Per-frame posteriors, truncated like the training data.
    pub fn posteriors(&self, u: &LabelledUtterance) -> Result<(FramePosteriors, Vec<usize>)> {
        let seq = self.sequence(u)?;
        let labels = match &seq.targets {
            Targets::Classes(c) => c.clone(),
            Targets::Values(_) => unreachable!(),
        };
        let ds = Dataset::new(vec![seq], self.splice())?;
        let rows: Vec<usize> = (0..ds.len()).collect();
        let probs = self.net.predict(&ds.batch(&rows).input)?;
        Ok((FramePosteriors::new(probs)?, labels))
    }

    pub fn evaluate(&self, utts: &[LabelledUtterance]) -> Result<AcousticReport> {
        let tokens = class_tokens();
        let per_utt = utts
            .par_iter()
            .map(|u| {
                let (post, labels) = self.posteriors(u)?;
                let correct = post
                    .probs()
                    .rows()
                    .into_iter()
                    .zip(&labels)
                    .filter(|(row, &l)| argmax(row.iter().copied()) == l)
                    .count();
                let hyp = greedy_decode(&post, &tokens)?;
                Ok((labels.len(), correct, levenshtein_wer(&u.tokens, &hyp)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let reports: Vec<WerReport> = per_utt.iter().map(|p| p.2).collect();
        Ok(AcousticReport {
            n_frames: per_utt.iter().map(|p| p.0).sum(),
            n_correct: per_utt.iter().map(|p| p.1).sum(),
            wer: WerReport::combine(&reports)?,
        })
    }

    /// Layout: `AMD1`, then length-prefixed architecture config, acoustic
    /// statistics and TV statistics (empty when absent), then the NNG1
    /// network image.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = ACOUSTIC_MAGIC.to_vec();
        put_text(&mut out, &self.spec.to_config());
        put_text(&mut out, &self.acoustic_stats.to_text());
        put_text(&mut out, &self.tv_stats.as_ref().map(NormStats::to_text).unwrap_or_default());
        self.net.encode(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.magic(ACOUSTIC_MAGIC)?;
        let spec = ArchSpec::from_config(&get_text(&mut r)?).map_err(|e| Error::Corrupt(e.to_string()))?;
        let acoustic_stats = NormStats::from_text(&get_text(&mut r)?)?;
        let tv_text = get_text(&mut r)?;
        let tv_stats = if tv_text.is_empty() {
            None
        } else {
            Some(NormStats::from_text(&tv_text)?)
        };
        let net = NetworkGraph::decode(&mut r)?;
        if !r.is_empty() {
            return Err(Error::Corrupt("trailing bytes after acoustic model".into()));
        }
        splice_for(&spec).map_err(|e| Error::Corrupt(e.to_string()))?;
        Ok(Self {
            spec,
            net,
            acoustic_stats,
            tv_stats,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Builds the network for `spec`, estimates normalization on `train_set`
/// and trains until the schedule stops. The returned model carries the
/// epoch with the lowest CV frame error.
pub fn train_acoustic_model(
    spec: &ArchSpec,
    train_set: &[LabelledUtterance],
    cv_set: &[LabelledUtterance],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<(AcousticModel, TrainState)> {
    spec.validate()?;
    splice_for(spec)?;
    if train_set.is_empty() || cv_set.is_empty() {
        return Err(Error::State("acoustic training needs non-empty train and cv sets".into()));
    }
    let acoustic_stats = NormStats::pooled(train_set.iter().map(|u| &u.fbank))?;
    if acoustic_stats.dim() != spec.acoustic.bands * spec.acoustic.streams {
        return Err(Error::shape(format!(
            "features have {} coefficients, architecture expects {}",
            acoustic_stats.dim(),
            spec.acoustic.bands * spec.acoustic.streams
        )));
    }
    let tv_stats = if spec.kind.uses_tv() {
        let mut tvs = Vec::with_capacity(train_set.len());
        for u in train_set {
            tvs.push(u.tv.as_ref().ok_or_else(|| Error::Input(format!("{}: no tract variables", u.id)))?);
        }
        Some(NormStats::pooled(tvs)?)
    } else {
        None
    };
    let mut model = AcousticModel {
        spec: spec.clone(),
        net: build(spec)?,
        acoustic_stats,
        tv_stats,
    };
    let train_ds = model.dataset(train_set)?;
    let cv_ds = model.dataset(cv_set)?;
    let session = train(
        TrainCheckpoint::new(model.net.clone(), cfg),
        &train_ds,
        &cv_ds,
        cfg,
        |record, _| on_epoch(record),
    )?;
    let state = session.state.clone();
    model.net = session.into_best();
    Ok((model, state))
}
