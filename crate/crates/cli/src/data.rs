//! Corpus directories on disk and the results file.

use std::fs;
use std::io::Write;
use std::path::Path;

use jointam_core::acoustic::{LabelledUtterance, TvSource};
use jointam_core::dsp::{read_fmx, read_wav, FrontEnd};
use jointam_core::inversion::{invert, read_labels, read_manifest, Condition, ManifestEntry, Split, MANIFEST_NAME};
use jointam_core::{Error, Result};
use rayon::prelude::*;

pub const RESULTS_NAME: &str = "results.tsv";

pub fn manifest_entries(dir: &Path, split: Split, conditions: &[Condition]) -> Result<Vec<ManifestEntry>> {
    Ok(read_manifest(dir.join(MANIFEST_NAME))?
        .into_iter()
        .filter(|e| e.split == split && conditions.contains(&e.kind))
        .collect())
}

/// Filterbank features, TVs and labels for one split of a corpus directory.
pub fn load_utterances(
    dir: &Path,
    split: Split,
    conditions: &[Condition],
    tv: TvSource,
) -> Result<Vec<LabelledUtterance>> {
    let entries = manifest_entries(dir, split, conditions)?;
    if entries.is_empty() {
        return Err(Error::Input(format!(
            "{}: no {} entries in the {split} split",
            dir.display(),
            conditions.iter().map(|c| c.name()).collect::<Vec<_>>().join("/")
        )));
    }
    entries
        .par_iter()
        .map(|e| {
            let audio = read_wav(dir.join(&e.wav))?;
            let tv = match tv {
                TvSource::None => None,
                TvSource::GroundTruth => Some(read_fmx(dir.join(&e.tv))?.into_frames()),
                TvSource::Inverted(model) => Some(invert(model, &audio)?.frames().clone()),
            };
            Ok(LabelledUtterance {
                id: e.id.clone(),
                fbank: FrontEnd::Fbank.extract(&audio)?.into_frames(),
                tv,
                labels: read_labels(dir.join(&e.labels))?,
                tokens: e.tokens.clone(),
            })
        })
        .collect()
}

/// One scored model: a line of the results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub arch: String,
    pub features: String,
    pub train_set: String,
    pub test_set: String,
    pub frame_accuracy: f64,
    pub wer: f64,
}

pub fn results_header() -> &'static str {
    "arch\tfeatures\ttrain_set\ttest_set\tframe_accuracy\twer"
}

impl ResultRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:.6}\t{:.4}",
            self.arch, self.features, self.train_set, self.test_set, self.frame_accuracy, self.wer
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        let [arch, features, train_set, test_set, acc, wer] = f[..] else {
            return Err(Error::Format(format!("results line has {} fields, want 6", f.len())));
        };
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|e| Error::Format(format!("results value {v:?}: {e}")))
        };
        Ok(Self {
            arch: arch.into(),
            features: features.into(),
            train_set: train_set.into(),
            test_set: test_set.into(),
            frame_accuracy: num(acc)?,
            wer: num(wer)?,
        })
    }

    pub fn append_to(&self, path: &Path) -> Result<()> {
        let fresh = !path.exists();
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            writeln!(f, "{}", results_header())?;
        }
        writeln!(f, "{}", self.to_line())?;
        Ok(())
    }
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h == results_header() => {}
        Some(h) => return Err(Error::Format(format!("unexpected results header {h:?}"))),
        None => return Ok(Vec::new()),
    }
    lines.map(ResultRecord::parse).collect()
}
