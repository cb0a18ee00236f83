//! Synthetic parallel corpora: audio, TVs, frame labels and transcripts.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::render::render_tvs;
use super::score::{generate_gestural_score, Vocabulary};
use super::synth::synthesize_speech_from_tvs;
use super::tv::TvTrajectory;
use crate::dsp::{generate_noise, mix_noise_at_snr, write_fmx, write_wav, NoiseKind, Waveform};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.jsonl";
const SPLIT_SALT: u64 = 0x7370_6c69_7473;
pub const MIN_UTTERANCES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Cv,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Cv, Split::Test];

    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Cv => "cv",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown split {s:?} (train, cv, test)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Clean,
    Noisy,
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::Clean => "clean",
            Condition::Noisy => "noisy",
        }
    }
}

/// Train / cv / test utterance counts: cv and test are 2% and 10% of `n`,
/// rounded to nearest, and train takes the rest.
pub fn split_sizes(n: usize) -> [usize; 3] {
    let cv = (0.02 * n as f64).round() as usize;
    let test = (0.10 * n as f64).round() as usize;
    [n - cv - test, cv, test]
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub n_utts: usize,
    pub severity_range: (f64, f64),
    pub noise_bank: Vec<NoiseKind>,
    pub snr_range: (f64, f64),
    pub seed: u64,
    pub frame_shift: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_utts: 100,
            severity_range: (0.3, 0.7),
            noise_bank: NoiseKind::ALL.to_vec(),
            snr_range: (10.0, 80.0),
            seed: 0,
            frame_shift: 0.010,
        }
    }
}

impl CorpusConfig {
    fn validate(&self) -> Result<()> {
        if self.n_utts < MIN_UTTERANCES {
            return Err(Error::config(format!(
                "need at least {MIN_UTTERANCES} utterances, got {}",
                self.n_utts
            )));
        }
        if self.noise_bank.is_empty() {
            return Err(Error::config("noise bank is empty"));
        }
        let (lo, hi) = self.severity_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::config(format!("severity range [{lo}, {hi}] not inside [0, 1]")));
        }
        let (lo, hi) = self.snr_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::config(format!("bad SNR range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub split: Split,
    pub severity: f64,
    pub transcript: Vec<String>,
    /// Gesture tokens of the transcript, the reference for scoring.
    pub tokens: Vec<String>,
    pub labels: Vec<usize>,
    pub tv: TvTrajectory,
    pub clean: Waveform,
    pub noisy: Waveform,
    pub noise: NoiseKind,
    pub snr_db: f64,
}

impl Utterance {
    pub fn audio(&self, condition: Condition) -> &Waveform {
        match condition {
            Condition::Clean => &self.clean,
            Condition::Noisy => &self.noisy,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelCorpus {
    pub utterances: Vec<Utterance>,
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn build_utterance(
    index: usize,
    split: Split,
    cfg: &CorpusConfig,
    vocab: &Vocabulary,
) -> Result<Utterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
    let severity = range(&mut rng, cfg.severity_range);
    let snr_db = range(&mut rng, cfg.snr_range);
    let noise = cfg.noise_bank[rng.random_range(0..cfg.noise_bank.len())];
    let (score_seed, synth_seed, noise_seed) = (rng.next_u64(), rng.next_u64(), rng.next_u64());

    let (score, transcript) = generate_gestural_score(score_seed, vocab, severity)?;
    let tokens = vocab.expand(&transcript)?;
    let labels = score.frame_labels(cfg.frame_shift);
    let tv = render_tvs(&score, cfg.frame_shift);
    let clean = synthesize_speech_from_tvs(&tv, synth_seed);
    let n = generate_noise(noise, clean.len(), clean.sample_rate(), noise_seed)?;
    let noisy = mix_noise_at_snr(&clean, &n, snr_db)?;
    Ok(Utterance {
        id: format!("utt{index:05}"),
        split,
        severity,
        transcript,
        tokens,
        labels,
        tv,
        clean,
        noisy,
        noise,
        snr_db,
    })
}

/// Builds `cfg.n_utts` utterances, each with a clean and a noise-added
/// copy. Utterance `i` draws everything from seed `cfg.seed + i`, so the
/// result does not depend on the thread count.
pub fn build_parallel_corpus(cfg: &CorpusConfig, vocab: &Vocabulary) -> Result<ParallelCorpus> {
    cfg.validate()?;
    if vocab.words.is_empty() {
        return Err(Error::config("vocabulary is empty"));
    }
    let n = cfg.n_utts;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ SPLIT_SALT));
    let [n_train, n_cv, _] = split_sizes(n);
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_cv {
            Split::Cv
        } else {
            Split::Test
        };
    }
    let utterances = (0..n)
        .into_par_iter()
        .map(|i| build_utterance(i, splits[i], cfg, vocab))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParallelCorpus { utterances })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub utt: String,
    pub split: Split,
    pub kind: Condition,
    pub wav: String,
    pub tv: String,
    pub labels: String,
    pub transcript: Vec<String>,
    pub tokens: Vec<String>,
    pub severity: f64,
    pub noise: Option<String>,
    pub snr_db: Option<f64>,
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn n_entries(&self) -> usize {
        2 * self.utterances.len()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(move |u| u.split == split)
    }

    pub fn split_counts(&self) -> [usize; 3] {
        Split::ALL.map(|s| self.split(s).count())
    }

    /// SHA-256 over every utterance's metadata, labels, TVs and audio.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for u in &self.utterances {
            h.update(u.id.as_bytes());
            h.update(u.split.name().as_bytes());
            h.update(u.severity.to_le_bytes());
            h.update(u.snr_db.to_le_bytes());
            h.update(u.noise.name().as_bytes());
            for w in &u.transcript {
                h.update(w.as_bytes());
                h.update([0]);
            }
            for &l in &u.labels {
                h.update((l as u32).to_le_bytes());
            }
            for v in u.tv.frames() {
                h.update(v.to_le_bytes());
            }
            for x in u.clean.samples().iter().chain(u.noisy.samples()) {
                h.update(x.to_le_bytes());
            }
        }
        hex(&h.finalize())
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        let mut out = Vec::with_capacity(self.n_entries());
        for u in &self.utterances {
            for kind in [Condition::Clean, Condition::Noisy] {
                let noisy = kind == Condition::Noisy;
                out.push(ManifestEntry {
                    id: format!("{}-{}", u.id, kind.name()),
                    utt: u.id.clone(),
                    split: u.split,
                    kind,
                    wav: format!("wav/{}-{}.wav", u.id, kind.name()),
                    tv: format!("tv/{}.fmx", u.id),
                    labels: format!("labels/{}.txt", u.id),
                    transcript: u.transcript.clone(),
                    tokens: u.tokens.clone(),
                    severity: u.severity,
                    noise: noisy.then(|| u.noise.name().to_string()),
                    snr_db: noisy.then_some(u.snr_db),
                });
            }
        }
        out
    }

    /// Writes `wav/`, `tv/`, `labels/` and the manifest under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
        let dir = dir.as_ref();
        for sub in ["wav", "tv", "labels"] {
            fs::create_dir_all(dir.join(sub))?;
        }
        let manifest = self.manifest();
        for (u, pair) in self.utterances.iter().zip(manifest.chunks(2)) {
            write_wav(dir.join(&pair[0].wav), &u.clean)?;
            write_wav(dir.join(&pair[1].wav), &u.noisy)?;
            write_fmx(dir.join(&pair[0].tv), &u.tv.to_features())?;
            write_labels(dir.join(&pair[0].labels), &u.labels)?;
        }
        write_manifest(dir.join(MANIFEST_NAME), &manifest)?;
        Ok(manifest)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut out, e).map_err(|e| Error::Format(e.to_string()))?;
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("manifest line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

/// One class id per line.
pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for l in labels {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| Error::Format(format!("{}: bad label {l:?}", path.display())))
        })
        .collect()
}
