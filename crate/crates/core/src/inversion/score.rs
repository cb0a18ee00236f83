//! Gesture classes, the word vocabulary and gestural scores.
//!
//! A gesture class is a full 8-channel target configuration held for a
//! class-specific duration. Words are fixed sequences of gesture classes.
//! Class 0 is silence and never appears inside a word.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tv::{NEUTRAL, N_TVS};
use crate::error::{Error, Result};

pub const SILENCE: usize = 0;
/// Gesture classes, not counting silence.
pub const N_GESTURES: usize = 12;
/// Frame-label classes including silence.
pub const N_CLASSES: usize = N_GESTURES + 1;

const TEMPLATE_SEED: u64 = 0x6765_7374_7572_6573;
const VOCAB_SEED: u64 = 0x766f_6361_6275_6c61;
const VOCAB_SIZE: usize = 30;

const LEAD_SILENCE: f64 = 0.10;
const WORD_GAP: f64 = 0.08;
const TRAIL_SILENCE: f64 = 0.10;
/// Onset jitter standard deviation at severity 1, in seconds.
const JITTER_AT_FULL_SEVERITY: f64 = 0.020;
/// Jitter is clipped to this fraction of the gesture's duration so
/// neighbours never swap order.
const MAX_JITTER_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct GestureClass {
    pub targets: [f64; N_TVS],
    /// Canonical duration in seconds.
    pub duration: f64,
}

/// The fixed class table, classes `1..=N_GESTURES` at indices `0..N_GESTURES`.
pub fn gesture_classes() -> &'static [GestureClass] {
    static TABLE: OnceLock<Vec<GestureClass>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(TEMPLATE_SEED);
        (0..N_GESTURES)
            .map(|_| {
                let mut targets = [0.0; N_TVS];
                for t in targets.iter_mut() {
                    *t = rng.random_range(0.05..0.95);
                }
                GestureClass {
                    targets,
                    duration: rng.random_range(0.08..0.14),
                }
            })
            .collect()
    })
}

pub fn class_token(class: usize) -> String {
    if class == SILENCE {
        "sil".into()
    } else {
        format!("g{class:02}")
    }
}

/// Token for every frame-label class, indexed by class id.
pub fn class_tokens() -> Vec<String> {
    (0..N_CLASSES).map(class_token).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub name: String,
    pub classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub words: Vec<Word>,
}

impl Vocabulary {
    /// The fixed 30-word vocabulary: 2 to 4 gestures per word, no class
    /// repeated back to back, no two words alike.
    pub fn synthetic() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(VOCAB_SEED);
        let mut words: Vec<Word> = Vec::with_capacity(VOCAB_SIZE);
        while words.len() < VOCAB_SIZE {
            let len = rng.random_range(2..=4);
            let mut classes: Vec<usize> = Vec::with_capacity(len);
            while classes.len() < len {
                let c = rng.random_range(1..=N_GESTURES);
                if classes.last() != Some(&c) {
                    classes.push(c);
                }
            }
            if words.iter().all(|w| w.classes != classes) {
                words.push(Word {
                    name: format!("w{:02}", words.len()),
                    classes,
                });
            }
        }
        Self { words }
    }

    pub fn get(&self, name: &str) -> Option<&Word> {
        self.words.iter().find(|w| w.name == name)
    }

    /// Gesture tokens of a transcript, in order.
    pub fn expand(&self, transcript: &[String]) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for name in transcript {
            let word = self
                .get(name)
                .ok_or_else(|| Error::Format(format!("word {name:?} is not in the vocabulary")))?;
            out.extend(word.classes.iter().map(|&c| class_token(c)));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gesture {
    pub class: usize,
    pub onset: f64,
    pub offset: f64,
    pub targets: [f64; N_TVS],
}

/// Timed gestures of one utterance. Gestures are sorted by onset; when two
/// overlap the later one is in control.
#[derive(Debug, Clone, PartialEq)]
pub struct GesturalScore {
    pub duration: f64,
    pub gestures: Vec<Gesture>,
}

impl GesturalScore {
    pub fn empty(duration: f64) -> Self {
        Self {
            duration,
            gestures: Vec::new(),
        }
    }

    /// `(onset, offset, target)` list of one channel.
    pub fn track(&self, tv: usize) -> Vec<(f64, f64, f64)> {
        self.gestures
            .iter()
            .map(|g| (g.onset, g.offset, g.targets[tv]))
            .collect()
    }

    /// Gesture in control at time `t`.
    pub fn active(&self, t: f64) -> Option<&Gesture> {
        self.gestures
            .iter()
            .rev()
            .find(|g| g.onset <= t && t < g.offset)
    }

    /// Per-channel target at `t`, neutral where no gesture is active.
    pub fn target_at(&self, t: f64) -> [f64; N_TVS] {
        self.active(t).map_or([NEUTRAL; N_TVS], |g| g.targets)
    }

    pub fn n_frames(&self, frame_shift: f64) -> usize {
        ((self.duration / frame_shift).round() as usize).max(1)
    }

    /// Active class at each frame time `i * frame_shift`; silence elsewhere.
    pub fn frame_labels(&self, frame_shift: f64) -> Vec<usize> {
        (0..self.n_frames(frame_shift))
            .map(|i| self.active(i as f64 * frame_shift).map_or(SILENCE, |g| g.class))
            .collect()
    }
}

/// Target undershoot: pulls `t` toward neutral by `severity / 2`.
pub fn undershoot(target: f64, severity: f64) -> f64 {
    target + (NEUTRAL - target) * severity / 2.0
}

/// Draws 1 to 3 words and lays out their gestures. Severity stretches
/// durations by `1 + s`, pulls targets toward neutral and jitters onsets
/// with standard deviation `20 s` ms.
pub fn generate_gestural_score(
    seed: u64,
    vocab: &Vocabulary,
    severity: f64,
) -> Result<(GesturalScore, Vec<String>)> {
    if vocab.words.is_empty() {
        return Err(Error::config("vocabulary is empty"));
    }
    if !(0.0..=1.0).contains(&severity) {
        return Err(Error::config(format!("severity {severity} outside [0, 1]")));
    }
    let classes = gesture_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_words = rng.random_range(1..=3);
    let mut transcript = Vec::with_capacity(n_words);
    let mut gestures = Vec::new();
    let mut t = LEAD_SILENCE;
    let sigma = JITTER_AT_FULL_SEVERITY * severity;
    for w in 0..n_words {
        let word = &vocab.words[rng.random_range(0..vocab.words.len())];
        transcript.push(word.name.clone());
        for &class in &word.classes {
            let template = &classes[class - 1];
            let duration = template.duration * (1.0 + severity);
            let z: f64 = StandardNormal.sample(&mut rng);
            let limit = MAX_JITTER_FRACTION * duration;
            let onset = t + (z * sigma).clamp(-limit, limit);
            let mut targets = template.targets;
            for v in targets.iter_mut() {
                *v = undershoot(*v, severity);
            }
            gestures.push(Gesture {
                class,
                onset,
                offset: onset + duration,
                targets,
            });
            t += duration;
        }
        if w + 1 < n_words {
            t += WORD_GAP;
        }
    }
    let end = gestures.iter().map(|g| g.offset).fold(t, f64::max);
    Ok((
        GesturalScore {
            duration: end + TRAIL_SILENCE,
            gestures,
        },
        transcript,
    ))
}
