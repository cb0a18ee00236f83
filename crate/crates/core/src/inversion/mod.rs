//! Synthetic articulatory corpora and acoustic-to-articulatory inversion.
//!
//! The corpus generator stands in for a gestural speech production model:
//! words are fixed gesture sequences, gestures drive eight tract variables
//! through a critically damped response, and a small formant synthesizer
//! turns the tract variables into audio.

mod corpus;
mod model;
mod render;
mod score;
mod synth;
mod tv;

pub use corpus::{
    build_parallel_corpus, read_labels, read_manifest, split_sizes, write_labels, write_manifest,
    Condition, CorpusConfig, ManifestEntry, ParallelCorpus, Split, Utterance, MANIFEST_NAME,
    MIN_UTTERANCES,
};
pub use model::{
    invert, inversion_network, nmc_pairs, pearson, per_tv_pearson, train_inversion_from_pairs,
    train_inversion_model, InversionConfig, InversionModel, INVERSION_MAGIC,
};
pub use render::{critically_damped, render_tvs, TIME_CONSTANT};
pub use score::{
    class_token, class_tokens, gesture_classes, generate_gestural_score, undershoot, GesturalScore,
    Gesture, GestureClass, Vocabulary, Word, N_CLASSES, N_GESTURES, SILENCE,
};
pub use synth::{formants, samples_for_frames, synthesize_speech_from_tvs, F0_HZ};
pub use tv::{TvTrajectory, NEUTRAL, N_TVS, TV_NAMES};
