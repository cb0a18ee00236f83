//! Decoding frame posteriors, scoring token sequences and tabulating
//! results.
//!
//! There is no lexicon or language model: posteriors are decoded greedily
//! into gesture tokens, so the "WER" here is a token error rate over
//! gesture templates and is not comparable with word error rates from a
//! full recognizer.

mod decode;
mod table;
mod transcripts;
mod wer;

pub use decode::{collapse, greedy_decode, FramePosteriors};
pub use table::{best_marks, panels, results_table, Metric, ResultRow};
pub use transcripts::{
    format_transcripts, parse_transcripts, read_transcripts, score_transcripts, write_transcripts,
    Transcripts,
};
pub use wer::{levenshtein_wer, WerReport};
