//! Transcript files: one utterance per line, `<id> <token> <token> ...`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::wer::{levenshtein_wer, WerReport};
use crate::error::{Error, Result};

pub type Transcripts = BTreeMap<String, Vec<String>>;

pub fn parse_transcripts(text: &str) -> Result<Transcripts> {
    let mut out = Transcripts::new();
    for (i, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(id) = parts.next() else { continue };
        if out.insert(id.to_string(), parts.map(String::from).collect()).is_some() {
            return Err(Error::Format(format!("line {}: duplicate utterance {id:?}", i + 1)));
        }
    }
    Ok(out)
}

pub fn read_transcripts(path: impl AsRef<Path>) -> Result<Transcripts> {
    parse_transcripts(&fs::read_to_string(path)?)
}

pub fn format_transcripts(t: &Transcripts) -> String {
    let mut out = String::new();
    for (id, words) in t {
        out.push_str(id);
        for w in words {
            out.push(' ');
            out.push_str(w);
        }
        out.push('\n');
    }
    out
}

pub fn write_transcripts(path: impl AsRef<Path>, t: &Transcripts) -> Result<()> {
    fs::write(path, format_transcripts(t))?;
    Ok(())
}

/// Pooled error counts over every reference utterance. A missing
/// hypothesis counts as empty; hypotheses without a reference are an error.
pub fn score_transcripts(reference: &Transcripts, hypothesis: &Transcripts) -> Result<WerReport> {
    if let Some(extra) = hypothesis.keys().find(|k| !reference.contains_key(*k)) {
        return Err(Error::Format(format!("hypothesis {extra:?} has no reference")));
    }
    let empty = Vec::new();
    let (mut s, mut d, mut i, mut n) = (0, 0, 0, 0);
    for (id, r) in reference {
        let h = hypothesis.get(id).unwrap_or(&empty);
        if r.is_empty() {
            i += h.len();
            continue;
        }
        let rep = levenshtein_wer(r, h)?;
        s += rep.substitutions;
        d += rep.deletions;
        i += rep.insertions;
        n += rep.n_ref_words;
    }
    WerReport::from_counts(s, d, i, n)
}
