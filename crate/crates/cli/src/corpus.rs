use jointam_core::config::KeyValues;
use jointam_core::dsp::NoiseKind;
use jointam_core::inversion::{build_parallel_corpus, split_sizes, CorpusConfig, ParallelCorpus, Split, Vocabulary};
use jointam_core::{Error, Result};

use crate::{create_dir, Cli};

/// Config keys: `n_utts`, `severity_min`, `severity_max`, `snr_min`,
/// `snr_max`, `noise_types` (comma list), `frame_shift`.
pub fn corpus_config(kv: &mut KeyValues, seed: u64) -> Result<CorpusConfig> {
    let mut cfg = CorpusConfig {
        seed,
        ..CorpusConfig::default()
    };
    kv.take("n_utts", &mut cfg.n_utts)?;
    kv.take("severity_min", &mut cfg.severity_range.0)?;
    kv.take("severity_max", &mut cfg.severity_range.1)?;
    kv.take("snr_min", &mut cfg.snr_range.0)?;
    kv.take("snr_max", &mut cfg.snr_range.1)?;
    kv.take("frame_shift", &mut cfg.frame_shift)?;
    if let Some(list) = kv.take_str("noise_types") {
        cfg.noise_bank = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<NoiseKind>().map_err(Error::Config))
            .collect::<Result<_>>()?;
    }
    if !(cfg.frame_shift > 0.0) {
        return Err(Error::Config(format!("frame_shift must be positive, got {}", cfg.frame_shift)));
    }
    Ok(cfg)
}

/// Counts of noisy copies per 10 dB bin.
pub fn snr_histogram(corpus: &ParallelCorpus, lo: f64, hi: f64) -> Vec<(f64, usize)> {
    let n_bins = (((hi - lo) / 10.0).ceil() as usize).max(1);
    let mut counts = vec![0; n_bins];
    for u in &corpus.utterances {
        let bin = (((u.snr_db - lo) / 10.0).floor() as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    counts.into_iter().enumerate().map(|(i, c)| (lo + 10.0 * i as f64, c)).collect()
}

pub fn corpus_gen(cli: &Cli) -> Result<()> {
    let mut kv = cli.key_values()?;
    let cfg = corpus_config(&mut kv, cli.seed)?;
    kv.finish()?;
    let vocab = Vocabulary::synthetic();
    let corpus = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| build_parallel_corpus(&cfg, &vocab))?,
        None => build_parallel_corpus(&cfg, &vocab)?,
    };
    let out = cli.out_dir();
    create_dir(&out)?;
    let manifest = corpus.write(&out)?;

    let counts = corpus.split_counts();
    println!("utterances {}  entries {}", corpus.len(), manifest.len());
    for (split, n) in Split::ALL.iter().zip(counts) {
        println!("  {:<5} {n:>6}", split.name());
    }
    debug_assert_eq!(counts, split_sizes(cfg.n_utts));
    println!("snr (dB)   noisy copies");
    for (lo, n) in snr_histogram(&corpus, cfg.snr_range.0, cfg.snr_range.1) {
        println!("  {:>3.0}-{:<3.0} {n:>6} {}", lo, lo + 10.0, "#".repeat(n.min(60)));
    }
    println!("digest {}", corpus.digest());
    Ok(())
}
