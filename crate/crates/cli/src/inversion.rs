use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use jointam_core::config::KeyValues;
use jointam_core::dsp::{read_fmx, read_wav, write_fmx, FrontEnd};
use jointam_core::inversion::{
    invert as invert_wave, per_tv_pearson, train_inversion_from_pairs, Condition, InversionConfig,
    InversionModel, Split, TV_NAMES,
};
use jointam_core::training::EpochRecord;
use jointam_core::{Error, Matrix, Result};
use ndarray::s;
use rayon::prelude::*;

use crate::data::manifest_entries;
use crate::{create_dir, Cli};

pub const INVERSION_NAME: &str = "inversion.bin";
pub const INVERSION_LOG: &str = "inversion_log.jsonl";

/// Config keys: `n_filters`, `filter_width`, `pool_size`,
/// `n_hidden_layers`, `hidden_width`, `activation`, `context`, `seed`,
/// plus the training keys.
pub fn inversion_config(kv: &mut KeyValues, cli: &Cli) -> Result<InversionConfig> {
    let mut cfg = InversionConfig::new(cli.scale);
    cfg.seed = cli.seed;
    cfg.train.seed = cli.seed;
    kv.take("n_filters", &mut cfg.n_filters)?;
    kv.take("filter_width", &mut cfg.filter_width)?;
    kv.take("pool_size", &mut cfg.pool_size)?;
    kv.take("n_hidden_layers", &mut cfg.n_hidden_layers)?;
    kv.take("hidden_width", &mut cfg.hidden_width)?;
    kv.take("activation", &mut cfg.activation)?;
    kv.take("seed", &mut cfg.seed)?;
    let mut context = cfg.splice.width();
    kv.take("context", &mut context)?;
    if context % 2 == 0 {
        return Err(Error::Config(format!("context must be odd, got {context}")));
    }
    cfg.splice = jointam_core::SpliceSpec::symmetric(context / 2);
    cfg.train.apply_config(kv)?;
    cfg.train.validate()?;
    Ok(cfg)
}

/// `(nmc, tv)` pairs for every clean and noisy entry of `split`.
fn pairs_from_dir(dir: &Path, split: Split) -> Result<Vec<(Matrix, Matrix)>> {
    let entries = manifest_entries(dir, split, &[Condition::Clean, Condition::Noisy])?;
    if entries.is_empty() {
        return Err(Error::Input(format!("{}: the {split} split is empty", dir.display())));
    }
    entries
        .par_iter()
        .map(|e| {
            let nmc = FrontEnd::Nmc.extract(&read_wav(dir.join(&e.wav))?)?.into_frames();
            let tv = read_fmx(dir.join(&e.tv))?.into_frames();
            let n = nmc.nrows().min(tv.nrows());
            Ok((nmc.slice(s![..n, ..]).to_owned(), tv.slice(s![..n, ..]).to_owned()))
        })
        .collect()
}

pub(crate) fn write_log(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}

pub(crate) fn print_epoch(r: &EpochRecord) {
    println!(
        "epoch {:>2}  lr {:<10}  train loss {:.5}  cv error {:.5}  {}",
        r.epoch,
        r.lr,
        r.train_loss,
        r.cv_error,
        r.phase.name()
    );
}

fn print_pearson_table(columns: &[(&str, [Option<f64>; 8])]) {
    print!("{:<6}", "tv");
    for (name, _) in columns {
        print!(" {name:>8}");
    }
    println!();
    for (i, tv) in TV_NAMES.iter().enumerate() {
        print!("{tv:<6}");
        for (_, r) in columns {
            match r[i] {
                Some(v) => print!(" {v:>8.4}"),
                None => print!(" {:>8}", "n/a"),
            }
        }
        println!();
    }
}

pub fn train_inversion(cli: &Cli, corpus: &Path) -> Result<()> {
    let mut kv = cli.key_values()?;
    let cfg = inversion_config(&mut kv, cli)?;
    kv.finish()?;
    let train = pairs_from_dir(corpus, Split::Train)?;
    let cv = pairs_from_dir(corpus, Split::Cv)?;
    let (model, state, records) = train_inversion_from_pairs(&train, &cv, &cfg)?;
    records.iter().for_each(print_epoch);

    let out = cli.out_dir();
    create_dir(&out)?;
    model.save(out.join(INVERSION_NAME))?;
    write_log(&out.join(INVERSION_LOG), &records)?;

    let pred = cv
        .iter()
        .map(|(x, _)| Ok(model.predict_features(x, 0.01)?.frames().clone()))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<Matrix> = cv.into_iter().map(|p| p.1).collect();
    print_pearson_table(&[("cv r", per_tv_pearson(&pred, &truth))]);
    println!(
        "best cv mse {:.6} at epoch {}",
        state.best_cv_error().unwrap_or(f64::NAN),
        state.best_epoch.unwrap_or(0)
    );
    Ok(())
}

/// `<dir>/<stem>.<suffix>`, where `dir` is `--out` or the input's directory.
fn output_path(cli: &Cli, input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().unwrap_or_default().to_string_lossy();
    let dir = match &cli.out {
        Some(d) => d.clone(),
        None => input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    dir.join(format!("{stem}.{suffix}"))
}

pub fn invert(cli: &Cli, model_path: &Path, corpus: Option<&Path>, split: Split, wavs: &[PathBuf]) -> Result<()> {
    // (wav, reference tv, condition) jobs
    let mut jobs: Vec<(PathBuf, Option<PathBuf>, Option<Condition>)> =
        wavs.iter().map(|w| (w.clone(), None, None)).collect();
    if let Some(dir) = corpus {
        for e in manifest_entries(dir, split, &[Condition::Clean, Condition::Noisy])? {
            jobs.push((dir.join(&e.wav), Some(dir.join(&e.tv)), Some(e.kind)));
        }
    }
    if jobs.is_empty() {
        println!("nothing to invert");
        return Ok(());
    }
    let model = InversionModel::load(model_path)?;
    if let Some(out) = &cli.out {
        create_dir(out)?;
    }
    let results = jobs
        .par_iter()
        .map(|(wav, reference, cond)| {
            let tv = invert_wave(&model, &read_wav(wav)?)?;
            write_fmx(output_path(cli, wav, "tv.fmx"), &tv.to_features())?;
            let pair = match reference {
                Some(path) => {
                    let truth = read_fmx(path)?.into_frames();
                    let n = truth.nrows().min(tv.n_frames());
                    Some((
                        tv.frames().slice(s![..n, ..]).to_owned(),
                        truth.slice(s![..n, ..]).to_owned(),
                        cond.expect("corpus jobs carry a condition"),
                    ))
                }
                None => None,
            };
            Ok(pair)
        })
        .collect::<Result<Vec<_>>>()?;
    println!("inverted {} files", jobs.len());

    let scored: Vec<_> = results.into_iter().flatten().collect();
    if !scored.is_empty() {
        let column = |c: Condition| {
            let (p, t): (Vec<Matrix>, Vec<Matrix>) = scored
                .iter()
                .filter(|s| s.2 == c)
                .map(|s| (s.0.clone(), s.1.clone()))
                .unzip();
            per_tv_pearson(&p, &t)
        };
        println!("pearson r against stored TVs ({split} split)");
        print_pearson_table(&[("clean", column(Condition::Clean)), ("noisy", column(Condition::Noisy))]);
    }
    Ok(())
}

pub fn extract_features(cli: &Cli, front_end: FrontEnd, wavs: &[PathBuf]) -> Result<()> {
    if let Some(out) = &cli.out {
        create_dir(out)?;
    }
    let suffix = format!("{}.fmx", front_end.name());
    wavs.par_iter()
        .map(|wav| {
            let f = front_end.extract(&read_wav(wav)?)?;
            write_fmx(output_path(cli, wav, &suffix), &f)
        })
        .collect::<Result<Vec<_>>>()?;
    println!("wrote {} {} feature files", wavs.len(), front_end.name());
    Ok(())
}
