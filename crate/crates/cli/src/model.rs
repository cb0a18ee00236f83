use std::fs;
use std::io::Write;
use std::path::Path;

use jointam_core::acoustic::{train_acoustic_model, AcousticModel, TvSource};
use jointam_core::arch::{ArchKind, ArchSpec};
use jointam_core::config::KeyValues;
use jointam_core::inversion::{InversionModel, Split, N_CLASSES};
use jointam_core::training::TrainConfig;
use jointam_core::{Error, Result};

use crate::data::{load_utterances, ResultRecord, RESULTS_NAME};
use crate::inversion::print_epoch;
use crate::{create_dir, Cli, ConditionArg, TvSourceArg};

pub const MODEL_NAME: &str = "model.bin";
pub const TRAIN_LOG: &str = "train_log.jsonl";

pub struct TrainArgs<'a> {
    pub arch: ArchKind,
    pub corpus: &'a Path,
    pub tv_source: TvSourceArg,
    pub inversion_model: Option<&'a Path>,
    pub condition: ConditionArg,
    pub set_name: Option<&'a str>,
}

pub struct EvalArgs<'a> {
    pub model: &'a Path,
    pub corpus: &'a Path,
    pub split: Split,
    pub condition: ConditionArg,
    pub tv_source: TvSourceArg,
    pub inversion_model: Option<&'a Path>,
    pub results: Option<&'a Path>,
}

fn features_label(kind: ArchKind, tv: TvSourceArg) -> &'static str {
    match (kind.uses_tv(), tv) {
        (false, _) => "FB",
        (true, TvSourceArg::Inverted) => "FB + TV",
        (true, TvSourceArg::GroundTruth) => "FB + TV (oracle)",
    }
}

/// Loads the inversion network when the architecture needs inverted TVs.
fn inversion_for(kind: ArchKind, tv: TvSourceArg, path: Option<&Path>) -> Result<Option<InversionModel>> {
    if !kind.uses_tv() || tv == TvSourceArg::GroundTruth {
        return Ok(None);
    }
    let path = path.ok_or_else(|| {
        Error::Config("--tv-source inverted needs --inversion-model".into())
    })?;
    Ok(Some(InversionModel::load(path)?))
}

fn tv_source<'a>(kind: ArchKind, tv: TvSourceArg, inv: &'a Option<InversionModel>) -> TvSource<'a> {
    match (kind.uses_tv(), tv, inv) {
        (false, _, _) => TvSource::None,
        (true, TvSourceArg::GroundTruth, _) => TvSource::GroundTruth,
        (true, TvSourceArg::Inverted, Some(m)) => TvSource::Inverted(m),
        (true, TvSourceArg::Inverted, None) => unreachable!("checked by inversion_for"),
    }
}

/// Architecture and training keys of the config file, on top of the
/// defaults for `arch` at the requested scale.
pub fn train_settings(kv: &mut KeyValues, cli: &Cli, arch: ArchKind) -> Result<(ArchSpec, TrainConfig)> {
    let mut spec = ArchSpec::new(arch, N_CLASSES).scaled(cli.scale);
    spec.seed = cli.seed;
    spec.apply_config(kv)?;
    if spec.kind != arch {
        return Err(Error::Config(format!("config kind {} contradicts --arch {arch}", spec.kind)));
    }
    spec.validate()?;
    let mut cfg = TrainConfig {
        seed: cli.seed,
        ..TrainConfig::default()
    };
    cfg.apply_config(kv)?;
    cfg.validate()?;
    Ok((spec, cfg))
}

pub fn meta_path(model: &Path) -> std::path::PathBuf {
    model.with_extension("meta")
}

pub fn train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let mut kv = cli.key_values()?;
    let (spec, cfg) = train_settings(&mut kv, cli, args.arch)?;
    kv.finish()?;
    let inv = inversion_for(args.arch, args.tv_source, args.inversion_model)?;
    let source = tv_source(args.arch, args.tv_source, &inv);
    let conditions = args.condition.conditions();
    let train_set = load_utterances(args.corpus, Split::Train, conditions, source)?;
    let cv_set = load_utterances(args.corpus, Split::Cv, conditions, source)?;

    let out = cli.out_dir();
    create_dir(&out)?;
    let mut log = std::io::BufWriter::new(fs::File::create(out.join(TRAIN_LOG))?);
    let (model, state) = train_acoustic_model(&spec, &train_set, &cv_set, &cfg, |r| {
        print_epoch(r);
        serde_json::to_writer(&mut log, r).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(log)?;
        Ok(())
    })?;
    log.flush()?;

    let model_path = out.join(MODEL_NAME);
    model.save(&model_path)?;
    let set_name = args.set_name.map(str::to_string).unwrap_or_else(|| {
        args.corpus
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into())
    });
    let best = state.best_cv_error().unwrap_or(f64::NAN);
    let meta = format!(
        "arch = {}\nfeatures = {}\nscale = {}\ntv_source = {}\ncondition = {}\ntrain_set = {}\nseed = {}\n\
         epochs = {}\nbest_epoch = {}\nbest_cv_error = {best:?}\nfinal_lr = {:?}\nphase = {}\nparams = {}\n",
        spec.kind,
        features_label(spec.kind, args.tv_source),
        cli.scale.name(),
        match args.tv_source {
            TvSourceArg::GroundTruth => "ground-truth",
            TvSourceArg::Inverted => "inverted",
        },
        args.condition.name(),
        set_name,
        cli.seed,
        state.epoch,
        state.best_epoch.unwrap_or(0),
        state.lr,
        state.phase.name(),
        model.net.param_count(),
    );
    fs::write(meta_path(&model_path), meta)?;
    println!(
        "final cv error {best:.5} (best epoch {} of {})",
        state.best_epoch.unwrap_or(0),
        state.epoch
    );
    Ok(())
}

pub fn evaluate(cli: &Cli, args: &EvalArgs) -> Result<()> {
    let model = AcousticModel::load(args.model)?;
    let kind = model.spec.kind;
    let mut meta = match fs::read_to_string(meta_path(args.model)) {
        Ok(text) => KeyValues::parse(&text)?,
        Err(_) => KeyValues::default(),
    };
    let train_set = meta.take_str("train_set").unwrap_or_else(|| "unknown".into());

    let inv = inversion_for(kind, args.tv_source, args.inversion_model)?;
    let source = tv_source(kind, args.tv_source, &inv);
    let utts = load_utterances(args.corpus, args.split, args.condition.conditions(), source)?;
    let report = model.evaluate(&utts)?;
    let wer = report.wer;
    println!("utterances      {}", utts.len());
    println!("frames          {}", report.n_frames);
    println!("frame accuracy  {:.4}", report.frame_accuracy());
    println!(
        "token errors    S={} D={} I={} N={}",
        wer.substitutions, wer.deletions, wer.insertions, wer.n_ref_words
    );
    println!("token wer       {:.2}%", wer.wer_percent);

    let record = ResultRecord {
        arch: kind.name().to_string(),
        features: features_label(kind, args.tv_source).to_string(),
        train_set,
        test_set: format!("{}/{}", args.split, args.condition.name()),
        frame_accuracy: report.frame_accuracy(),
        wer: wer.wer_percent,
    };
    let results = match args.results {
        Some(p) => p.to_path_buf(),
        None => {
            let out = cli.out_dir();
            create_dir(&out)?;
            out.join(RESULTS_NAME)
        }
    };
    record.append_to(&results)?;
    Ok(())
}
