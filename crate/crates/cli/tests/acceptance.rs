//! Acceptance run. Every criterion prints one PASS or FAIL line and the
//! process exits non-zero if any failed. Pass substrings of criterion
//! names as arguments to run a subset.

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use jointam_core::acoustic::{labelled_utterances, train_acoustic_model};
use jointam_core::arch::{build, ArchKind, ArchSpec, Scale};
use jointam_core::eval::{levenshtein_wer, results_table, Metric, ResultRow};
use jointam_core::inversion::{
    build_parallel_corpus, nmc_pairs, per_tv_pearson, train_inversion_from_pairs, Condition, CorpusConfig,
    InversionConfig, Split, Vocabulary, N_CLASSES, N_TVS, TV_NAMES,
};
use jointam_core::nn::{
    mse_loss, softmax_cross_entropy, Activation, ConvAxis, InputSource, InputView, Layer, LayerSpec, Mode,
    ModelInput, NetworkGraph, Place, Stream,
};
use jointam_core::training::{schedule_update, Phase, TrainConfig, TrainState};
use jointam_core::{Matrix, TvSource};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 gradient suite", gradient_suite),
        ("2 shape ledger", shape_ledger),
        ("3 schedule", schedule),
        ("4 fcnn vs cnn ordering", fcnn_beats_cnn),
        ("5 inversion vs linear oracle", inversion_beats_linear_oracle),
        ("6 wer oracle", wer_oracle),
        ("7 pipeline determinism", pipeline_determinism),
        ("8 results table", results_table_marks_fcnn),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- gradients

fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn layer(spec: LayerSpec, rng: &mut ChaCha8Rng) -> Layer {
    Layer::init(spec, rng).unwrap()
}

fn stream(source: InputSource, input_dim: usize, layers: Vec<Layer>) -> Stream {
    Stream {
        source,
        view: InputView::Identity,
        input_dim,
        layers,
    }
}

#[derive(Clone, Copy)]
enum Objective {
    /// Cross-entropy on the pre-softmax output.
    CrossEntropy,
    /// Squared error on the full output.
    Squared,
}

struct GradCase {
    name: &'static str,
    net: NetworkGraph,
    input: ModelInput,
    objective: Objective,
    labels: Vec<usize>,
    target: Matrix,
}

impl GradCase {
    fn loss(&mut self) -> f64 {
        self.eval(false).0
    }

    /// Loss and, when `grad`, its gradient with respect to the network output.
    fn eval(&mut self, grad: bool) -> (f64, Option<Matrix>) {
        let mode = if grad { Mode::Train } else { Mode::Eval };
        let loss = match self.objective {
            Objective::CrossEntropy => {
                let y = self.net.forward_logits(&self.input, mode).unwrap();
                softmax_cross_entropy(&y, &self.labels).unwrap()
            }
            Objective::Squared => {
                let y = self.net.forward(&self.input, mode).unwrap();
                mse_loss(&y, &self.target).unwrap()
            }
        };
        (loss.value, grad.then_some(loss.grad))
    }
}

/// `|a - n| / max(|a|, |n|)`, with the denominator floored at 1e-7 so
/// structurally zero entries (dead units, non-maximal pool inputs) compare
/// on absolute error.
fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

fn input_mut(input: &mut ModelInput, tv: bool) -> &mut [f64] {
    let m = if tv { input.tv.as_mut().unwrap() } else { &mut input.acoustic };
    m.as_slice_mut().unwrap()
}

/// Worst relative error over every parameter and every input coordinate,
/// using central differences with step `eps`.
fn check_case(case: &mut GradCase, eps: f64) -> (f64, String) {
    let (_, dy) = case.eval(true);
    let grads = case.net.backward(&dy.unwrap()).unwrap();
    let mut worst = (0.0, String::new());
    let mut note = |rel: f64, what: String| {
        if rel > worst.0 {
            worst = (rel, what);
        }
    };

    let n_params = case.net.params().len();
    for p in 0..n_params {
        let len = case.net.params()[p].len();
        for k in 0..len {
            let original = case.net.params()[p].as_slice().unwrap()[k];
            case.net.params_mut()[p].as_slice_mut().unwrap()[k] = original + eps;
            let hi = case.loss();
            case.net.params_mut()[p].as_slice_mut().unwrap()[k] = original - eps;
            let lo = case.loss();
            case.net.params_mut()[p].as_slice_mut().unwrap()[k] = original;
            let numeric = (hi - lo) / (2.0 * eps);
            let analytic = grads.params[p].as_slice().unwrap()[k];
            note(rel_error(analytic, numeric), format!("{} param {p}[{k}]", case.name));
        }
    }

    for (is_tv, g) in [(false, &grads.acoustic_input), (true, &grads.tv_input)] {
        let Some(g) = g else { continue };
        for k in 0..g.len() {
            let original = input_mut(&mut case.input, is_tv)[k];
            input_mut(&mut case.input, is_tv)[k] = original + eps;
            let hi = case.loss();
            input_mut(&mut case.input, is_tv)[k] = original - eps;
            let lo = case.loss();
            input_mut(&mut case.input, is_tv)[k] = original;
            let numeric = (hi - lo) / (2.0 * eps);
            let which = if is_tv { "tv input" } else { "input" };
            note(rel_error(g.as_slice().unwrap()[k], numeric), format!("{} {which}[{k}]", case.name));
        }
    }
    worst
}

fn gradient_cases() -> Vec<GradCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let frames = 4;
    let mut cases = Vec::new();

    // dense -> sigmoid -> dense -> softmax, cross-entropy
    let net = NetworkGraph::new(
        vec![stream(InputSource::Acoustic, 6, vec![])],
        vec![
            layer(LayerSpec::Dense { n_in: 6, n_out: 5 }, &mut rng),
            layer(LayerSpec::Activation(Activation::Sigmoid), &mut rng),
            layer(LayerSpec::Dense { n_in: 5, n_out: 4 }, &mut rng),
            layer(LayerSpec::Softmax, &mut rng),
        ],
    )
    .unwrap();
    let input = ModelInput::acoustic(uniform(frames, 6, &mut rng));
    let labels = (0..frames).map(|_| rng.random_range(0..4)).collect();
    cases.push(GradCase {
        name: "dense/sigmoid/softmax-ce",
        net,
        input,
        objective: Objective::CrossEntropy,
        labels,
        target: Array2::zeros((0, 0)),
    });

    // frequency conv -> relu -> max-pool -> dense, squared error
    let (positions, channels) = (9, 2);
    let net = NetworkGraph::new(
        vec![stream(
            InputSource::Acoustic,
            positions * channels,
            vec![
                layer(
                    LayerSpec::Conv1d {
                        axis: ConvAxis::Frequency,
                        positions,
                        in_channels: channels,
                        n_filters: 3,
                        filter_width: 3,
                    },
                    &mut rng,
                ),
                layer(LayerSpec::Activation(Activation::Relu), &mut rng),
                layer(
                    LayerSpec::MaxPool1d {
                        positions: 7,
                        channels: 3,
                        pool_size: 3,
                    },
                    &mut rng,
                ),
            ],
        )],
        vec![layer(LayerSpec::Dense { n_in: 6, n_out: 3 }, &mut rng)],
    )
    .unwrap();
    cases.push(GradCase {
        name: "freq-conv/relu/maxpool/mse",
        net,
        input: ModelInput::acoustic(uniform(frames, positions * channels, &mut rng)),
        objective: Objective::Squared,
        labels: vec![],
        target: uniform(frames, 3, &mut rng),
    });

    // fused: frequency conv on acoustic, time conv + pool on articulatory,
    // shared sigmoid trunk with softmax, cross-entropy
    let (tv_ctx, tvs) = (7, 2);
    let freq = stream(
        InputSource::Acoustic,
        10,
        vec![
            layer(
                LayerSpec::Conv1d {
                    axis: ConvAxis::Frequency,
                    positions: 5,
                    in_channels: 2,
                    n_filters: 2,
                    filter_width: 2,
                },
                &mut rng,
            ),
            layer(LayerSpec::Activation(Activation::Sigmoid), &mut rng),
        ],
    );
    let time = stream(
        InputSource::Articulatory,
        tv_ctx * tvs,
        vec![
            layer(
                LayerSpec::Conv1d {
                    axis: ConvAxis::Time,
                    positions: tv_ctx,
                    in_channels: tvs,
                    n_filters: 2,
                    filter_width: 3,
                },
                &mut rng,
            ),
            layer(LayerSpec::Activation(Activation::Sigmoid), &mut rng),
            layer(
                LayerSpec::MaxPool1d {
                    positions: 5,
                    channels: 2,
                    pool_size: 2,
                },
                &mut rng,
            ),
        ],
    );
    let net = NetworkGraph::new(
        vec![freq, time],
        vec![
            layer(LayerSpec::Dense { n_in: 8 + 4, n_out: 5 }, &mut rng),
            layer(LayerSpec::Activation(Activation::Sigmoid), &mut rng),
            layer(LayerSpec::Dense { n_in: 5, n_out: 3 }, &mut rng),
            layer(LayerSpec::Softmax, &mut rng),
        ],
    )
    .unwrap();
    let input = ModelInput::with_tv(uniform(frames, 10, &mut rng), uniform(frames, tv_ctx * tvs, &mut rng));
    let labels = (0..frames).map(|_| rng.random_range(0..3)).collect();
    cases.push(GradCase {
        name: "fused time-conv/freq-conv",
        net,
        input,
        objective: Objective::CrossEntropy,
        labels,
        target: Array2::zeros((0, 0)),
    });

    // softmax layer itself, through squared error on the probabilities
    let net = NetworkGraph::new(
        vec![stream(InputSource::Acoustic, 4, vec![])],
        vec![
            layer(LayerSpec::Dense { n_in: 4, n_out: 3 }, &mut rng),
            layer(LayerSpec::Activation(Activation::Linear), &mut rng),
            layer(LayerSpec::Softmax, &mut rng),
        ],
    )
    .unwrap();
    cases.push(GradCase {
        name: "softmax layer/mse",
        net,
        input: ModelInput::acoustic(uniform(frames, 4, &mut rng)),
        objective: Objective::Squared,
        labels: vec![],
        target: uniform(frames, 3, &mut rng).mapv(f64::abs),
    });

    for case in &mut cases {
        // biases start at zero; move them off zero so their gradients are generic
        for p in case.net.params_mut() {
            if p.nrows() == 1 {
                p.mapv_inplace(|_| rng.random_range(-0.5..0.5));
            }
        }
        // A +-1e-3 step moves any unit by about 1e-3, so inputs that put a
        // relu or a pool decision within 1e-2 of its switching point would
        // make the difference quotient straddle a kink. Redraw those.
        while kink_margin(case) < 1e-2 {
            let a = case.input.acoustic.dim();
            case.input.acoustic = uniform(a.0, a.1, &mut rng);
            if let Some(tv) = &mut case.input.tv {
                let d = tv.dim();
                *tv = uniform(d.0, d.1, &mut rng);
            }
        }
    }
    cases
}

/// Smallest distance of any relu input from zero, or of any pool winner
/// from its runner-up, over the stream layers. The trunks used here have
/// no kinks.
fn kink_margin(case: &GradCase) -> f64 {
    let mut margin = f64::INFINITY;
    for s in &case.net.streams {
        for (j, l) in s.layers.iter().enumerate() {
            let kinked = matches!(l.spec, LayerSpec::Activation(Activation::Relu) | LayerSpec::MaxPool1d { .. });
            if !kinked {
                continue;
            }
            let prefix = Stream {
                layers: s.layers[..j].to_vec(),
                ..s.clone()
            };
            let z = NetworkGraph::new(vec![prefix], vec![]).unwrap().predict(&case.input).unwrap();
            match l.spec {
                LayerSpec::MaxPool1d {
                    positions,
                    channels,
                    pool_size,
                } => {
                    for row in z.rows() {
                        for w in 0..positions / pool_size {
                            for c in 0..channels {
                                let mut v: Vec<f64> =
                                    (0..pool_size).map(|k| row[(w * pool_size + k) * channels + c]).collect();
                                v.sort_by(|a, b| b.total_cmp(a));
                                margin = margin.min(v[0] - v[1]);
                            }
                        }
                    }
                }
                _ => margin = margin.min(z.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))),
            }
        }
    }
    margin
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut report = Vec::new();
    let mut worst: f64 = 0.0;
    for mut case in gradient_cases() {
        let (rel, at) = check_case(&mut case, 1e-3);
        ensure(rel <= 1e-4, || format!("relative error {rel:.2e} at {at}"))?;
        worst = worst.max(rel);
        report.push(format!("{} {rel:.1e}", case.name));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("worst rel error {worst:.2e} ({})", report.join(", ")))
}

// ------------------------------------------------------------ shape ledger

fn shape_ledger() -> Outcome {
    let spec = ArchSpec::large(ArchKind::Fcnn, N_CLASSES);
    let net = build(&spec).map_err(|e| e.to_string())?;
    let ledger = net.shape_ledger();
    let stream_layers = |i: usize| -> Vec<(LayerSpec, usize, usize)> {
        ledger
            .iter()
            .filter(|e| e.place == Place::Stream(i))
            .map(|e| (e.spec.clone(), e.in_dim, e.out_dim))
            .collect()
    };
    // (positions after conv, positions after pool, filters)
    let conv_path = |i: usize| -> Option<(usize, usize, usize, usize)> {
        let layers = stream_layers(i);
        let conv = layers.iter().find_map(|(s, _, _)| match s {
            LayerSpec::Conv1d {
                positions,
                n_filters,
                filter_width,
                ..
            } => Some((*positions, positions + 1 - filter_width, *n_filters)),
            _ => None,
        })?;
        let pooled = layers.iter().find_map(|(s, _, _)| match s {
            LayerSpec::MaxPool1d { positions, pool_size, .. } => Some(positions / pool_size),
            _ => None,
        })?;
        Some((conv.0, conv.1, pooled, conv.2))
    };
    let freq = conv_path(0).ok_or("frequency stream has no conv/pool")?;
    let time = conv_path(1).ok_or("time stream has no conv/pool")?;
    ensure(freq == (40, 33, 11, 200), || format!("frequency stream {freq:?}"))?;
    ensure(time == (17, 13, 2, 75), || format!("time stream {time:?}"))?;
    let dims = net.stream_out_dims();
    ensure(dims == vec![2200, 150], || format!("stream widths {dims:?}"))?;
    ensure(net.fused_dim() == 2350, || format!("fused {}", net.fused_dim()))?;
    let dense: Vec<(usize, usize)> = ledger
        .iter()
        .filter(|e| e.place == Place::Trunk)
        .filter_map(|e| match e.spec {
            LayerSpec::Dense { n_in, n_out } => Some((n_in, n_out)),
            _ => None,
        })
        .collect();
    let hidden: Vec<usize> = dense[..dense.len() - 1].iter().map(|d| d.1).collect();
    ensure(hidden == vec![2048; 6], || format!("hidden layers {hidden:?}"))?;
    ensure(dense[0].0 == 2350, || format!("first dense reads {}", dense[0].0))?;
    ensure(dense.last() == Some(&(2048, N_CLASSES)), || format!("output {:?}", dense.last()))?;
    Ok(format!(
        "40->33->11 x 200 = 2200, 17->13->2 x 75 = 150, fused 2350, dense 6 x 2048, {} params",
        net.param_count()
    ))
}

// ---------------------------------------------------------------- schedule

/// Rates used for epochs 1..=len+1 and the final phase.
fn script(errors: &[f64], cfg: &TrainConfig) -> (Vec<f64>, Phase) {
    let mut state = TrainState::new(cfg);
    let mut rates = vec![state.lr];
    for &e in errors {
        state = schedule_update(&state, e, cfg);
        rates.push(state.lr);
    }
    (rates, state.phase)
}

fn schedule() -> Outcome {
    let cfg = TrainConfig::default();
    let every = TrainConfig {
        halve_every_epoch: true,
        ..TrainConfig::default()
    };
    let cases: Vec<(&str, &TrainConfig, Vec<f64>, Vec<f64>, Phase)> = vec![
        (
            "flat cv error still keeps 4 constant epochs",
            &cfg,
            vec![0.5, 0.5, 0.5, 0.5],
            vec![0.008, 0.008, 0.008, 0.008, 0.004],
            Phase::Halving,
        ),
        (
            "good gains stay constant",
            &cfg,
            vec![0.50, 0.40, 0.30, 0.20, 0.10],
            vec![0.008; 6],
            Phase::Constant,
        ),
        (
            // 0.1 -> 0.0996 is a 0.4% gain (< 0.5%): halve
            // 0.0996 -> 0.0990 is a 0.6% gain: keep the rate
            // 0.0990 -> 0.0987 is a 0.3% gain: halve again
            // 0.0987 -> 0.09865 is a 0.05% gain (< 0.1%): stop
            "halving then stop on small gain",
            &cfg,
            vec![0.5, 0.3, 0.2, 0.1, 0.0996, 0.0990, 0.0987, 0.09865],
            vec![0.008, 0.008, 0.008, 0.008, 0.008, 0.004, 0.004, 0.002, 0.002],
            Phase::Stopped,
        ),
        (
            "cv error increase stops",
            &cfg,
            vec![0.5, 0.4, 0.3, 0.3, 0.31],
            vec![0.008, 0.008, 0.008, 0.008, 0.004, 0.004],
            Phase::Stopped,
        ),
        (
            "classic newbob halves every epoch",
            &every,
            vec![0.5, 0.4, 0.3, 0.2, 0.1995, 0.15, 0.12],
            vec![0.008, 0.008, 0.008, 0.008, 0.008, 0.004, 0.002, 0.001],
            Phase::Halving,
        ),
    ];
    for (name, cfg, errors, want, phase) in &cases {
        let (rates, got_phase) = script(errors, cfg);
        ensure(&rates == want && got_phase == *phase, || {
            format!("{name}: rates {rates:?} phase {got_phase:?}, wanted {want:?} {phase:?}")
        })?;
    }
    // a stopped state never moves again
    let mut state = TrainState::new(&cfg);
    for e in [0.5, 0.4, 0.3, 0.3, 0.31] {
        state = schedule_update(&state, e, &cfg);
    }
    let frozen = schedule_update(&state, 0.01, &cfg);
    ensure(frozen == state, || "stopped state changed".into())?;
    Ok(format!("{} scripted sequences", cases.len()))
}

// ------------------------------------------------------ fcnn vs cnn ordering

fn held_out_accuracy(kind: ArchKind, seed: u64, data: &AcousticData) -> Result<f64, String> {
    let mut spec = ArchSpec::new(kind, N_CLASSES).scaled(Scale::Toy);
    spec.n_hidden_layers = 2;
    spec.seed = seed;
    let cfg = TrainConfig {
        max_epochs: 3,
        seed,
        ..TrainConfig::default()
    };
    let (model, _) =
        train_acoustic_model(&spec, &data.train, &data.cv, &cfg, |_| Ok(())).map_err(|e| e.to_string())?;
    let report = model.evaluate(&data.test).map_err(|e| e.to_string())?;
    Ok(report.frame_accuracy())
}

struct AcousticData {
    train: Vec<jointam_core::LabelledUtterance>,
    cv: Vec<jointam_core::LabelledUtterance>,
    test: Vec<jointam_core::LabelledUtterance>,
}

fn fcnn_beats_cnn() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let cfg = CorpusConfig {
            n_utts: 500,
            severity_range: (0.3, 0.7),
            seed,
            ..CorpusConfig::default()
        };
        let corpus = build_parallel_corpus(&cfg, &Vocabulary::synthetic()).map_err(|e| e.to_string())?;
        let load = |split| labelled_utterances(&corpus, split, Condition::Noisy, TvSource::GroundTruth);
        let data = AcousticData {
            train: load(Split::Train).map_err(|e| e.to_string())?,
            cv: load(Split::Cv).map_err(|e| e.to_string())?,
            test: load(Split::Test).map_err(|e| e.to_string())?,
        };
        drop(corpus);
        let cnn = held_out_accuracy(ArchKind::Cnn, seed, &data)?;
        let fcnn = held_out_accuracy(ArchKind::Fcnn, seed, &data)?;
        if fcnn >= cnn {
            wins += 1;
        }
        lines.push(format!("seed {seed}: cnn {cnn:.4} fcnn {fcnn:.4}"));
        eprintln!("  {}", lines.last().unwrap());
    }
    let elapsed = start.elapsed();
    let summary = format!("fcnn >= cnn in {wins}/5 ({}), {:.0}s", lines.join("; "), elapsed.as_secs_f64());
    ensure(wins >= 4, || summary.clone())?;
    ensure(elapsed <= Duration::from_secs(15 * 60), || format!("over 15 min: {summary}"))?;
    Ok(summary)
}

// ----------------------------------------------- inversion vs linear oracle

/// Least squares from the current raw NMC frame (plus intercept) to the
/// TVs, by the normal equations.
fn linear_oracle(train: &[(Matrix, Matrix)]) -> DMatrix<f64> {
    let d = train[0].0.ncols() + 1;
    let mut xtx = DMatrix::<f64>::zeros(d, d);
    let mut xty = DMatrix::<f64>::zeros(d, N_TVS);
    for (x, y) in train {
        for (xr, yr) in x.rows().into_iter().zip(y.rows()) {
            let row = DVector::from_iterator(d, xr.iter().copied().chain(std::iter::once(1.0)));
            xtx += &row * row.transpose();
            let yrow = DMatrix::from_row_slice(1, N_TVS, &yr.to_vec());
            xty += &row * yrow;
        }
    }
    xtx.cholesky().expect("normal equations are positive definite").solve(&xty)
}

fn apply_linear(w: &DMatrix<f64>, x: &Matrix) -> Matrix {
    let d = x.ncols() + 1;
    Array2::from_shape_fn((x.nrows(), N_TVS), |(i, t)| {
        (0..d)
            .map(|k| if k + 1 == d { w[(k, t)] } else { x[[i, k]] * w[(k, t)] })
            .sum()
    })
}

fn inversion_beats_linear_oracle() -> Outcome {
    let cfg = CorpusConfig {
        n_utts: 500,
        seed: 5,
        ..CorpusConfig::default()
    };
    let corpus = build_parallel_corpus(&cfg, &Vocabulary::synthetic()).map_err(|e| e.to_string())?;
    let pairs = |split| nmc_pairs(&corpus, split).map_err(|e| e.to_string());
    let (train, cv, test) = (pairs(Split::Train)?, pairs(Split::Cv)?, pairs(Split::Test)?);
    drop(corpus);

    let mut inv_cfg = InversionConfig::new(Scale::Toy);
    inv_cfg.seed = 5;
    inv_cfg.train.seed = 5;
    let (model, _, records) = train_inversion_from_pairs(&train, &cv, &inv_cfg).map_err(|e| e.to_string())?;
    let w = linear_oracle(&train);

    let truth: Vec<Matrix> = test.iter().map(|p| p.1.clone()).collect();
    let cnn_pred = test
        .iter()
        .map(|(x, _)| Ok(model.predict_features(x, cfg.frame_shift)?.frames().clone()))
        .collect::<jointam_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let lin_pred: Vec<Matrix> = test.iter().map(|(x, _)| apply_linear(&w, x)).collect();
    let r_cnn = per_tv_pearson(&cnn_pred, &truth);
    let r_lin = per_tv_pearson(&lin_pred, &truth);
    let mut better = 0;
    let mut cells = Vec::new();
    for t in 0..N_TVS {
        let (c, l) = (r_cnn[t].unwrap_or(f64::NAN), r_lin[t].unwrap_or(f64::NAN));
        if c > l {
            better += 1;
        }
        cells.push(format!("{} {c:.3}/{l:.3}", TV_NAMES[t]));
    }
    let summary = format!(
        "cnn beats linear on {better}/8 TVs after {} epochs (cnn/linear r: {})",
        records.len(),
        cells.join(", ")
    );
    ensure(better >= 6, || summary.clone())?;
    Ok(summary)
}

// --------------------------------------------------------------- wer oracle

/// Independent scorer: top-down recursion over suffixes, memoized, that
/// ranks alignments by (edits, -substitutions). Returns (edits, subs).
fn oracle_alignment(r: &[u8], h: &[u8]) -> (usize, usize) {
    fn go(r: &[u8], h: &[u8], i: usize, j: usize, memo: &mut HashMap<(usize, usize), (usize, usize)>) -> (usize, usize) {
        if i == r.len() {
            return (h.len() - j, 0);
        }
        if j == h.len() {
            return (r.len() - i, 0);
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let diag = go(r, h, i + 1, j + 1, memo);
        let mut options = vec![if r[i] == h[j] { diag } else { (diag.0 + 1, diag.1 + 1) }];
        let del = go(r, h, i + 1, j, memo);
        options.push((del.0 + 1, del.1));
        let ins = go(r, h, i, j + 1, memo);
        options.push((ins.0 + 1, ins.1));
        let best = options
            .into_iter()
            .min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
            .unwrap();
        memo.insert((i, j), best);
        best
    }
    go(r, h, 0, 0, &mut HashMap::new())
}

fn wer_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let alphabet = rng.random_range(1..=4u8);
        let r: Vec<u8> = (0..rng.random_range(1..=10)).map(|_| rng.random_range(0..alphabet)).collect();
        let h: Vec<u8> = (0..rng.random_range(0..=10)).map(|_| rng.random_range(0..alphabet)).collect();
        let got = levenshtein_wer(&r, &h).map_err(|e| e.to_string())?;
        let (edits, subs) = oracle_alignment(&r, &h);
        // With N = S + D + C and H = S + I + C, the edit count and the
        // substitution count fix D and I.
        let (n, m) = (r.len() as i64, h.len() as i64);
        let d_plus_i = (edits - subs) as i64;
        let dels = ((d_plus_i + n - m) / 2) as usize;
        let ins = ((d_plus_i - n + m) / 2) as usize;
        let wer = 100.0 * edits as f64 / r.len() as f64;
        let want = (subs, dels, ins, r.len(), wer);
        let have = (got.substitutions, got.deletions, got.insertions, got.n_ref_words, got.wer_percent);
        ensure(want == have, || format!("case {case}: ref {r:?} hyp {h:?}: oracle {want:?}, got {have:?}"))?;
    }
    Ok("1000 random pairs match exactly".into())
}

// ---------------------------------------------------- pipeline determinism

fn jointam(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_jointam"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "jointam {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn toy_pipeline(root: &Path) -> Result<(Vec<u8>, String), String> {
    let s = |p: &Path| p.to_string_lossy().into_owned();
    let corpus_cfg = root.join("corpus.cfg");
    let train_cfg = root.join("train.cfg");
    fs::write(&corpus_cfg, "n_utts = 60\n").map_err(|e| e.to_string())?;
    fs::write(&train_cfg, "max_epochs = 2\nn_hidden_layers = 1\n").map_err(|e| e.to_string())?;
    let corpus = root.join("corpus");
    let model_dir = root.join("model");
    let gen = jointam(&["corpus-gen", "--seed", "9", "--config", &s(&corpus_cfg), "--out", &s(&corpus)])?;
    let train = jointam(&[
        "train", "--arch", "fcnn", "--seed", "9", "--config", &s(&train_cfg), "--corpus", &s(&corpus), "--out",
        &s(&model_dir),
    ])?;
    let model = model_dir.join("model.bin");
    let eval = jointam(&[
        "evaluate",
        "--model",
        &s(&model),
        "--corpus",
        &s(&corpus),
        "--results",
        &s(&root.join("results.tsv")),
    ])?;
    let report = jointam(&["report", "--results", &s(&root.join("results.tsv"))])?;
    let bytes = fs::read(&model).map_err(|e| e.to_string())?;
    Ok((bytes, format!("{gen}{train}{eval}{report}")))
}

fn pipeline_determinism() -> Outcome {
    let a_dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let b_dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let (a_model, a_text) = toy_pipeline(a_dir.path())?;
    let (b_model, b_text) = toy_pipeline(b_dir.path())?;
    ensure(a_model == b_model, || "model.bin differs between runs".into())?;
    ensure(a_text == b_text, || format!("reports differ:\n{a_text}\n---\n{b_text}"))?;
    Ok(format!("{} byte model and {} lines of output identical", a_model.len(), a_text.lines().count()))
}

// ------------------------------------------------------------ results table

fn results_table_marks_fcnn() -> Outcome {
    let rows = [
        ResultRow::new("DNN", "FB", "CGN", 22.9),
        ResultRow::new("CNN", "FB", "CGN", 21.1),
        ResultRow::new("TFCNN", "FB", "CGN", 20.3),
        ResultRow::new("fCNN", "FB + TV", "CGN", 19.1),
    ];
    let table = results_table(&rows, &Metric::wer());
    let marked: Vec<&str> = table.lines().filter(|l| l.contains('*')).collect();
    ensure(marked.len() == 1, || format!("expected one marked row:\n{table}"))?;
    ensure(marked[0].contains("fCNN") && marked[0].contains("19.1*"), || {
        format!("wrong row marked:\n{table}")
    })?;
    Ok(format!("fCNN 19.1 marked: {}", marked[0].trim()))
}
