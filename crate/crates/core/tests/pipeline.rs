use jointam_core::arch::Scale;
use jointam_core::dsp::FrontEnd;
use jointam_core::inversion::{
    build_parallel_corpus, invert, train_inversion_model, Condition, CorpusConfig, InversionConfig,
    ParallelCorpus, Split, Vocabulary,
};
use jointam_core::Matrix;
use ndarray::{s, Axis};

fn corpus(n_utts: usize, snr: f64, seed: u64) -> ParallelCorpus {
    let cfg = CorpusConfig {
        n_utts,
        snr_range: (snr, snr),
        seed,
        ..CorpusConfig::default()
    };
    build_parallel_corpus(&cfg, &Vocabulary::synthetic()).unwrap()
}

fn mse(pred: &Matrix, truth: &Matrix) -> f64 {
    let n = pred.nrows().min(truth.nrows());
    let d = &pred.slice(s![..n, ..]) - &truth.slice(s![..n, ..]);
    d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn front_end_and_tv_frame_counts_agree() {
    let c = corpus(12, 20.0, 4);
    for u in &c.utterances {
        for cond in [Condition::Clean, Condition::Noisy] {
            for fe in [FrontEnd::Fbank, FrontEnd::Nmc] {
                let n = fe.extract(u.audio(cond)).unwrap().n_frames();
                assert!(n.abs_diff(u.tv.n_frames()) <= 1, "{} {fe:?}: {n} vs {}", u.id, u.tv.n_frames());
            }
        }
        assert_eq!(u.labels.len(), u.tv.n_frames());
    }
}

#[test]
fn trained_inversion_fits_training_data_and_suffers_from_noise() {
    let c = corpus(80, 10.0, 11);
    let mut cfg = InversionConfig::new(Scale::Toy);
    cfg.train.max_epochs = 6;
    let (model, _, _) = train_inversion_model(&c, &cfg).unwrap();

    // Constant predictor: the mean training TV frame.
    let train_tvs: Vec<&Matrix> = c.split(Split::Train).map(|u| u.tv.frames()).collect();
    let stacked = ndarray::concatenate(Axis(0), &train_tvs.iter().map(|m| m.view()).collect::<Vec<_>>()).unwrap();
    let mean = stacked.mean_axis(Axis(0)).unwrap();
    let constant_mse: Vec<f64> = c
        .utterances
        .iter()
        .map(|u| {
            let pred = Matrix::from_shape_fn(u.tv.frames().dim(), |(_, j)| mean[j]);
            mse(&pred, u.tv.frames())
        })
        .collect();

    let clean = |split| -> Vec<f64> {
        c.split(split)
            .map(|u| mse(invert(&model, &u.clean).unwrap().frames(), u.tv.frames()))
            .collect()
    };
    let train_mse = clean(Split::Train);
    assert!(median(train_mse) < median(constant_mse.clone()));

    let test_clean = clean(Split::Test);
    let test_noisy: Vec<f64> = c
        .split(Split::Test)
        .map(|u| mse(invert(&model, &u.noisy).unwrap().frames(), u.tv.frames()))
        .collect();
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(avg(&test_clean) < median(constant_mse));
    assert!(
        avg(&test_noisy) >= avg(&test_clean),
        "noisy {} vs clean {}",
        avg(&test_noisy),
        avg(&test_clean)
    );
}
