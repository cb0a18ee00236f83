//! Mini-batch SGD epochs and the full schedule-driven training run.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::TrainCheckpoint;
use super::data::{Batch, BatchTargets, Dataset};
use super::schedule::{schedule_update, Phase, TrainConfig, TrainState};
use crate::error::{Error, Result};
use crate::nn::{cross_entropy_with, mse_with, Loss, Mode, NetworkGraph, Reduction};

/// Frames per forward pass when only predicting.
const EVAL_CHUNK: usize = 1024;

fn batch_loss(net: &mut NetworkGraph, batch: &Batch, mode: Mode) -> Result<Loss> {
    match &batch.targets {
        BatchTargets::Classes(labels) => {
            let logits = net.forward_logits(&batch.input, mode)?;
            cross_entropy_with(&logits, labels, Reduction::Sum)
        }
        BatchTargets::Values(target) => {
            let pred = net.forward(&batch.input, mode)?;
            mse_with(&pred, target, Reduction::Sum)
        }
    }
}

/// Frame visiting order of epoch `epoch` (0-based).
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(epoch as u64)));
    order
}

/// One pass over `data` in the order given by `seed + epoch`, one SGD step
/// per batch (the last batch may be short). Returns the mean per-frame loss
/// measured during the pass.
pub fn train_epoch(
    net: &mut NetworkGraph,
    data: &Dataset,
    lr: f64,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::State("training set is empty".into()));
    }
    let order = epoch_order(data.len(), cfg.seed, epoch);
    let mut total = 0.0;
    for rows in order.chunks(cfg.batch_size.max(1)) {
        let batch = data.batch(rows);
        let loss = batch_loss(net, &batch, Mode::Train)?;
        if !loss.value.is_finite() {
            return Err(Error::Divergence(format!("loss became {} in epoch {}", loss.value, epoch + 1)));
        }
        total += loss.value;
        let grads = net.backward_params(&loss.grad)?;
        let scale = if cfg.per_frame_lr { 1 } else { rows.len() };
        net.sgd_step(&grads, lr, scale)?;
    }
    Ok(total / data.len() as f64)
}

/// Mean per-frame loss without updating anything.
pub fn evaluate_loss(net: &NetworkGraph, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for batch in data.chunks(EVAL_CHUNK) {
        let loss = match &batch.targets {
            BatchTargets::Classes(labels) => {
                cross_entropy_with(&net.predict_logits(&batch.input)?, labels, Reduction::Sum)?
            }
            BatchTargets::Values(target) => {
                mse_with(&net.predict(&batch.input)?, target, Reduction::Sum)?
            }
        };
        total += loss.value;
    }
    Ok(total / data.len() as f64)
}

/// Frame classification error for class targets, mean squared error per
/// entry for value targets.
pub fn evaluate_cv(net: &NetworkGraph, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::State("cross-validation set is empty".into()));
    }
    let mut errors = 0.0;
    let mut count = 0.0;
    for batch in data.chunks(EVAL_CHUNK) {
        match &batch.targets {
            BatchTargets::Classes(labels) => {
                let logits = net.predict_logits(&batch.input)?;
                for (row, &l) in logits.rows().into_iter().zip(labels) {
                    if argmax(row.iter().copied()) != l {
                        errors += 1.0;
                    }
                }
                count += labels.len() as f64;
            }
            BatchTargets::Values(target) => {
                let pred = net.predict(&batch.input)?;
                errors += (&pred - target).mapv(|d| d * d).sum();
                count += target.len() as f64;
            }
        }
    }
    let err = errors / count;
    if !err.is_finite() {
        return Err(Error::Divergence(format!("cross-validation error is {err}")));
    }
    Ok(err)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub cv_error: f64,
    pub phase: Phase,
}

/// Runs epochs until the schedule stops or `max_epochs` is reached,
/// starting from `session` (fresh or resumed). After every epoch `on_epoch`
/// sees the record and the session, e.g. to append a log line or write a
/// checkpoint. The returned session's `best` holds the network with the
/// lowest CV error.
pub fn train(
    mut session: TrainCheckpoint,
    train_set: &Dataset,
    cv_set: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &TrainCheckpoint) -> Result<()>,
) -> Result<TrainCheckpoint> {
    cfg.validate()?;
    while session.state.phase != Phase::Stopped && session.state.epoch < cfg.max_epochs {
        let lr = session.state.lr;
        let epoch = session.state.epoch;
        let train_loss = train_epoch(&mut session.net, train_set, lr, cfg, epoch)?;
        let cv_error = evaluate_cv(&session.net, cv_set)?;
        let next = schedule_update(&session.state, cv_error, cfg);
        if next.best_epoch == Some(next.epoch) {
            session.best = Some(session.net.clone());
        }
        session.state = next;
        let record = EpochRecord {
            epoch: epoch + 1,
            lr,
            train_loss,
            cv_error,
            phase: session.state.phase,
        };
        log::info!(
            "epoch {} lr {} train loss {:.5} cv error {:.5} ({})",
            record.epoch,
            lr,
            train_loss,
            cv_error,
            record.phase.name()
        );
        on_epoch(&record, &session)?;
    }
    Ok(session)
}

/// Fresh session, trains it, and returns the best network with its state.
pub fn fit(
    net: NetworkGraph,
    train_set: &Dataset,
    cv_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<(NetworkGraph, TrainState, Vec<EpochRecord>)> {
    let mut records = Vec::new();
    let session = train(TrainCheckpoint::new(net, cfg), train_set, cv_set, cfg, |r, _| {
        records.push(r.clone());
        Ok(())
    })?;
    let state = session.state.clone();
    Ok((session.into_best(), state, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::SpliceSpec;
    use crate::nn::{InputSource, InputView, Layer, LayerSpec, Stream};
    use crate::training::data::{Sequence, Targets};
    use ndarray::Array2;
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % 2;
            let sign = if c == 0 { -1.0 } else { 1.0 };
            x[[i, 0]] = sign * rng.random_range(0.5..1.5);
            x[[i, 1]] = rng.random_range(-1.0..1.0);
            y.push(c);
        }
        let seq = Sequence {
            acoustic: x,
            tv: None,
            targets: Targets::Classes(y),
        };
        Dataset::new(vec![seq], SpliceSpec::symmetric(0)).unwrap()
    }

    fn logistic(seed: u64) -> NetworkGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NetworkGraph::new(
            vec![Stream {
                source: InputSource::Acoustic,
                view: InputView::Identity,
                input_dim: 2,
                layers: vec![],
            }],
            vec![
                Layer::init(LayerSpec::Dense { n_in: 2, n_out: 2 }, &mut rng).unwrap(),
                Layer::init(LayerSpec::Softmax, &mut rng).unwrap(),
            ],
        )
        .unwrap()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 16,
            initial_lr: 0.01,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_rate_leaves_parameters_alone() {
        let data = separable(64, 1);
        let mut net = logistic(2);
        let before = net.clone();
        let loss = train_epoch(&mut net, &data, 0.0, &cfg(), 0).unwrap();
        assert_eq!(net, before);
        assert!((loss - evaluate_loss(&net, &data).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn separable_loss_decreases_every_epoch() {
        let data = separable(200, 3);
        let mut net = logistic(4);
        let mut prev = evaluate_loss(&net, &data).unwrap();
        for epoch in 0..5 {
            train_epoch(&mut net, &data, 0.01, &cfg(), epoch).unwrap();
            let now = evaluate_loss(&net, &data).unwrap();
            assert!(now < prev, "epoch {epoch}: {now} >= {prev}");
            prev = now;
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let data = separable(100, 5);
        let mut a = logistic(6);
        let mut b = logistic(6);
        train_epoch(&mut a, &data, 0.05, &cfg(), 0).unwrap();
        train_epoch(&mut b, &data, 0.05, &cfg(), 0).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn huge_rate_reports_divergence() {
        let data = separable(64, 7);
        let mut net = logistic(8);
        let mut c = cfg();
        c.max_epochs = 50;
        let mut err = None;
        for epoch in 0..50 {
            if let Err(e) = train_epoch(&mut net, &data, 1e300, &c, epoch) {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(Error::Divergence(_))), "{err:?}");
    }

    #[test]
    fn fit_restores_the_best_network() {
        let data = separable(200, 9);
        let cv = separable(50, 10);
        let c = TrainConfig {
            max_epochs: 6,
            ..cfg()
        };
        let (best, state, records) = fit(logistic(11), &data, &cv, &c).unwrap();
        assert_eq!(records.len(), state.epoch);
        let best_cv = evaluate_cv(&best, &cv).unwrap();
        assert_eq!(Some(best_cv), state.best_cv_error());
        let min = state.cv_error_history.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(best_cv, min);
    }

    #[test]
    fn argmax_takes_lowest_index_on_ties() {
        assert_eq!(argmax([0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax([1.0]), 0);
    }
}
