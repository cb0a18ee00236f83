//! Learning-rate schedule: a constant phase, then conditional halving, then
//! stop.

use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    /// Epochs trained at `initial_lr` before the schedule may halve.
    pub constant_lr_epochs: usize,
    pub batch_size: usize,
    /// Relative CV improvement below which the rate halves.
    pub halving_threshold: f64,
    /// Relative CV improvement below which training stops (halving phase).
    pub stop_threshold: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Halve after every epoch once halving has started (classic newbob)
    /// instead of only when the improvement is small.
    pub halve_every_epoch: bool,
    /// Treat the rate as per frame: the step is `lr` times the gradient
    /// summed over the batch. Otherwise the summed gradient is divided by
    /// the batch size.
    pub per_frame_lr: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 0.008,
            constant_lr_epochs: 4,
            batch_size: 256,
            halving_threshold: 0.005,
            stop_threshold: 0.001,
            max_epochs: 20,
            seed: 0,
            halve_every_epoch: false,
            per_frame_lr: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::config(format!("initial_lr must be positive, got {}", self.initial_lr)));
        }
        if !(self.halving_threshold >= 0.0 && self.stop_threshold >= 0.0) {
            return Err(Error::config("schedule thresholds must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be positive"));
        }
        Ok(())
    }

    pub fn apply_config(&mut self, kv: &mut KeyValues) -> Result<()> {
        kv.take("initial_lr", &mut self.initial_lr)?;
        kv.take("constant_lr_epochs", &mut self.constant_lr_epochs)?;
        kv.take("batch_size", &mut self.batch_size)?;
        kv.take("halving_threshold", &mut self.halving_threshold)?;
        kv.take("stop_threshold", &mut self.stop_threshold)?;
        kv.take("max_epochs", &mut self.max_epochs)?;
        kv.take("train_seed", &mut self.seed)?;
        kv.take("halve_every_epoch", &mut self.halve_every_epoch)?;
        kv.take("per_frame_lr", &mut self.per_frame_lr)?;
        self.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Constant,
    Halving,
    Stopped,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Constant => "constant",
            Phase::Halving => "halving",
            Phase::Stopped => "stopped",
        }
    }
}

/// Schedule state after `epoch` completed epochs. `lr` is the rate for the
/// next epoch; `best_epoch` (1-based) points at the minimum of the history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub epoch: usize,
    pub lr: f64,
    pub cv_error_history: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub phase: Phase,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig) -> Self {
        Self {
            epoch: 0,
            lr: cfg.initial_lr,
            cv_error_history: Vec::new(),
            best_epoch: None,
            phase: Phase::Constant,
        }
    }

    pub fn best_cv_error(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.cv_error_history[e - 1])
    }
}

fn relative_improvement(prev: f64, new: f64) -> f64 {
    if prev > 0.0 {
        (prev - new) / prev
    } else {
        0.0
    }
}

/// Folds in the CV error of the epoch just finished.
///
/// The first `constant_lr_epochs` epochs always run at the initial rate;
/// the decision taken after epoch `constant_lr_epochs` is the first that
/// may halve. Improvement is relative to the previous epoch's CV error.
/// A stopped state is returned unchanged.
pub fn schedule_update(state: &TrainState, new_cv_error: f64, cfg: &TrainConfig) -> TrainState {
    if state.phase == Phase::Stopped {
        return state.clone();
    }
    let mut next = state.clone();
    next.epoch += 1;
    next.cv_error_history.push(new_cv_error);
    match state.best_cv_error() {
        Some(best) if new_cv_error >= best => {}
        _ => next.best_epoch = Some(next.epoch),
    }
    if next.epoch < cfg.constant_lr_epochs {
        return next;
    }
    let Some(&prev) = state.cv_error_history.last() else {
        return next;
    };
    let gain = relative_improvement(prev, new_cv_error);
    match state.phase {
        Phase::Constant => {
            if gain < cfg.halving_threshold {
                next.lr /= 2.0;
                next.phase = Phase::Halving;
            }
        }
        Phase::Halving => {
            if new_cv_error > prev || gain < cfg.stop_threshold {
                next.phase = Phase::Stopped;
            } else if cfg.halve_every_epoch || gain < cfg.halving_threshold {
                next.lr /= 2.0;
            }
        }
        Phase::Stopped => unreachable!(),
    }
    next
}
