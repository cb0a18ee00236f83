//! Gestural score to TV trajectories.
//!
//! Each channel follows its piecewise-constant target through a critically
//! damped second-order system, `x'' + 2 w x' + w^2 x = w^2 u` with
//! `w = 1 / tau`. The input is held constant over each frame and the state
//! is advanced with the exact solution, so the result does not depend on
//! an integration step. The impulse response `w^2 t exp(-w t)` is
//! non-negative with unit area, hence the output never leaves the range of
//! the targets seen so far (and the neutral start).

use ndarray::Array2;

use super::score::GesturalScore;
use super::tv::{TvTrajectory, NEUTRAL, N_TVS};

pub const TIME_CONSTANT: f64 = 0.040;

#[derive(Debug, Clone, Copy)]
struct Damped {
    x: f64,
    v: f64,
}

impl Damped {
    /// Holds input `u` for `h` seconds.
    fn advance(&mut self, u: f64, h: f64, w: f64) {
        let e0 = self.x - u;
        let a = self.v + w * e0;
        let decay = (-w * h).exp();
        self.x = u + (e0 + a * h) * decay;
        self.v = (self.v - w * a * h) * decay;
    }
}

/// Samples of the critically damped response to `targets`, one target per
/// step of `step` seconds, starting at rest at `start`. Output `i` is the
/// state at the start of step `i`.
pub fn critically_damped(targets: &[f64], step: f64, tau: f64, start: f64) -> Vec<f64> {
    let w = 1.0 / tau;
    let mut s = Damped { x: start, v: 0.0 };
    targets
        .iter()
        .map(|&u| {
            let x = s.x;
            s.advance(u, step, w);
            x
        })
        .collect()
}

/// One frame every `frame_shift` seconds, frame `i` at time `i * frame_shift`.
pub fn render_tvs(score: &GesturalScore, frame_shift: f64) -> TvTrajectory {
    let t = score.n_frames(frame_shift);
    let targets: Vec<[f64; N_TVS]> = (0..t).map(|i| score.target_at(i as f64 * frame_shift)).collect();
    let mut frames = Array2::zeros((t, N_TVS));
    for ch in 0..N_TVS {
        let u: Vec<f64> = targets.iter().map(|row| row[ch]).collect();
        for (i, x) in critically_damped(&u, frame_shift, TIME_CONSTANT, NEUTRAL)
            .into_iter()
            .enumerate()
        {
            frames[[i, ch]] = x;
        }
    }
    TvTrajectory::clamped(frames, frame_shift).expect("trajectory is finite and 8 wide")
}
