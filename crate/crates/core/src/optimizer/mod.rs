//! Gradient training of composite-pulse parameters.
//!
//! Phases are trained through virtual controls `u = (cos θ, sin θ)`: each
//! iteration maps the phases onto the unit circle, takes a gradient step in
//! the `(u_x, u_y)` plane and reads the new phase back with a two-argument
//! arctangent. Detunings are trained directly.

mod detuning;
mod escape;
mod restart;

pub use detuning::{detuning_train, reinitialize_detunings};
pub use escape::{escape_train, EscapeOutcome, RoundSummary};
pub use restart::{initial_sequence, restart_train, RestartOutcome, RunSummary};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::PulseSequence;
use crate::engine::{self, Wrt};
use crate::error::{Error, Result};
use crate::metrics::{ControlTask, Interval, RobustnessReport, ScanSpec};
use crate::sampling::SampleSet;

/// Unit-circle coordinates of every phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualControls {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn phases_to_virtual(phases: &[f64]) -> VirtualControls {
    let (y, x) = phases.iter().map(|t| t.sin_cos()).unzip();
    VirtualControls { x, y }
}

/// Full-quadrant angle of each `(u_x, u_y)`, in `(-π, π]`.
pub fn virtual_to_phase(u: &VirtualControls) -> Result<Vec<f64>> {
    u.x.iter()
        .zip(&u.y)
        .enumerate()
        .map(|(n, (&x, &y))| {
            if x == 0.0 && y == 0.0 {
                Err(Error::DegenerateVirtual { pulse: n })
            } else {
                let t = y.atan2(x);
                Ok(if t == -PI { PI } else { t })
            }
        })
        .collect()
}

/// Parameter family a sequence is trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterFamily {
    Phases,
    Detunings,
}

/// How detuning gradients are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningGradient {
    #[default]
    Analytic,
    FiniteDifference,
}

/// Hyper-parameters of every training strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate_x: f64,
    pub learning_rate_y: f64,
    pub detuning_learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once the phase (or detuning) gradient norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop once the cost falls below this.
    pub cost_tolerance: f64,
    /// Escape strategy: number of groups `M`.
    pub groups: usize,
    /// Escape strategy: maximum number of rounds.
    pub escape_rounds: usize,
    /// Escape strategy: kicks per group per round.
    pub updates_per_round: usize,
    /// Escape kicks are uniform on `[-kick_scale, kick_scale]` per phase.
    pub kick_scale: f64,
    /// Escape stops when `max F̄_m − F̄_tot` drops below this.
    pub stop_gap: f64,
    /// Detunings with `|Δ/Ω|` above this are redrawn.
    pub reinit_ratio: f64,
    pub phase_range: (f64, f64),
    pub detuning_range: (f64, f64),
    pub detuning_gradient: DetuningGradient,
    /// Testing-stage scan used to score and accept trained parameters.
    pub test: ScanSpec,
    /// A run is accepted when its tested `F̄` exceeds this.
    pub acceptance_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate_x: 1e-3,
            learning_rate_y: 1e-3,
            detuning_learning_rate: 0.1,
            max_iterations: 10_000,
            gradient_tolerance: 1e-8,
            cost_tolerance: 1e-12,
            groups: 10,
            escape_rounds: 10,
            updates_per_round: 3,
            kick_scale: 0.5,
            stop_gap: 1e-6,
            reinit_ratio: 10.0,
            phase_range: (-PI, PI),
            detuning_range: (-3.0, 3.0),
            detuning_gradient: DetuningGradient::Analytic,
            test: ScanSpec::new(Interval::symmetric(0.1)),
            acceptance_threshold: 0.9999,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.learning_rate_x) || !positive(self.learning_rate_y) || !positive(self.detuning_learning_rate) {
            return bad("learning rates must be positive");
        }
        if !positive(self.gradient_tolerance) || !positive(self.cost_tolerance) || !positive(self.stop_gap) {
            return bad("stopping thresholds must be positive");
        }
        if self.groups == 0 {
            return bad("groups must be at least 1");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.kick_scale >= 0.0) || !positive(self.reinit_ratio) {
            return bad("kick_scale must be non-negative and reinit_ratio positive");
        }
        if self.phase_range.0 >= self.phase_range.1 || self.detuning_range.0 >= self.detuning_range.1 {
            return bad("initial-parameter ranges must be non-empty");
        }
        self.test.interval.check()?;
        if self.test.grid_size < 2 || !positive(self.test.xi) {
            return bad("test grid needs at least 2 points and a positive threshold");
        }
        Ok(())
    }
}

/// Why a training loop ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gradient,
    Cost,
    MaxIterations,
}

/// Outcome of one training run (or one escape group).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub family: ParameterFamily,
    pub parameters: Vec<f64>,
    pub sequence: PulseSequence,
    pub final_cost: f64,
    pub iterations: usize,
    /// Cost before every update, then the final cost.
    pub cost_trace: Vec<f64>,
    /// Trace indices at which parameters were perturbed (escape kicks,
    /// detuning re-initializations); the trace may rise across these.
    pub kicks: Vec<usize>,
    pub stop: StopReason,
    pub group: usize,
    pub report: Option<RobustnessReport>,
    pub accepted: bool,
}

impl TrainResult {
    pub fn average_fidelity(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.average_fidelity)
    }

    /// Scores the result with the configured test scan and acceptance threshold.
    pub fn test(&mut self, task: &ControlTask, cfg: &TrainConfig) -> Result<()> {
        let report = RobustnessReport::compute(&self.sequence, task, &cfg.test)?;
        self.accepted = report.average_fidelity > cfg.acceptance_threshold;
        self.report = Some(report);
        Ok(())
    }
}

/// Parameters a gradient is requested for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientTarget {
    /// `∂J/∂u_x, ∂J/∂u_y` per phase, interleaved.
    VirtualControls,
    /// `∂J/∂Δ_n` at fixed durations.
    Detunings,
    /// `∂J/∂Δ_n` with durations tied to detunings.
    DetuningsWithDurationRule,
}

/// Exact gradient of the cost.
pub fn gradient(seq: &PulseSequence, samples: &SampleSet, task: &ControlTask, wrt: GradientTarget) -> Result<Vec<f64>> {
    let wrt = match wrt {
        GradientTarget::VirtualControls => Wrt::VirtualControls,
        GradientTarget::Detunings => Wrt::Detunings { duration_rule: false },
        GradientTarget::DetuningsWithDurationRule => Wrt::Detunings { duration_rule: true },
    };
    Ok(engine::cost_and_gradient(seq, task, &samples.model, &samples.points, Some(wrt))?.1)
}

/// `∂J/∂θ` from the virtual-control gradient: its component tangent to the circle.
pub fn phase_gradient(phases: &[f64], virtual_grad: &[f64]) -> Vec<f64> {
    phases
        .iter()
        .zip(virtual_grad.chunks_exact(2))
        .map(|(t, g)| {
            let (s, c) = t.sin_cos();
            -s * g[0] + c * g[1]
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Modified GRAPE: gradient descent on the virtual controls, re-projected
/// onto phases every iteration.
pub fn mgrape_train(seq0: &PulseSequence, samples: &SampleSet, task: &ControlTask, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let mut seq = seq0.clone();
    let mut trace = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    let mut final_cost = f64::NAN;
    for it in 0..=cfg.max_iterations {
        let (j, g) = engine::cost_and_gradient(&seq, task, &samples.model, &samples.points, Some(Wrt::VirtualControls))?;
        if !j.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteCost { iteration: it });
        }
        trace.push(j);
        final_cost = j;
        let phases = seq.phases();
        if j <= cfg.cost_tolerance {
            stop = StopReason::Cost;
            break;
        }
        if norm(&phase_gradient(&phases, &g)) <= cfg.gradient_tolerance {
            stop = StopReason::Gradient;
            break;
        }
        if it == cfg.max_iterations {
            break;
        }
        let mut u = phases_to_virtual(&phases);
        for (n, gxy) in g.chunks_exact(2).enumerate() {
            u.x[n] -= cfg.learning_rate_x * gxy[0];
            u.y[n] -= cfg.learning_rate_y * gxy[1];
        }
        seq.set_phases(&virtual_to_phase(&u)?)?;
        iterations = it + 1;
    }
    Ok(TrainResult {
        family: ParameterFamily::Phases,
        parameters: seq.phases(),
        sequence: seq,
        final_cost,
        iterations,
        cost_trace: trace,
        kicks: Vec::new(),
        stop,
        group: 0,
        report: None,
        accepted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ErrorModel, PulseSequence};
    use crate::metrics::basis;
    use crate::sampling::{draw, DistributionSpec};
    use approx::assert_relative_eq;

    #[test]
    fn virtual_examples() {
        let u = phases_to_virtual(&[0.0, PI / 2.0]);
        assert_eq!((u.x[0], u.y[0]), (1.0, 0.0));
        assert_relative_eq!(u.x[1], 0.0, epsilon = 1e-16);
        assert_eq!(u.y[1], 1.0);

        let back = virtual_to_phase(&VirtualControls { x: vec![0.0, -1.0, -1e-3], y: vec![1.0, 0.0, -1e-3] }).unwrap();
        assert_relative_eq!(back[0], PI / 2.0);
        assert_eq!(back[1], PI);
        assert_relative_eq!(back[2], -3.0 * PI / 4.0);

        assert!(matches!(
            virtual_to_phase(&VirtualControls { x: vec![1.0, 0.0], y: vec![0.0, 0.0] }),
            Err(Error::DegenerateVirtual { pulse: 1 })
        ));
    }

    #[test]
    fn round_trip_on_half_open_interval() {
        for k in 0..=200 {
            let t = -PI + 2.0 * PI * (k as f64 + 0.5) / 201.0;
            let back = virtual_to_phase(&phases_to_virtual(&[t])).unwrap()[0];
            assert_relative_eq!(back, t, epsilon = 1e-14);
        }
        assert_eq!(virtual_to_phase(&phases_to_virtual(&[PI])).unwrap()[0], PI);
    }

    #[test]
    fn single_pi_pulse_at_zero_error_converges_immediately() {
        let task = ControlTask::state_prep(basis(2, 0), basis(2, 1)).unwrap();
        let samples = SampleSet::from_points(ErrorModel::pulse_area(), vec![vec![0.0]; 4]).unwrap();
        let seq = PulseSequence::resonant(&[1.234], PI / 2.0);
        let r = mgrape_train(&seq, &samples, &task, &TrainConfig::default()).unwrap();
        assert!(r.final_cost <= 1e-10);
    }

    #[test]
    fn cost_trace_is_monotone_with_small_rate() {
        let task = ControlTask::state_prep(basis(2, 0), basis(2, 1)).unwrap();
        let samples = draw(&DistributionSpec::uniform(0.0, 0.3), 200, &ErrorModel::pulse_area(), 11).unwrap();
        let seq = PulseSequence::resonant(&[0.3, -1.1, 2.0, 0.7, -2.5], PI / 2.0);
        let cfg = TrainConfig { learning_rate_x: 1e-4, learning_rate_y: 1e-4, max_iterations: 100, ..TrainConfig::default() };
        let r = mgrape_train(&seq, &samples, &task, &cfg).unwrap();
        assert_eq!(r.cost_trace.len(), 101);
        assert!(r.cost_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn converged_optimum_is_stationary() {
        let task = ControlTask::state_prep(basis(2, 0), basis(2, 1)).unwrap();
        let samples = draw(&DistributionSpec::uniform(0.0, 0.2), 100, &ErrorModel::pulse_area(), 3).unwrap();
        let seq = PulseSequence::resonant(&[0.1, 2.0, 0.4], PI / 2.0);
        let cfg = TrainConfig {
            learning_rate_x: 0.1,
            learning_rate_y: 0.1,
            max_iterations: 50_000,
            gradient_tolerance: 1e-8,
            ..TrainConfig::default()
        };
        let r = mgrape_train(&seq, &samples, &task, &cfg).unwrap();
        assert_eq!(r.stop, StopReason::Gradient);
        let g = gradient(&r.sequence, &samples, &task, GradientTarget::VirtualControls).unwrap();
        assert!(norm(&phase_gradient(&r.parameters, &g)) <= cfg.gradient_tolerance);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = TrainConfig { learning_rate_x: 0.0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { groups: 0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
