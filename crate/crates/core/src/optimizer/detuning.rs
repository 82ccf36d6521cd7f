use rand::Rng;

use super::{norm, DetuningGradient, ParameterFamily, StopReason, TrainConfig, TrainResult};
use crate::dynamics::PulseSequence;
use crate::engine::{self, detuned_duration, Wrt};
use crate::error::{Error, Result};
use crate::metrics::ControlTask;
use crate::rng::{stream_rng, REINIT};
use crate::sampling::SampleSet;

const FD_STEP: f64 = 1e-6;

/// Sets every duration to `T_n = π / (2 √(Ω_n² + Δ_n²))`.
pub(crate) fn apply_duration_rule(seq: &mut PulseSequence) {
    if let Some(pulses) = seq.two_level_mut() {
        for p in pulses {
            p.duration = detuned_duration(p.rabi, p.detuning);
        }
    }
}

/// Redraws every detuning with `|Δ_n / Ω_n| > ratio` uniformly from `range`.
/// Returns the indices that were redrawn.
pub fn reinitialize_detunings<R: Rng>(seq: &mut PulseSequence, ratio: f64, range: (f64, f64), rng: &mut R) -> Vec<usize> {
    let mut redrawn = Vec::new();
    if let Some(pulses) = seq.two_level_mut() {
        for (n, p) in pulses.iter_mut().enumerate() {
            if (p.detuning / p.rabi).abs() > ratio {
                p.detuning = rng.gen_range(range.0..range.1);
                redrawn.push(n);
            }
        }
    }
    redrawn
}

fn with_detuning(seq: &PulseSequence, n: usize, value: f64) -> PulseSequence {
    let mut s = seq.clone();
    if let Some(p) = s.two_level_mut() {
        p[n].detuning = value;
    }
    apply_duration_rule(&mut s);
    s
}

fn finite_difference(seq: &PulseSequence, samples: &SampleSet, task: &ControlTask) -> Result<Vec<f64>> {
    let deltas = seq.detunings().expect("two-level");
    deltas
        .iter()
        .enumerate()
        .map(|(n, &d)| {
            let plus = engine::cost_and_gradient(&with_detuning(seq, n, d + FD_STEP), task, &samples.model, &samples.points, None)?.0;
            let minus = engine::cost_and_gradient(&with_detuning(seq, n, d - FD_STEP), task, &samples.model, &samples.points, None)?.0;
            Ok((plus - minus) / (2.0 * FD_STEP))
        })
        .collect()
}

/// Gradient descent on the detunings of a two-level sequence, durations
/// tied to detunings, with re-initialization of runaway detunings.
/// `group` selects the re-initialization random stream.
pub fn detuning_train(
    seq0: &PulseSequence,
    samples: &SampleSet,
    task: &ControlTask,
    cfg: &TrainConfig,
    group: usize,
) -> Result<TrainResult> {
    cfg.validate()?;
    if seq0.two_level().is_none() {
        return Err(Error::IncompatibleErrorModel("detuning training needs a two-level sequence".into()));
    }
    let mut rng = stream_rng(cfg.seed, REINIT + group as u64);
    let mut seq = seq0.clone();
    apply_duration_rule(&mut seq);

    let mut trace = Vec::new();
    let mut kicks = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    let mut final_cost = f64::NAN;
    for it in 0..=cfg.max_iterations {
        let (j, g) = match cfg.detuning_gradient {
            DetuningGradient::Analytic => engine::cost_and_gradient(
                &seq,
                task,
                &samples.model,
                &samples.points,
                Some(Wrt::Detunings { duration_rule: true }),
            )?,
            DetuningGradient::FiniteDifference => {
                let j = engine::cost_and_gradient(&seq, task, &samples.model, &samples.points, None)?.0;
                (j, finite_difference(&seq, samples, task)?)
            }
        };
        if !j.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteCost { iteration: it });
        }
        trace.push(j);
        final_cost = j;
        if j <= cfg.cost_tolerance {
            stop = StopReason::Cost;
            break;
        }
        if norm(&g) <= cfg.gradient_tolerance {
            stop = StopReason::Gradient;
            break;
        }
        if it == cfg.max_iterations {
            break;
        }
        if let Some(pulses) = seq.two_level_mut() {
            for (p, gn) in pulses.iter_mut().zip(&g) {
                p.detuning -= cfg.detuning_learning_rate * gn;
            }
        }
        if !reinitialize_detunings(&mut seq, cfg.reinit_ratio, cfg.detuning_range, &mut rng).is_empty() {
            kicks.push(trace.len());
        }
        apply_duration_rule(&mut seq);
        iterations = it + 1;
    }
    Ok(TrainResult {
        family: ParameterFamily::Detunings,
        parameters: seq.detunings().expect("two-level"),
        sequence: seq,
        final_cost,
        iterations,
        cost_trace: trace,
        kicks,
        stop,
        group,
        report: None,
        accepted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ErrorModel, Pulse};
    use crate::metrics::basis;
    use crate::rng::stream_rng;
    use crate::sampling::{draw, DistributionSpec};

    fn detuned(deltas: &[f64]) -> PulseSequence {
        let mut s = PulseSequence::TwoLevel(deltas.iter().map(|&d| Pulse::new(0.0, 1.0, d, 1.0).unwrap()).collect());
        apply_duration_rule(&mut s);
        s
    }

    #[test]
    fn duration_rule_gives_resonant_half_rotation() {
        let s = detuned(&[0.0]);
        let p = s.two_level().unwrap()[0];
        assert!((p.duration - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn runaway_detuning_is_redrawn() {
        let mut s = detuned(&[11.0, 2.0, -10.5]);
        let mut rng = stream_rng(1, REINIT);
        let redrawn = reinitialize_detunings(&mut s, 10.0, (-3.0, 3.0), &mut rng);
        assert_eq!(redrawn, vec![0, 2]);
        let d = s.detunings().unwrap();
        assert!(d[0].abs() <= 3.0 && d[2].abs() <= 3.0);
        assert_eq!(d[1], 2.0);
    }

    #[test]
    fn smoke_three_pulses_at_zero_error() {
        let task = ControlTask::state_prep(basis(2, 0), basis(2, 1)).unwrap();
        let samples = SampleSet::from_points(ErrorModel::pulse_area(), vec![vec![0.0]]).unwrap();
        let cfg = TrainConfig { max_iterations: 5_000, ..TrainConfig::default() };
        let r = detuning_train(&detuned(&[0.0, 0.0, 0.0]), &samples, &task, &cfg, 0).unwrap();
        assert!(r.final_cost <= 1e-8, "cost {}", r.final_cost);
    }

    #[test]
    fn analytic_matches_finite_difference_training_step() {
        let task = ControlTask::state_prep(basis(2, 0), basis(2, 1)).unwrap();
        let samples = draw(&DistributionSpec::uniform(0.0, 0.2), 50, &ErrorModel::pulse_area(), 5).unwrap();
        let seq = detuned(&[0.4, -1.2, 2.1, 0.3]);
        let fd = finite_difference(&seq, &samples, &task).unwrap();
        let exact = engine::cost_and_gradient(&seq, &task, &samples.model, &samples.points, Some(Wrt::Detunings { duration_rule: true }))
            .unwrap()
            .1;
        for (a, b) in fd.iter().zip(&exact) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-3), "{a} vs {b}");
        }
    }
}
