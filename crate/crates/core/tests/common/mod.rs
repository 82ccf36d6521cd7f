//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use compulse::dynamics::{sequence_propagator, ErrorSample, LadderPulse, Pulse, PulseSequence};
use compulse::metrics::{cost, task_fidelity, ControlTask};
use compulse::sampling::SampleSet;
use compulse::Result;

pub const FD_STEP: f64 = 1e-6;

/// `1 − F` for one sample, from the dense propagator.
fn sample_cost(seq: &PulseSequence, sample: &ErrorSample, task: &ControlTask) -> Result<f64> {
    Ok(1.0 - task_fidelity(&sequence_propagator(seq, sample)?, task)?)
}

/// Moves virtual control `p` of pulse `n` by `h`. Off the unit circle a drive
/// `(u_x, u_y)` is the pulse with phase `atan2(u_y, u_x)` and Rabi frequency
/// scaled by `|u|`; the detuning error is kept in units of the nominal Rabi
/// frequency by compensating the trained detuning.
fn nudge_virtual(seq: &PulseSequence, n: usize, p: usize, h: f64, detuning_error: f64) -> PulseSequence {
    let mut out = seq.clone();
    match &mut out {
        PulseSequence::TwoLevel(pulses) => {
            let q: &mut Pulse = &mut pulses[n];
            let (mut uy, mut ux) = q.phase.sin_cos();
            if p == 0 {
                ux += h
            } else {
                uy += h
            }
            let r = ux.hypot(uy);
            q.detuning += detuning_error * q.rabi * (1.0 - r);
            q.rabi *= r;
            q.phase = uy.atan2(ux);
        }
        PulseSequence::ThreeLevel(pulses) => {
            let q: &mut LadderPulse = &mut pulses[n];
            let (phase, rabi) = if p < 2 { (&mut q.phase_a, &mut q.rabi_a) } else { (&mut q.phase_b, &mut q.rabi_b) };
            let (mut uy, mut ux) = phase.sin_cos();
            if p % 2 == 0 {
                ux += h
            } else {
                uy += h
            }
            *rabi *= ux.hypot(uy);
            *phase = uy.atan2(ux);
        }
    }
    out
}

fn detuning_error(sample: &ErrorSample) -> f64 {
    sample.resolve(0).detuning
}

/// Central differences of `J` in every virtual control, interleaved per pulse.
pub fn virtual_fd(seq: &PulseSequence, samples: &SampleSet, task: &ControlTask) -> Result<Vec<f64>> {
    let per_pulse = 2 * seq.phases_per_pulse();
    let mut grad = vec![0.0; seq.len() * per_pulse];
    for sample in samples.iter() {
        let d = detuning_error(&sample);
        for n in 0..seq.len() {
            for p in 0..per_pulse {
                let plus = sample_cost(&nudge_virtual(seq, n, p, FD_STEP, d), &sample, task)?;
                let minus = sample_cost(&nudge_virtual(seq, n, p, -FD_STEP, d), &sample, task)?;
                grad[n * per_pulse + p] += (plus - minus) / (2.0 * FD_STEP);
            }
        }
    }
    let k = samples.len() as f64;
    Ok(grad.into_iter().map(|g| g / k).collect())
}

/// Central differences of `J` in every trained detuning; with `duration_rule`
/// each duration follows `T = π / (2√(Ω² + Δ²))`.
pub fn detuning_fd(seq: &PulseSequence, samples: &SampleSet, task: &ControlTask, duration_rule: bool) -> Result<Vec<f64>> {
    let PulseSequence::TwoLevel(pulses) = seq else { panic!("two-level only") };
    let at = |n: usize, h: f64| -> Result<f64> {
        let mut p = pulses.clone();
        p[n].detuning += h;
        if duration_rule {
            p[n].duration = std::f64::consts::PI / (2.0 * p[n].rabi.hypot(p[n].detuning));
        }
        cost(&PulseSequence::TwoLevel(p), samples, task)
    };
    (0..pulses.len()).map(|n| Ok((at(n, FD_STEP)? - at(n, -FD_STEP)?) / (2.0 * FD_STEP))).collect()
}

/// `‖a − b‖∞ / ‖b‖∞`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale
}

/// Kolmogorov–Smirnov statistic of `xs` against `U(low, high)`.
pub fn ks_uniform(mut xs: Vec<f64>, low: f64, high: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = ((x - low) / (high - low)).clamp(0.0, 1.0);
            (cdf - i as f64 / n).max((i + 1) as f64 / n - cdf)
        })
        .fold(0.0, f64::max)
}
