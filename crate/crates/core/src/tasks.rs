//! Concrete control problems: population inversion, superpositions,
//! single-qubit gates and the three-level ladder.
//!
//! Every builder returns a [`BuiltTask`]: the objective, a template sequence
//! with the right pulse count and areas (phases zero), and the error model
//! the training samples must follow.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{sequence_propagator, ErrorModel, ErrorSample, LadderPulse, PulseSequence, UnitaryMatrix};
use crate::error::{Error, Result};
use crate::metrics::{basis, gate_fidelity, ControlTask};
use crate::sampling::{draw_stream, DistributionSpec, SampleSet};

/// Which systematic errors the training samples contain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSetting {
    #[default]
    PulseArea,
    Detuning,
    /// Pulse-area and detuning errors, each drawn from the same distribution.
    AreaAndDetuning,
    /// One independent pulse-area error per pulse.
    TimeVarying,
}

/// A gate target in configuration-friendly form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum GateTarget {
    Hadamard,
    Identity,
    /// `𝒰(ϕ, φ, Φ)`.
    Universal { phi: f64, varphi: f64, big_phi: f64 },
    /// Row-major `[re, im]` entries.
    Matrix { entries: Vec<Vec<[f64; 2]>> },
}

impl GateTarget {
    pub fn unitary(&self) -> Result<UnitaryMatrix> {
        match self {
            Self::Hadamard => Ok(hadamard()),
            Self::Identity => Ok(UnitaryMatrix::identity(2)),
            Self::Universal { phi, varphi, big_phi } => Ok(universal_gate(*phi, *varphi, *big_phi)),
            Self::Matrix { entries } => {
                let n = entries.len();
                if entries.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidConfig("gate matrix must be square".into()));
                }
                UnitaryMatrix::new(DMatrix::from_fn(n, n, |i, j| C64::new(entries[i][j][0], entries[i][j][1])))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskKind {
    PopulationInversion,
    Superposition { phi: f64, varphi: f64 },
    /// Train the superposition `(phi, varphi)`, then shift all phases by `shift`.
    GateStateBased { phi: f64, varphi: f64, shift: f64 },
    GateOperatorBased { target: GateTarget },
    ThreeLevelInversion {
        #[serde(default = "unit_rabi")]
        rabi: f64,
    },
}

fn unit_rabi() -> f64 {
    1.0
}

/// Full description of a training problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub objective: TaskKind,
    pub pulses: usize,
    /// Per-pulse nominal area (ignored by the three-level ladder, whose
    /// durations are fixed by the Rabi frequency).
    #[serde(default = "default_area")]
    pub area: f64,
    #[serde(default)]
    pub errors: ErrorSetting,
    pub sampling: DistributionSpec,
}

fn default_area() -> f64 {
    PI / 2.0
}

/// Output of every builder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuiltTask {
    pub task: ControlTask,
    pub template: PulseSequence,
    pub model: ErrorModel,
    /// Phase shift applied after training (state-based gates only; 0 otherwise).
    pub post_shift: f64,
}

impl BuiltTask {
    /// Training samples for group `group`, one independent stream per group.
    pub fn samples(&self, spec: &DistributionSpec, count: usize, seed: u64, group: usize) -> Result<SampleSet> {
        draw_stream(spec, count, &self.model, seed, group as u64)
    }

    /// The trained sequence with the post-training phase shift applied.
    pub fn finalize(&self, trained: &PulseSequence) -> PulseSequence {
        if self.post_shift == 0.0 {
            trained.clone()
        } else {
            trained.shift_phases(self.post_shift)
        }
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.pulses == 0 {
            return Err(Error::InvalidConfig("pulses must be at least 1".into()));
        }
        if !(self.area > 0.0 && self.area.is_finite()) {
            return Err(Error::InvalidConfig("area must be positive".into()));
        }
        if let TaskKind::ThreeLevelInversion { rabi } = self.objective {
            if !(rabi > 0.0 && rabi.is_finite()) {
                return Err(Error::InvalidConfig("rabi must be positive".into()));
            }
            if self.errors != ErrorSetting::PulseArea {
                return Err(Error::InvalidConfig("the three-level ladder supports pulse-area errors only".into()));
            }
        }
        self.sampling.validate()
    }

    pub fn build(&self) -> Result<BuiltTask> {
        self.validate()?;
        let (n, a) = (self.pulses, self.area);
        let mut built = match &self.objective {
            TaskKind::PopulationInversion => build_population_inversion(n, a),
            TaskKind::Superposition { phi, varphi } => build_superposition(*phi, *varphi, n, a),
            TaskKind::GateStateBased { phi, varphi, shift } => build_gate_state_based(*phi, *varphi, *shift, n, a),
            TaskKind::GateOperatorBased { target } => build_gate_operator_based(target.unitary()?, n, a)?,
            TaskKind::ThreeLevelInversion { rabi } => build_three_level_inversion(n, *rabi),
        };
        built.model = match self.errors {
            ErrorSetting::PulseArea => ErrorModel::pulse_area(),
            ErrorSetting::Detuning => ErrorModel::detuning(),
            ErrorSetting::AreaAndDetuning => ErrorModel::area_and_detuning(),
            ErrorSetting::TimeVarying => ErrorModel::time_varying(n),
        };
        built.model.check(&built.template)?;
        Ok(built)
    }
}

pub fn hadamard() -> UnitaryMatrix {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    UnitaryMatrix(DMatrix::from_row_slice(2, 2, &[h, h, h, -h]))
}

/// `𝒰(ϕ, φ, Φ) = [[e^{iΦ} cos ϕ, −e^{−i(φ+Φ)} sin ϕ], [e^{i(φ+Φ)} sin ϕ, e^{−iΦ} cos ϕ]]`.
pub fn universal_gate(phi: f64, varphi: f64, big_phi: f64) -> UnitaryMatrix {
    let (s, c) = phi.sin_cos();
    let e = |t: f64| C64::from_polar(1.0, t);
    UnitaryMatrix(DMatrix::from_row_slice(
        2,
        2,
        &[e(big_phi) * c, -e(-(varphi + big_phi)) * s, e(varphi + big_phi) * s, e(-big_phi) * c],
    ))
}

/// `cos ϕ |0⟩ + e^{iφ} sin ϕ |1⟩`.
pub fn superposition_state(phi: f64, varphi: f64) -> Vec<C64> {
    vec![C64::new(phi.cos(), 0.0), C64::from_polar(phi.sin(), varphi)]
}

/// `|0⟩ → |1⟩` with `n` pulses of area `area`.
pub fn build_population_inversion(n: usize, area: f64) -> BuiltTask {
    BuiltTask {
        task: ControlTask::StatePrep { initial: basis(2, 0), target: basis(2, 1) },
        ..build_superposition(PI / 2.0, 0.0, n, area)
    }
}

pub fn build_superposition(phi: f64, varphi: f64, n: usize, area: f64) -> BuiltTask {
    BuiltTask {
        task: ControlTask::StatePrep { initial: basis(2, 0), target: superposition_state(phi, varphi) },
        template: PulseSequence::resonant(&vec![0.0; n], area),
        model: ErrorModel::pulse_area(),
        post_shift: 0.0,
    }
}

/// Superposition training whose result is shifted by `shift` afterwards;
/// see [`state_based_gate`] for the gate the shifted sequence realizes.
pub fn build_gate_state_based(phi: f64, varphi: f64, shift: f64, n: usize, area: f64) -> BuiltTask {
    BuiltTask { post_shift: shift, ..build_superposition(phi, varphi, n, area) }
}

pub fn build_gate_operator_based(target: UnitaryMatrix, n: usize, area: f64) -> Result<BuiltTask> {
    if target.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: target.dim() });
    }
    Ok(BuiltTask {
        task: ControlTask::gate(target)?,
        template: PulseSequence::resonant(&vec![0.0; n], area),
        model: ErrorModel::pulse_area(),
        post_shift: 0.0,
    })
}

/// Population inversion with one independent area error per pulse.
pub fn build_time_varying(n: usize, area: f64, intervals: usize) -> Result<BuiltTask> {
    if intervals != n {
        return Err(Error::DimensionMismatch { expected: n, found: intervals });
    }
    Ok(BuiltTask { model: ErrorModel::time_varying(n), ..build_population_inversion(n, area) })
}

/// `|1⟩ → |3⟩` on the ladder with equal couplings and `T = π / (√2 Ω)`.
pub fn build_three_level_inversion(n: usize, rabi: f64) -> BuiltTask {
    BuiltTask {
        task: ControlTask::StatePrep { initial: basis(3, 0), target: basis(3, 2) },
        template: PulseSequence::ThreeLevel(vec![LadderPulse::transfer(0.0, 0.0, rabi); n]),
        model: ErrorModel::pulse_area(),
        post_shift: 0.0,
    }
}

/// The gate an error-free two-level sequence realizes, written as
/// `𝒰(ϕ, φ, Φ)` with `ϕ ∈ [0, π/2]`.
pub fn decompose(seq: &PulseSequence) -> Result<(f64, f64, f64)> {
    let u = sequence_propagator(seq, &ErrorSample::none())?;
    if u.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: u.dim() });
    }
    let (a, b) = (u[(0, 0)], u[(1, 0)]);
    let phi = b.norm().atan2(a.norm());
    let big_phi = if a.norm() > 0.0 { a.arg() } else { 0.0 };
    let varphi = if b.norm() > 0.0 { b.arg() - big_phi } else { 0.0 };
    Ok((phi, varphi, big_phi))
}

/// Gate realized by a trained superposition sequence after shifting its
/// phases by `shift`: `𝒰(ϕ, φ + shift, Φ)` where `(ϕ, φ, Φ)` decompose the
/// unshifted sequence. Returns the target and the gate fidelity of the
/// shifted sequence against it.
pub fn state_based_gate(trained: &PulseSequence, shift: f64) -> Result<(UnitaryMatrix, f64)> {
    let (phi, varphi, big_phi) = decompose(trained)?;
    let target = universal_gate(phi, varphi + shift, big_phi);
    let u = sequence_propagator(&trained.shift_phases(shift), &ErrorSample::none())?;
    Ok((target.clone(), gate_fidelity(&u, &target)?))
}

/// Shift that brings the relative phase of the realized gate to `varphi`.
pub fn state_based_shift(trained: &PulseSequence, varphi: f64) -> Result<f64> {
    Ok(varphi - decompose(trained)?.1)
}

/// Gate fidelity at zero error of a (shifted) sequence against `𝒰(ϕ, φ, Φ)`.
pub fn verify_gate(seq: &PulseSequence, phi: f64, varphi: f64, big_phi: f64) -> Result<f64> {
    let u = sequence_propagator(seq, &ErrorSample::none())?;
    gate_fidelity(&u, &universal_gate(phi, varphi, big_phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{state_fidelity, task_fidelity};

    #[test]
    fn universal_gate_is_unitary_and_contains_hadamard() {
        for &(a, b, c) in &[(0.3, 1.2, -0.4), (PI / 4.0, 0.0, -PI / 2.0)] {
            assert!(universal_gate(a, b, c).deviation() < 1e-15);
        }
        let u = universal_gate(PI / 4.0, 0.0, -PI / 2.0);
        assert!((gate_fidelity(&u, &hadamard()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inversion_area_budget() {
        let b = build_population_inversion(7, PI / 2.0);
        let total: f64 = b.template.two_level().unwrap().iter().map(|p| p.area()).sum();
        assert!(total >= PI);
        assert!((total - 7.0 * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_half_rotation_inverts_for_any_phase() {
        let b = build_population_inversion(1, PI / 2.0);
        for th in [-2.0, 0.0, 1.3, PI] {
            let u = sequence_propagator(&b.template.shift_phases(th), &ErrorSample::none()).unwrap();
            assert!((task_fidelity(&u, &b.task).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn phi_zero_is_trivially_solved() {
        let b = build_superposition(0.0, 0.0, 3, PI / 4.0);
        let zero = PulseSequence::resonant(&[0.0; 3], 0.0);
        let u = sequence_propagator(&zero, &ErrorSample::none()).unwrap();
        assert!((task_fidelity(&u, &b.task).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_gate_with_zero_area() {
        let b = build_gate_operator_based(UnitaryMatrix::identity(2), 3, PI / 4.0).unwrap();
        let zero = PulseSequence::resonant(&[0.0; 3], 0.0);
        let u = sequence_propagator(&zero, &ErrorSample::none()).unwrap();
        assert!((task_fidelity(&u, &b.task).unwrap() - 1.0).abs() < 1e-14);
        let bad = UnitaryMatrix(DMatrix::from_element(2, 2, C64::new(1.0, 0.0)));
        assert!(build_gate_operator_based(bad, 3, PI / 4.0).is_err());
    }

    #[test]
    fn zero_shift_is_identity() {
        let b = build_gate_state_based(PI / 4.0, 0.0, 0.0, 3, PI / 4.0);
        let seq = b.template.with_phases(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(b.finalize(&seq), seq);
    }

    #[test]
    fn shifted_sequence_realizes_decomposed_gate() {
        let seq = PulseSequence::resonant(&[0.4, -1.3, 2.2, 0.9], PI / 4.0);
        for shift in [0.0, 0.7, -2.9] {
            let (_, f) = state_based_gate(&seq, shift).unwrap();
            assert!((f - 1.0).abs() < 1e-12);
        }
        let (phi, varphi, big_phi) = decompose(&seq).unwrap();
        let psi = superposition_state(phi, varphi);
        let u = sequence_propagator(&seq, &ErrorSample::none()).unwrap();
        assert!((state_fidelity(&u, &basis(2, 0), &psi).unwrap() - 1.0).abs() < 1e-12);
        let s = state_based_shift(&seq, 1.0).unwrap();
        assert!((verify_gate(&seq.shift_phases(s), phi, 1.0, big_phi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn time_varying_needs_one_interval_per_pulse() {
        assert!(build_time_varying(5, PI / 2.0, 5).is_ok());
        assert!(matches!(build_time_varying(5, PI / 2.0, 4), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn three_level_single_pulse_transfers() {
        let b = build_three_level_inversion(1, 1.0);
        let u = sequence_propagator(&b.template, &ErrorSample::none()).unwrap();
        assert!((u[(2, 0)].norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = TaskSpec {
            objective: TaskKind::GateOperatorBased { target: GateTarget::Hadamard },
            pulses: 9,
            area: PI / 4.0,
            errors: ErrorSetting::PulseArea,
            sampling: DistributionSpec::uniform(-0.1, 0.3),
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: TaskSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.build().unwrap().template.len(), 9);
    }
}
