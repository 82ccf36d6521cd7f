//! Piecewise-constant dynamics of driven two- and three-level systems with
//! injected systematic errors.
//!
//! Conventions: `ħ = 1`, the two-level drive is
//! `H = Δ σ_z + Ω (cos θ σ_x + sin θ σ_y)` and each pulse evolves with
//! `exp(-i H T)`. A pulse-area error scales the Rabi frequency,
//! `Ω → Ω (1 + ε_A)`; a detuning error adds `ε_Δ Ω` to the detuning.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{eigh, Op};

/// Tolerance used when checking Hermiticity and unitarity of inputs.
pub const UNITARY_TOLERANCE: f64 = 1e-12;

#[cfg(test)]
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Canonical representative of an angle in `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

pub(crate) fn sigma_x<const D: usize>() -> Op<D> {
    let mut m = Op::<D>::zeros();
    m[(0, 1)] = ONE;
    m[(1, 0)] = ONE;
    m
}

pub(crate) fn sigma_y<const D: usize>() -> Op<D> {
    let mut m = Op::<D>::zeros();
    m[(0, 1)] = -I;
    m[(1, 0)] = I;
    m
}

pub(crate) fn sigma_z<const D: usize>() -> Op<D> {
    let mut m = Op::<D>::zeros();
    m[(0, 0)] = ONE;
    m[(1, 1)] = -ONE;
    m
}

/// `|a⟩⟨b| + |b⟩⟨a|` and `-i|a⟩⟨b| + i|b⟩⟨a|`: the x/y couplings of a ladder transition.
pub(crate) fn ladder_xy<const D: usize>(a: usize, b: usize) -> (Op<D>, Op<D>) {
    let mut x = Op::<D>::zeros();
    x[(a, b)] = ONE;
    x[(b, a)] = ONE;
    let mut y = Op::<D>::zeros();
    y[(a, b)] = -I;
    y[(b, a)] = I;
    (x, y)
}

/// One constant pulse of a two-level drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub phase: f64,
    pub rabi: f64,
    #[serde(default)]
    pub detuning: f64,
    pub duration: f64,
}

impl Pulse {
    pub fn new(phase: f64, rabi: f64, detuning: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidConfig(format!("pulse duration must be positive, got {duration}")));
        }
        if !(rabi >= 0.0 && rabi.is_finite()) {
            return Err(Error::InvalidConfig(format!("Rabi frequency must be non-negative, got {rabi}")));
        }
        if !phase.is_finite() || !detuning.is_finite() {
            return Err(Error::InvalidConfig("pulse phase and detuning must be finite".into()));
        }
        Ok(Self { phase: wrap_phase(phase), rabi, detuning, duration })
    }

    /// Resonant pulse with unit Rabi frequency and the given area `A = Ω T`.
    pub fn resonant(phase: f64, area: f64) -> Self {
        Self { phase: wrap_phase(phase), rabi: 1.0, detuning: 0.0, duration: area }
    }

    pub fn area(&self) -> f64 {
        self.rabi * self.duration
    }
}

/// One constant pulse of the two-field ladder drive `|1⟩ ↔ |2⟩ ↔ |3⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderPulse {
    pub phase_a: f64,
    pub rabi_a: f64,
    pub phase_b: f64,
    pub rabi_b: f64,
    pub duration: f64,
}

impl LadderPulse {
    /// Equal Rabi frequencies `Ω` with the transfer duration `T = π / (√2 Ω)`.
    pub fn transfer(phase_a: f64, phase_b: f64, rabi: f64) -> Self {
        Self {
            phase_a: wrap_phase(phase_a),
            rabi_a: rabi,
            phase_b: wrap_phase(phase_b),
            rabi_b: rabi,
            duration: PI / (2f64.sqrt() * rabi),
        }
    }
}

/// An ordered composite pulse; pulse 1 acts first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", content = "pulses", rename_all = "snake_case")]
pub enum PulseSequence {
    TwoLevel(Vec<Pulse>),
    ThreeLevel(Vec<LadderPulse>),
}

impl PulseSequence {
    /// `n` resonant pulses of equal area and the given phases.
    pub fn resonant(phases: &[f64], area: f64) -> Self {
        Self::TwoLevel(phases.iter().map(|&p| Pulse::resonant(p, area)).collect())
    }

    pub fn len(&self) -> usize {
        match self {
            Self::TwoLevel(p) => p.len(),
            Self::ThreeLevel(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn system_dim(&self) -> usize {
        match self {
            Self::TwoLevel(_) => 2,
            Self::ThreeLevel(_) => 3,
        }
    }

    /// Number of phase parameters per pulse (1 for two levels, 2 for the ladder).
    pub fn phases_per_pulse(&self) -> usize {
        self.system_dim() - 1
    }

    /// All phases, pulse-major (`θᵃ₁, θᵇ₁, θᵃ₂, …` for the ladder).
    pub fn phases(&self) -> Vec<f64> {
        match self {
            Self::TwoLevel(p) => p.iter().map(|p| p.phase).collect(),
            Self::ThreeLevel(p) => p.iter().flat_map(|p| [p.phase_a, p.phase_b]).collect(),
        }
    }

    /// Replace all phases (layout as in [`Self::phases`]); values are wrapped into `(-π, π]`.
    pub fn set_phases(&mut self, phases: &[f64]) -> Result<()> {
        let expected = self.len() * self.phases_per_pulse();
        if phases.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: phases.len() });
        }
        match self {
            Self::TwoLevel(p) => {
                for (pulse, &th) in p.iter_mut().zip(phases) {
                    pulse.phase = wrap_phase(th);
                }
            }
            Self::ThreeLevel(p) => {
                for (pulse, th) in p.iter_mut().zip(phases.chunks_exact(2)) {
                    pulse.phase_a = wrap_phase(th[0]);
                    pulse.phase_b = wrap_phase(th[1]);
                }
            }
        }
        Ok(())
    }

    pub fn with_phases(&self, phases: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.set_phases(phases)?;
        Ok(out)
    }

    /// Shift every phase by the same angle.
    pub fn shift_phases(&self, shift: f64) -> Self {
        let phases: Vec<f64> = self.phases().iter().map(|p| p + shift).collect();
        self.with_phases(&phases).expect("same layout")
    }

    /// Trained detunings of a two-level sequence.
    pub fn detunings(&self) -> Option<Vec<f64>> {
        match self {
            Self::TwoLevel(p) => Some(p.iter().map(|p| p.detuning).collect()),
            Self::ThreeLevel(_) => None,
        }
    }

    pub(crate) fn two_level(&self) -> Option<&[Pulse]> {
        match self {
            Self::TwoLevel(p) => Some(p),
            Self::ThreeLevel(_) => None,
        }
    }

    pub(crate) fn two_level_mut(&mut self) -> Option<&mut [Pulse]> {
        match self {
            Self::TwoLevel(p) => Some(p),
            Self::ThreeLevel(_) => None,
        }
    }

    /// Concatenation: `self` acts first, then `next`.
    pub fn then(&self, next: &Self) -> Result<Self> {
        match (self, next) {
            (Self::TwoLevel(a), Self::TwoLevel(b)) => Ok(Self::TwoLevel([a.as_slice(), b].concat())),
            (Self::ThreeLevel(a), Self::ThreeLevel(b)) => {
                Ok(Self::ThreeLevel([a.as_slice(), b].concat()))
            }
            _ => Err(Error::DimensionMismatch { expected: self.system_dim(), found: next.system_dim() }),
        }
    }
}

/// What a single error component perturbs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Fractional Rabi-frequency error on every pulse.
    PulseArea,
    /// Detuning offset in units of the Rabi frequency, on every pulse.
    Detuning,
    /// Fractional Rabi-frequency error on one pulse interval only (0-based).
    TimeVaryingPulseArea(usize),
}

/// The kinds of an error vector, one per component.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ErrorModel(pub Vec<ErrorKind>);

impl ErrorModel {
    pub fn pulse_area() -> Self {
        Self(vec![ErrorKind::PulseArea])
    }

    pub fn detuning() -> Self {
        Self(vec![ErrorKind::Detuning])
    }

    pub fn area_and_detuning() -> Self {
        Self(vec![ErrorKind::PulseArea, ErrorKind::Detuning])
    }

    /// One pulse-area component per pulse interval.
    pub fn time_varying(intervals: usize) -> Self {
        Self((0..intervals).map(ErrorKind::TimeVaryingPulseArea).collect())
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// Checks the model against a sequence: non-empty, time-varying components
    /// numbered `0..N` in order, and no detuning error on the ladder system.
    pub fn check(&self, seq: &PulseSequence) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::IncompatibleErrorModel("error model has no components".into()));
        }
        let intervals: Vec<usize> = self
            .0
            .iter()
            .filter_map(|k| match k {
                ErrorKind::TimeVaryingPulseArea(l) => Some(*l),
                _ => None,
            })
            .collect();
        if !intervals.is_empty() {
            if intervals.len() != seq.len() {
                return Err(Error::DimensionMismatch { expected: seq.len(), found: intervals.len() });
            }
            if intervals.iter().enumerate().any(|(i, &l)| i != l) {
                return Err(Error::IncompatibleErrorModel(
                    "time-varying components must cover intervals 0..N in order".into(),
                ));
            }
        }
        if seq.system_dim() == 3 && self.0.contains(&ErrorKind::Detuning) {
            return Err(Error::IncompatibleErrorModel(
                "detuning errors are only modelled for two-level systems".into(),
            ));
        }
        Ok(())
    }

    /// Errors acting on pulse `n` (0-based) for the given component values.
    pub fn resolve(&self, values: &[f64], n: usize) -> PulseErrors {
        let mut out = PulseErrors::default();
        for (kind, &v) in self.0.iter().zip(values) {
            match *kind {
                ErrorKind::PulseArea => out.area += v,
                ErrorKind::Detuning => out.detuning += v,
                ErrorKind::TimeVaryingPulseArea(l) if l == n => out.area += v,
                ErrorKind::TimeVaryingPulseArea(_) => {}
            }
        }
        out
    }
}

/// Scalar errors seen by one pulse.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PulseErrors {
    pub area: f64,
    pub detuning: f64,
}

/// One point in error space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub model: ErrorModel,
    pub values: Vec<f64>,
}

impl ErrorSample {
    pub fn new(model: ErrorModel, values: Vec<f64>) -> Result<Self> {
        if model.dimension() == 0 {
            return Err(Error::IncompatibleErrorModel("error model has no components".into()));
        }
        if model.dimension() != values.len() {
            return Err(Error::DimensionMismatch { expected: model.dimension(), found: values.len() });
        }
        Ok(Self { model, values })
    }

    pub fn none() -> Self {
        Self::pulse_area(0.0)
    }

    pub fn pulse_area(eps: f64) -> Self {
        Self { model: ErrorModel::pulse_area(), values: vec![eps] }
    }

    pub fn detuning(eps: f64) -> Self {
        Self { model: ErrorModel::detuning(), values: vec![eps] }
    }

    pub fn area_and_detuning(area: f64, detuning: f64) -> Self {
        Self { model: ErrorModel::area_and_detuning(), values: vec![area, detuning] }
    }

    pub fn resolve(&self, n: usize) -> PulseErrors {
        self.model.resolve(&self.values, n)
    }
}

/// A Hermitian operator of dimension 2 or 3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianMatrix(pub DMatrix<C64>);

/// A unitary operator of dimension 2 or 3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryMatrix(pub DMatrix<C64>);

impl HermitianMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn deviation(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl UnitaryMatrix {
    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    /// Validates unitarity to [`UNITARY_TOLERANCE`].
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let u = Self(m);
        let deviation = u.deviation();
        if deviation > UNITARY_TOLERANCE {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(u)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `max |U†U − 1|`.
    pub fn deviation(&self) -> f64 {
        let n = self.dim();
        (self.0.adjoint() * &self.0 - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `self · other` (other acts first).
    pub fn compose(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0)
    }

    /// Largest entry-wise modulus difference.
    pub fn max_distance(&self, other: &Self) -> f64 {
        (&self.0 - &other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub(crate) fn to_static<const D: usize>(&self) -> Op<D> {
        Op::<D>::from_fn(|i, j| self.0[(i, j)])
    }

    pub(crate) fn from_static<const D: usize>(m: &Op<D>) -> Self {
        Self(DMatrix::from_fn(D, D, |i, j| m[(i, j)]))
    }
}

impl std::ops::Index<(usize, usize)> for UnitaryMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

/// Static pieces of one pulse's Hamiltonian:
/// `H = bias + (1 + ε_A) · drive + ε_Δ · detuning_unit`.
#[derive(Clone, Debug)]
pub(crate) struct PulseTerms<const D: usize> {
    pub bias: Op<D>,
    pub drive: Op<D>,
    pub detuning_unit: Op<D>,
    pub duration: f64,
}

impl<const D: usize> PulseTerms<D> {
    pub fn hamiltonian(&self, err: PulseErrors) -> Op<D> {
        let mut h = self.bias + self.drive * C64::from(1.0 + err.area);
        if err.detuning != 0.0 {
            h += self.detuning_unit * C64::from(err.detuning);
        }
        h
    }
}

pub(crate) fn qubit_terms<const D: usize>(p: &Pulse) -> PulseTerms<D> {
    let (s, c) = p.phase.sin_cos();
    PulseTerms {
        bias: sigma_z::<D>() * C64::from(p.detuning),
        drive: (sigma_x::<D>() * C64::from(c) + sigma_y::<D>() * C64::from(s)) * C64::from(p.rabi),
        detuning_unit: sigma_z::<D>() * C64::from(p.rabi),
        duration: p.duration,
    }
}

pub(crate) fn ladder_terms<const D: usize>(p: &LadderPulse) -> PulseTerms<D> {
    let (x12, y12) = ladder_xy::<D>(0, 1);
    let (x23, y23) = ladder_xy::<D>(1, 2);
    let (sa, ca) = p.phase_a.sin_cos();
    let (sb, cb) = p.phase_b.sin_cos();
    let drive = (x12 * C64::from(ca) + y12 * C64::from(sa)) * C64::from(p.rabi_a)
        + (x23 * C64::from(cb) + y23 * C64::from(sb)) * C64::from(p.rabi_b);
    PulseTerms { bias: Op::<D>::zeros(), drive, detuning_unit: Op::<D>::zeros(), duration: p.duration }
}

pub(crate) fn sequence_terms<const D: usize>(seq: &PulseSequence) -> Vec<PulseTerms<D>> {
    debug_assert_eq!(seq.system_dim(), D);
    match seq {
        PulseSequence::TwoLevel(p) => p.iter().map(qubit_terms::<D>).collect(),
        PulseSequence::ThreeLevel(p) => p.iter().map(ladder_terms::<D>).collect(),
    }
}

fn to_dense<const D: usize>(m: &Op<D>) -> DMatrix<C64> {
    DMatrix::from_fn(D, D, |i, j| m[(i, j)])
}

/// Two-level pulse Hamiltonian with its errors applied.
pub fn pulse_hamiltonian(pulse: &Pulse, err: PulseErrors) -> HermitianMatrix {
    HermitianMatrix(to_dense(&qubit_terms::<2>(pulse).hamiltonian(err)))
}

/// Ladder Hamiltonian `Ωₐ(1+ε_A) e^{-iθᵃ}|1⟩⟨2| + Ω_b(1+ε_A) e^{-iθᵇ}|2⟩⟨3| + h.c.`.
pub fn three_level_hamiltonian(pulse: &LadderPulse, err: PulseErrors) -> Result<HermitianMatrix> {
    if err.detuning != 0.0 {
        return Err(Error::IncompatibleErrorModel(
            "detuning errors are only modelled for two-level systems".into(),
        ));
    }
    Ok(HermitianMatrix(to_dense(&ladder_terms::<3>(pulse).hamiltonian(err))))
}

/// Closed-form resonant propagator `exp(-i A (cos θ σ_x + sin θ σ_y))`.
pub fn resonant_propagator(area: f64, phase: f64) -> UnitaryMatrix {
    let (s, c) = area.sin_cos();
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::from(c),
            -I * C64::from_polar(1.0, -phase) * s,
            -I * C64::from_polar(1.0, phase) * s,
            C64::from(c),
        ],
    );
    UnitaryMatrix(m)
}

fn spectral_exp<const D: usize>(h: &DMatrix<C64>, t: f64) -> UnitaryMatrix {
    let s = Op::<D>::from_fn(|i, j| h[(i, j)]);
    UnitaryMatrix::from_static(&eigh(&s).exp(t))
}

/// `exp(-i H T)` from the spectral decomposition of `H`.
pub fn propagator(h: &HermitianMatrix, duration: f64) -> Result<UnitaryMatrix> {
    let scale = h.0.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let deviation = h.deviation();
    if deviation > UNITARY_TOLERANCE * scale {
        return Err(Error::NotHermitian { deviation });
    }
    match h.dim() {
        2 => Ok(spectral_exp::<2>(&h.0, duration)),
        3 => Ok(spectral_exp::<3>(&h.0, duration)),
        d => Err(Error::DimensionMismatch { expected: 2, found: d }),
    }
}

fn product<const D: usize>(terms: &[PulseTerms<D>], model: &ErrorModel, values: &[f64]) -> Op<D> {
    terms.iter().enumerate().fold(Op::<D>::identity(), |acc, (n, t)| {
        let h = t.hamiltonian(model.resolve(values, n));
        eigh(&h).exp(t.duration) * acc
    })
}

/// `U_N ⋯ U_2 U_1` under the given error sample.
pub fn sequence_propagator(seq: &PulseSequence, error: &ErrorSample) -> Result<UnitaryMatrix> {
    if seq.is_empty() {
        return Err(Error::InvalidConfig("pulse sequence is empty".into()));
    }
    error.model.check(seq)?;
    Ok(match seq.system_dim() {
        2 => UnitaryMatrix::from_static(&product(&sequence_terms::<2>(seq), &error.model, &error.values)),
        _ => UnitaryMatrix::from_static(&product(&sequence_terms::<3>(seq), &error.model, &error.values)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dense(rows: &[[C64; 2]; 2]) -> DMatrix<C64> {
        DMatrix::from_fn(2, 2, |i, j| rows[i][j])
    }

    fn close(a: &DMatrix<C64>, b: &DMatrix<C64>, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() <= tol)
    }

    #[test]
    fn wrap_phase_is_half_open() {
        assert_eq!(wrap_phase(PI), PI);
        assert_relative_eq!(wrap_phase(-PI), PI);
        assert_relative_eq!(wrap_phase(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_eq!(wrap_phase(0.25), 0.25);
    }

    #[test]
    fn hamiltonian_examples() {
        let sx = dense(&[[ZERO, ONE], [ONE, ZERO]]);
        let sy = dense(&[[ZERO, -I], [I, ZERO]]);
        let h = pulse_hamiltonian(&Pulse::resonant(0.0, 1.0), PulseErrors::default());
        assert!(close(&h.0, &sx, 1e-15));
        let h = pulse_hamiltonian(&Pulse::resonant(PI / 2.0, 1.0), PulseErrors::default());
        assert!(close(&h.0, &sy, 1e-15));
        let h = pulse_hamiltonian(&Pulse::resonant(0.0, 1.0), PulseErrors { area: 0.1, detuning: 0.0 });
        assert!(close(&h.0, &(sx * C64::from(1.1)), 1e-15));
        assert!(h.deviation() <= 1e-14);
    }

    #[test]
    fn detuning_error_adds_to_trained_detuning() {
        let p = Pulse::new(0.3, 2.0, 0.5, 1.0).unwrap();
        let h = pulse_hamiltonian(&p, PulseErrors { area: 0.0, detuning: 0.1 });
        // Δ + ε_Δ Ω = 0.5 + 0.2
        assert_relative_eq!(h.0[(0, 0)].re, 0.7, epsilon = 1e-15);
        assert_relative_eq!(h.0[(1, 1)].re, -0.7, epsilon = 1e-15);
    }

    #[test]
    fn resonant_propagator_examples() {
        assert!(close(&resonant_propagator(0.0, 1.234).0, &DMatrix::identity(2, 2), 1e-15));
        let expected = dense(&[[ZERO, -I], [-I, ZERO]]);
        assert!(close(&resonant_propagator(PI / 2.0, 0.0).0, &expected, 1e-15));
        let minus = -DMatrix::<C64>::identity(2, 2);
        assert!(close(&resonant_propagator(PI, 0.7).0, &minus, 1e-15));
    }

    #[test]
    fn propagator_examples() {
        let sx = HermitianMatrix(dense(&[[ZERO, ONE], [ONE, ZERO]]));
        let u = propagator(&sx, PI / 2.0).unwrap();
        assert!(u.max_distance(&resonant_propagator(PI / 2.0, 0.0)) < 1e-12);
        let zero = HermitianMatrix(DMatrix::zeros(2, 2));
        assert!(propagator(&zero, 3.3).unwrap().max_distance(&UnitaryMatrix::identity(2)) < 1e-15);
        let scaled = HermitianMatrix(sx.0.clone() * C64::from(1.1));
        let u = propagator(&scaled, PI).unwrap();
        assert!(u.max_distance(&resonant_propagator(1.1 * PI, 0.0)) < 1e-12);
    }

    #[test]
    fn propagator_rejects_non_hermitian() {
        let m = HermitianMatrix(dense(&[[ZERO, ONE], [ZERO, ZERO]]));
        assert!(matches!(propagator(&m, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn sequence_examples() {
        let seq = PulseSequence::resonant(&[0.0, 0.0], PI / 2.0);
        let u = sequence_propagator(&seq, &ErrorSample::none()).unwrap();
        assert!(u.max_distance(&resonant_propagator(PI, 0.0)) < 1e-12);

        let seq = PulseSequence::resonant(&[0.0], PI);
        let u = sequence_propagator(&seq, &ErrorSample::pulse_area(0.1)).unwrap();
        assert!(u.max_distance(&resonant_propagator(1.1 * PI, 0.0)) < 1e-12);
    }

    #[test]
    fn pulse_one_acts_first() {
        let seq = PulseSequence::resonant(&[0.0, 1.0], 0.7);
        let u = sequence_propagator(&seq, &ErrorSample::none()).unwrap();
        let expected = resonant_propagator(0.7, 1.0).compose(&resonant_propagator(0.7, 0.0));
        assert!(u.max_distance(&expected) < 1e-13);
    }

    #[test]
    fn time_varying_model_must_match_pulse_count() {
        let seq = PulseSequence::resonant(&[0.0, 0.0, 0.0], PI / 2.0);
        let bad = ErrorSample::new(ErrorModel::time_varying(2), vec![0.1, 0.2]).unwrap();
        assert!(matches!(sequence_propagator(&seq, &bad), Err(Error::DimensionMismatch { .. })));
        let shuffled = ErrorSample::new(
            ErrorModel(vec![
                ErrorKind::TimeVaryingPulseArea(1),
                ErrorKind::TimeVaryingPulseArea(0),
                ErrorKind::TimeVaryingPulseArea(2),
            ]),
            vec![0.0; 3],
        )
        .unwrap();
        assert!(sequence_propagator(&seq, &shuffled).is_err());
    }

    #[test]
    fn time_varying_error_hits_only_its_pulse() {
        let seq = PulseSequence::resonant(&[0.0, 0.4], 0.9);
        let sample = ErrorSample::new(ErrorModel::time_varying(2), vec![0.0, 0.2]).unwrap();
        let u = sequence_propagator(&seq, &sample).unwrap();
        let expected = resonant_propagator(0.9 * 1.2, 0.4).compose(&resonant_propagator(0.9, 0.0));
        assert!(u.max_distance(&expected) < 1e-13);
    }

    #[test]
    fn ladder_examples() {
        let p = LadderPulse::transfer(0.0, 0.0, 1.0);
        let h = three_level_hamiltonian(&p, PulseErrors::default()).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[ZERO, ONE, ZERO, ONE, ZERO, ONE, ZERO, ONE, ZERO]);
        assert!(close(&h.0, &expected, 1e-15));

        // eigenvalues {−√2, 0, √2} from the characteristic polynomial λ(2 − λ²)
        let mut ev: Vec<f64> = h.0.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev[0], -2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(ev[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(ev[2], 2f64.sqrt(), epsilon = 1e-14);

        let seq = PulseSequence::ThreeLevel(vec![p]);
        let u = sequence_propagator(&seq, &ErrorSample::none()).unwrap();
        assert_relative_eq!(u[(2, 0)].norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ladder_rejects_detuning_errors() {
        let seq = PulseSequence::ThreeLevel(vec![LadderPulse::transfer(0.0, 0.0, 1.0)]);
        assert!(sequence_propagator(&seq, &ErrorSample::detuning(0.1)).is_err());
    }
}
