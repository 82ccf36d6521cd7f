//! Batched fidelity and gradient evaluation over many error samples.
//!
//! For every sample the pulse propagators are built once from their spectral
//! decompositions; forward products (states or operators) and backward
//! products are cached, and the derivative of each pulse exponential is taken
//! in its eigenbasis via divided differences of `λ ↦ exp(-i T λ)`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::dynamics::{ladder_xy, sigma_x, sigma_y, sigma_z, ErrorKind, ErrorModel, PulseErrors, PulseSequence, PulseTerms};
use crate::error::{Error, Result};
use crate::metrics::ControlTask;
use crate::spectral::{eigh, Ket, Op, Spectral};

/// Parameter family a gradient is taken with respect to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Wrt {
    /// Virtual controls `(u_x, u_y)` of every phase, pulse-major.
    VirtualControls,
    /// Two-level detunings `Δ_n`; with `duration_rule` the pulse durations
    /// follow `T_n = π / (2 √(Ω_n² + Δ_n²))` and are differentiated too.
    Detunings { duration_rule: bool },
}

/// Duration that makes a detuned pulse a half rotation: `π / (2 √(Ω² + Δ²))`.
pub fn detuned_duration(rabi: f64, detuning: f64) -> f64 {
    PI / (2.0 * rabi.hypot(detuning))
}

fn detuned_duration_rate(rabi: f64, detuning: f64) -> f64 {
    let r2 = rabi * rabi + detuning * detuning;
    -PI * detuning / (2.0 * r2 * r2.sqrt())
}

pub(crate) enum Objective<const D: usize> {
    State { initial: Ket<D>, target: Ket<D> },
    Gate { target_adjoint: Op<D> },
}

impl<const D: usize> Objective<D> {
    pub fn from_task(task: &ControlTask) -> Result<Self> {
        if task.system_dim() != D {
            return Err(Error::DimensionMismatch { expected: D, found: task.system_dim() });
        }
        Ok(match task {
            ControlTask::StatePrep { initial, target } => Objective::State {
                initial: Ket::<D>::from_fn(|i, _| initial[i]),
                target: Ket::<D>::from_fn(|i, _| target[i]),
            },
            ControlTask::GateSynth { target } => Objective::Gate { target_adjoint: target.to_static::<D>().adjoint() },
        })
    }
}

/// Directions `∂H/∂p` of one pulse for every parameter it owns.
struct PulseGenerators<const D: usize> {
    ops: Vec<Op<D>>,
    /// Generators scale with `1 + ε_A` (drive-amplitude parameters).
    area_scaled: bool,
    /// `dT/dp` for parameters that also move the duration.
    duration_rate: Option<f64>,
}

fn generators<const D: usize>(seq: &PulseSequence, wrt: Wrt) -> Result<Vec<PulseGenerators<D>>> {
    match (seq, wrt) {
        (PulseSequence::TwoLevel(p), Wrt::VirtualControls) => Ok(p
            .iter()
            .map(|p| PulseGenerators {
                ops: vec![sigma_x::<D>() * C64::from(p.rabi), sigma_y::<D>() * C64::from(p.rabi)],
                area_scaled: true,
                duration_rate: None,
            })
            .collect()),
        (PulseSequence::ThreeLevel(p), Wrt::VirtualControls) => {
            let (x12, y12) = ladder_xy::<D>(0, 1);
            let (x23, y23) = ladder_xy::<D>(1, 2);
            Ok(p.iter()
                .map(|p| PulseGenerators {
                    ops: vec![
                        x12 * C64::from(p.rabi_a),
                        y12 * C64::from(p.rabi_a),
                        x23 * C64::from(p.rabi_b),
                        y23 * C64::from(p.rabi_b),
                    ],
                    area_scaled: true,
                    duration_rate: None,
                })
                .collect())
        }
        (PulseSequence::TwoLevel(p), Wrt::Detunings { duration_rule }) => Ok(p
            .iter()
            .map(|p| PulseGenerators {
                ops: vec![sigma_z::<D>()],
                area_scaled: false,
                duration_rate: duration_rule.then(|| detuned_duration_rate(p.rabi, p.detuning)),
            })
            .collect()),
        (PulseSequence::ThreeLevel(_), Wrt::Detunings { .. }) => Err(Error::IncompatibleErrorModel(
            "detuning parameters exist only for two-level sequences".into(),
        )),
    }
}

/// Number of parameters [`Wrt`] selects on a sequence.
pub fn parameter_count(seq: &PulseSequence, wrt: Wrt) -> usize {
    match wrt {
        Wrt::VirtualControls => seq.len() * 2 * seq.phases_per_pulse(),
        Wrt::Detunings { .. } => seq.len(),
    }
}

fn divided_differences<const D: usize>(values: &[f64; D], phases: &[C64; D], t: f64) -> Op<D> {
    Op::<D>::from_fn(|j, k| {
        let gap = values[j] - values[k];
        if j == k {
            C64::new(0.0, -t) * phases[j]
        } else if (t * gap).abs() > 1e-2 {
            (phases[j] - phases[k]) / gap
        } else {
            // -i t e^{-i t m} sinc(t gap / 2), series for the sinc
            let x = 0.5 * t * gap;
            let x2 = x * x;
            let sinc = 1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0;
            let mid = 0.5 * (values[j] + values[k]);
            C64::new(0.0, -t) * C64::from_polar(1.0, -t * mid) * sinc
        }
    })
}

const MAX_GENERATORS: usize = 4;

/// Per-pulse data shared by all samples. When the errors only rescale the
/// drive, the eigenbasis (and the generators expressed in it) is fixed.
struct PulseBase<const D: usize> {
    fixed: Option<(Spectral<D>, Vec<Op<D>>)>,
}

fn build_bases<const D: usize>(
    terms: &[PulseTerms<D>],
    model: &ErrorModel,
    gens: Option<&[PulseGenerators<D>]>,
) -> Vec<PulseBase<D>> {
    let scaling_only = !model.0.contains(&ErrorKind::Detuning);
    terms
        .iter()
        .enumerate()
        .map(|(n, t)| {
            let fixed = (scaling_only && t.bias.iter().all(|z| *z == C64::new(0.0, 0.0))).then(|| {
                let spectral = eigh(&t.drive);
                let ops = gens.map_or_else(Vec::new, |g| g[n].ops.iter().map(|o| spectral.in_eigenbasis(o)).collect());
                (spectral, ops)
            });
            PulseBase { fixed }
        })
        .collect()
}

struct PulseCache<const D: usize> {
    values: [f64; D],
    vectors: Op<D>,
    phases: [C64; D],
    unitary: Op<D>,
    scale: f64,
    duration: f64,
}

fn build_cache<const D: usize>(
    terms: &[PulseTerms<D>],
    bases: &[PulseBase<D>],
    model: &ErrorModel,
    point: &[f64],
    out: &mut Vec<PulseCache<D>>,
) {
    out.clear();
    for (n, (t, base)) in terms.iter().zip(bases).enumerate() {
        let err: PulseErrors = model.resolve(point, n);
        let scale = 1.0 + err.area;
        let spectral = match &base.fixed {
            Some((s, _)) => Spectral { values: s.values.map(|v| v * scale), vectors: s.vectors },
            None => eigh(&t.hamiltonian(err)),
        };
        let phases = spectral.phases(t.duration);
        let mut scaled = spectral.vectors;
        for j in 0..D {
            for i in 0..D {
                scaled[(i, j)] *= phases[j];
            }
        }
        let unitary = scaled * spectral.vectors.adjoint();
        out.push(PulseCache { values: spectral.values, vectors: spectral.vectors, phases, unitary, scale, duration: t.duration });
    }
}

/// `d(overlap)/dp` for every parameter of the pulse cached in `c`, given
/// `Q = V† R V` with `R` the (right ⊗ left) environment of the pulse.
fn accumulate<const D: usize>(
    c: &PulseCache<D>,
    gens: &PulseGenerators<D>,
    base: &PulseBase<D>,
    q: &Op<D>,
) -> [C64; MAX_GENERATORS] {
    let mut out = [C64::new(0.0, 0.0); MAX_GENERATORS];
    let gamma = divided_differences(&c.values, &c.phases, c.duration);
    let weights = q.transpose().component_mul(&gamma);
    let scale = if gens.area_scaled { c.scale } else { 1.0 };
    for (k, g) in gens.ops.iter().enumerate() {
        let m = match &base.fixed {
            Some((_, ops)) => ops[k],
            None => c.vectors.adjoint() * g * c.vectors,
        };
        let mut acc = C64::new(0.0, 0.0);
        for (w, m) in weights.iter().zip(m.iter()) {
            acc += w * m;
        }
        out[k] = acc * scale;
    }
    if let Some(rate) = gens.duration_rate {
        // the duration change commutes with the pulse: -i dT H U
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..D {
            acc += q[(j, j)] * c.values[j] * c.phases[j];
        }
        out[0] += C64::new(0.0, -rate) * acc;
    }
    out
}

#[derive(Default)]
struct Scratch<const D: usize> {
    kets: Vec<Ket<D>>,
    ops: Vec<Op<D>>,
}

/// Fidelity of one sample and, if requested, `dF/dp` added into `grad`.
fn sample_fidelity<const D: usize>(
    cache: &[PulseCache<D>],
    bases: &[PulseBase<D>],
    objective: &Objective<D>,
    grads: Option<(&[PulseGenerators<D>], &mut [f64])>,
    scratch: &mut Scratch<D>,
) -> f64 {
    match objective {
        Objective::State { initial, target } => {
            let kets = &mut scratch.kets;
            kets.clear();
            let mut psi = *initial;
            for c in cache {
                kets.push(psi);
                psi = c.unitary * psi;
            }
            let amp = target.dotc(&psi);
            let fid = amp.norm_sqr();
            if let Some((gens, grad)) = grads {
                let mut chi = *target;
                let mut offset = grad.len();
                for (n, c) in cache.iter().enumerate().rev() {
                    let width = gens[n].ops.len();
                    offset -= width;
                    let psi_e = c.vectors.adjoint() * kets[n];
                    let chi_e = c.vectors.adjoint() * chi;
                    let q = Op::<D>::from_fn(|k, j| psi_e[k] * chi_e[j].conj());
                    let d = accumulate(c, &gens[n], &bases[n], &q);
                    for (g, dv) in grad[offset..offset + width].iter_mut().zip(&d) {
                        *g += 2.0 * (amp.conj() * dv).re;
                    }
                    chi = c.unitary.adjoint() * chi;
                }
            }
            fid
        }
        Objective::Gate { target_adjoint } => {
            let ops = &mut scratch.ops;
            ops.clear();
            let mut acc = Op::<D>::identity();
            for c in cache {
                ops.push(acc);
                acc = c.unitary * acc;
            }
            let overlap = (target_adjoint * acc).trace();
            let fid = overlap.norm() / D as f64;
            if let Some((gens, grad)) = grads {
                let norm = overlap.norm();
                let mut p = *target_adjoint;
                let mut offset = grad.len();
                for (n, c) in cache.iter().enumerate().rev() {
                    let width = gens[n].ops.len();
                    offset -= width;
                    let q = c.vectors.adjoint() * (ops[n] * p) * c.vectors;
                    let d = accumulate(c, &gens[n], &bases[n], &q);
                    if norm > 0.0 {
                        for (g, dv) in grad[offset..offset + width].iter_mut().zip(&d) {
                            *g += (overlap.conj() * dv).re / (norm * D as f64);
                        }
                    }
                    p *= c.unitary;
                }
            }
            fid
        }
    }
}

/// Mean infidelity over `points` and, when `wrt` is set, its gradient.
pub(crate) fn cost_and_gradient(
    seq: &PulseSequence,
    task: &ControlTask,
    model: &ErrorModel,
    points: &[Vec<f64>],
    wrt: Option<Wrt>,
) -> Result<(f64, Vec<f64>)> {
    match seq.system_dim() {
        2 => run::<2>(seq, task, model, points, wrt),
        3 => run::<3>(seq, task, model, points, wrt),
        d => Err(Error::DimensionMismatch { expected: 2, found: d }),
    }
}

/// Fidelity at every point.
pub(crate) fn fidelities(seq: &PulseSequence, task: &ControlTask, model: &ErrorModel, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    match seq.system_dim() {
        2 => fidelities_d::<2>(seq, task, model, points),
        3 => fidelities_d::<3>(seq, task, model, points),
        d => Err(Error::DimensionMismatch { expected: 2, found: d }),
    }
}

fn prepare<const D: usize>(seq: &PulseSequence, task: &ControlTask, model: &ErrorModel) -> Result<(Vec<PulseTerms<D>>, Objective<D>)> {
    if seq.is_empty() {
        return Err(Error::InvalidConfig("pulse sequence is empty".into()));
    }
    model.check(seq)?;
    let objective = Objective::<D>::from_task(task)?;
    Ok((crate::dynamics::sequence_terms::<D>(seq), objective))
}

fn fidelities_d<const D: usize>(seq: &PulseSequence, task: &ControlTask, model: &ErrorModel, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let (terms, objective) = prepare::<D>(seq, task, model)?;
    let bases = build_bases(&terms, model, None);
    let mut cache = Vec::with_capacity(terms.len());
    let mut scratch = Scratch::default();
    points
        .iter()
        .map(|p| {
            if p.len() != model.dimension() {
                return Err(Error::DimensionMismatch { expected: model.dimension(), found: p.len() });
            }
            build_cache(&terms, &bases, model, p, &mut cache);
            Ok(sample_fidelity(&cache, &bases, &objective, None, &mut scratch).clamp(0.0, 1.0))
        })
        .collect()
}

fn run<const D: usize>(
    seq: &PulseSequence,
    task: &ControlTask,
    model: &ErrorModel,
    points: &[Vec<f64>],
    wrt: Option<Wrt>,
) -> Result<(f64, Vec<f64>)> {
    if points.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let (terms, objective) = prepare::<D>(seq, task, model)?;
    let gens = match wrt {
        Some(w) => Some(generators::<D>(seq, w)?),
        None => None,
    };
    let width = wrt.map_or(0, |w| parameter_count(seq, w));
    let mut grad = vec![0.0; width];
    let bases = build_bases(&terms, model, gens.as_deref());
    let mut cache = Vec::with_capacity(terms.len());
    let mut scratch = Scratch::default();
    let mut total = 0.0;
    for p in points {
        if p.len() != model.dimension() {
            return Err(Error::DimensionMismatch { expected: model.dimension(), found: p.len() });
        }
        build_cache(&terms, &bases, model, p, &mut cache);
        let g = gens.as_deref().map(|g| (g, grad.as_mut_slice()));
        total += 1.0 - sample_fidelity(&cache, &bases, &objective, g, &mut scratch);
    }
    let k = points.len() as f64;
    // J = mean(1 − F): dJ = −mean(dF)
    for g in &mut grad {
        *g /= -k;
    }
    Ok((total / k, grad))
}
