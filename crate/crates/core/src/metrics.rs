//! Fidelities, the training cost, and robustness measures over error space.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ErrorKind, ErrorModel, PulseSequence, UnitaryMatrix, UNITARY_TOLERANCE};
use crate::engine;
use crate::error::{Error, Result};
use crate::sampling::SampleSet;

/// Default number of grid points for testing-stage scans.
pub const DEFAULT_GRID_SIZE: usize = 2001;

/// Quadrature used for every interval average.
pub const QUADRATURE: &str = "trapezoid";

/// What a control sequence is trained to do.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlTask {
    /// Map `initial` onto `target`; fidelity `|⟨target|U|initial⟩|²`.
    StatePrep { initial: Vec<C64>, target: Vec<C64> },
    /// Realize `target` up to a global phase; fidelity `|tr(U_T† U)| / M`.
    GateSynth { target: UnitaryMatrix },
}

impl ControlTask {
    pub fn state_prep(initial: Vec<C64>, target: Vec<C64>) -> Result<Self> {
        if initial.len() != target.len() {
            return Err(Error::DimensionMismatch { expected: initial.len(), found: target.len() });
        }
        for v in [&initial, &target] {
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNITARY_TOLERANCE {
                return Err(Error::NotNormalized { norm });
            }
        }
        Ok(Self::StatePrep { initial, target })
    }

    pub fn gate(target: UnitaryMatrix) -> Result<Self> {
        let deviation = target.deviation();
        if deviation > UNITARY_TOLERANCE {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self::GateSynth { target })
    }

    pub fn system_dim(&self) -> usize {
        match self {
            Self::StatePrep { target, .. } => target.len(),
            Self::GateSynth { target } => target.dim(),
        }
    }
}

/// `|⟨Ψ_T| U |Ψ_init⟩|²`.
pub fn state_fidelity(u: &UnitaryMatrix, initial: &[C64], target: &[C64]) -> Result<f64> {
    let d = u.dim();
    for len in [initial.len(), target.len()] {
        if len != d {
            return Err(Error::DimensionMismatch { expected: d, found: len });
        }
    }
    let mut amp = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            amp += target[i].conj() * u[(i, j)] * initial[j];
        }
    }
    Ok(amp.norm_sqr().min(1.0))
}

/// `|tr(U_T† U)| / M`, insensitive to the global phase of either operator.
pub fn gate_fidelity(u: &UnitaryMatrix, target: &UnitaryMatrix) -> Result<f64> {
    if u.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), found: u.dim() });
    }
    let overlap = (target.0.adjoint() * &u.0).trace();
    Ok((overlap.norm() / u.dim() as f64).min(1.0))
}

/// Fidelity of an already computed propagator for a task.
pub fn task_fidelity(u: &UnitaryMatrix, task: &ControlTask) -> Result<f64> {
    match task {
        ControlTask::StatePrep { initial, target } => state_fidelity(u, initial, target),
        ControlTask::GateSynth { target } => gate_fidelity(u, target),
    }
}

/// Training cost `J = (1/K) Σ_k [1 − F(ε_k)]`, all labels being 1.
pub fn cost(seq: &PulseSequence, samples: &SampleSet, task: &ControlTask) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let (j, _) = engine::cost_and_gradient(seq, task, &samples.model, &samples.points, None)?;
    Ok(j)
}

/// Mean fidelity over a sample set (`1 − J`), e.g. on fresh test samples.
pub fn sample_average_fidelity(seq: &PulseSequence, samples: &SampleSet, task: &ControlTask) -> Result<f64> {
    Ok(1.0 - cost(seq, samples, task)?)
}

/// One error axis scanned in the testing stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorAxis {
    /// Constant pulse-area error on all pulses.
    #[default]
    PulseArea,
    Detuning,
}

impl ErrorAxis {
    pub fn kind(self) -> ErrorKind {
        match self {
            Self::PulseArea => ErrorKind::PulseArea,
            Self::Detuning => ErrorKind::Detuning,
        }
    }
}

/// A closed scan interval with its grid resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        let i = Self { low, high };
        i.check()?;
        Ok(i)
    }

    pub fn symmetric(half_width: f64) -> Self {
        Self { low: -half_width, high: half_width }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn check(&self) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite()) {
            return Err(Error::InvalidInterval { low: self.low, high: self.high, reason: "bounds must be finite" });
        }
        if self.low >= self.high {
            return Err(Error::InvalidInterval { low: self.low, high: self.high, reason: "lower bound must be below upper bound" });
        }
        Ok(())
    }

    /// `size` equally spaced points including both ends.
    pub fn grid(&self, size: usize) -> Result<Vec<f64>> {
        self.check()?;
        if size < 2 {
            return Err(Error::InvalidInterval { low: self.low, high: self.high, reason: "grid needs at least 2 points" });
        }
        let step = self.width() / (size - 1) as f64;
        Ok((0..size)
            .map(|i| if i == size - 1 { self.high } else { self.low + step * i as f64 })
            .collect())
    }
}

/// Composite trapezoid mean of equally spaced values over their interval.
pub fn trapezoid_mean(values: &[f64]) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    let inner: f64 = values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]);
    inner / (n - 1) as f64
}

/// Fidelity profile along one axis.
pub fn fidelity_profile(seq: &PulseSequence, task: &ControlTask, axis: ErrorAxis, grid: &[f64]) -> Result<Vec<f64>> {
    let model = ErrorModel(vec![axis.kind()]);
    let points: Vec<Vec<f64>> = grid.iter().map(|&e| vec![e]).collect();
    engine::fidelities(seq, task, &model, &points)
}

/// Fidelity at a single error value along an axis.
pub fn fidelity_at(seq: &PulseSequence, task: &ControlTask, axis: ErrorAxis, eps: f64) -> Result<f64> {
    Ok(fidelity_profile(seq, task, axis, &[eps])?[0])
}

/// `F̄(ε₋, ε₊)`: uniform-density average of the fidelity, trapezoid rule on
/// `grid_size` points.
pub fn average_fidelity(
    seq: &PulseSequence,
    task: &ControlTask,
    axis: ErrorAxis,
    interval: Interval,
    grid_size: usize,
) -> Result<f64> {
    let grid = interval.grid(grid_size)?;
    Ok(trapezoid_mean(&fidelity_profile(seq, task, axis, &grid)?))
}

/// `G(ε₋, ε₊) = 1 − F̄(ε₋, ε₊)`.
pub fn generalization_error(
    seq: &PulseSequence,
    task: &ControlTask,
    axis: ErrorAxis,
    interval: Interval,
    grid_size: usize,
) -> Result<f64> {
    Ok(1.0 - average_fidelity(seq, task, axis, interval, grid_size)?)
}

/// Robust width from a sampled infidelity profile. `grid` must be increasing
/// and bracket zero; `at_zero` is the infidelity at `ε = 0`.
///
/// Walks outward from zero while `1 − F ≤ ξ`; each edge is placed by linear
/// interpolation of the infidelity between the last passing and the first
/// failing point, or at the scan boundary.
pub fn robust_width_from_profile(grid: &[f64], infidelity: &[f64], at_zero: f64, xi: f64) -> f64 {
    if at_zero > xi {
        return 0.0;
    }
    let crossing = |(e0, g0): (f64, f64), (e1, g1): (f64, f64)| {
        if g1 == g0 {
            e0
        } else {
            e0 + (e1 - e0) * ((xi - g0) / (g1 - g0)).clamp(0.0, 1.0)
        }
    };
    let split = grid.partition_point(|&e| e < 0.0);

    let mut last = (0.0, at_zero);
    let mut right = 0.0;
    let mut open = true;
    for i in split..grid.len() {
        let p = (grid[i], infidelity[i]);
        if p.1 > xi {
            right = crossing(last, p);
            open = false;
            break;
        }
        last = p;
    }
    if open {
        right = last.0;
    }

    let mut last = (0.0, at_zero);
    let mut left = 0.0;
    let mut open = true;
    for i in (0..split).rev() {
        let p = (grid[i], infidelity[i]);
        if p.1 > xi {
            left = crossing(last, p);
            open = false;
            break;
        }
        last = p;
    }
    if open {
        left = last.0;
    }
    right - left
}

/// `W(ξ)`: length of the contiguous interval around `ε = 0` inside `scan`
/// on which `1 − F(ε) ≤ ξ`.
pub fn robust_width(
    seq: &PulseSequence,
    task: &ControlTask,
    axis: ErrorAxis,
    xi: f64,
    scan: Interval,
    grid_size: usize,
) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::InvalidConfig(format!("robust-width threshold must be positive, got {xi}")));
    }
    check_brackets_zero(scan)?;
    let grid = scan.grid(grid_size)?;
    let fid = fidelity_profile(seq, task, axis, &grid)?;
    let infid: Vec<f64> = fid.iter().map(|f| 1.0 - f).collect();
    let at_zero = 1.0 - fidelity_at(seq, task, axis, 0.0)?;
    Ok(robust_width_from_profile(&grid, &infid, at_zero, xi))
}

fn check_brackets_zero(scan: Interval) -> Result<()> {
    scan.check()?;
    if scan.low > 0.0 || scan.high < 0.0 {
        return Err(Error::InvalidInterval { low: scan.low, high: scan.high, reason: "scan must contain zero error" });
    }
    Ok(())
}

/// `F̄_tot = (1/M) Σ_m F̄_m`.
pub fn total_average_fidelity(averages: &[f64]) -> Result<f64> {
    if averages.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    Ok(averages.iter().sum::<f64>() / averages.len() as f64)
}

/// Testing-stage scan settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    #[serde(default)]
    pub axis: ErrorAxis,
    pub interval: Interval,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_xi")]
    pub xi: f64,
}

fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

fn default_xi() -> f64 {
    1e-4
}

impl ScanSpec {
    pub fn new(interval: Interval) -> Self {
        Self { axis: ErrorAxis::PulseArea, interval, grid_size: DEFAULT_GRID_SIZE, xi: default_xi() }
    }
}

/// Result of a one-dimensional testing-stage scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub axis: ErrorAxis,
    pub interval: Interval,
    pub grid: Vec<f64>,
    pub fidelities: Vec<f64>,
    pub average_fidelity: f64,
    pub generalization_error: f64,
    /// `None` when the scan does not contain zero error.
    pub robust_width: Option<f64>,
    pub xi: f64,
    pub quadrature: String,
}

impl RobustnessReport {
    pub fn compute(seq: &PulseSequence, task: &ControlTask, spec: &ScanSpec) -> Result<Self> {
        let grid = spec.interval.grid(spec.grid_size)?;
        let fidelities = fidelity_profile(seq, task, spec.axis, &grid)?;
        let average_fidelity = trapezoid_mean(&fidelities);
        let robust_width = if check_brackets_zero(spec.interval).is_ok() && spec.xi > 0.0 {
            let infid: Vec<f64> = fidelities.iter().map(|f| 1.0 - f).collect();
            let at_zero = 1.0 - fidelity_at(seq, task, spec.axis, 0.0)?;
            Some(robust_width_from_profile(&grid, &infid, at_zero, spec.xi))
        } else {
            None
        };
        Ok(Self {
            axis: spec.axis,
            interval: spec.interval,
            grid,
            fidelities,
            average_fidelity,
            generalization_error: 1.0 - average_fidelity,
            robust_width,
            xi: spec.xi,
            quadrature: QUADRATURE.to_string(),
        })
    }
}

/// Fidelity on a tensor grid of pulse-area × detuning errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile2d {
    pub area_grid: Vec<f64>,
    pub detuning_grid: Vec<f64>,
    /// Row-major: `fidelities[i * detuning_grid.len() + j]` at `(area_grid[i], detuning_grid[j])`.
    pub fidelities: Vec<f64>,
    pub average_fidelity: f64,
    pub generalization_error: f64,
}

impl Profile2d {
    pub fn compute(
        seq: &PulseSequence,
        task: &ControlTask,
        area: Interval,
        detuning: Interval,
        grid_size: usize,
    ) -> Result<Self> {
        let area_grid = area.grid(grid_size)?;
        let detuning_grid = detuning.grid(grid_size)?;
        let points: Vec<Vec<f64>> = area_grid
            .iter()
            .flat_map(|&a| detuning_grid.iter().map(move |&d| vec![a, d]))
            .collect();
        let fidelities = engine::fidelities(seq, task, &ErrorModel::area_and_detuning(), &points)?;
        let rows: Vec<f64> = fidelities.chunks(grid_size).map(trapezoid_mean).collect();
        let average_fidelity = trapezoid_mean(&rows);
        Ok(Self { area_grid, detuning_grid, fidelities, average_fidelity, generalization_error: 1.0 - average_fidelity })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.fidelities[i * self.detuning_grid.len() + j]
    }
}

/// Basis ket `|index⟩` in dimension `dim`.
pub fn basis(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[index] = C64::new(1.0, 0.0);
    v
}

/// Entry-wise distance to a target after removing the best global phase,
/// `max_ij |e^{-iα} U_ij − (U_T)_ij|` with `α = arg tr(U_T† U)`.
pub fn tomography_error(u: &UnitaryMatrix, target: &UnitaryMatrix) -> Result<f64> {
    if u.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), found: u.dim() });
    }
    let overlap = (target.0.adjoint() * &u.0).trace();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
    let aligned: DMatrix<C64> = &u.0 * phase.conj();
    Ok((aligned - &target.0).iter().map(|z| z.norm()).fold(0.0, f64::max))
}
