//! Supervised training of composite pulses.
//!
//! A composite pulse is a sequence of constant drives whose phases (or
//! detunings) are tuned so that the total evolution is insensitive to
//! systematic errors. This crate samples such errors, simulates the
//! sequence for every sample, and trains the parameters by gradient descent.
//!
//! ```
//! use compulse::prelude::*;
//! use std::f64::consts::{FRAC_PI_2, PI};
//!
//! let task = build_population_inversion(1, FRAC_PI_2);
//! let report = RobustnessReport::compute(&task.template, &task.task, &ScanSpec::new(Interval::symmetric(0.1)))?;
//! let exact = 0.5 + (0.1 * PI).sin() / (0.2 * PI);
//! assert!((report.average_fidelity - exact).abs() < 1e-6);
//! # Ok::<(), compulse::Error>(())
//! ```

pub mod dynamics;
mod engine;
pub mod error;
pub mod metrics;
pub mod optimizer;
pub mod rng;
pub mod sampling;
mod spectral;
pub mod tasks;

pub use engine::{detuned_duration, parameter_count, Wrt};
pub use error::{Error, Result};

pub mod prelude {
    pub use crate::dynamics::{
        resonant_propagator, sequence_propagator, ErrorModel, ErrorSample, LadderPulse, Pulse, PulseSequence, UnitaryMatrix,
    };
    pub use crate::error::{Error, Result};
    pub use crate::metrics::{
        average_fidelity, basis, gate_fidelity, state_fidelity, ControlTask, ErrorAxis, Interval, RobustnessReport, ScanSpec,
    };
    pub use crate::optimizer::{escape_train, mgrape_train, restart_train, ParameterFamily, TrainConfig, TrainResult};
    pub use crate::sampling::{draw, DistributionSpec, SampleSet};
    pub use crate::tasks::*;
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/strategies.md")]
    mod strategies {}
    #[doc = include_str!("../../../book/src/applications.md")]
    mod applications {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
