use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{detuning::apply_duration_rule, detuning_train, mgrape_train, ParameterFamily, TrainConfig, TrainResult};
use crate::dynamics::PulseSequence;
use crate::error::{Error, Result};
use crate::metrics::ControlTask;
use crate::rng::{stream_rng, INITIAL};
use crate::sampling::SampleSet;

/// Random starting point for group `group`: phases (or detunings) uniform on
/// the configured range, drawn from the group's own stream.
pub fn initial_sequence(template: &PulseSequence, family: ParameterFamily, cfg: &TrainConfig, group: usize) -> PulseSequence {
    let mut rng = stream_rng(cfg.seed, INITIAL + group as u64);
    let mut seq = template.clone();
    match family {
        ParameterFamily::Phases => {
            let (lo, hi) = cfg.phase_range;
            let phases: Vec<f64> = (0..template.phases().len()).map(|_| rng.gen_range(lo..hi)).collect();
            seq.set_phases(&phases).expect("same layout");
        }
        ParameterFamily::Detunings => {
            let (lo, hi) = cfg.detuning_range;
            if let Some(pulses) = seq.two_level_mut() {
                for p in pulses.iter_mut() {
                    p.detuning = rng.gen_range(lo..hi);
                }
            }
            apply_duration_rule(&mut seq);
        }
    }
    seq
}

/// Compact record of one restart run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub group: usize,
    pub average_fidelity: f64,
    pub generalization_error: f64,
    pub robust_width: Option<f64>,
    pub final_cost: f64,
    pub iterations: usize,
    pub accepted: bool,
    pub parameters: Vec<f64>,
}

impl From<&TrainResult> for RunSummary {
    fn from(r: &TrainResult) -> Self {
        let report = r.report.as_ref();
        Self {
            group: r.group,
            average_fidelity: report.map_or(f64::NAN, |x| x.average_fidelity),
            generalization_error: report.map_or(f64::NAN, |x| x.generalization_error),
            robust_width: report.and_then(|x| x.robust_width),
            final_cost: r.final_cost,
            iterations: r.iterations,
            accepted: r.accepted,
            parameters: r.parameters.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub runs: Vec<RunSummary>,
    /// Run with the highest tested average fidelity (lowest index on ties).
    pub best: TrainResult,
    pub accepted: usize,
    pub acceptance_fraction: f64,
}

/// Independent trainings from fresh initializations; each is tested and
/// accepted only above the configured average-fidelity threshold.
///
/// Run `i` uses the initialization stream `i` and the sample set returned by
/// `samples_factory(i)`, so the first `n` runs of a larger campaign with the
/// same seed are identical to an `n`-run campaign.
pub fn restart_train<F>(
    count: usize,
    family: ParameterFamily,
    samples_factory: F,
    template: &PulseSequence,
    task: &ControlTask,
    cfg: &TrainConfig,
) -> Result<RestartOutcome>
where
    F: Fn(usize) -> Result<SampleSet> + Sync,
{
    cfg.validate()?;
    if count == 0 {
        return Err(Error::InvalidConfig("restart count must be at least 1".into()));
    }
    let results: Vec<TrainResult> = (0..count)
        .into_par_iter()
        .map(|i| {
            let samples = samples_factory(i)?;
            let start = initial_sequence(template, family, cfg, i);
            let mut r = match family {
                ParameterFamily::Phases => mgrape_train(&start, &samples, task, cfg)?,
                ParameterFamily::Detunings => detuning_train(&start, &samples, task, cfg, i)?,
            };
            r.group = i;
            r.test(task, cfg)?;
            Ok(r)
        })
        .collect::<Result<_>>()?;

    let accepted = results.iter().filter(|r| r.accepted).count();
    let runs = results.iter().map(RunSummary::from).collect();
    let best = results
        .into_iter()
        .reduce(|a, b| if b.average_fidelity() > a.average_fidelity() { b } else { a })
        .expect("count >= 1");
    Ok(RestartOutcome { runs, best, accepted, acceptance_fraction: accepted as f64 / count as f64 })
}
