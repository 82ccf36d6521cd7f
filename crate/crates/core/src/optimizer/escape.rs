use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mgrape_train, TrainConfig, TrainResult};
use crate::dynamics::{wrap_phase, PulseSequence};
use crate::error::{Error, Result};
use crate::metrics::{total_average_fidelity, ControlTask};
use crate::rng::{stream_rng, KICKS};
use crate::sampling::SampleSet;

/// State of the population after one round of kicks and culling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    /// Groups alive at the start of the round and their tested `F̄` after its kicks.
    pub groups: Vec<usize>,
    pub average_fidelities: Vec<f64>,
    pub accepted_kicks: Vec<usize>,
    pub total_average_fidelity: f64,
    pub best_average_fidelity: f64,
    /// Groups still alive after culling.
    pub survivors: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeOutcome {
    /// Surviving groups, in group order.
    pub survivors: Vec<TrainResult>,
    pub rounds: Vec<RoundSummary>,
    pub converged: bool,
}

impl EscapeOutcome {
    /// Survivor with the highest tested `F̄` (lowest group on ties).
    pub fn best(&self) -> &TrainResult {
        self.survivors
            .iter()
            .reduce(|a, b| if b.average_fidelity() > a.average_fidelity() { b } else { a })
            .expect("at least one survivor")
    }
}

fn tested_fidelity(r: &TrainResult) -> f64 {
    r.average_fidelity().unwrap_or(f64::NEG_INFINITY)
}

fn train_tested(start: &PulseSequence, samples: &SampleSet, task: &ControlTask, cfg: &TrainConfig) -> Result<TrainResult> {
    let mut r = mgrape_train(start, samples, task, cfg)?;
    r.test(task, cfg)?;
    Ok(r)
}

struct Group<R> {
    index: usize,
    result: TrainResult,
    rng: R,
}

impl<R: Rng> Group<R> {
    /// `updates` kicks, each kept only if it raises the tested `F̄`.
    fn kick(&mut self, updates: usize, samples: &SampleSet, task: &ControlTask, cfg: &TrainConfig) -> Result<usize> {
        let mut accepted = 0;
        for _ in 0..updates {
            let kicked: Vec<f64> = self
                .result
                .parameters
                .iter()
                .map(|&t| wrap_phase(t + self.rng.gen_range(-cfg.kick_scale..=cfg.kick_scale)))
                .collect();
            let start = self.result.sequence.with_phases(&kicked)?;
            let candidate = train_tested(&start, samples, task, cfg)?;
            if tested_fidelity(&candidate) > tested_fidelity(&self.result) {
                let prev = std::mem::replace(&mut self.result, candidate);
                let cur = &mut self.result;
                let offset = prev.cost_trace.len();
                let mut trace = prev.cost_trace;
                trace.extend_from_slice(&cur.cost_trace);
                let mut kicks = prev.kicks;
                kicks.push(offset);
                kicks.extend(cur.kicks.iter().map(|k| k + offset));
                cur.cost_trace = trace;
                cur.kicks = kicks;
                cur.iterations += prev.iterations;
                accepted += 1;
            }
        }
        self.result.group = self.index;
        Ok(accepted)
    }
}

/// Escape-based training of phase sequences.
///
/// Every group is trained once, then for up to `cfg.escape_rounds` rounds each
/// surviving group receives `cfg.updates_per_round` random phase kicks (kept
/// only when the tested `F̄` rises), after which groups below the population
/// mean `F̄_tot` are discarded. Stops once `max F̄_m − F̄_tot < cfg.stop_gap`.
///
/// `samples` holds either one set shared by all groups or one set per group.
pub fn escape_train(groups: &[PulseSequence], samples: &[SampleSet], task: &ControlTask, cfg: &TrainConfig) -> Result<EscapeOutcome> {
    cfg.validate()?;
    if groups.len() < 2 {
        return Err(Error::InvalidConfig("escape training needs at least 2 groups".into()));
    }
    if samples.len() != 1 && samples.len() != groups.len() {
        return Err(Error::InvalidConfig(format!(
            "expected 1 or {} sample sets, found {}",
            groups.len(),
            samples.len()
        )));
    }
    let samples_for = |m: usize| &samples[if samples.len() == 1 { 0 } else { m }];

    let mut alive: Vec<Group<_>> = groups
        .par_iter()
        .enumerate()
        .map(|(m, seq)| {
            let mut result = train_tested(seq, samples_for(m), task, cfg)?;
            result.group = m;
            Ok(Group { index: m, result, rng: stream_rng(cfg.seed, KICKS + m as u64) })
        })
        .collect::<Result<_>>()?;

    let mut rounds = Vec::new();
    let mut converged = false;
    for round in 0..cfg.escape_rounds {
        let accepted_kicks: Vec<usize> = alive
            .par_iter_mut()
            .map(|g| {
                let s = samples_for(g.index);
                g.kick(cfg.updates_per_round, s, task, cfg)
            })
            .collect::<Result<_>>()?;

        let fids: Vec<f64> = alive.iter().map(|g| tested_fidelity(&g.result)).collect();
        let total = total_average_fidelity(&fids)?;
        let best = fids.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let indices: Vec<usize> = alive.iter().map(|g| g.index).collect();
        alive.retain(|g| tested_fidelity(&g.result) >= total);
        rounds.push(RoundSummary {
            round,
            groups: indices,
            average_fidelities: fids,
            accepted_kicks,
            total_average_fidelity: total,
            best_average_fidelity: best,
            survivors: alive.iter().map(|g| g.index).collect(),
        });
        if alive.is_empty() {
            return Err(Error::AllGroupsDiscarded { round });
        }
        if best - total < cfg.stop_gap {
            converged = true;
            break;
        }
    }
    Ok(EscapeOutcome { survivors: alive.into_iter().map(|g| g.result).collect(), rounds, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ErrorModel;
    use crate::metrics::basis;
    use crate::optimizer::initial_sequence;
    use crate::optimizer::ParameterFamily;
    use crate::sampling::{draw, DistributionSpec};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn rounds_respect_acceptance_and_culling() {
        let task = ControlTask::state_prep(basis(2, 0), basis(2, 1)).unwrap();
        let samples = draw(&DistributionSpec::uniform(0.0, 0.3), 60, &ErrorModel::pulse_area(), 2).unwrap();
        let cfg = TrainConfig {
            learning_rate_x: 0.05,
            learning_rate_y: 0.05,
            max_iterations: 200,
            groups: 4,
            escape_rounds: 3,
            updates_per_round: 2,
            ..TrainConfig::default()
        };
        let template = PulseSequence::resonant(&[0.0; 3], FRAC_PI_2);
        let starts: Vec<_> = (0..cfg.groups).map(|m| initial_sequence(&template, ParameterFamily::Phases, &cfg, m)).collect();
        let out = escape_train(&starts, std::slice::from_ref(&samples), &task, &cfg).unwrap();
        assert!(!out.rounds.is_empty());
        for w in out.rounds.windows(2) {
            assert!(w[1].groups.len() <= w[0].groups.len());
            assert_eq!(w[1].groups, w[0].survivors);
        }
        for r in &out.survivors {
            let mut last = 0;
            for &k in r.kicks.iter().chain(std::iter::once(&r.cost_trace.len())) {
                assert!(r.cost_trace[last..k].windows(2).all(|w| w[1] <= w[0] + 1e-15));
                last = k;
            }
            assert!(r.average_fidelity().unwrap() >= out.rounds.last().unwrap().total_average_fidelity);
        }
    }

    #[test]
    fn single_group_is_rejected() {
        let task = ControlTask::state_prep(basis(2, 0), basis(2, 1)).unwrap();
        let samples = SampleSet::from_points(ErrorModel::pulse_area(), vec![vec![0.0]]).unwrap();
        let seq = PulseSequence::resonant(&[0.0], FRAC_PI_2);
        assert!(escape_train(&[seq], &[samples], &task, &TrainConfig::default()).is_err());
    }
}
