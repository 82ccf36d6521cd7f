use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use compulse::dynamics::PulseSequence;
use compulse::metrics::{sample_average_fidelity, Profile2d, RobustnessReport, ScanSpec};
use compulse::optimizer::{
    detuning_train, escape_train, initial_sequence, mgrape_train, restart_train, ParameterFamily, RoundSummary,
    RunSummary, TrainResult,
};
use compulse::rng;
use compulse::tasks::{state_based_gate, BuiltTask, TaskKind, TaskSpec};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Scan2d, Strategy};
use crate::CliError;

/// Learned parameters, reloadable by `compulse test`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub config_hash: String,
    pub seed: u64,
    pub task: TaskSpec,
    pub family: ParameterFamily,
    pub parameters: Vec<f64>,
    /// Trained sequence, scored against the task.
    pub sequence: PulseSequence,
    /// Sequence after the post-training phase shift (state-based gates).
    pub final_sequence: PulseSequence,
    pub post_shift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub runs: usize,
    pub accepted: usize,
    pub fraction: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub best_group: usize,
    pub final_cost: f64,
    pub iterations: usize,
    pub average_fidelity: f64,
    pub generalization_error: f64,
    pub robust_width: Option<f64>,
    pub xi: f64,
    pub quadrature: String,
    pub acceptance: Acceptance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fresh_sample_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average_fidelity_2d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shifted_gate_fidelity: Option<f64>,
    #[serde(default)]
    pub runs: Vec<RunSummary>,
    #[serde(default)]
    pub rounds: Vec<RoundSummary>,
}

/// Summary of a standalone `compulse test`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub config_hash: String,
    pub seed: u64,
    pub scan: ScanSpec,
    pub average_fidelity: f64,
    pub generalization_error: f64,
    pub robust_width: Option<f64>,
    pub xi: f64,
    pub quadrature: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average_fidelity_2d: Option<f64>,
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn provenance(hash: &str, seed: u64) -> String {
    format!("# config_hash={hash} seed={seed}")
}

fn write_csv<F>(path: &Path, comment: &str, header: &[&str], rows: F) -> Result<(), CliError>
where
    F: FnOnce(&mut csv::Writer<BufWriter<File>>) -> csv::Result<()>,
{
    let mut file = BufWriter::new(File::create(path).map_err(runtime)?);
    writeln!(file, "{comment}").map_err(runtime)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(runtime)?;
    rows(&mut w).map_err(runtime)?;
    w.flush().map_err(runtime)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    fs::write(path, text).map_err(runtime)
}

pub fn write_profile(path: &Path, comment: &str, report: &RobustnessReport) -> Result<(), CliError> {
    write_csv(path, comment, &["epsilon", "fidelity"], |w| {
        for (e, f) in report.grid.iter().zip(&report.fidelities) {
            w.write_record([e.to_string(), f.to_string()])?;
        }
        Ok(())
    })
}

pub fn write_profile_2d(path: &Path, comment: &str, p: &Profile2d) -> Result<(), CliError> {
    write_csv(path, comment, &["eps_a", "eps_delta", "fidelity"], |w| {
        for (i, a) in p.area_grid.iter().enumerate() {
            for (j, d) in p.detuning_grid.iter().enumerate() {
                w.write_record([a.to_string(), d.to_string(), p.at(i, j).to_string()])?;
            }
        }
        Ok(())
    })
}

fn write_trace(path: &Path, comment: &str, r: &TrainResult) -> Result<(), CliError> {
    write_csv(path, comment, &["iteration", "cost", "kick"], |w| {
        for (i, c) in r.cost_trace.iter().enumerate() {
            let kick = u8::from(r.kicks.contains(&i));
            w.write_record([i.to_string(), c.to_string(), kick.to_string()])?;
        }
        Ok(())
    })
}

fn scan_2d(seq: &PulseSequence, built: &BuiltTask, s: &Scan2d) -> Result<Profile2d, CliError> {
    Profile2d::compute(seq, &built.task, s.area, s.detuning, s.grid_size).map_err(runtime)
}

struct Trained {
    best: TrainResult,
    runs: Vec<RunSummary>,
    rounds: Vec<RoundSummary>,
    acceptance: Acceptance,
}

fn train_groups(cfg: &RunConfig, built: &BuiltTask) -> Result<Trained, CliError> {
    let opt = &cfg.optimizer;
    let samples = |g: usize| built.samples(&cfg.task.sampling, cfg.samples, cfg.seed, g);
    let acceptance = |runs: usize, accepted: usize| Acceptance {
        runs,
        accepted,
        fraction: accepted as f64 / runs as f64,
        threshold: opt.acceptance_threshold,
    };
    match cfg.strategy {
        Strategy::Plain => {
            let s = samples(0).map_err(runtime)?;
            let start = initial_sequence(&built.template, cfg.family, opt, 0);
            let mut r = match cfg.family {
                ParameterFamily::Phases => mgrape_train(&start, &s, &built.task, opt),
                ParameterFamily::Detunings => detuning_train(&start, &s, &built.task, opt, 0),
            }
            .map_err(runtime)?;
            r.test(&built.task, opt).map_err(runtime)?;
            let accepted = usize::from(r.accepted);
            Ok(Trained { runs: vec![RunSummary::from(&r)], best: r, rounds: Vec::new(), acceptance: acceptance(1, accepted) })
        }
        Strategy::Restart { runs } => {
            let out = restart_train(runs, cfg.family, samples, &built.template, &built.task, opt).map_err(runtime)?;
            Ok(Trained { best: out.best, runs: out.runs, rounds: Vec::new(), acceptance: acceptance(runs, out.accepted) })
        }
        Strategy::Escape => {
            let starts: Vec<_> =
                (0..opt.groups).map(|g| initial_sequence(&built.template, cfg.family, opt, g)).collect();
            let sets = (0..opt.groups).map(samples).collect::<Result<Vec<_>, _>>().map_err(runtime)?;
            let out = escape_train(&starts, &sets, &built.task, opt).map_err(runtime)?;
            let runs: Vec<RunSummary> = out.survivors.iter().map(RunSummary::from).collect();
            let accepted = runs.iter().filter(|r| r.accepted).count();
            let n = runs.len();
            Ok(Trained { best: out.best().clone(), runs, rounds: out.rounds, acceptance: acceptance(n, accepted) })
        }
    }
}

/// `compulse train`: trains, tests and writes all artifacts to `out`.
pub fn train(cfg: &RunConfig, out: &Path) -> Result<Summary, CliError> {
    let built = cfg.task.build().map_err(|e| CliError::Validation(format!("task: {e}")))?;
    fs::create_dir_all(out).map_err(runtime)?;
    let hash = cfg.hash();
    let comment = provenance(&hash, cfg.seed);

    let trained = train_groups(cfg, &built)?;
    let best = &trained.best;
    let report = best.report.clone().expect("trained results are tested");
    let final_sequence = built.finalize(&best.sequence);

    let params = ParamsFile {
        config_hash: hash.clone(),
        seed: cfg.seed,
        task: cfg.task.clone(),
        family: cfg.family,
        parameters: best.parameters.clone(),
        sequence: best.sequence.clone(),
        final_sequence: final_sequence.clone(),
        post_shift: built.post_shift,
    };
    write_json(&out.join("params.json"), &params)?;
    write_trace(&out.join("trace.csv"), &comment, best)?;
    write_profile(&out.join("profile.csv"), &comment, &report)?;

    let average_fidelity_2d = match &cfg.scan_2d {
        Some(s) => {
            let p = scan_2d(&best.sequence, &built, s)?;
            write_profile_2d(&out.join("profile_2d.csv"), &comment, &p)?;
            Some(p.average_fidelity)
        }
        None => None,
    };
    let fresh_sample_fidelity = match cfg.fresh_test_samples {
        Some(k) => {
            let fresh = compulse::sampling::draw_stream(&cfg.task.sampling, k, &built.model, cfg.seed, rng::REINIT - 1)
                .map_err(runtime)?;
            Some(sample_average_fidelity(&best.sequence, &fresh, &built.task).map_err(runtime)?)
        }
        None => None,
    };
    let shifted_gate_fidelity = match cfg.task.objective {
        TaskKind::GateStateBased { shift, .. } => Some(state_based_gate(&best.sequence, shift).map_err(runtime)?.1),
        _ => None,
    };

    let summary = Summary {
        config_hash: hash.clone(),
        seed: cfg.seed,
        config: cfg.canonical(),
        best_group: best.group,
        final_cost: best.final_cost,
        iterations: best.iterations,
        average_fidelity: report.average_fidelity,
        generalization_error: report.generalization_error,
        robust_width: report.robust_width,
        xi: report.xi,
        quadrature: report.quadrature.clone(),
        acceptance: trained.acceptance,
        fresh_sample_fidelity,
        average_fidelity_2d,
        shifted_gate_fidelity,
        runs: trained.runs,
        rounds: trained.rounds,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Scan settings accepted by `compulse test --config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub test: ScanSpec,
    #[serde(default)]
    pub scan_2d: Option<Scan2d>,
}

pub fn load_params(path: &Path) -> Result<ParamsFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// `compulse test`: re-scores a params file.
pub fn test(params: &ParamsFile, scan: &TestConfig, out: &Path) -> Result<TestSummary, CliError> {
    let built = params.task.build().map_err(|e| CliError::Validation(format!("task: {e}")))?;
    if params.sequence.len() != built.template.len() || params.sequence.system_dim() != built.template.system_dim() {
        return Err(CliError::Validation(format!(
            "params hold {} pulses of dimension {}, task expects {} of dimension {}",
            params.sequence.len(),
            params.sequence.system_dim(),
            built.template.len(),
            built.template.system_dim()
        )));
    }
    fs::create_dir_all(out).map_err(runtime)?;
    let comment = provenance(&params.config_hash, params.seed);
    let report = RobustnessReport::compute(&params.sequence, &built.task, &scan.test).map_err(runtime)?;
    write_profile(&out.join("profile.csv"), &comment, &report)?;
    let average_fidelity_2d = match &scan.scan_2d {
        Some(s) => {
            let p = scan_2d(&params.sequence, &built, s)?;
            write_profile_2d(&out.join("profile_2d.csv"), &comment, &p)?;
            Some(p.average_fidelity)
        }
        None => None,
    };
    let summary = TestSummary {
        config_hash: params.config_hash.clone(),
        seed: params.seed,
        scan: scan.test,
        average_fidelity: report.average_fidelity,
        generalization_error: report.generalization_error,
        robust_width: report.robust_width,
        xi: report.xi,
        quadrature: report.quadrature,
        average_fidelity_2d,
    };
    write_json(&out.join("test_summary.json"), &summary)?;
    Ok(summary)
}

pub fn default_out(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(&cfg.hash()[..12]))
}
