use std::cmp::Ordering;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::run::Summary;
use crate::CliError;

/// Upper edges of the `F̄` histogram bins; the last bin is open.
pub const BIN_EDGES: [f64; 4] = [0.99, 0.999, 0.9999, 0.99999];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub source: String,
    pub group: usize,
    pub pulses: usize,
    pub sampling: String,
    pub boundary: f64,
    pub average_fidelity: f64,
    pub generalization_error: f64,
    pub robust_width: Option<f64>,
    pub accepted: bool,
    pub bin: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub histogram: Vec<usize>,
    pub missing: Vec<PathBuf>,
}

pub fn bin_of(f: f64) -> usize {
    BIN_EDGES.iter().take_while(|&&e| f >= e).count()
}

fn bin_label(i: usize) -> String {
    match i {
        0 => format!("<{}", BIN_EDGES[0]),
        i if i == BIN_EDGES.len() => format!(">={}", BIN_EDGES[i - 1]),
        i => format!("[{},{})", BIN_EDGES[i - 1], BIN_EDGES[i]),
    }
}

fn summary_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("summary.json")
    } else {
        p.to_path_buf()
    }
}

fn rows_of(source: &str, s: &Summary) -> Result<Vec<SweepRow>, String> {
    let task = s.config.get("task").ok_or("summary has no task")?;
    let pulses = task.get("pulses").and_then(|v| v.as_u64()).ok_or("summary has no pulse count")? as usize;
    let sampling: compulse::sampling::DistributionSpec =
        serde_json::from_value(task.get("sampling").cloned().ok_or("summary has no sampling spec")?)
            .map_err(|e| e.to_string())?;
    let boundary = sampling.distribution.upper_bound().unwrap_or(f64::INFINITY);
    let label = sampling.distribution.label();
    Ok(s.runs
        .iter()
        .map(|r| SweepRow {
            source: source.to_string(),
            group: r.group,
            pulses,
            sampling: label.clone(),
            boundary,
            average_fidelity: r.average_fidelity,
            generalization_error: r.generalization_error,
            robust_width: r.robust_width,
            accepted: r.accepted,
            bin: bin_of(r.average_fidelity),
        })
        .collect())
}

/// Collects every run of every matched run directory (or summary file).
pub fn collect(pattern: &str) -> Result<Sweep, CliError> {
    let paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| CliError::Validation(format!("pattern: {e}")))?
        .filter_map(|p| p.ok())
        .collect();
    if paths.is_empty() {
        return Err(CliError::Validation(format!("no paths match `{pattern}`")));
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for p in paths {
        let file = summary_path(&p);
        let parsed = fs::read_to_string(&file)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<Summary>(&t).map_err(|e| e.to_string()))
            .and_then(|s| rows_of(&p.display().to_string(), &s));
        match parsed {
            Ok(r) => rows.extend(r),
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", file.display());
                missing.push(file);
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Runtime("no completed runs among the matched paths".into()));
    }
    rows.sort_by(|a, b| {
        a.pulses
            .cmp(&b.pulses)
            .then(a.boundary.partial_cmp(&b.boundary).unwrap_or(Ordering::Equal))
            .then_with(|| a.source.cmp(&b.source))
            .then(a.group.cmp(&b.group))
    });
    let mut histogram = vec![0; BIN_EDGES.len() + 1];
    for r in &rows {
        histogram[r.bin] += 1;
    }
    Ok(Sweep { rows, histogram, missing })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn write(sweep: &Sweep, out: &Path) -> Result<(), CliError> {
    let rt = |e: &dyn std::fmt::Display| CliError::Runtime(e.to_string());
    fs::create_dir_all(out).map_err(|e| rt(&e))?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv")).map_err(|e| rt(&e))?;
    w.write_record([
        "pulses",
        "sampling",
        "boundary",
        "source",
        "group",
        "average_fidelity",
        "generalization_error",
        "robust_width",
        "accepted",
        "bin",
    ])
    .map_err(|e| rt(&e))?;
    for r in &sweep.rows {
        w.write_record([
            r.pulses.to_string(),
            r.sampling.clone(),
            r.boundary.to_string(),
            r.source.clone(),
            r.group.to_string(),
            r.average_fidelity.to_string(),
            r.generalization_error.to_string(),
            opt(r.robust_width),
            r.accepted.to_string(),
            r.bin.to_string(),
        ])
        .map_err(|e| rt(&e))?;
    }
    w.flush().map_err(|e| rt(&e))?;

    let mut h = BufWriter::new(File::create(out.join("histogram.csv")).map_err(|e| rt(&e))?);
    writeln!(h, "bin,range,count").map_err(|e| rt(&e))?;
    for (i, c) in sweep.histogram.iter().enumerate() {
        writeln!(h, "{i},\"{}\",{c}", bin_label(i)).map_err(|e| rt(&e))?;
    }
    h.flush().map_err(|e| rt(&e))
}
