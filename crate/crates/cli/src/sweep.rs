//! Parameter grids. Each `--grid` argument contributes one axis; several keys
//! joined by `:` vary together, e.g. `eta1:eta2=2:0.25,4:0.5`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use lmaa::batch::{map_jobs, Execution};

use crate::run::{execute, write_trace_file};
use crate::settings::{ConfigError, ConfigResult, RunSpec, Settings, GRID_KEYS};

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub keys: Vec<String>,
    pub points: Vec<Vec<String>>,
}

pub fn parse_axis(text: &str) -> ConfigResult<Axis> {
    let (lhs, rhs) = text
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("grid `{text}`: expected key=v1,v2,...")))?;
    let keys: Vec<String> = lhs.split(':').map(|k| k.trim().replace('-', "_")).collect();
    for k in &keys {
        if !GRID_KEYS.contains(&k.as_str()) {
            return Err(ConfigError(format!(
                "cannot sweep `{k}`, expected one of: {}",
                GRID_KEYS.join(", ")
            )));
        }
    }
    let mut points = Vec::new();
    for point in rhs.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let values: Vec<String> = point.split(':').map(|v| v.trim().to_string()).collect();
        if values.len() != keys.len() {
            return Err(ConfigError(format!(
                "grid point `{point}` has {} values for {} keys",
                values.len(),
                keys.len()
            )));
        }
        points.push(values);
    }
    if points.is_empty() {
        return Err(ConfigError(format!("grid `{text}` has no values")));
    }
    Ok(Axis { keys, points })
}

/// Cartesian product of the axes; no axes gives the single empty assignment.
pub fn expand(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.points.len());
        for base in &out {
            for point in &axis.points {
                let mut assignment = base.clone();
                assignment.extend(axis.keys.iter().cloned().zip(point.iter().cloned()));
                next.push(assignment);
            }
        }
        out = next;
    }
    out
}

pub struct SweepRow {
    pub index: usize,
    pub assignment: Vec<(String, String)>,
    pub outcome: Result<RowResult, String>,
}

pub struct RowResult {
    pub status: String,
    pub iterations: usize,
    /// First iteration with `||f|| <= eps_f`, if any.
    pub iterations_to_tol: Option<usize>,
    pub f_norm_final: f64,
    pub accepted_steps: usize,
    pub evaluations: usize,
}

pub fn run_sweep(
    base: &Settings,
    axes: &[Axis],
    out_dir: &Path,
    wall_time: bool,
    execution: Execution,
) -> anyhow::Result<Vec<SweepRow>> {
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    // Fail early on a broken base configuration rather than once per point.
    RunSpec::resolve(base)?;
    let jobs: Vec<(usize, Vec<(String, String)>)> = expand(axes).into_iter().enumerate().collect();
    let rows = map_jobs(&jobs, execution, |(index, assignment)| {
        let outcome = (|| -> anyhow::Result<RowResult> {
            let mut settings = base.clone();
            for (k, v) in assignment {
                settings.set(k, v.clone())?;
            }
            let spec = RunSpec::resolve(&settings)?;
            let out = execute(&spec)?;
            write_trace_file(
                &out_dir.join(format!("run_{index:03}.csv")),
                &out,
                wall_time,
            )?;
            let r = &out.result;
            Ok(RowResult {
                status: r.status.to_string(),
                iterations: r.iterations(),
                iterations_to_tol: r
                    .trace
                    .iter()
                    .find(|t| t.f_norm <= spec.config.eps_f)
                    .map(|t| t.k),
                f_norm_final: r.f_norm_final,
                accepted_steps: r.accepted_steps,
                evaluations: r.evaluations,
            })
        })();
        SweepRow {
            index: *index,
            assignment: assignment.clone(),
            outcome: outcome.map_err(|e| format!("{e:#}")),
        }
    });
    Ok(rows)
}

pub fn summary_csv(axes: &[Axis], rows: &[SweepRow]) -> String {
    let keys: Vec<&str> = axes
        .iter()
        .flat_map(|a| a.keys.iter().map(String::as_str))
        .collect();
    let mut out = String::from("run");
    for k in &keys {
        let _ = write!(out, ",{k}");
    }
    out.push_str(
        ",status,iterations,iterations_to_tol,f_norm_final,accepted_steps,evaluations,error\n",
    );
    for row in rows {
        let _ = write!(out, "run_{:03}", row.index);
        for (_, v) in &row.assignment {
            let _ = write!(out, ",{v}");
        }
        match &row.outcome {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    ",{},{},{},{:e},{},{},",
                    r.status,
                    r.iterations,
                    r.iterations_to_tol
                        .map(|k| k.to_string())
                        .unwrap_or_default(),
                    r.f_norm_final,
                    r.accepted_steps,
                    r.evaluations
                );
            }
            Err(e) => {
                let _ = writeln!(out, ",failed,,,,,,\"{}\"", e.replace('"', "'"));
            }
        }
    }
    out
}
