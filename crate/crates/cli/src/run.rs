use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use lmaa::problems::io::write_matrix_csv;
use lmaa::trace::write_trace;
use lmaa::{run_lm_aa, run_plain, RunResult};

use crate::problem::{build, Built};
use crate::settings::{RunSpec, SolverKind};

pub struct RunOutput {
    pub result: RunResult,
    pub header: Vec<(String, String)>,
    pub built: Built,
}

pub fn execute(spec: &RunSpec) -> anyhow::Result<RunOutput> {
    let built = build(spec)?;
    let map = &*built.map;
    let result = match spec.solver {
        SolverKind::Plain => run_plain(map, &built.x0, spec.config.eps_f, spec.config.max_iter)?,
        _ => run_lm_aa(map, &built.x0, &spec.config)?,
    };

    let mut header: Vec<(String, String)> = spec
        .resolved
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    header.extend(built.meta.iter().cloned());
    if spec.solver != SolverKind::Plain {
        header.push(("c_resolved".into(), spec.config.resolve_c(map).to_string()));
    }
    header.extend([
        ("status".to_string(), result.status.to_string()),
        ("iterations".to_string(), result.iterations().to_string()),
        ("evaluations".to_string(), result.evaluations.to_string()),
        (
            "accepted_steps".to_string(),
            result.accepted_steps.to_string(),
        ),
        (
            "f_norm_final".to_string(),
            format!("{:e}", result.f_norm_final),
        ),
    ]);
    Ok(RunOutput {
        result,
        header,
        built,
    })
}

pub fn write_trace_file(path: &Path, out: &RunOutput, wall_time: bool) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_trace(&mut w, &out.header, &out.result.trace, wall_time)?;
    w.flush()?;
    Ok(())
}

pub fn write_solution(path: &Path, out: &RunOutput) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_matrix_csv(&mut w, &(out.built.solution)(&out.result.x_final))?;
    w.flush()?;
    Ok(())
}

pub fn summary(result: &RunResult) -> String {
    format!(
        "status: {}\nfinal residual: {:e}\niterations: {}\nevaluations of g: {}\naccepted steps: {}",
        result.status,
        result.f_norm_final,
        result.iterations(),
        result.evaluations,
        result.accepted_steps
    )
}
