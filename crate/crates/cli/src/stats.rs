use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use lmaa::stats::{success_stats, SuccessStats, TOLERANCE_LADDER};
use lmaa::trace::read_trace;

pub struct TraceStats {
    pub label: String,
    pub m: Option<String>,
    pub stats: SuccessStats,
}

pub fn load(path: &Path) -> anyhow::Result<TraceStats> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let trace =
        read_trace(BufReader::new(file)).with_context(|| format!("in {}", path.display()))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(TraceStats {
        label,
        m: match trace.meta("solver") {
            Some("plain") => None,
            _ => trace.meta("m").map(str::to_string),
        },
        stats: success_stats(&trace.records, &TOLERANCE_LADDER),
    })
}

pub fn load_all(paths: &[PathBuf]) -> anyhow::Result<Vec<TraceStats>> {
    paths.iter().map(|p| load(p)).collect()
}

fn rate(l: &lmaa::stats::LevelStats) -> String {
    l.s_rate()
        .map_or("-".to_string(), |r| format!("{:.1}%", 100.0 * r))
}

/// Long format: one row per trace and tolerance.
pub fn to_csv(rows: &[TraceStats]) -> String {
    let mut out = String::from("trace,m,tol,s_rate,iter,accepted,reached\n");
    for row in rows {
        for l in &row.stats.levels {
            let _ = writeln!(
                out,
                "{},{},{:e},{},{},{},{}",
                row.label,
                row.m.as_deref().unwrap_or(""),
                l.tol,
                l.s_rate().map(|r| r.to_string()).unwrap_or_default(),
                l.iter,
                l.accepted,
                u8::from(l.reached)
            );
        }
    }
    out
}

/// One row per trace with an `s-rate`/`iter` pair per tolerance.
pub fn to_table(rows: &[TraceStats]) -> String {
    let mut header = vec!["trace".to_string(), "m".to_string()];
    for tol in TOLERANCE_LADDER {
        header.push(format!("s-rate@{tol:e}"));
        header.push(format!("iter@{tol:e}"));
    }
    let mut cells = vec![header];
    let mut any_unreached = false;
    for row in rows {
        let mut line = vec![
            row.label.clone(),
            row.m.clone().unwrap_or_else(|| "-".into()),
        ];
        for l in &row.stats.levels {
            let mark = if l.reached { "" } else { "*" };
            any_unreached |= !l.reached;
            line.push(format!("{}{mark}", rate(l)));
            line.push(format!("{}{mark}", l.iter));
        }
        cells.push(line);
    }
    let widths: Vec<usize> = (0..cells[0].len())
        .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &cells {
        let padded: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    }
    if any_unreached {
        out.push_str("* tolerance not reached; counts cover the whole run\n");
    }
    out
}
