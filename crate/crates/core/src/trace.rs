//! CSV trace files.
//!
//! A trace starts with `# key = value` comment lines describing the run,
//! followed by the header `iter,f_norm,rho,mu,lambda,accepted,wall_ns` and one
//! row per iteration. Fields that do not apply to a row are left empty.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::globalization::IterationRecord;

pub const HEADER: &str = "iter,f_norm,rho,mu,lambda,accepted,wall_ns";

/// Writes a trace. With `wall_time` off the `wall_ns` column is left empty,
/// which makes the output a pure function of the run inputs.
pub fn write_trace<W: Write>(
    mut out: W,
    meta: &[(String, String)],
    records: &[IterationRecord],
    wall_time: bool,
) -> std::io::Result<()> {
    for (key, value) in meta {
        writeln!(out, "# {key} = {value}")?;
    }
    writeln!(out, "{HEADER}")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in records {
        let wall = if wall_time {
            r.wall_ns.to_string()
        } else {
            String::new()
        };
        writeln!(
            out,
            "{},{:e},{},{},{},{},{}",
            r.k,
            r.f_norm,
            opt(r.rho),
            opt(r.mu),
            opt(r.lambda),
            u8::from(r.accepted),
            wall
        )?;
    }
    Ok(())
}

/// A parsed trace file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub meta: Vec<(String, String)>,
    pub records: Vec<IterationRecord>,
}

impl Trace {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Trace> {
    let mut trace = Trace::default();
    let mut seen_header = false;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let parse_err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                trace
                    .meta
                    .push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if !seen_header {
            if trimmed != HEADER {
                return Err(parse_err(format!("expected header `{HEADER}`")));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 7 {
            return Err(parse_err(format!(
                "expected 7 fields, found {}",
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<Option<f64>> {
            let s = fields[i].trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| parse_err(format!("column {}: {e}", i + 1)))
        };
        let k = fields[0]
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(format!("iter: {e}")))?;
        let f_norm = num(1)?.ok_or_else(|| parse_err("f_norm is empty".into()))?;
        let accepted = match fields[5].trim() {
            "1" => true,
            "0" | "" => false,
            other => {
                return Err(parse_err(format!(
                    "accepted must be 0 or 1, found `{other}`"
                )))
            }
        };
        let wall = fields[6].trim();
        let wall_ns = if wall.is_empty() {
            0
        } else {
            wall.parse::<u64>()
                .map_err(|e| parse_err(format!("wall_ns: {e}")))?
        };
        trace.records.push(IterationRecord {
            k,
            f_norm,
            rho: num(2)?,
            mu: num(3)?,
            lambda: num(4)?,
            accepted,
            wall_ns,
        });
    }
    if !seen_header {
        return Err(Error::Parse {
            line: 0,
            message: "missing header".into(),
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_record() -> impl Strategy<Value = IterationRecord> {
        (
            0usize..10_000,
            0.0f64..1e6,
            proptest::option::of(-1e3f64..1e3),
            proptest::option::of(1e-12f64..1e12),
            proptest::option::of(0.0f64..1e6),
            any::<bool>(),
            any::<u64>(),
        )
            .prop_map(
                |(k, f_norm, rho, mu, lambda, accepted, wall_ns)| IterationRecord {
                    k,
                    f_norm,
                    rho,
                    mu,
                    lambda,
                    accepted,
                    wall_ns,
                },
            )
    }

    proptest! {
        #[test]
        fn write_then_read_is_identity(records in proptest::collection::vec(arb_record(), 0..20)) {
            let meta = vec![("solver".to_string(), "lm-aa".to_string())];
            let mut buf = Vec::new();
            write_trace(&mut buf, &meta, &records, true).unwrap();
            let parsed = read_trace(buf.as_slice()).unwrap();
            prop_assert_eq!(parsed.meta, meta);
            prop_assert_eq!(parsed.records, records);
        }
    }

    #[test]
    fn malformed_row_names_line() {
        let text = format!("# a = b\n{HEADER}\n0,1e0,,,,0,\n1,abc,,,,0,\n");
        match read_trace(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_header_is_rejected() {
        assert!(matches!(
            read_trace("0,1,,,,0,\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_trace("".as_bytes()),
            Err(Error::Parse { .. })
        ));
    }
}
