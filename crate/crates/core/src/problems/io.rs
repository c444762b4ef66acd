//! Plain-text readers and writers for problem data.

use std::io::{BufRead, Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("not a number: '{}'", token.trim())))
}

fn content_lines<R: BufRead>(input: R) -> impl Iterator<Item = Result<(usize, String)>> {
    input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from))
        .filter(|r| match r {
            Ok((_, l)) => {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            }
            Err(_) => true,
        })
}

/// Reads `label index:value ...` lines with 1-based feature indices.
pub fn read_svmlight<R: BufRead>(input: R) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut width = 0;
    for item in content_lines(input) {
        let (line, text) = item?;
        let mut tokens = text.split_whitespace();
        let label = parse_f64(tokens.next().unwrap_or_default(), line)?;
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(line, format!("expected index:value, got '{tok}'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(line, format!("bad feature index '{idx}'")))?;
            if idx == 0 {
                return Err(parse_err(line, "feature indices start at 1"));
            }
            width = width.max(idx);
            row.push((idx - 1, parse_f64(val, line)?));
        }
        labels.push(label);
        rows.push(row);
    }
    let mut a = DMatrix::zeros(rows.len(), width);
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            a[(r, c)] = v;
        }
    }
    Ok((a, DVector::from_vec(labels)))
}

pub fn write_svmlight<W: Write>(mut out: W, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<()> {
    for (r, label) in b.iter().enumerate() {
        write!(out, "{label}")?;
        for c in 0..a.ncols() {
            let v = a[(r, c)];
            if v != 0.0 {
                write!(out, " {}:{v:e}", c + 1)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a comma-separated matrix of floats, one row per line.
pub fn read_matrix_csv<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for item in content_lines(input) {
        let (line, text) = item?;
        let row: Vec<f64> = text
            .split(',')
            .map(|t| parse_f64(t, line))
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    line,
                    format!("expected {w} columns, found {}", row.len()),
                ))
            }
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, width.unwrap_or(0), &data))
}

pub fn write_matrix_csv<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<()> {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Dense CSV whose first column holds the label.
pub fn read_labeled_csv<R: BufRead>(input: R) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = read_matrix_csv(input)?;
    if m.ncols() < 2 {
        return Err(parse_err(1, "need a label column and at least one feature"));
    }
    let b = m.column(0).into_owned();
    let a = m.columns(1, m.ncols() - 1).into_owned();
    Ok((a, b))
}

/// Reads an 8-bit PGM (`P2` or `P5`), scaling values to `[0, 1]` by the header maximum.
pub fn read_pgm<R: Read>(mut input: R) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let mut header = Vec::new();
    while header.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(1, "truncated PGM header"));
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let dims: Vec<usize> = header[1..]
        .iter()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(1, format!("bad PGM header field '{t}'")))
        })
        .collect::<Result<_>>()?;
    let (width, height, maxval) = (dims[0], dims[1], dims[2]);
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(
            1,
            format!("only 8-bit PGM is supported, maxval {maxval}"),
        ));
    }
    let count = width * height;
    let values: Vec<f64> = match header[0].as_str() {
        "P5" => {
            let body = &bytes[(pos + 1).min(bytes.len())..];
            if body.len() < count {
                return Err(parse_err(1, "truncated PGM raster"));
            }
            body[..count].iter().map(|&v| v as f64).collect()
        }
        "P2" => {
            let body = String::from_utf8_lossy(&bytes[pos..]);
            let vals: Vec<f64> = body
                .split_whitespace()
                .take(count)
                .map(|t| parse_f64(t, 1))
                .collect::<Result<_>>()?;
            if vals.len() < count {
                return Err(parse_err(1, "truncated PGM raster"));
            }
            vals
        }
        other => return Err(parse_err(1, format!("unsupported image magic '{other}'"))),
    };
    let scale = 1.0 / maxval as f64;
    Ok(DMatrix::from_row_iterator(
        height,
        width,
        values.into_iter().map(|v| v * scale),
    ))
}

/// Writes a binary PGM, clamping to `[0, 1]`.
pub fn write_pgm<W: Write>(mut out: W, image: &DMatrix<f64>) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", image.ncols(), image.nrows())?;
    let mut raster = Vec::with_capacity(image.len());
    for r in 0..image.nrows() {
        for c in 0..image.ncols() {
            raster.push((image[(r, c)].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out.write_all(&raster)?;
    Ok(())
}
