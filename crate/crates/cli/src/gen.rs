//! Seeded instance generators.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use lmaa::problems::io::{write_matrix_csv, write_pgm, write_svmlight};
use lmaa::problems::logistic::synthetic_dataset;
use lmaa::problems::nnls::random_instance;
use lmaa::problems::Image;
use nalgebra::{DMatrix, DVector};

use crate::settings::{ProblemKind, RunSpec};

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes the instance `spec` would generate. NNLS needs `rhs_out` for `t`.
pub fn generate(spec: &RunSpec, out: &Path, rhs_out: Option<&Path>) -> anyhow::Result<()> {
    let csv = out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    match spec.problem {
        ProblemKind::Logistic => {
            let (a, b) =
                synthetic_dataset(spec.value("samples")?, spec.value("features")?, spec.seed);
            let mut w = create(out)?;
            if csv {
                let labeled = DMatrix::from_fn(a.nrows(), a.ncols() + 1, |r, c| {
                    if c == 0 {
                        b[r]
                    } else {
                        a[(r, c - 1)]
                    }
                });
                write_matrix_csv(&mut w, &labeled)?;
            } else {
                write_svmlight(&mut w, &a, &b)?;
            }
            w.flush()?;
        }
        ProblemKind::Tv => {
            let size: usize = spec.value("size")?;
            let image = Image::phantom(size).with_noise(spec.value("noise")?, spec.seed);
            let m = DMatrix::from_row_slice(size, size, &image.pixels);
            let mut w = create(out)?;
            if csv {
                write_matrix_csv(&mut w, &m)?;
            } else {
                write_pgm(&mut w, &m)?;
            }
            w.flush()?;
        }
        ProblemKind::Nnls => {
            let Some(rhs_out) = rhs_out else {
                bail!("NNLS generation needs --rhs-out for the right-hand side");
            };
            let (h, t): (DMatrix<f64>, DVector<f64>) = random_instance(
                spec.value("rows")?,
                spec.value("cols")?,
                spec.value("density")?,
                spec.value("shift")?,
                spec.seed,
            );
            let mut w = create(out)?;
            write_matrix_csv(&mut w, &h)?;
            w.flush()?;
            let mut w = create(rhs_out)?;
            write_matrix_csv(
                &mut w,
                &DMatrix::from_column_slice(t.len(), 1, t.as_slice()),
            )?;
            w.flush()?;
        }
        ProblemKind::Fixture(_) => bail!("fixtures are built in and have nothing to generate"),
    }
    Ok(())
}
