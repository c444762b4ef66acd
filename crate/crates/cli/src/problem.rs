//! Builds the fixed-point map described by a [`RunSpec`].

use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use lmaa::problems::fixtures::{fixture_by_name, random_start};
use lmaa::problems::io::{read_labeled_csv, read_matrix_csv, read_pgm, read_svmlight};
use lmaa::problems::logistic::{normalize_columns, synthetic_dataset};
use lmaa::problems::nnls::random_instance;
use lmaa::problems::{
    logistic_map, nnls_map, tv_map, Image, LogisticProblem, NnlsProblem, TvProblem,
};
use lmaa::FixedPointMap;
use nalgebra::{DMatrix, DVector};

use crate::settings::{ConfigError, ProblemKind, RunSpec};

type Solution = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

pub struct Built {
    pub map: Arc<dyn FixedPointMap>,
    pub x0: DVector<f64>,
    /// Derived constants reported in the trace header.
    pub meta: Vec<(String, String)>,
    /// Maps the final iterate to the quantity of interest: the weights, the
    /// denoised image, or the nonnegative least-squares solution.
    pub solution: Solution,
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

pub fn load_dataset(path: &Path) -> anyhow::Result<(DMatrix<f64>, DVector<f64>)> {
    let data = if has_extension(path, "csv") {
        read_labeled_csv(open(path)?)
    } else {
        read_svmlight(open(path)?)
    };
    data.with_context(|| format!("reading {}", path.display()))
}

pub fn load_image(path: &Path) -> anyhow::Result<DMatrix<f64>> {
    let img = if has_extension(path, "pgm") {
        read_pgm(open(path)?)
    } else {
        read_matrix_csv(open(path)?)
    };
    img.with_context(|| format!("reading {}", path.display()))
}

pub fn load_matrix(path: &Path) -> anyhow::Result<DMatrix<f64>> {
    read_matrix_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn meta(key: &str, value: impl ToString) -> (String, String) {
    (key.to_string(), value.to_string())
}

pub fn build(spec: &RunSpec) -> anyhow::Result<Built> {
    match &spec.problem {
        ProblemKind::Logistic => {
            let (mut a, b) = match spec.path("input") {
                Some(p) => load_dataset(&p)?,
                None => {
                    synthetic_dataset(spec.value("samples")?, spec.value("features")?, spec.seed)
                }
            };
            normalize_columns(&mut a);
            let problem = LogisticProblem::with_tau_ratio(a, b, spec.value("tau_ratio")?)?;
            let meta = vec![
                meta("samples", problem.samples()),
                meta("features", problem.features()),
                meta("tau", format!("{:e}", problem.tau())),
                meta(
                    "lipschitz",
                    format!("{:e} (power iteration, rel. tol 1e-6)", problem.lipschitz()),
                ),
                meta("kappa", problem.kappa()),
            ];
            let map = Arc::new(logistic_map(problem));
            Ok(Built {
                x0: DVector::zeros(map.dim()),
                map,
                meta,
                solution: Box::new(|x| DMatrix::from_column_slice(x.len(), 1, x.as_slice())),
            })
        }
        ProblemKind::Tv => {
            let noise: f64 = spec.value("noise")?;
            let clean = match spec.path("input") {
                Some(p) => {
                    let m = load_image(&p)?;
                    if m.nrows() != m.ncols() {
                        return Err(ConfigError(format!(
                            "image must be square, got {}x{}",
                            m.nrows(),
                            m.ncols()
                        ))
                        .into());
                    }
                    Image::new(m.nrows(), m.transpose().as_slice().to_vec())?
                }
                None => Image::phantom(spec.value("size")?),
            };
            let image = if noise > 0.0 {
                clean.with_noise(noise, spec.seed)
            } else {
                clean
            };
            let n = image.size;
            let problem = TvProblem::new(image, spec.value("beta")?, spec.value("nu")?)?;
            let tv = Arc::new(tv_map(&problem));
            let meta = vec![meta("image_size", n), meta("kappa", problem.kappa())];
            let recover = Arc::clone(&tv);
            Ok(Built {
                x0: DVector::zeros(tv.dim()),
                map: tv,
                meta,
                solution: Box::new(move |w| {
                    DMatrix::from_row_slice(n, n, &recover.recover_image(w))
                }),
            })
        }
        ProblemKind::Nnls => {
            let (h, t) = match (spec.path("input"), spec.path("rhs")) {
                (Some(hp), Some(tp)) => {
                    let t = load_matrix(&tp)?;
                    if t.ncols() != 1 {
                        bail!(
                            "{}: right-hand side must have one value per line",
                            tp.display()
                        );
                    }
                    (load_matrix(&hp)?, t.column(0).into_owned())
                }
                (Some(_), None) | (None, Some(_)) => {
                    return Err(ConfigError(
                        "NNLS input needs both --input (H) and --rhs (t)".into(),
                    )
                    .into())
                }
                (None, None) => random_instance(
                    spec.value("rows")?,
                    spec.value("cols")?,
                    spec.value("density")?,
                    spec.value("shift")?,
                    spec.seed,
                ),
            };
            let problem = NnlsProblem::new(h, t, spec.value("beta")?)?;
            let meta = vec![
                meta("rows", problem.h().nrows()),
                meta("cols", problem.columns()),
                meta("sigma0", format!("{:e}", problem.sigma0())),
                meta("sigma1", format!("{:e}", problem.sigma1())),
                meta("kappa", problem.kappa()),
            ];
            let map = Arc::new(nnls_map(problem));
            let primal = Arc::clone(&map);
            Ok(Built {
                x0: DVector::zeros(map.dim()),
                map,
                meta,
                solution: Box::new(move |v| {
                    let x = primal.solution(v);
                    DMatrix::from_column_slice(x.len(), 1, x.as_slice())
                }),
            })
        }
        ProblemKind::Fixture(name) => {
            let fixture =
                fixture_by_name(name, spec.seed).map_err(|e| ConfigError(e.to_string()))?;
            let dim = fixture.map.dim();
            let mut meta = vec![meta("dim", dim)];
            if let Some(k) = fixture.map.kappa_hint() {
                meta.push(("kappa".into(), k.to_string()));
            }
            Ok(Built {
                x0: random_start(dim, spec.seed),
                map: Arc::new(fixture.map),
                meta,
                solution: Box::new(|x| DMatrix::from_column_slice(x.len(), 1, x.as_slice())),
            })
        }
    }
}
