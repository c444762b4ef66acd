//! Built-in fixed-point maps.

pub mod fixtures;
pub mod io;
pub mod logistic;
pub mod nnls;
pub mod tv;

pub use fixtures::{fixture_by_name, fixtures, Fixture, FixtureClass, FixtureMap};
pub use logistic::{logistic_map, LogisticMap, LogisticProblem};
pub use nnls::{nnls_map, NnlsMap, NnlsProblem};
pub use tv::{tv_map, Image, TvMap, TvProblem};
