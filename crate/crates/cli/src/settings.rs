//! Flat `key = value` settings and their resolution into a [`RunSpec`].
//!
//! Precedence is flags over config file over defaults. The resolved map is
//! echoed verbatim into trace headers.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lmaa::{LambdaExponent, SolverConfig, Variant};

/// Configuration problems; reported with exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub type ConfigResult<T> = Result<T, ConfigError>;

const SOLVER_KEYS: &[&str] = &[
    "problem",
    "solver",
    "m",
    "p1",
    "p2",
    "eta1",
    "eta2",
    "gamma",
    "c",
    "mu0",
    "lambda_exp",
    "eps_f",
    "max_iter",
    "seed",
];

const LOGISTIC_KEYS: &[&str] = &["input", "samples", "features", "tau_ratio"];
const TV_KEYS: &[&str] = &["input", "size", "beta", "nu", "noise"];
const NNLS_KEYS: &[&str] = &["input", "rhs", "rows", "cols", "density", "shift", "beta"];

/// Keys that may be swept.
pub const GRID_KEYS: &[&str] = &["c", "p1", "p2", "eta1", "eta2", "mu0", "m", "lambda_exp"];

pub fn known_key(key: &str) -> bool {
    [SOLVER_KEYS, LOGISTIC_KEYS, TV_KEYS, NNLS_KEYS]
        .iter()
        .any(|keys| keys.contains(&key))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> ConfigResult<Self> {
        let mut settings = Self::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("config line {}: expected `key = value`", idx + 1))
            })?;
            settings
                .set(key.trim(), value.trim())
                .map_err(|e| ConfigError(format!("config line {}: {e}", idx + 1)))?;
        }
        Ok(settings)
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        Ok(Self::parse(&text)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> ConfigResult<()> {
        let key = key.replace('-', "_");
        if !known_key(&key) {
            return Err(ConfigError(format!("unknown setting `{key}`")));
        }
        self.values.insert(key, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Entries of `other` take precedence.
    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    Logistic,
    Tv,
    Nnls,
    Fixture(String),
}

impl FromStr for ProblemKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> ConfigResult<Self> {
        match s {
            "logistic" => Ok(ProblemKind::Logistic),
            "tv" => Ok(ProblemKind::Tv),
            "nnls" => Ok(ProblemKind::Nnls),
            _ => match s.strip_prefix("fixture:") {
                Some(name) if !name.is_empty() => Ok(ProblemKind::Fixture(name.to_string())),
                _ => Err(ConfigError(format!(
                    "unknown problem `{s}`, expected logistic, tv, nnls or fixture:<name>"
                ))),
            },
        }
    }
}

impl ProblemKind {
    fn keys(&self) -> &'static [&'static str] {
        match self {
            ProblemKind::Logistic => LOGISTIC_KEYS,
            ProblemKind::Tv => TV_KEYS,
            ProblemKind::Nnls => NNLS_KEYS,
            ProblemKind::Fixture(_) => &[],
        }
    }

    /// Keys that only shape a generated instance and conflict with `input`.
    fn generator_only(&self, key: &str) -> bool {
        matches!(
            (self, key),
            (ProblemKind::Logistic, "samples" | "features")
                | (ProblemKind::Tv, "size")
                | (ProblemKind::Nnls, "rows" | "cols" | "density" | "shift")
        )
    }

    fn default_for(&self, key: &str, has_input: bool) -> Option<&'static str> {
        if has_input && self.generator_only(key) {
            return None;
        }
        Some(match (self, key) {
            // A loaded image is taken as already noisy.
            (ProblemKind::Tv, "noise") if has_input => "0",
            (ProblemKind::Logistic, "samples") => "500",
            (ProblemKind::Logistic, "features") => "20",
            (ProblemKind::Logistic, "tau_ratio") => "10000",
            (ProblemKind::Tv, "size") => "64",
            (ProblemKind::Tv, "beta") => "100",
            (ProblemKind::Tv, "nu") => "4",
            (ProblemKind::Tv, "noise") => "0.05",
            (ProblemKind::Nnls, "rows") => "60",
            (ProblemKind::Nnls, "cols") => "30",
            (ProblemKind::Nnls, "density") => "0.01",
            (ProblemKind::Nnls, "shift") => "1",
            (ProblemKind::Nnls, "beta") => "1",
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    Plain,
    Aa,
    LmAa,
    FixedLambda(f64),
}

impl FromStr for SolverKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> ConfigResult<Self> {
        match s {
            "plain" => Ok(SolverKind::Plain),
            "aa" => Ok(SolverKind::Aa),
            "lm-aa" => Ok(SolverKind::LmAa),
            _ => {
                let bad = || {
                    ConfigError(format!(
                        "unknown solver `{s}`, expected plain, aa, lm-aa or fixed-lambda:<value>"
                    ))
                };
                let v = s.strip_prefix("fixed-lambda:").ok_or_else(bad)?;
                let v: f64 = v.parse().map_err(|_| bad())?;
                Ok(SolverKind::FixedLambda(v))
            }
        }
    }
}

/// A fully resolved run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub problem: ProblemKind,
    pub solver: SolverKind,
    pub config: SolverConfig,
    pub seed: u64,
    /// Every setting that applies to this run, defaults filled in.
    pub resolved: Settings,
}

fn parse_value<T: FromStr>(settings: &Settings, key: &str) -> ConfigResult<T> {
    let raw = settings
        .get(key)
        .ok_or_else(|| ConfigError(format!("missing setting `{key}`")))?;
    raw.parse()
        .map_err(|_| ConfigError(format!("invalid value `{raw}` for `{key}`")))
}

impl RunSpec {
    pub fn resolve(given: &Settings) -> ConfigResult<Self> {
        let problem: ProblemKind = given
            .get("problem")
            .ok_or_else(|| ConfigError("no problem given (use --problem)".into()))?
            .parse()?;
        for (key, _) in given.iter() {
            if !SOLVER_KEYS.contains(&key) && !problem.keys().contains(&key) {
                return Err(ConfigError(format!(
                    "setting `{key}` does not apply to this problem"
                )));
            }
        }
        let has_input = given.get("input").is_some();
        if has_input {
            if let Some((key, _)) = given.iter().find(|(k, _)| problem.generator_only(k)) {
                return Err(ConfigError(format!(
                    "setting `{key}` only applies to generated instances, not --input"
                )));
            }
        }

        let d = SolverConfig::default();
        let mut resolved = Settings::new();
        let defaults = [
            ("solver", "lm-aa".to_string()),
            ("m", d.m.to_string()),
            ("p1", d.p1.to_string()),
            ("p2", d.p2.to_string()),
            ("eta1", d.eta1.to_string()),
            ("eta2", d.eta2.to_string()),
            ("gamma", d.gamma.to_string()),
            ("c", "auto".to_string()),
            ("mu0", d.mu0.to_string()),
            ("lambda_exp", d.lambda_exponent.power().to_string()),
            ("eps_f", d.eps_f.to_string()),
            ("max_iter", d.max_iter.to_string()),
            ("seed", "0".to_string()),
        ];
        for (k, v) in defaults {
            resolved.set(k, v)?;
        }
        for key in problem.keys() {
            if let Some(v) = problem.default_for(key, has_input) {
                resolved.set(key, v)?;
            }
        }
        resolved.overlay(given);

        let solver: SolverKind = parse_value(&resolved, "solver")?;
        let lambda_power: u32 = parse_value(&resolved, "lambda_exp")?;
        let lambda_exponent = LambdaExponent::from_power(lambda_power)
            .ok_or_else(|| ConfigError(format!("lambda_exp must be 2 or 4, got {lambda_power}")))?;
        let c = match resolved.get("c") {
            Some("auto") | None => None,
            Some(_) => Some(parse_value(&resolved, "c")?),
        };
        let config = SolverConfig {
            m: parse_value(&resolved, "m")?,
            p1: parse_value(&resolved, "p1")?,
            p2: parse_value(&resolved, "p2")?,
            eta1: parse_value(&resolved, "eta1")?,
            eta2: parse_value(&resolved, "eta2")?,
            gamma: parse_value(&resolved, "gamma")?,
            c,
            mu0: parse_value(&resolved, "mu0")?,
            lambda_exponent,
            eps_f: parse_value(&resolved, "eps_f")?,
            max_iter: parse_value(&resolved, "max_iter")?,
            variant: match solver {
                SolverKind::Aa => Variant::Classic,
                SolverKind::FixedLambda(v) => Variant::FixedLambda(v),
                SolverKind::Plain | SolverKind::LmAa => Variant::LmAa,
            },
        };
        config.validate().map_err(|e| ConfigError(e.to_string()))?;
        let seed = parse_value(&resolved, "seed")?;
        Ok(Self {
            problem,
            solver,
            config,
            seed,
            resolved,
        })
    }

    pub fn value<T: FromStr>(&self, key: &str) -> ConfigResult<T> {
        parse_value(&self.resolved, key)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.resolved.get(key).map(PathBuf::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn given(pairs: &[(&str, &str)]) -> Settings {
        let mut s = Settings::new();
        for (k, v) in pairs {
            s.set(k, *v).unwrap();
        }
        s
    }

    #[test]
    fn parses_config_text() {
        let s = Settings::parse("# header\nm = 5\n\nmu0=100 # trailing\nlambda-exp = 4\n").unwrap();
        assert_eq!(s.get("m"), Some("5"));
        assert_eq!(s.get("mu0"), Some("100"));
        assert_eq!(s.get("lambda_exp"), Some("4"));
        assert!(Settings::parse("m 5").is_err());
        assert!(Settings::parse("bogus = 1").is_err());
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let mut s = Settings::parse("problem = nnls\nm = 5\nmu0 = 3").unwrap();
        s.overlay(&given(&[("m", "7")]));
        let spec = RunSpec::resolve(&s).unwrap();
        assert_eq!(spec.config.m, 7);
        assert_eq!(spec.config.mu0, 3.0);
        assert_eq!(spec.config.p1, 0.01);
        assert_eq!(spec.resolved.get("density"), Some("0.01"));
        assert_eq!(spec.resolved.get("beta"), Some("1"));
    }

    #[test]
    fn solver_names() {
        assert_eq!("plain".parse::<SolverKind>().unwrap(), SolverKind::Plain);
        assert_eq!(
            "fixed-lambda:0.5".parse::<SolverKind>().unwrap(),
            SolverKind::FixedLambda(0.5)
        );
        assert!("fixed-lambda:x".parse::<SolverKind>().is_err());
        assert!("newton".parse::<SolverKind>().is_err());
        let spec = RunSpec::resolve(&given(&[("problem", "tv"), ("solver", "aa")])).unwrap();
        assert_eq!(spec.config.variant, Variant::Classic);
    }

    #[test]
    fn invalid_gamma_is_a_config_error() {
        let s = given(&[("problem", "fixture:affine"), ("m", "3"), ("gamma", "0.25")]);
        assert!(RunSpec::resolve(&s).is_err());
    }

    #[test]
    fn unrelated_keys_are_rejected() {
        let s = given(&[("problem", "tv"), ("density", "0.1")]);
        assert!(RunSpec::resolve(&s).is_err());
        assert!(RunSpec::resolve(&Settings::new()).is_err());
        assert!("fixture:".parse::<ProblemKind>().is_err());
    }

    #[test]
    fn input_drops_generator_defaults() {
        let spec = RunSpec::resolve(&given(&[("problem", "tv"), ("input", "img.pgm")])).unwrap();
        assert_eq!(spec.resolved.get("size"), None);
        assert_eq!(spec.resolved.get("noise"), Some("0"));
        let spec = RunSpec::resolve(&given(&[("problem", "tv")])).unwrap();
        assert_eq!(spec.resolved.get("size"), Some("64"));
        let err = RunSpec::resolve(&given(&[
            ("problem", "logistic"),
            ("input", "d.svm"),
            ("samples", "9"),
        ]));
        assert!(err.unwrap_err().0.contains("samples"));
    }
}
