//! Run settings layered from defaults, a `key = value` file, the environment
//! and command-line flags, in increasing order of precedence.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::ast::Domain;
use crate::checker::{InferConfig, SolverConfig};
use crate::clogic::{EqMode, TNormKind};

/// Environment variable naming the solver command.
pub const SOLVER_ENV: &str = "SMT_SOLVER";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Full,
    /// No training: only templates without learnable parameters.
    StaticOnly,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "full" => Ok(Mode::Full),
            "static_only" | "static" => Ok(Mode::StaticOnly),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::StaticOnly => "static_only",
        })
    }
}

/// Sort of the program variables in solver queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainChoice {
    /// `int` for integer-literal programs without division, `real` otherwise.
    Natural,
    Fixed(Domain),
}

impl FromStr for DomainChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "natural" | "auto" => Ok(DomainChoice::Natural),
            "real" => Ok(DomainChoice::Fixed(Domain::Real)),
            "int" => Ok(DomainChoice::Fixed(Domain::Int)),
            other => Err(format!("unknown domain `{other}`")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Syntax { path: PathBuf, line: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Value { key: String, message: String },
}

/// One layer of optional settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub solver: Option<String>,
    pub tnorm: Option<TNormKind>,
    pub eq: Option<EqMode>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub timeout: Option<Duration>,
    pub query_timeout: Option<Duration>,
    pub jobs: Option<usize>,
    pub domain: Option<DomainChoice>,
    pub log_training: Option<PathBuf>,
}

impl Overrides {
    /// Fields set in `other` win.
    pub fn overlay(mut self, other: Overrides) -> Overrides {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(solver, tnorm, eq, mode, seed, timeout, query_timeout, jobs, domain, log_training);
        self
    }

    pub fn from_env() -> Overrides {
        Overrides::from_env_with(|k| std::env::var(k).ok())
    }

    pub fn from_env_with(get: impl Fn(&str) -> Option<String>) -> Overrides {
        Overrides { solver: get(SOLVER_ENV).filter(|s| !s.trim().is_empty()), ..Overrides::default() }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::Value { key: key.to_string(), message };
        let secs = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|s| s.is_finite() && *s > 0.0)
                .map(Duration::from_secs_f64)
                .ok_or_else(|| bad(format!("expected a positive number of seconds, got `{v}`")))
        };
        match key {
            "solver" => self.solver = Some(value.to_string()),
            "tnorm" => self.tnorm = Some(value.parse().map_err(bad)?),
            "eq" => self.eq = Some(value.parse().map_err(bad)?),
            "mode" => self.mode = Some(value.parse().map_err(bad)?),
            "seed" => self.seed = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
            "timeout" => self.timeout = Some(secs(value)?),
            "query_timeout" => self.query_timeout = Some(secs(value)?),
            "jobs" => match value.parse::<usize>() {
                Ok(n) if n > 0 => self.jobs = Some(n),
                _ => return Err(bad(format!("expected a positive integer, got `{value}`"))),
            },
            "domain" => self.domain = Some(value.parse().map_err(bad)?),
            "log_training" => self.log_training = Some(PathBuf::from(value)),
            _ => return Err(bad("unknown key".into())),
        }
        Ok(())
    }

    /// Parses `key = value` lines. `#` starts a comment; values may be quoted.
    pub fn parse_file_contents(text: &str, path: &Path) -> Result<Overrides, ConfigError> {
        let mut out = Overrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { path: path.into(), line: i + 1, message: "expected `key = value`".into() });
            };
            let v = v.trim();
            let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
            out.set(&k.trim().replace('-', "_"), v)?;
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Overrides, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Overrides::parse_file_contents(&text, path)
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub solver: String,
    pub tnorm: TNormKind,
    pub eq: EqMode,
    pub mode: Mode,
    pub seed: u64,
    /// Wall-clock budget per problem.
    pub timeout: Duration,
    pub query_timeout: Duration,
    pub jobs: usize,
    pub domain: DomainChoice,
    /// Directory for training-loss CSVs.
    pub log_training: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            solver: "z3".into(),
            tnorm: TNormKind::Product,
            eq: EqMode::Gaussian,
            mode: Mode::Full,
            seed: 0,
            timeout: Duration::from_secs(3600),
            query_timeout: Duration::from_secs(30),
            jobs: 1,
            domain: DomainChoice::Natural,
            log_training: None,
        }
    }
}

impl Settings {
    /// `layers` are applied in order, later ones winning.
    pub fn resolve(layers: impl IntoIterator<Item = Overrides>) -> Settings {
        let o = layers.into_iter().fold(Overrides::default(), Overrides::overlay);
        let d = Settings::default();
        Settings {
            solver: o.solver.unwrap_or(d.solver),
            tnorm: o.tnorm.unwrap_or(d.tnorm),
            eq: o.eq.unwrap_or(d.eq),
            mode: o.mode.unwrap_or(d.mode),
            seed: o.seed.unwrap_or(d.seed),
            timeout: o.timeout.unwrap_or(d.timeout),
            query_timeout: o.query_timeout.unwrap_or(d.query_timeout),
            jobs: o.jobs.unwrap_or(d.jobs),
            domain: o.domain.unwrap_or(d.domain),
            log_training: o.log_training.or(d.log_training),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { command: self.solver.clone(), timeout: self.query_timeout }
    }

    pub fn infer_config(&self) -> InferConfig {
        let mut cfg = InferConfig::default();
        cfg.sample.rng_seed = self.seed;
        cfg.train.seed = self.seed;
        cfg.train.tnorm = self.tnorm;
        cfg.train.eq_mode = self.eq;
        cfg.train.log_training = self.log_training.is_some();
        cfg.plan.static_only = self.mode == Mode::StaticOnly;
        cfg.solver = self.solver_config();
        cfg.budget = self.timeout;
        cfg.domain = match self.domain {
            DomainChoice::Natural => None,
            DomainChoice::Fixed(d) => Some(d),
        };
        cfg
    }
}
