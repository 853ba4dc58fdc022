//! Flat `key = value` run configuration. Keys are namespaced with a dot
//! (`model.gamma`, `profile.l`, `solver.n_cells`, ...); `#` starts a
//! comment. Unknown keys are rejected so typos fail loudly.

use crate::model::Parameters;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("key `{key}`: cannot parse `{value}` as {kind}")]
    BadValue { key: String, value: String, kind: &'static str },
    #[error("key `{key}` given more than once")]
    Duplicate { key: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A value that is either fixed by the user or chosen automatically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AutoOr<S> {
    Auto,
    Fixed(S),
}

impl<S: Copy> AutoOr<S> {
    pub fn resolve(&self, auto: impl FnOnce() -> S) -> S {
        match self {
            AutoOr::Auto => auto(),
            AutoOr::Fixed(v) => *v,
        }
    }
}

/// One complete run description: model constants, initial-data profile,
/// solver knobs, and the optional cross-solver check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig<S> {
    // model
    pub a: S,
    pub gamma: S,
    pub lambda: S,
    pub mu0: S,
    // profile
    pub l: AutoOr<S>,
    pub r_support: AutoOr<S>,
    pub mollifier_width: S,
    pub rho0_amplitude: S,
    pub delta_a: S,
    // solver
    pub n_cells: usize,
    pub cfl: S,
    pub max_dt: Option<S>,
    pub t_end: S,
    pub output_interval: S,
    pub sigma_est: AutoOr<S>,
    pub pin_velocity: bool,
    pub grad_threshold_factor: S,
    pub domain_margin: S,
    // cross-solver oracle
    pub oracle_n: usize,
    pub oracle_t_short: S,
}

impl<S: Real> Default for RunConfig<S> {
    fn default() -> Self {
        RunConfig {
            a: S::one(),
            gamma: S::of(1.4),
            lambda: S::one(),
            mu0: S::one(),
            l: AutoOr::Auto,
            r_support: AutoOr::Auto,
            mollifier_width: S::of(0.125),
            rho0_amplitude: S::zero(),
            delta_a: S::zero(),
            n_cells: 2048,
            cfl: S::of(0.4),
            max_dt: None,
            t_end: S::one(),
            output_interval: S::of(0.05),
            sigma_est: AutoOr::Auto,
            pin_velocity: false,
            grad_threshold_factor: S::of(1e3),
            domain_margin: S::of(1.0),
            oracle_n: 0,
            oracle_t_short: S::of(0.1),
        }
    }
}

fn parse_scalar<S: Real>(key: &str, value: &str) -> Result<S, ConfigError> {
    value
        .parse::<f64>()
        .map(S::of)
        .map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            kind: "number",
        })
}

fn parse_auto<S: Real>(key: &str, value: &str) -> Result<AutoOr<S>, ConfigError> {
    if value == "auto" {
        Ok(AutoOr::Auto)
    } else {
        parse_scalar(key, value).map(AutoOr::Fixed)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            kind: "bool",
        }),
    }
}

impl<S: Real> RunConfig<S> {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut seen: BTreeMap<String, ()> = BTreeMap::new();
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let body = raw.split('#').next().unwrap().trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::Syntax { line, text: body.to_string() });
            };
            let key = key.trim();
            let value = value.trim();
            if seen.insert(key.to_string(), ()).is_some() {
                return Err(ConfigError::Duplicate { key: key.to_string() });
            }
            match key {
                "model.a" => cfg.a = parse_scalar(key, value)?,
                "model.gamma" => cfg.gamma = parse_scalar(key, value)?,
                "model.lambda" => cfg.lambda = parse_scalar(key, value)?,
                "model.mu0" => cfg.mu0 = parse_scalar(key, value)?,
                "profile.l" => cfg.l = parse_auto(key, value)?,
                "profile.r_support" => cfg.r_support = parse_auto(key, value)?,
                "profile.mollifier_width" => cfg.mollifier_width = parse_scalar(key, value)?,
                "profile.rho0_amplitude" => cfg.rho0_amplitude = parse_scalar(key, value)?,
                "profile.delta_a" => cfg.delta_a = parse_scalar(key, value)?,
                "solver.n_cells" => {
                    cfg.n_cells = value.parse().map_err(|_| ConfigError::BadValue {
                        key: key.to_string(),
                        value: value.to_string(),
                        kind: "integer",
                    })?
                }
                "solver.cfl" => cfg.cfl = parse_scalar(key, value)?,
                "solver.max_dt" => cfg.max_dt = Some(parse_scalar(key, value)?),
                "solver.t_end" => cfg.t_end = parse_scalar(key, value)?,
                "solver.output_interval" => cfg.output_interval = parse_scalar(key, value)?,
                "solver.sigma_est" => cfg.sigma_est = parse_auto(key, value)?,
                "solver.pin_velocity" => cfg.pin_velocity = parse_bool(key, value)?,
                "solver.grad_threshold_factor" => {
                    cfg.grad_threshold_factor = parse_scalar(key, value)?
                }
                "solver.domain_margin" => cfg.domain_margin = parse_scalar(key, value)?,
                "oracle.n" => {
                    cfg.oracle_n = value.parse().map_err(|_| ConfigError::BadValue {
                        key: key.to_string(),
                        value: value.to_string(),
                        kind: "integer",
                    })?
                }
                "oracle.t_short" => cfg.oracle_t_short = parse_scalar(key, value)?,
                _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        // constructing Parameters checks the model constants
        let _ = self.parameters()?;
        if self.n_cells == 0 {
            return Err(ConfigError::Invalid("solver.n_cells must be positive".into()));
        }
        if self.cfl <= S::zero() || self.cfl > S::one() {
            return Err(ConfigError::Invalid("solver.cfl must be in (0, 1]".into()));
        }
        if self.t_end <= S::zero() {
            return Err(ConfigError::Invalid("solver.t_end must be positive".into()));
        }
        if self.output_interval <= S::zero() {
            return Err(ConfigError::Invalid(
                "solver.output_interval must be positive".into(),
            ));
        }
        if let AutoOr::Fixed(s) = self.sigma_est {
            if s <= S::zero() {
                return Err(ConfigError::Invalid("solver.sigma_est must be positive".into()));
            }
        }
        if self.oracle_n > 64 {
            return Err(ConfigError::Invalid("oracle.n is capped at 64".into()));
        }
        Ok(())
    }

    pub fn parameters(&self) -> Result<Parameters<S>, crate::model::ModelError> {
        Parameters::new(self.a, self.gamma, self.lambda, self.mu0)
    }
}
