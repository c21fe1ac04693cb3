//! Solver settings: defaults, then a `key=value` file, then `COHSIM_TOL`,
//! then command-line flags.

use std::path::Path;

use cohsim::sdp::SolverConfig;

use crate::CliError;

pub const TOL_ENV: &str = "COHSIM_TOL";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub tol_gap: Option<f64>,
    pub tol_feas: Option<f64>,
    pub max_iterations: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(t) = self.tol {
            cfg.tol_gap = t;
            cfg.tol_feas = t;
        }
        if let Some(t) = self.tol_gap {
            cfg.tol_gap = t;
        }
        if let Some(t) = self.tol_feas {
            cfg.tol_feas = t;
        }
        if let Some(n) = self.max_iterations {
            cfg.max_iterations = n;
        }
    }
}

fn value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Parse(format!("config key `{key}`: bad value `{v}`")))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Overrides, CliError> {
    let mut o = Overrides::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Parse(format!("config line {}: expected key=value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "tol" => o.tol = Some(value(k, v)?),
            "tol_gap" => o.tol_gap = Some(value(k, v)?),
            "tol_feas" => o.tol_feas = Some(value(k, v)?),
            "max_iterations" => o.max_iterations = Some(value(k, v)?),
            _ => {
                return Err(CliError::Parse(format!(
                    "config line {}: unknown key `{k}`",
                    n + 1
                )))
            }
        }
    }
    Ok(o)
}

pub fn resolve(
    config: Option<&Path>,
    env_tol: Option<&str>,
    flags: &Overrides,
) -> Result<SolverConfig, CliError> {
    let mut cfg = SolverConfig::default();
    if let Some(path) = config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
        parse_config(&text)?.apply(&mut cfg);
    }
    if let Some(t) = env_tol {
        cfg.tol_gap = value(TOL_ENV, t.trim())?;
        cfg.tol_feas = cfg.tol_gap;
    }
    flags.apply(&mut cfg);
    cfg.validate().map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(cfg)
}
