//! Parameter sweeps over simulation queries, written as CSV.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::PathBuf;

use cohsim::mio::{max_success, OpClass, SimulationQuery};
use cohsim::quantum::{rotation_unitary, DensityMatrix, PureState, QuantumChannel};
use cohsim::sdp::SolverConfig;
use rayon::prelude::*;

use crate::spec::{parse_channel, parse_state};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variable {
    /// Rotation angle of the target `U_θ^{⊗l}`.
    Theta,
    /// Resource `√α|0⟩ + √(1-α)|1⟩`.
    Alpha,
    Epsilon,
}

/// One CSV column; unset fields fall back to [`Fixed`].
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub epsilon: Option<f64>,
    pub class: Option<OpClass>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fixed {
    /// Channel spec; unused when sweeping `theta`.
    pub target: Option<String>,
    /// Tensor power of the rotation target.
    pub power: usize,
    /// State spec; unused when sweeping `alpha`.
    pub resource: Option<String>,
    pub epsilon: f64,
    pub class: OpClass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub variable: Variable,
    pub grid: Vec<f64>,
    pub series: Vec<Series>,
    pub fixed: Fixed,
    pub output_path: Option<PathBuf>,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn eps_series(values: &[f64]) -> Vec<Series> {
    values
        .iter()
        .map(|&e| Series {
            label: format!("eps={e}"),
            epsilon: Some(e),
            class: None,
        })
        .collect()
}

fn class_series() -> Vec<Series> {
    [OpClass::Mio, OpClass::Dio]
        .into_iter()
        .map(|c| Series {
            label: class_name(c).into(),
            epsilon: None,
            class: Some(c),
        })
        .collect()
}

pub fn class_name(c: OpClass) -> &'static str {
    match c {
        OpClass::Mio => "mio",
        OpClass::Dio => "dio",
    }
}

/// Built-in grids: `fig2`, `fig3`, `fig4`.
pub fn preset(name: &str) -> Result<SweepSpec, CliError> {
    let spec = match name {
        "fig2" => SweepSpec {
            variable: Variable::Theta,
            grid: linspace(0.0, FRAC_PI_4, 25),
            series: eps_series(&[0.0, 0.05, 0.1, 0.15, 0.2]),
            fixed: Fixed {
                target: None,
                power: 2,
                resource: Some("maxcoh:2".into()),
                epsilon: 0.0,
                class: OpClass::Mio,
            },
            output_path: None,
        },
        "fig3" => SweepSpec {
            variable: Variable::Alpha,
            grid: linspace(0.0, 0.5, 26),
            series: eps_series(&[0.0, 0.02, 0.04, 0.06]),
            fixed: Fixed {
                target: Some("replacement:plus".into()),
                power: 1,
                resource: None,
                epsilon: 0.0,
                class: OpClass::Dio,
            },
            output_path: None,
        },
        "fig4" => SweepSpec {
            variable: Variable::Epsilon,
            grid: linspace(0.0, 1.0, 21),
            series: class_series(),
            fixed: Fixed {
                target: Some("replacement:psi_m:4".into()),
                power: 1,
                resource: Some("maxcoh:2".into()),
                epsilon: 0.0,
                class: OpClass::Mio,
            },
            output_path: None,
        },
        other => {
            return Err(CliError::Parse(format!(
                "unknown preset `{other}` (fig2, fig3, fig4)"
            )))
        }
    };
    Ok(spec)
}

fn rotation(theta: f64, l: usize) -> Result<QuantumChannel, CliError> {
    QuantumChannel::from_unitary(&rotation_unitary(theta))
        .and_then(|u| u.tensor_power(l))
        .map_err(|e| CliError::Parse(e.to_string()))
}

fn alpha_state(alpha: f64) -> Result<DensityMatrix, CliError> {
    PureState::from_real(&[alpha.sqrt(), (1.0 - alpha).sqrt()])
        .map(|p| p.projector())
        .map_err(|e| CliError::Parse(e.to_string()))
}

/// Inputs that do not change along the grid, parsed once.
struct Prepared {
    target: Option<QuantumChannel>,
    resource: Option<DensityMatrix>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid.is_empty() {
            return Err(CliError::Parse("sweep grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Parse(
                "sweep grid must be strictly increasing".into(),
            ));
        }
        let (lo, hi) = match self.variable {
            Variable::Theta => (f64::NEG_INFINITY, f64::INFINITY),
            Variable::Alpha | Variable::Epsilon => (0.0, 1.0),
        };
        if self
            .grid
            .iter()
            .any(|x| !x.is_finite() || *x < lo || *x > hi)
        {
            return Err(CliError::Parse(format!("sweep grid outside [{lo}, {hi}]")));
        }
        if self.series.is_empty() {
            return Err(CliError::Parse("sweep needs at least one series".into()));
        }
        if self.series.iter().any(|s| s.label.contains(',')) {
            return Err(CliError::Parse(
                "series labels cannot contain commas".into(),
            ));
        }
        if self.fixed.power == 0 {
            return Err(CliError::Parse("tensor power must be >= 1".into()));
        }
        Ok(())
    }

    fn prepare(&self) -> Result<Prepared, CliError> {
        let need = |what: &str, v: &Option<String>| {
            v.clone()
                .ok_or_else(|| CliError::Parse(format!("sweep needs a fixed {what}")))
        };
        let target = match self.variable {
            Variable::Theta => None,
            _ => Some(parse_channel(&need("target", &self.fixed.target)?)?),
        };
        let resource = match self.variable {
            Variable::Alpha => None,
            _ => Some(parse_state(&need("resource", &self.fixed.resource)?)?),
        };
        Ok(Prepared { target, resource })
    }

    fn query(&self, prep: &Prepared, x: f64, s: &Series) -> Result<SimulationQuery, CliError> {
        let target = match (&prep.target, self.variable) {
            (_, Variable::Theta) => rotation(x, self.fixed.power)?,
            (Some(t), _) => t.clone(),
            (None, _) => unreachable!("prepared for this variable"),
        };
        let resource = match (&prep.resource, self.variable) {
            (_, Variable::Alpha) => alpha_state(x)?,
            (Some(r), _) => r.clone(),
            (None, _) => unreachable!("prepared for this variable"),
        };
        let eps = if self.variable == Variable::Epsilon {
            x
        } else {
            s.epsilon.unwrap_or(self.fixed.epsilon)
        };
        SimulationQuery::new(target, resource, eps, s.class.unwrap_or(self.fixed.class))
            .map_err(|e| CliError::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub labels: Vec<String>,
    pub rows: Vec<(f64, Vec<Option<f64>>)>,
}

impl SweepTable {
    pub fn failures(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|(_, v)| v)
            .filter(|c| c.is_none())
            .count()
    }

    pub fn column(&self, label: &str) -> Option<Vec<Option<f64>>> {
        let k = self.labels.iter().position(|l| l == label)?;
        Some(self.rows.iter().map(|(_, v)| v[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (x, cells) in &self.rows {
            write!(out, "{x:.6}").unwrap();
            for c in cells {
                match c {
                    Some(v) => write!(out, ",{v:.6}").unwrap(),
                    None => out.push_str(",nan"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Solves every cell; a failed solve becomes an empty cell.
pub fn run_sweep(spec: &SweepSpec, cfg: &SolverConfig) -> Result<SweepTable, CliError> {
    spec.validate()?;
    let prep = spec.prepare()?;
    let ns = spec.series.len();
    let queries = spec
        .grid
        .iter()
        .flat_map(|&x| spec.series.iter().map(move |s| (x, s)))
        .map(|(x, s)| spec.query(&prep, x, s))
        .collect::<Result<Vec<_>, _>>()?;
    let values: Vec<Option<f64>> = queries
        .par_iter()
        .map(|q| max_success(q, cfg).ok().map(|r| r.probability))
        .collect();
    Ok(SweepTable {
        labels: spec.series.iter().map(|s| s.label.clone()).collect(),
        rows: spec
            .grid
            .iter()
            .zip(values.chunks(ns))
            .map(|(&x, v)| (x, v.to_vec()))
            .collect(),
    })
}
