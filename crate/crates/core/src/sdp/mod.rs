//! Semidefinite programs over Hermitian matrix variables.
//!
//! Build an [`SdpProblem`] from [`AffineExpr`]s, then call [`solve`]. The
//! solver works on real symmetric blocks; complex data is handled through
//! [`HermitianEmbedding`].
//!
//! ```
//! use cohsim::quantum::ComplexMatrix;
//! use cohsim::sdp::{solve, AffineExpr, SdpProblem, SolveStatus, SolverConfig};
//! use num_complex::Complex64;
//!
//! // largest eigenvalue of diag(1, 3)
//! let mut p = SdpProblem::new();
//! let t = p.add_variable("t", 1).unwrap();
//! let d = ComplexMatrix::from_fn(2, 2, |i, j| {
//!     Complex64::new(if i == j { (2 * i + 1) as f64 } else { 0.0 }, 0.0)
//! });
//! let gap = AffineExpr::scalar_times(t, &ComplexMatrix::identity(2, 2)).unwrap()
//!     - AffineExpr::constant(d);
//! p.add_psd("tI - D", gap).unwrap();
//! p.minimize(AffineExpr::var(t)).unwrap();
//! let sol = solve(&p, &SolverConfig::default());
//! assert_eq!(sol.status, SolveStatus::Optimal);
//! assert!((sol.primal_value - 3.0).abs() < 1e-7);
//! ```

mod compile;
mod embed;
mod expr;
mod ipm;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use serde_json::json;

pub use embed::{embed_hermitian, HermitianEmbedding};
pub use expr::{AffineExpr, Var};

use crate::error::{Error, Result};
use crate::quantum::{hermiticity_deviation, min_eigenvalue, ComplexMatrix};

/// Tolerance on the Hermiticity of constant data.
const DATA_HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_gap: 1e-8,
            tol_feas: 1e-8,
            max_iterations: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_gap > 0.0 && self.tol_feas > 0.0)
            || !self.tol_gap.is_finite()
            || !self.tol_feas.is_finite()
        {
            return Err(Error::InvalidArgument(
                "solver tolerances must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    /// Same config with both tolerances set to `tol`.
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            tol_gap: tol,
            tol_feas: tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
struct VarDecl {
    name: String,
    dim: usize,
}

#[derive(Clone, Debug)]
struct Equality {
    name: String,
    expr: AffineExpr,
    rhs: ComplexMatrix,
}

#[derive(Clone, Debug)]
struct PsdConstraint {
    name: String,
    expr: AffineExpr,
}

/// Hermitian LMI program: linear equalities and PSD constraints on affine
/// expressions of Hermitian matrix variables.
#[derive(Clone, Debug, Default)]
pub struct SdpProblem {
    vars: Vec<VarDecl>,
    objective: Option<(Sense, AffineExpr)>,
    equalities: Vec<Equality>,
    psd: Vec<PsdConstraint>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: &str, dim: usize) -> Result<Var> {
        if dim == 0 {
            return Err(Error::MalformedProblem(format!(
                "variable `{name}` has dimension 0"
            )));
        }
        if self.vars.iter().any(|v| v.name == name) {
            return Err(Error::MalformedProblem(format!(
                "variable `{name}` declared twice"
            )));
        }
        self.vars.push(VarDecl {
            name: name.to_string(),
            dim,
        });
        Ok(Var {
            id: self.vars.len() - 1,
            dim,
        })
    }

    pub fn variable(&self, name: &str) -> Option<Var> {
        self.vars.iter().position(|v| v.name == name).map(|id| Var {
            id,
            dim: self.vars[id].dim,
        })
    }

    /// `(name, dimension)` of every declared variable.
    pub fn variables(&self) -> impl Iterator<Item = (&str, usize)> {
        self.vars.iter().map(|v| (v.name.as_str(), v.dim))
    }

    pub fn var_name(&self, v: Var) -> &str {
        &self.vars[v.id].name
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    pub fn num_psd_constraints(&self) -> usize {
        self.psd.len()
    }

    fn check_vars(&self, expr: &AffineExpr) -> Result<()> {
        for v in expr.variables() {
            match self.vars.get(v.id) {
                Some(decl) if decl.dim == v.dim => {}
                _ => {
                    return Err(Error::MalformedProblem(format!(
                        "expression uses undeclared variable #{}",
                        v.id
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn set_objective(&mut self, sense: Sense, expr: AffineExpr) -> Result<()> {
        if expr.shape() != (1, 1) {
            return Err(Error::MalformedProblem(
                "objective must be a 1x1 expression".into(),
            ));
        }
        self.check_vars(&expr)?;
        self.objective = Some((sense, expr));
        Ok(())
    }

    pub fn minimize(&mut self, expr: AffineExpr) -> Result<()> {
        self.set_objective(Sense::Minimize, expr)
    }

    pub fn maximize(&mut self, expr: AffineExpr) -> Result<()> {
        self.set_objective(Sense::Maximize, expr)
    }

    /// Requires `expr = rhs` entrywise. `rhs` must be Hermitian.
    pub fn add_equality(&mut self, name: &str, expr: AffineExpr, rhs: ComplexMatrix) -> Result<()> {
        let (r, c) = expr.shape();
        if r != c || rhs.nrows() != r || rhs.ncols() != c {
            return Err(Error::MalformedProblem(format!(
                "equality `{name}`: expression {r}x{c} vs constant {}x{}",
                rhs.nrows(),
                rhs.ncols()
            )));
        }
        if hermiticity_deviation(&rhs) > DATA_HERMITIAN_TOL {
            return Err(Error::MalformedProblem(format!(
                "equality `{name}`: constant is not Hermitian"
            )));
        }
        self.check_vars(&expr)?;
        self.equalities.push(Equality {
            name: name.to_string(),
            expr,
            rhs,
        });
        Ok(())
    }

    /// Requires `expr = 0` entrywise.
    pub fn add_zero_equality(&mut self, name: &str, expr: AffineExpr) -> Result<()> {
        let (r, c) = expr.shape();
        self.add_equality(name, expr, ComplexMatrix::zeros(r, c))
    }

    /// Requires the Hermitian expression `expr` to be positive semidefinite.
    pub fn add_psd(&mut self, name: &str, expr: AffineExpr) -> Result<()> {
        let (r, c) = expr.shape();
        if r != c {
            return Err(Error::MalformedProblem(format!(
                "PSD constraint `{name}` is {r}x{c}"
            )));
        }
        if hermiticity_deviation(expr.constant_part()) > DATA_HERMITIAN_TOL {
            return Err(Error::MalformedProblem(format!(
                "PSD constraint `{name}`: constant is not Hermitian"
            )));
        }
        self.check_vars(&expr)?;
        self.psd.push(PsdConstraint {
            name: name.to_string(),
            expr,
        });
        Ok(())
    }

    /// Adds a variable constrained to be PSD.
    pub fn add_psd_variable(&mut self, name: &str, dim: usize) -> Result<Var> {
        let v = self.add_variable(name, dim)?;
        self.add_psd(&format!("{name} >= 0"), AffineExpr::var(v))?;
        Ok(v)
    }

    fn has_complex_data(&self) -> bool {
        self.objective.iter().any(|(_, e)| e.has_complex_data())
            || self
                .equalities
                .iter()
                .any(|e| e.expr.has_complex_data() || e.rhs.iter().any(|z| z.im != 0.0))
            || self.psd.iter().any(|c| c.expr.has_complex_data())
    }

    /// Debug serialization: variables, objective and constraints, with every
    /// matrix in the `[[[re, im], ...], ...]` entry format.
    pub fn dump(&self) -> String {
        fn mat(m: &ComplexMatrix) -> serde_json::Value {
            let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
                .map(|i| {
                    (0..m.ncols())
                        .map(|j| [m[(i, j)].re, m[(i, j)].im])
                        .collect()
                })
                .collect();
            json!(rows)
        }
        let expr = |e: &AffineExpr| {
            let terms: Vec<serde_json::Value> = e
                .terms()
                .iter()
                .map(|t| {
                    json!({
                        "out": [t.out.0, t.out.1],
                        "var": self.vars[t.var.id].name,
                        "at": [t.at.0, t.at.1],
                        "coef": [t.coef.re, t.coef.im],
                    })
                })
                .collect();
            json!({ "shape": [e.shape().0, e.shape().1], "constant": mat(e.constant_part()), "terms": terms })
        };
        let value = json!({
            "variables": self.vars.iter().map(|v| json!({"name": v.name, "dim": v.dim})).collect::<Vec<_>>(),
            "objective": self.objective.as_ref().map(|(s, e)| json!({"sense": s, "expr": expr(e)})),
            "equalities": self.equalities.iter().map(|q| json!({
                "name": q.name, "expr": expr(&q.expr), "rhs": mat(&q.rhs)
            })).collect::<Vec<_>>(),
            "psd": self.psd.iter().map(|c| json!({"name": c.name, "expr": expr(&c.expr)})).collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(&value).expect("json values serialize")
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    /// Variable values by name. An infeasible solve stores the Farkas
    /// multipliers of the normalized equality rows under `farkas_y`.
    pub assignments: BTreeMap<String, ComplexMatrix>,
    pub max_equality_residual: f64,
    pub min_psd_eigenvalue: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn value(&self, name: &str) -> Option<&ComplexMatrix> {
        self.assignments.get(name)
    }

    pub fn diagnostics(&self) -> SolveDiagnostics {
        SolveDiagnostics {
            status: self.status,
            primal_value: self.primal_value,
            dual_value: self.dual_value,
            max_equality_residual: self.max_equality_residual,
            min_psd_eigenvalue: self.min_psd_eigenvalue,
            iterations: self.iterations,
        }
    }

    /// Turns every status other than optimal into an error.
    pub fn require_optimal(self) -> Result<Self> {
        if self.status == SolveStatus::Optimal {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: self.status,
                detail: format!(
                    "after {} iterations (primal {:.3e}, dual {:.3e}, residual {:.3e})",
                    self.iterations, self.primal_value, self.dual_value, self.max_equality_residual
                ),
            })
        }
    }
}

/// Summary of a solve, without the variable values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub max_equality_residual: f64,
    pub min_psd_eigenvalue: f64,
    pub iterations: usize,
}

impl SolveDiagnostics {
    pub fn gap(&self) -> f64 {
        (self.primal_value - self.dual_value).abs()
    }

    /// Whether the solve meets the optimality contract of `cfg`.
    pub fn is_certified(&self, cfg: &SolverConfig) -> bool {
        self.status == SolveStatus::Optimal
            && self.gap() <= cfg.tol_gap * (1.0 + self.primal_value.abs())
            && self.max_equality_residual <= cfg.tol_feas
            && self.min_psd_eigenvalue >= -cfg.tol_feas
    }
}

/// Exact residuals of an assignment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// Largest absolute entry of `expr - rhs` over all equalities.
    pub max_equality_residual: f64,
    /// Smallest eigenvalue over all PSD constraints (`+inf` if none).
    pub min_psd_eigenvalue: f64,
}

/// Evaluates every constraint at the given variable values.
pub fn check_feasibility(
    p: &SdpProblem,
    assignments: &BTreeMap<String, ComplexMatrix>,
) -> Result<FeasibilityReport> {
    let mut values: HashMap<usize, &ComplexMatrix> = HashMap::new();
    for (id, decl) in p.vars.iter().enumerate() {
        let m = assignments
            .get(&decl.name)
            .ok_or_else(|| Error::MissingVariable(decl.name.clone()))?;
        if m.nrows() != decl.dim || m.ncols() != decl.dim {
            return Err(Error::DimensionMismatch(format!(
                "assignment for `{}` is {}x{}, expected {}x{}",
                decl.name,
                m.nrows(),
                m.ncols(),
                decl.dim,
                decl.dim
            )));
        }
        values.insert(id, m);
    }
    let lookup = |v: Var| values.get(&v.id).map(|m| (*m).clone());
    let mut residual = 0.0f64;
    for eq in &p.equalities {
        let val = eq.expr.evaluate(lookup)?;
        let worst = val
            .iter()
            .zip(eq.rhs.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        residual = residual.max(worst);
    }
    let mut min_eig = f64::INFINITY;
    for c in &p.psd {
        min_eig = min_eig.min(min_eigenvalue(&c.expr.evaluate(lookup)?));
    }
    Ok(FeasibilityReport {
        max_equality_residual: residual,
        min_psd_eigenvalue: min_eig,
    })
}

/// Solves the program. Never panics on bad numerics; failures are reported
/// through [`SolveStatus`].
pub fn solve(p: &SdpProblem, cfg: &SolverConfig) -> SdpSolution {
    compile::solve_problem(p, cfg)
}
