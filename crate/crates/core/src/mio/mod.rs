//! Probabilistic channel simulation with maximally incoherent operations.
//!
//! A simulation consumes a resource state `ω` on `R` and an input on `A`,
//! and with probability `p` outputs `L(ρ)` on `B`, where `L` is within
//! diamond distance `ε` of the target `N`. The largest `p` is an SDP over
//! the Choi matrix of the subnormalized free operation `E: RA → B`.

mod protocol;

pub use protocol::{
    construct_mio_protocol, construct_mio_protocol_with, mio_violation, verify_protocol,
    ProtocolCheck,
};

use std::collections::BTreeMap;

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::{
    hermitian_eigenvalues, hermitian_part, identity, kron, partial_trace, ComplexMatrix,
    DensityMatrix, PureState, QuantumChannel,
};
use crate::robustness::{epsilon_robustness_channel_with, require_cptp, robustness_channel_with};
use crate::sdp::{
    check_feasibility, solve, AffineExpr, SdpProblem, SolveDiagnostics, SolveStatus, SolverConfig,
};

/// Below this success probability no realized channel is reported.
pub const MIN_REPORTED_PROBABILITY: f64 = 1e-9;

/// CPTP tolerance for the recovered channel `J_M / p`.
pub const REALIZED_CPTP_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpClass {
    Mio,
    Dio,
}

#[derive(Clone, Debug)]
pub struct SimulationQuery {
    pub target: QuantumChannel,
    pub resource: DensityMatrix,
    pub epsilon: f64,
    pub op_class: OpClass,
}

impl SimulationQuery {
    pub fn new(
        target: QuantumChannel,
        resource: DensityMatrix,
        epsilon: f64,
        op_class: OpClass,
    ) -> Result<Self> {
        let q = Self {
            target,
            resource,
            epsilon,
            op_class,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        require_cptp(&self.target)?;
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// `(d_R, d_A, d_B)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (
            self.resource.dim(),
            self.target.dim_in(),
            self.target.dim_out(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct SimulationResult {
    pub probability: f64,
    /// `L = J_M / p`, omitted when `p` is (numerically) zero.
    pub realized_channel: Option<QuantumChannel>,
    /// Choi matrix of the subnormalized free operation on `R A → B`.
    pub protocol_choi: Option<ComplexMatrix>,
    pub solver_diagnostics: SolveDiagnostics,
}

/// Rows `r0..r0 + n` of `m`.
fn row_slice(m: &ComplexMatrix, r0: usize, n: usize) -> ComplexMatrix {
    m.rows(r0, n).into_owned()
}

/// How `J_E` enters a program: as a PSD variable, or as `V X V†` with
/// `X ⪰ 0` when every feasible `J_E` vanishes off the range of `V`.
enum ChoiForm {
    Full(AffineExpr),
    Face { x: AffineExpr, v: ComplexMatrix },
}

impl ChoiForm {
    fn sandwich(x: &AffineExpr, l: &ComplexMatrix, r: &ComplexMatrix) -> Result<AffineExpr> {
        x.clone().mul_left(l)?.mul_right(&r.adjoint())
    }

    /// The `n × n` block of `J_E` at `(r0, c0)`.
    fn block(&self, r0: usize, c0: usize, n: usize) -> Result<AffineExpr> {
        match self {
            Self::Full(j) => j.clone().block(r0, c0, n, n),
            Self::Face { x, v } => Self::sandwich(x, &row_slice(v, r0, n), &row_slice(v, c0, n)),
        }
    }

    /// `tr_B J_E` for `J_E` on `(d_in) ⊗ B`.
    fn trace_out(&self, d_in: usize, db: usize) -> Result<AffineExpr> {
        match self {
            Self::Full(j) => j.clone().partial_trace(&[d_in, db], &[1]),
            Self::Face { x, v } => {
                let mut acc = AffineExpr::zeros(d_in, d_in);
                for b in 0..db {
                    let vb = ComplexMatrix::from_fn(d_in, v.ncols(), |i, k| v[(i * db + b, k)]);
                    acc = acc + Self::sandwich(x, &vb, &vb)?;
                }
                Ok(acc)
            }
        }
    }

    /// `tr_R[J_E (ωᵀ ⊗ I_A ⊗ I_B)]`.
    fn apply_resource(&self, omega: &DensityMatrix, da: usize, db: usize) -> Result<AffineExpr> {
        let dr = omega.dim();
        match self {
            Self::Full(j) => {
                let w = kron(&omega.matrix().transpose(), &identity(da * db));
                j.clone().mul_right(&w)?.partial_trace(&[dr, da, db], &[0])
            }
            Self::Face { x, v } => {
                // Σ_rs ω_rs V_r X V_s† = Σ_i W_i X W_i†, W_i = √λ_i Σ_r u_i[r] V_r
                let dab = da * db;
                let eig = SymmetricEigen::new(omega.matrix().clone());
                let mut acc = AffineExpr::zeros(dab, dab);
                for (i, &lam) in eig.eigenvalues.iter().enumerate() {
                    if lam <= 0.0 {
                        continue;
                    }
                    let mut w = ComplexMatrix::zeros(dab, v.ncols());
                    for r in 0..dr {
                        w += row_slice(v, r * dab, dab) * eig.eigenvectors[(r, i)];
                    }
                    let w = w.scale(lam.sqrt());
                    acc = acc + Self::sandwich(x, &w, &w)?;
                }
                Ok(acc)
            }
        }
    }
}

/// Adds the free-operation constraints on `J` over `R A → B`: MIO always,
/// and for DIO also a vanishing diagonal in every off-diagonal block.
fn add_free_operation_constraints(
    p: &mut SdpProblem,
    je: &ChoiForm,
    d_in: usize,
    d_out: usize,
    class: OpClass,
) -> Result<()> {
    for i in 0..d_in {
        p.add_zero_equality(
            &format!("J_E: output of |{i}> incoherent"),
            je.block(i * d_out, i * d_out, d_out)?.off_diagonal(),
        )?;
    }
    if class == OpClass::Dio {
        for k in 0..d_in {
            for l in (k + 1)..d_in {
                p.add_zero_equality(
                    &format!("J_E: dephased |{k}><{l}| output vanishes"),
                    je.block(k * d_out, l * d_out, d_out)?.diagonal_part(),
                )?;
            }
        }
    }
    Ok(())
}

/// `½‖L - N‖⋄ ≤ ε` in the form `Z ⪰ J_L - J_N`, `tr_B Z ⪯ ε I`, all
/// scaled by a common factor. At `ε = 0` this forces `Z = 0`, and the
/// program is given the equality `J_L = J_N` instead.
fn add_tolerance_constraints(
    p: &mut SdpProblem,
    jl: AffineExpr,
    jn: AffineExpr,
    eps_i: AffineExpr,
    exact: bool,
    da: usize,
    db: usize,
) -> Result<()> {
    if exact {
        return p.add_zero_equality("J_L = J_N", jl - jn);
    }
    let z = p.add_psd_variable("Z", da * db)?;
    p.add_psd("Z - J_L + J_N", AffineExpr::var(z) - jl + jn)?;
    p.add_psd(
        "eps I - tr_B Z",
        eps_i - AffineExpr::var(z).partial_trace(&[da, db], &[1])?,
    )?;
    Ok(())
}

/// Relative cut below which an eigenvalue counts as zero when locating
/// the forced kernel of `J_E`.
const FACE_TOL: f64 = 1e-9;

fn spectral_projector(m: &ComplexMatrix, keep: impl Fn(f64) -> bool) -> ComplexMatrix {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = m.nrows();
    let mut p = ComplexMatrix::zeros(n, n);
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if keep(lam) {
            let v = eig.eigenvectors.column(i);
            p += v * v.adjoint();
        }
    }
    p
}

/// With `J_M = p J_N` exactly, `J_E` annihilates `range(ωᵀ) ⊗ ker(J_N)`.
/// Returns an orthonormal basis of the complement, or `None` when that
/// subspace is trivial.
fn exact_face(q: &SimulationQuery) -> Option<ComplexMatrix> {
    let (dr, da, db) = q.dims();
    let jn = q.target.choi();
    let scale_n = hermitian_eigenvalues(jn)
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let ker_n = spectral_projector(jn, |l| l <= FACE_TOL * scale_n);
    if ker_n.norm() < 0.5 {
        return None;
    }
    let range_r = spectral_projector(&q.resource.matrix().transpose(), |l| l > FACE_TOL);
    let n = dr * da * db;
    let comp = identity(n) - kron(&range_r, &ker_n);
    let eig = SymmetricEigen::new(hermitian_part(&comp));
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    if cols.len() == n {
        return None;
    }
    Some(ComplexMatrix::from_fn(n, cols.len(), |r, c| {
        eig.eigenvectors[(r, cols[c])]
    }))
}

/// Homogenized program over a given form of `J_E`.
fn build_simulation(q: &SimulationQuery, face: Option<&ComplexMatrix>) -> Result<SdpProblem> {
    q.validate()?;
    let (dr, da, db) = q.dims();
    let mut p = SdpProblem::new();
    let je = match face {
        None => ChoiForm::Full(AffineExpr::var(p.add_psd_variable("J_E", dr * da * db)?)),
        Some(v) => ChoiForm::Face {
            x: AffineExpr::var(p.add_psd_variable("X", v.ncols())?),
            v: v.clone(),
        },
    };
    let pv = p.add_psd_variable("p", 1)?;
    let jm = je.apply_resource(&q.resource, da, db)?;
    let p_times = |m: &ComplexMatrix| AffineExpr::scalar_times(pv, m);

    p.add_zero_equality(
        "tr_B J_M = p I",
        jm.clone().partial_trace(&[da, db], &[1])? - p_times(&identity(da))?,
    )?;
    add_free_operation_constraints(&mut p, &je, dr * da, db, q.op_class)?;
    p.add_psd(
        "I - tr_B J_E",
        AffineExpr::constant(identity(dr * da)) - je.trace_out(dr * da, db)?,
    )?;
    add_tolerance_constraints(
        &mut p,
        jm,
        p_times(q.target.choi())?,
        p_times(&identity(da).scale(q.epsilon))?,
        q.epsilon == 0.0,
        da,
        db,
    )?;
    p.maximize(AffineExpr::var(pv))?;
    Ok(p)
}

/// Homogenized success-probability program: maximize `p` over `J_E ⪰ 0`,
/// `Z ⪰ 0` with `J_M = tr_R[J_E(ωᵀ⊗I)]`, `tr_B J_M = p I`,
/// `tr_B J_E ⪯ I`, `Z ⪰ J_M - p J_N` and `tr_B Z ⪯ p ε I`.
pub fn simulation_problem(q: &SimulationQuery) -> Result<SdpProblem> {
    build_simulation(q, None)
}

/// Solves the homogenized program for either operation class.
///
/// At `ε = 0` the program has no strictly feasible point whenever `J_N`
/// is rank deficient; it is then solved on the face `J_E = V X V†` and the
/// lifted point is re-checked against [`simulation_problem`].
pub fn max_success(q: &SimulationQuery, cfg: &SolverConfig) -> Result<SimulationResult> {
    let face = if q.epsilon == 0.0 {
        exact_face(q)
    } else {
        None
    };
    let (je, pvalue, diagnostics) = match face {
        None => {
            let sol = solve(&simulation_problem(q)?, cfg).require_optimal()?;
            (
                sol.assignments["J_E"].clone(),
                sol.primal_value,
                sol.diagnostics(),
            )
        }
        Some(v) => {
            let sol = solve(&build_simulation(q, Some(&v))?, cfg).require_optimal()?;
            let je = hermitian_part(&(&v * &sol.assignments["X"] * v.adjoint()));
            let lifted = BTreeMap::from([
                ("J_E".to_string(), je.clone()),
                ("p".to_string(), sol.assignments["p"].clone()),
            ]);
            let rep = check_feasibility(&simulation_problem(q)?, &lifted)?;
            let mut d = sol.diagnostics();
            d.max_equality_residual = d.max_equality_residual.max(rep.max_equality_residual);
            d.min_psd_eigenvalue = d.min_psd_eigenvalue.min(rep.min_psd_eigenvalue);
            if !d.is_certified(cfg) {
                d.status = SolveStatus::NumericalFailure;
                return Err(Error::Solver {
                    status: d.status,
                    detail: format!(
                        "lifted point misses tolerance (residual {:.3e}, min eigenvalue {:.3e})",
                        d.max_equality_residual, d.min_psd_eigenvalue
                    ),
                });
            }
            (je, sol.primal_value, d)
        }
    };
    let (dr, da, db) = q.dims();
    let probability = pvalue.clamp(0.0, 1.0);
    let realized_channel = if probability > MIN_REPORTED_PROBABILITY {
        let w = kron(&q.resource.matrix().transpose(), &identity(da * db));
        let jm = partial_trace(&(&je * w), &[dr, da, db], &[0])?;
        // near p = 0 the division amplifies solver noise; drop the channel
        // rather than report one that is not a channel
        QuantumChannel::from_choi_tolerant(da, db, jm.unscale(pvalue), REALIZED_CPTP_TOL).ok()
    } else {
        None
    };
    Ok(SimulationResult {
        probability,
        realized_channel,
        protocol_choi: Some(je),
        solver_diagnostics: diagnostics,
    })
}

pub fn max_success_mio(q: &SimulationQuery) -> Result<SimulationResult> {
    max_success_mio_with(q, &SolverConfig::default())
}

pub fn max_success_mio_with(q: &SimulationQuery, cfg: &SolverConfig) -> Result<SimulationResult> {
    if q.op_class != OpClass::Mio {
        return Err(Error::InvalidArgument(
            "max_success_mio needs op_class = MIO".into(),
        ));
    }
    max_success(q, cfg)
}

/// The `t = 1/p` form: minimize `t` with `tr_B J_Ẽ ⪯ t I`, `tr_B J_L = I`.
/// Infeasible exactly when the optimal probability is zero.
pub fn inverse_probability_problem(q: &SimulationQuery) -> Result<SdpProblem> {
    q.validate()?;
    let (dr, da, db) = q.dims();
    let mut p = SdpProblem::new();
    let je = ChoiForm::Full(AffineExpr::var(p.add_psd_variable("J_Et", dr * da * db)?));
    let t = p.add_psd_variable("t", 1)?;
    let jl = je.apply_resource(&q.resource, da, db)?;
    p.add_equality(
        "tr_B J_L = I",
        jl.clone().partial_trace(&[da, db], &[1])?,
        identity(da),
    )?;
    add_free_operation_constraints(&mut p, &je, dr * da, db, q.op_class)?;
    p.add_psd(
        "t I - tr_B J_Et",
        AffineExpr::scalar_times(t, &identity(dr * da))? - je.trace_out(dr * da, db)?,
    )?;
    add_tolerance_constraints(
        &mut p,
        jl,
        AffineExpr::constant(q.target.choi().clone()),
        AffineExpr::constant(identity(da).scale(q.epsilon)),
        q.epsilon == 0.0,
        da,
        db,
    )?;
    p.minimize(AffineExpr::var(t))?;
    Ok(p)
}

/// Optimal `t` of [`inverse_probability_problem`].
pub fn min_inverse_probability(q: &SimulationQuery, cfg: &SolverConfig) -> Result<f64> {
    Ok(solve(&inverse_probability_problem(q)?, cfg)
        .require_optimal()?
        .primal_value)
}

fn require_rank(m: usize) -> Result<()> {
    if m < 2 {
        Err(Error::TrivialResource(m))
    } else {
        Ok(())
    }
}

/// `min{1, (m-1)/C_R^ε(N)}`, or 1 when `C_R^ε(N)` vanishes.
pub fn analytic_success_maxcoherent(target: &QuantumChannel, m: usize, eps: f64) -> Result<f64> {
    analytic_success_maxcoherent_with(target, m, eps, &SolverConfig::default())
}

pub fn analytic_success_maxcoherent_with(
    target: &QuantumChannel,
    m: usize,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    require_rank(m)?;
    let cr = if eps == 0.0 {
        robustness_channel_with(target, cfg)?.value
    } else {
        epsilon_robustness_channel_with(target, eps, cfg)?.value
    };
    Ok(success_from_robustness(cr, m))
}

fn success_from_robustness(cr: f64, m: usize) -> f64 {
    if cr <= 1e-9 {
        1.0
    } else {
        ((m - 1) as f64 / cr).min(1.0)
    }
}

/// Closed form for `U_θ^{⊗l}` with `Ψ_m`: `min{1, (m-1)/((1+|sin 2θ|)^l - 1)}`.
pub fn unitary_success(theta: f64, l: usize, m: usize) -> Result<f64> {
    require_rank(m)?;
    if l == 0 {
        return Err(Error::InvalidArgument("l must be >= 1".into()));
    }
    let cr = (1.0 + (2.0 * theta).sin().abs()).powi(l as i32) - 1.0;
    Ok(success_from_robustness(cr, m))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBound {
    pub value: f64,
    /// Set when the bound degenerates to 0 and says why.
    pub note: Option<String>,
}

/// `n² / (m Σ_i |ψ_i|^{-2})` over the support of `ψ`.
pub fn distillation_probability_bound(psi: &PureState, m: usize) -> Result<f64> {
    require_rank(m)?;
    let support: Vec<f64> = psi
        .amplitudes()
        .iter()
        .map(|a| a.norm_sqr())
        .filter(|&w| w > 1e-15)
        .collect();
    let n = support.len() as f64;
    Ok(n * n / (m as f64 * support.iter().map(|w| 1.0 / w).sum::<f64>()))
}

/// Distill `Ψ_m` from `ψ`, then simulate `N` with it.
pub fn pure_state_lower_bound(
    psi: &PureState,
    m: usize,
    target: &QuantumChannel,
    eps: f64,
) -> Result<LowerBound> {
    pure_state_lower_bound_with(psi, m, target, eps, &SolverConfig::default())
}

pub fn pure_state_lower_bound_with(
    psi: &PureState,
    m: usize,
    target: &QuantumChannel,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<LowerBound> {
    require_rank(m)?;
    let support = psi
        .amplitudes()
        .iter()
        .filter(|a| a.norm_sqr() > 1e-15)
        .count();
    if support < 2 {
        return Ok(LowerBound {
            value: 0.0,
            note: Some(format!(
                "resource has support {support}; an incoherent pure state yields no bound"
            )),
        });
    }
    let distill = distillation_probability_bound(psi, m)?;
    let sim = analytic_success_maxcoherent_with(target, m, eps, cfg)?;
    Ok(LowerBound {
        value: distill * sim,
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    #[test]
    fn unitary_success_examples() {
        assert_eq!(unitary_success(0.0, 3, 2).unwrap(), 1.0);
        assert!((unitary_success(FRAC_PI_4, 2, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(unitary_success(FRAC_PI_8, 1, 2).unwrap(), 1.0);
        assert!(matches!(
            unitary_success(0.3, 1, 1),
            Err(Error::TrivialResource(1))
        ));
    }

    #[test]
    fn distillation_bound_examples() {
        let psi2 = PureState::maximally_coherent(2).unwrap();
        assert!((distillation_probability_bound(&psi2, 2).unwrap() - 0.5).abs() < 1e-15);
        let skew = PureState::from_real(&[0.8f64.sqrt(), 0.2f64.sqrt()]).unwrap();
        assert!((distillation_probability_bound(&skew, 2).unwrap() - 0.32).abs() < 1e-12);
    }
}
