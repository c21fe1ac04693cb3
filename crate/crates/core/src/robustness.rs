//! Robustness of coherence for states and channels.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::{identity, l1_coherence, ComplexMatrix, DensityMatrix, QuantumChannel};
use crate::sdp::{solve, AffineExpr, SdpProblem, SolveDiagnostics, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sdp,
    ClosedForm,
}

#[derive(Clone, Debug)]
pub struct RobustnessResult {
    /// `C_R`; the optimal `λ` is `1 + value`.
    pub value: f64,
    pub optimizer: BTreeMap<String, ComplexMatrix>,
    pub method: Method,
    /// Present for SDP results.
    pub diagnostics: Option<SolveDiagnostics>,
}

/// Requires the conditional output `J[(i, ·), (i, ·)]` of every basis input
/// `i` to be diagonal, which makes `J` the Choi matrix of an MIO map.
pub(crate) fn add_mio_constraints(
    p: &mut SdpProblem,
    name: &str,
    choi: &AffineExpr,
    d_in: usize,
    d_out: usize,
) -> Result<()> {
    for i in 0..d_in {
        let block = choi.clone().block(i * d_out, i * d_out, d_out, d_out)?;
        p.add_zero_equality(
            &format!("{name}: output of |{i}> incoherent"),
            block.off_diagonal(),
        )?;
    }
    Ok(())
}

pub(crate) fn require_cptp(n: &QuantumChannel) -> Result<()> {
    if n.is_cptp() {
        Ok(())
    } else {
        Err(Error::InvalidChannel(
            "operation requires a CPTP channel".into(),
        ))
    }
}

fn run(p: &SdpProblem, cfg: &SolverConfig, value: impl Fn(f64) -> f64) -> Result<RobustnessResult> {
    let sol = solve(p, cfg).require_optimal()?;
    Ok(RobustnessResult {
        value: value(sol.primal_value),
        diagnostics: Some(sol.diagnostics()),
        optimizer: sol.assignments,
        method: Method::Sdp,
    })
}

/// `min tr Σ` s.t. `Σ` diagonal and `Σ ⪰ ρ`; the optimum is `1 + C_R(ρ)`.
pub fn robustness_state_problem(rho: &DensityMatrix) -> Result<SdpProblem> {
    let mut p = SdpProblem::new();
    let sigma = p.add_psd_variable("Sigma", rho.dim())?;
    let s = AffineExpr::var(sigma);
    p.add_zero_equality("Sigma incoherent", s.clone().off_diagonal())?;
    p.add_psd(
        "Sigma - rho",
        s.clone() - AffineExpr::constant(rho.matrix().clone()),
    )?;
    p.minimize(s.trace()?)?;
    Ok(p)
}

pub fn robustness_state(rho: &DensityMatrix) -> Result<RobustnessResult> {
    robustness_state_with(rho, &SolverConfig::default())
}

pub fn robustness_state_with(rho: &DensityMatrix, cfg: &SolverConfig) -> Result<RobustnessResult> {
    run(&robustness_state_problem(rho)?, cfg, |v| v - 1.0)
}

/// `l1`-norm value, exact for qubits and for pure states.
pub fn robustness_state_closed_form(rho: &DensityMatrix) -> Option<RobustnessResult> {
    let pure = {
        let m = rho.matrix();
        let purity = (m * m).trace().re;
        (purity - 1.0).abs() <= 1e-10
    };
    (rho.dim() <= 2 || pure).then(|| RobustnessResult {
        value: l1_coherence(rho),
        optimizer: BTreeMap::new(),
        method: Method::ClosedForm,
        diagnostics: None,
    })
}

/// `min λ` over `S = J_M - J_N ⪰ 0` with `tr_B J_M = λ I` and `J_M` MIO.
pub fn robustness_channel_problem(n: &QuantumChannel) -> Result<SdpProblem> {
    require_cptp(n)?;
    let (da, db) = (n.dim_in(), n.dim_out());
    let mut p = SdpProblem::new();
    let s = p.add_psd_variable("S", da * db)?;
    let lambda = p.add_psd_variable("lambda", 1)?;
    let jn = AffineExpr::constant(n.choi().clone());
    let jm = AffineExpr::var(s) + jn;
    let marginal = jm.clone().partial_trace(&[da, db], &[1])?
        - AffineExpr::scalar_times(lambda, &identity(da))?;
    p.add_zero_equality("tr_B J_M = lambda I", marginal)?;
    add_mio_constraints(&mut p, "J_M", &jm, da, db)?;
    p.minimize(AffineExpr::var(lambda))?;
    Ok(p)
}

pub fn robustness_channel(n: &QuantumChannel) -> Result<RobustnessResult> {
    robustness_channel_with(n, &SolverConfig::default())
}

pub fn robustness_channel_with(n: &QuantumChannel, cfg: &SolverConfig) -> Result<RobustnessResult> {
    let mut r = run(&robustness_channel_problem(n)?, cfg, |v| v - 1.0)?;
    // report the dominating channel itself rather than the shift S
    if let Some(s) = r.optimizer.get("S") {
        let jm = s + n.choi();
        r.optimizer.insert("J_M".into(), jm);
    }
    Ok(r)
}

/// Smoothed robustness program; `eps` is clamped to `[0, 1]`.
pub fn epsilon_robustness_problem(n: &QuantumChannel, eps: f64) -> Result<SdpProblem> {
    require_cptp(n)?;
    if eps.is_nan() {
        return Err(Error::InvalidArgument("epsilon is NaN".into()));
    }
    let eps = eps.clamp(0.0, 1.0);
    let (da, db) = (n.dim_in(), n.dim_out());
    let dims = [da, db];
    let mut p = SdpProblem::new();
    let jl = p.add_psd_variable("J_L", da * db)?;
    let v = p.add_psd_variable("V", da * db)?;
    let s = p.add_psd_variable("S", da * db)?;
    let lambda = p.add_psd_variable("lambda", 1)?;
    let jl_e = AffineExpr::var(jl);
    let jm = AffineExpr::var(s) + jl_e.clone();
    p.add_equality(
        "tr_B J_L = I",
        jl_e.clone().partial_trace(&dims, &[1])?,
        identity(da),
    )?;
    let marginal =
        jm.clone().partial_trace(&dims, &[1])? - AffineExpr::scalar_times(lambda, &identity(da))?;
    p.add_zero_equality("tr_B J_M = lambda I", marginal)?;
    add_mio_constraints(&mut p, "J_M", &jm, da, db)?;
    p.add_psd(
        "V - (J_L - J_N)",
        AffineExpr::var(v) - jl_e + AffineExpr::constant(n.choi().clone()),
    )?;
    p.add_psd(
        "eps I - tr_B V",
        AffineExpr::constant(identity(da).scale(eps))
            - AffineExpr::var(v).partial_trace(&dims, &[1])?,
    )?;
    p.minimize(AffineExpr::var(lambda))?;
    Ok(p)
}

pub fn epsilon_robustness_channel(n: &QuantumChannel, eps: f64) -> Result<RobustnessResult> {
    epsilon_robustness_channel_with(n, eps, &SolverConfig::default())
}

pub fn epsilon_robustness_channel_with(
    n: &QuantumChannel,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<RobustnessResult> {
    run(&epsilon_robustness_problem(n, eps)?, cfg, |v| v - 1.0)
}

/// `max_i log₂(1 + C_R(N(|i⟩⟨i|)))`.
pub fn cohering_power(n: &QuantumChannel) -> Result<f64> {
    cohering_power_with(n, &SolverConfig::default())
}

pub fn cohering_power_with(n: &QuantumChannel, cfg: &SolverConfig) -> Result<f64> {
    require_cptp(n)?;
    let mut best = 0.0f64;
    for i in 0..n.dim_in() {
        let out = n.apply(&DensityMatrix::basis(n.dim_in(), i)?)?;
        let r = match robustness_state_closed_form(&out) {
            Some(r) => r.value,
            None => robustness_state_with(&out, cfg)?.value,
        };
        best = best.max((1.0 + r.max(0.0)).log2());
    }
    Ok(best)
}

/// `½‖N_a - N_b‖⋄` as `min μ` over `Z ⪰ 0`, `Z ⪰ J_a - J_b`, `tr_B Z ⪯ μ I`.
pub fn half_diamond_distance(a: &QuantumChannel, b: &QuantumChannel) -> Result<f64> {
    half_diamond_distance_with(a, b, &SolverConfig::default())
}

pub fn half_diamond_distance_with(
    a: &QuantumChannel,
    b: &QuantumChannel,
    cfg: &SolverConfig,
) -> Result<f64> {
    let (da, db) = (a.dim_in(), a.dim_out());
    if (b.dim_in(), b.dim_out()) != (da, db) {
        return Err(Error::DimensionMismatch(format!(
            "channels {da} -> {db} and {} -> {}",
            b.dim_in(),
            b.dim_out()
        )));
    }
    let mut p = SdpProblem::new();
    let z = p.add_psd_variable("Z", da * db)?;
    let mu = p.add_psd_variable("mu", 1)?;
    p.add_psd(
        "Z - (J_a - J_b)",
        AffineExpr::var(z) - AffineExpr::constant(a.choi() - b.choi()),
    )?;
    p.add_psd(
        "mu I - tr_B Z",
        AffineExpr::scalar_times(mu, &identity(da))?
            - AffineExpr::var(z).partial_trace(&[da, db], &[1])?,
    )?;
    p.minimize(AffineExpr::var(mu))?;
    Ok(solve(&p, cfg).require_optimal()?.primal_value.max(0.0))
}
