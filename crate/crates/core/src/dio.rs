//! Simulation with dephasing-covariant incoherent operations.
//!
//! DIO cannot exploit a resource to implement a channel whose dephased
//! output depends on the input's coherence. Such channels are detected by
//! [`is_resource_nonactivating`]; for them the optimal probability at
//! `ε = 0` is zero.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mio::{max_success, OpClass, SimulationQuery, SimulationResult};
use crate::quantum::{identity, kron, ComplexMatrix, DensityMatrix, PureState, QuantumChannel};
use crate::robustness::require_cptp;
use crate::sdp::SolverConfig;

pub const DEFAULT_NONACTIVATING_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonactivatingReport {
    pub is_nonactivating: bool,
    /// Largest entry of `J(Δ∘N) - J(Δ∘N∘Δ)`.
    pub deviation: f64,
}

/// Compares `Δ∘N` with `Δ∘N∘Δ` entrywise on the Choi matrix.
///
/// The two differ exactly in the entries `J[(a,b),(a',b)]` with `a ≠ a'`.
pub fn is_resource_nonactivating(n: &QuantumChannel, tol: f64) -> Result<NonactivatingReport> {
    require_cptp(n)?;
    let (da, db) = (n.dim_in(), n.dim_out());
    let j = n.choi();
    let mut deviation = 0.0f64;
    for a in 0..da {
        for a2 in 0..da {
            if a == a2 {
                continue;
            }
            for b in 0..db {
                deviation = deviation.max(j[(a * db + b, a2 * db + b)].norm());
            }
        }
    }
    Ok(NonactivatingReport {
        is_nonactivating: deviation <= tol,
        deviation,
    })
}

pub fn max_success_dio(q: &SimulationQuery) -> Result<SimulationResult> {
    max_success_dio_with(q, &SolverConfig::default())
}

pub fn max_success_dio_with(q: &SimulationQuery, cfg: &SolverConfig) -> Result<SimulationResult> {
    if q.op_class != OpClass::Dio {
        return Err(Error::InvalidArgument(
            "max_success_dio needs op_class = DIO".into(),
        ));
    }
    max_success(q, cfg)
}

fn check_ranks(n: usize, m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::TrivialResource(m));
    }
    if m > n {
        return Err(Error::InvalidArgument(format!(
            "need m <= n, got m = {m}, n = {n}"
        )));
    }
    Ok(())
}

/// Optimal DIO probability of replacing any input by `Ψ_n` using `Ψ_m`:
/// 1 when `ε ≥ 1 - m/n`, else 0.
pub fn replacement_step_probability(n: usize, m: usize, eps: f64) -> Result<f64> {
    check_ranks(n, m)?;
    Ok(if eps >= 1.0 - m as f64 / n as f64 - 1e-12 {
        1.0
    } else {
        0.0
    })
}

/// Explicit feasible point for replacement by `Ψ_n` from `Ψ_m` at
/// `ε = 1 - m/n`, with a qubit input.
#[derive(Clone, Debug)]
pub struct ReplacementSolution {
    /// On `R ⊗ A ⊗ B`.
    pub j_e: ComplexMatrix,
    /// On `A ⊗ B`.
    pub z: ComplexMatrix,
    pub dim_in: usize,
}

impl ReplacementSolution {
    /// Assignment for the homogenized simulation program at `p = 1`.
    pub fn assignments(&self) -> BTreeMap<String, ComplexMatrix> {
        BTreeMap::from([
            ("J_E".to_string(), self.j_e.clone()),
            ("Z".to_string(), self.z.clone()),
            ("p".to_string(), identity(1)),
        ])
    }

    /// The query this point is feasible for.
    pub fn query(&self, n: usize, m: usize) -> Result<SimulationQuery> {
        let target =
            QuantumChannel::replacement(&DensityMatrix::maximally_coherent(n)?, self.dim_in)?;
        SimulationQuery::new(
            target,
            DensityMatrix::maximally_coherent(m)?,
            1.0 - m as f64 / n as f64,
            OpClass::Dio,
        )
    }
}

pub fn appendix_feasible_solution(n: usize, m: usize) -> Result<ReplacementSolution> {
    appendix_feasible_solution_with_input_dim(n, m, 2)
}

/// `J = I/n + (mΨ_m - I) ⊗ I_A ⊗ (nΨ_n - I) / (n(n-1))` and
/// `Z = (1 - m/n) I_A ⊗ (I - Ψ_n)/(n-1)`.
pub fn appendix_feasible_solution_with_input_dim(
    n: usize,
    m: usize,
    dim_in: usize,
) -> Result<ReplacementSolution> {
    check_ranks(n, m)?;
    if dim_in == 0 {
        return Err(Error::InvalidArgument(
            "input dimension must be >= 1".into(),
        ));
    }
    let (nf, mf) = (n as f64, m as f64);
    let psi_m = PureState::maximally_coherent(m)?.projector().into_matrix();
    let psi_n = PureState::maximally_coherent(n)?.projector().into_matrix();
    let ia = identity(dim_in);
    let r = psi_m.scale(mf) - identity(m);
    let b = psi_n.scale(nf) - identity(n);
    let j_e =
        identity(m * dim_in * n).unscale(nf) + kron(&kron(&r, &ia), &b).unscale(nf * (nf - 1.0));
    let z = kron(&ia, &(identity(n) - &psi_n)).scale((1.0 - mf / nf) / (nf - 1.0));
    Ok(ReplacementSolution { j_e, z, dim_in })
}

/// The `Z = (1 - m/n) I_A ⊗ Ψ_n` variant, which is not feasible for `m < n`.
pub fn appendix_literal_z(n: usize, m: usize, dim_in: usize) -> Result<ComplexMatrix> {
    check_ranks(n, m)?;
    let psi_n = PureState::maximally_coherent(n)?.projector().into_matrix();
    Ok(kron(&identity(dim_in), &psi_n).scale(1.0 - m as f64 / n as f64))
}
