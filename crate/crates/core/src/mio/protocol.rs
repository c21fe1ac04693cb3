//! Explicit flagged protocols for maximally coherent resources.
//!
//! A protocol is a channel `R A → F B` with a qubit flag `F`: flag 0 marks
//! success. With `Ψ_m` on `R` it measures `{Ψ_m, I - Ψ_m}` and applies
//! `L_p` or a compensating channel `L'` chosen so the whole map is MIO.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::{
    identity, kron, permute_subsystems, trace_norm, ComplexMatrix, DensityMatrix, PureState,
    QuantumChannel, ONE, ZERO,
};
use crate::robustness::{require_cptp, robustness_channel_with};
use crate::sdp::SolverConfig;

/// Tolerance on `λ ≤ m` when checking the probability bound.
const BOUND_TOL: f64 = 1e-7;

/// Choi of `ρ ↦ p|0⟩⟨0| ⊗ N(ρ) + (1-p)|1⟩⟨1| ⊗ I/d`, output ordered `F B`.
fn flagged_choi(jn: &ComplexMatrix, da: usize, db: usize, p: f64) -> Result<ComplexMatrix> {
    let mut f0 = ComplexMatrix::zeros(2, 2);
    f0[(0, 0)] = ONE;
    let mut f1 = ComplexMatrix::zeros(2, 2);
    f1[(1, 1)] = ONE;
    let fail = identity(da * db).unscale(db as f64);
    let fab = kron(&f0, jn).scale(p) + kron(&f1, &fail).scale(1.0 - p);
    permute_subsystems(&fab, &[2, da, db], &[1, 0, 2])
}

/// Dephases the output factor of a Choi matrix on `A ⊗ B`.
fn dephase_output(j: &ComplexMatrix, da: usize, db: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(da * db, da * db, |r, c| {
        if r % db == c % db {
            j[(r, c)]
        } else {
            ZERO
        }
    })
}

/// Largest entry that an MIO Choi matrix would need to be zero: the
/// off-diagonal part of the output of each incoherent input.
pub fn mio_violation(ch: &QuantumChannel) -> f64 {
    let (da, db) = (ch.dim_in(), ch.dim_out());
    let j = ch.choi();
    let mut worst = 0.0f64;
    for a in 0..da {
        for b in 0..db {
            for b2 in 0..db {
                if b != b2 {
                    worst = worst.max(j[(a * db + b, a * db + b2)].norm());
                }
            }
        }
    }
    worst
}

/// Builds an MIO protocol on `R A → F B` (`d_R = m`) that, fed `Ψ_m`,
/// succeeds with probability `p` and then implements `target` exactly.
///
/// Fails with [`Error::Infeasible`] when `p (C_R(N)) > m - 1`.
pub fn construct_mio_protocol(target: &QuantumChannel, m: usize, p: f64) -> Result<QuantumChannel> {
    construct_mio_protocol_with(target, m, p, &SolverConfig::default())
}

pub fn construct_mio_protocol_with(
    target: &QuantumChannel,
    m: usize,
    p: f64,
    cfg: &SolverConfig,
) -> Result<QuantumChannel> {
    require_cptp(target)?;
    if m < 2 {
        return Err(Error::TrivialResource(m));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probability {p} outside (0, 1]"
        )));
    }
    let (da, db) = (target.dim_in(), target.dim_out());
    let rob = robustness_channel_with(target, cfg)?;
    let lambda_n = 1.0 + rob.value.max(0.0);
    let lambda = 1.0 + p * (lambda_n - 1.0);
    if lambda > m as f64 + BOUND_TOL {
        return Err(Error::Infeasible(format!(
            "p = {p} needs a resource with 1 + p C_R(N) = {lambda:.6} <= m = {m}"
        )));
    }
    // dominating MIO map with exact zeros where MIO demands them
    let mut jm = rob
        .optimizer
        .get("J_M")
        .cloned()
        .unwrap_or_else(|| target.choi().clone());
    for a in 0..da {
        for b in 0..db {
            for b2 in 0..db {
                if b != b2 {
                    jm[(a * db + b, a * db + b2)] = ZERO;
                }
            }
        }
    }
    let jlp = flagged_choi(target.choi(), da, db, p)?;
    let jk = flagged_choi(&jm, da, db, p)?;
    let dfb = 2 * db;
    let slack = (m as f64 - lambda).max(0.0);
    let jl2 = (jk - &jlp + dephase_output(&jlp, da, dfb).scale(slack)).unscale(m as f64 - 1.0);

    let psi = PureState::maximally_coherent(m)?
        .projector()
        .into_matrix()
        .transpose();
    let rest = identity(m) - &psi;
    let choi = kron(&psi, &jlp) + kron(&rest, &jl2);
    QuantumChannel::from_choi_tolerant(m * da, dfb, choi, 1e-6)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProtocolCheck {
    pub p_observed: f64,
    pub max_conditional_error: f64,
}

/// `|i⟩⟨i|`, `(|i⟩+|j⟩)` and `(|i⟩+i|j⟩)` projectors; they span all operators.
fn spanning_inputs(d: usize) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(DensityMatrix::basis(d, i)?);
        for j in (i + 1)..d {
            for phase in [ONE, num_complex::Complex64::i()] {
                let mut v = nalgebra::DVector::from_element(d, ZERO);
                v[i] = ONE;
                v[j] = phase;
                out.push(PureState::normalized(v)?.projector());
            }
        }
    }
    Ok(out)
}

/// Runs a flagged protocol on `ω ⊗ ρ` for a spanning set of inputs `ρ`.
///
/// Returns the success weight and the largest trace distance between the
/// conditional flag-0 output and `N(ρ)` (0 when the weight vanishes).
pub fn verify_protocol(
    protocol: &QuantumChannel,
    resource: &DensityMatrix,
    target: &QuantumChannel,
) -> Result<ProtocolCheck> {
    let (dr, da, db) = (resource.dim(), target.dim_in(), target.dim_out());
    if protocol.dim_in() != dr * da || protocol.dim_out() != 2 * db {
        return Err(Error::DimensionMismatch(format!(
            "protocol {} -> {} does not match R A = {dr}x{da} -> F B = 2x{db}",
            protocol.dim_in(),
            protocol.dim_out()
        )));
    }
    let mut weights = Vec::new();
    let mut branches = Vec::new();
    for rho in spanning_inputs(da)? {
        let out = protocol.apply_matrix(&kron(resource.matrix(), rho.matrix()))?;
        let succ = out.view((0, 0), (db, db)).into_owned();
        weights.push(succ.trace().re);
        branches.push((succ, target.apply_matrix(rho.matrix())?));
    }
    let lo = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > 1e-8 {
        return Err(Error::MalformedProtocol(format!(
            "success weight depends on the input (range {lo:.3e} to {hi:.3e})"
        )));
    }
    let p = 0.5 * (lo + hi);
    if p <= 1e-12 {
        return Ok(ProtocolCheck {
            p_observed: p.max(0.0),
            max_conditional_error: 0.0,
        });
    }
    let err = branches
        .iter()
        .map(|(succ, want)| 0.5 * trace_norm(&(succ.unscale(p) - want)))
        .fold(0.0, f64::max);
    Ok(ProtocolCheck {
        p_observed: p,
        max_conditional_error: err,
    })
}
