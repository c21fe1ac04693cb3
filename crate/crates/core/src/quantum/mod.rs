//! Dense complex linear algebra and Choi-matrix channel calculus.
//!
//! Composite systems use row-major indexing: on `A ⊗ B` the basis vector
//! `|a⟩|b⟩` has index `a * d_B + b`. Channels are stored as unnormalized Choi
//! matrices `J = Σ_ij |i⟩⟨j| ⊗ N(|i⟩⟨j|)` with the input system first, so a
//! CPTP channel has `tr J = d_in` and acts as `N(ρ) = tr_A[J (ρᵀ ⊗ I)]`.

mod channel;
mod state;

pub use channel::QuantumChannel;
pub use state::{fidelity_with_pure, l1_coherence, trace_distance, DensityMatrix, PureState};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used for every operator in the crate.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Tolerance on Hermiticity and trace used when constructing states.
pub const CONSTRUCTION_TOL: f64 = 1e-10;
/// Lower bound on the smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of a sequence of matrices, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    factors
        .into_iter()
        .fold(ComplexMatrix::from_element(1, 1, ONE), |acc, f| {
            acc.kronecker(f)
        })
}

pub(crate) fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "matrix has non-finite entries".into(),
        ))
    }
}

/// Splits a composite index into per-subsystem digits (row-major).
fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

fn check_dims(m: &ComplexMatrix, dims: &[usize]) -> Result<usize> {
    let n = ensure_square(m)?;
    let total: usize = dims.iter().product();
    if dims.is_empty() || total != n {
        return Err(Error::DimensionMismatch(format!(
            "subsystem dims {dims:?} do not multiply to matrix dimension {n}"
        )));
    }
    Ok(n)
}

/// Partial trace over the subsystems listed in `traced`.
///
/// The kept subsystems stay in their original order.
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], traced: &[usize]) -> Result<ComplexMatrix> {
    let n = check_dims(m, dims)?;
    if let Some(&bad) = traced.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch(format!(
            "traced subsystem {bad} out of range for {} subsystems",
            dims.len()
        )));
    }
    let kept: Vec<usize> = (0..dims.len()).filter(|k| !traced.contains(k)).collect();
    let kept_dim: usize = kept.iter().map(|&k| dims[k]).product();
    let mut out = ComplexMatrix::zeros(kept_dim, kept_dim);
    let mut di = vec![0; dims.len()];
    let mut dj = vec![0; dims.len()];
    for i in 0..n {
        digits(i, dims, &mut di);
        for j in 0..n {
            digits(j, dims, &mut dj);
            if traced.iter().any(|&k| di[k] != dj[k]) {
                continue;
            }
            let (mut oi, mut oj) = (0, 0);
            for &k in &kept {
                oi = oi * dims[k] + di[k];
                oj = oj * dims[k] + dj[k];
            }
            out[(oi, oj)] += m[(i, j)];
        }
    }
    Ok(out)
}

/// Reorders tensor factors: subsystem `perm[k]` of the input becomes
/// subsystem `k` of the output.
pub fn permute_subsystems(
    m: &ComplexMatrix,
    dims: &[usize],
    perm: &[usize],
) -> Result<ComplexMatrix> {
    let n = check_dims(m, dims)?;
    let mut seen = vec![false; dims.len()];
    if perm.len() != dims.len()
        || perm
            .iter()
            .any(|&p| p >= dims.len() || std::mem::replace(&mut seen[p], true))
    {
        return Err(Error::InvalidArgument(format!(
            "{perm:?} is not a permutation"
        )));
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let map: Vec<usize> = (0..n)
        .map(|i| {
            let mut d = vec![0; dims.len()];
            digits(i, dims, &mut d);
            perm.iter()
                .zip(&new_dims)
                .fold(0, |acc, (&p, &nd)| acc * nd + d[p])
        })
        .collect();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Completely dephasing map: keeps the diagonal, zeroes everything else.
pub fn dephase(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = ensure_square(m)?;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            m[(i, j)]
        } else {
            ZERO
        }
    }))
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Largest absolute entry of `m - m†`.
pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m†) / 2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> DVector<f64> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    DVector::from_vec(vals)
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|v| v.abs()).sum()
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Real rotation `[[cos θ, -sin θ], [sin θ, cos θ]]`, the representative of
/// a qubit unitary up to incoherent unitaries on either side.
pub fn rotation_unitary(theta: f64) -> ComplexMatrix {
    let (s, co) = theta.sin_cos();
    ComplexMatrix::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)])
}

/// Max entry deviation of `u† u` from the identity.
pub fn unitarity_deviation(u: &ComplexMatrix) -> f64 {
    let n = u.ncols();
    max_abs_diff(&(u.adjoint() * u), &identity(n))
}

pub fn maximally_coherent_state(m: usize) -> Result<DensityMatrix> {
    DensityMatrix::maximally_coherent(m)
}

pub fn choi_of_unitary(u: &ComplexMatrix) -> Result<QuantumChannel> {
    QuantumChannel::from_unitary(u)
}

pub fn channel_tensor_power(n: &QuantumChannel, l: usize) -> Result<QuantumChannel> {
    n.tensor_power(l)
}

pub fn replacement_channel(sigma: &DensityMatrix, dim_in: usize) -> Result<QuantumChannel> {
    QuantumChannel::replacement(sigma, dim_in)
}

pub fn apply_channel(n: &QuantumChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    n.apply(rho)
}
