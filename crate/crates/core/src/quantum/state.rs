use nalgebra::DVector;
use num_complex::Complex64;

use super::{
    c, ensure_finite, ensure_square, hermitian_eigenvalues, hermiticity_deviation, trace,
    trace_norm, ComplexMatrix, CONSTRUCTION_TOL, PSD_TOL,
};
use crate::error::{Error, Result};

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: DVector<Complex64>,
}

impl PureState {
    /// Wraps amplitudes whose squared norm is 1 within `1e-12`.
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState(
                "pure state needs dimension >= 1".into(),
            ));
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("squared norm {norm2} != 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Self::new(amplitudes.unscale(norm))
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(DVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&a| c(a)),
        ))
    }

    /// `|Ψ_m⟩ = m^{-1/2} Σ_j |j⟩`.
    pub fn maximally_coherent(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "maximally coherent state needs m >= 1".into(),
            ));
        }
        Ok(Self {
            amplitudes: DVector::from_element(m, c(1.0 / (m as f64).sqrt())),
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn projector(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix { matrix: m }
    }
}

/// Positive semidefinite, unit-trace Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity (`1e-10`), unit trace (`1e-10`) and
    /// positivity (smallest eigenvalue `>= -1e-9`).
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let d = ensure_square(&matrix)?;
        if d == 0 {
            return Err(Error::InvalidState(
                "density matrix needs dimension >= 1".into(),
            ));
        }
        ensure_finite(&matrix)?;
        let herm = hermiticity_deviation(&matrix);
        if herm > CONSTRUCTION_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = trace(&matrix);
        if (tr - c(1.0)).norm() > CONSTRUCTION_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(&matrix)[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// Maximally mixed state `I/d`.
    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        Ok(Self {
            matrix: ComplexMatrix::identity(d, d).unscale(d as f64),
        })
    }

    /// Incoherent basis projector `|i⟩⟨i|`.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::InvalidArgument(format!(
                "basis index {i} >= dimension {d}"
            )));
        }
        let mut m = ComplexMatrix::zeros(d, d);
        m[(i, i)] = c(1.0);
        Ok(Self { matrix: m })
    }

    /// `Ψ_m`: the rank-one projector with every entry `1/m`.
    pub fn maximally_coherent(m: usize) -> Result<Self> {
        Ok(PureState::maximally_coherent(m)?.projector())
    }

    /// `|+⟩⟨+|` on a qubit.
    pub fn plus() -> Self {
        Self {
            matrix: ComplexMatrix::from_element(2, 2, c(0.5)),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    pub fn is_incoherent(&self, tol: f64) -> bool {
        l1_coherence(self) <= tol
    }
}

/// Half the trace norm of `a - b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(0.5 * trace_norm(&(a.matrix() - b.matrix())))
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_with_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity between dimensions {} and {}",
            rho.dim(),
            psi.dim()
        )));
    }
    let v = psi.amplitudes();
    Ok((v.adjoint() * rho.matrix() * v)[(0, 0)].re)
}

/// Sum of absolute values of the off-diagonal entries.
pub fn l1_coherence(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let d = m.nrows();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                total += m[(i, j)].norm();
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn maximally_coherent_entries() {
        let psi = DensityMatrix::maximally_coherent(2).unwrap();
        assert!(psi.matrix().iter().all(|z| (z - c(0.5)).norm() < 1e-15));
        assert_eq!(
            DensityMatrix::maximally_coherent(1).unwrap(),
            DensityMatrix::basis(1, 0).unwrap()
        );
        assert!(DensityMatrix::maximally_coherent(0).is_err());
    }

    #[test]
    fn l1_of_maximally_coherent() {
        for m in 1..=6 {
            let psi = DensityMatrix::maximally_coherent(m).unwrap();
            assert_abs_diff_eq!(l1_coherence(&psi), (m - 1) as f64, epsilon = 1e-12);
        }
        let diag = DensityMatrix::new(ComplexMatrix::from_diagonal(&DVector::from_vec(vec![
            c(0.2),
            c(0.8),
        ])));
        assert_eq!(l1_coherence(&diag.unwrap()), 0.0);
    }

    #[test]
    fn trace_distance_examples() {
        let psi = DensityMatrix::maximally_coherent(2).unwrap();
        let zero = DensityMatrix::basis(2, 0).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert_abs_diff_eq!(trace_distance(&psi, &psi).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            trace_distance(&psi, &zero).unwrap(),
            0.5f64.sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(trace_distance(&psi, &mixed).unwrap(), 0.5, epsilon = 1e-12);
        assert!(trace_distance(&psi, &DensityMatrix::maximally_mixed(3).unwrap()).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let psi = PureState::from_real(&[0.6, 0.8]).unwrap();
        assert_abs_diff_eq!(
            fidelity_with_pure(&psi.projector(), &psi).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        for n in 2..6 {
            let mixed = DensityMatrix::maximally_mixed(n).unwrap();
            let target = PureState::maximally_coherent(n).unwrap();
            assert_abs_diff_eq!(
                fidelity_with_pure(&mixed, &target).unwrap(),
                1.0 / n as f64,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn rejects_unphysical_matrices() {
        let not_herm = ComplexMatrix::from_row_slice(2, 2, &[c(0.5), c(0.3), c(0.1), c(0.5)]);
        assert!(DensityMatrix::new(not_herm).is_err());
        let bad_trace = ComplexMatrix::identity(2, 2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let negative = ComplexMatrix::from_row_slice(2, 2, &[c(1.5), c(0.0), c(0.0), c(-0.5)]);
        assert!(DensityMatrix::new(negative).is_err());
        assert!(PureState::from_real(&[1.0, 1.0]).is_err());
    }
}
