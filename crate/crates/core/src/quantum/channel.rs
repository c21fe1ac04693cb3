use super::{
    ensure_finite, ensure_square, hermiticity_deviation, identity, kron, max_abs_diff,
    min_eigenvalue, partial_trace, permute_subsystems, unitarity_deviation, ComplexMatrix,
    DensityMatrix, ONE, PSD_TOL, ZERO,
};
use crate::error::{Error, Result};

/// Linear map `A → B` stored as its unnormalized Choi matrix on `A ⊗ B`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumChannel {
    dim_in: usize,
    dim_out: usize,
    choi: ComplexMatrix,
    cptp: bool,
}

impl QuantumChannel {
    /// Builds a CPTP channel, validating the Choi matrix (PSD and
    /// `tr_B J = I_A`, both within `1e-9`).
    pub fn from_choi(dim_in: usize, dim_out: usize, choi: ComplexMatrix) -> Result<Self> {
        Self::from_choi_tolerant(dim_in, dim_out, choi, PSD_TOL)
    }

    /// Like [`from_choi`](Self::from_choi) with a caller-chosen tolerance,
    /// for Choi matrices that come out of a numerical solver.
    pub fn from_choi_tolerant(
        dim_in: usize,
        dim_out: usize,
        choi: ComplexMatrix,
        tol: f64,
    ) -> Result<Self> {
        let ch = Self::from_choi_unchecked(dim_in, dim_out, choi)?;
        let dev = ch.cptp_deviation();
        if dev > tol {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix is not CPTP (deviation {dev:.3e})"
            )));
        }
        Ok(Self { cptp: true, ..ch })
    }

    /// Wraps an arbitrary linear map; `is_cptp()` reports false.
    pub fn from_choi_unchecked(dim_in: usize, dim_out: usize, choi: ComplexMatrix) -> Result<Self> {
        let n = ensure_square(&choi)?;
        if dim_in == 0 || dim_out == 0 || n != dim_in * dim_out {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix of size {n} for dims {dim_in} -> {dim_out}"
            )));
        }
        ensure_finite(&choi)?;
        Ok(Self {
            dim_in,
            dim_out,
            choi,
            cptp: false,
        })
    }

    /// Max of the PSD violation and the trace-preservation violation.
    pub fn cptp_deviation(&self) -> f64 {
        let herm = hermiticity_deviation(&self.choi);
        let neg = (-min_eigenvalue(&self.choi)).max(0.0);
        let marginal = partial_trace(&self.choi, &[self.dim_in, self.dim_out], &[1])
            .map(|m| max_abs_diff(&m, &identity(self.dim_in)))
            .unwrap_or(f64::INFINITY);
        herm.max(neg).max(marginal)
    }

    pub fn from_unitary(u: &ComplexMatrix) -> Result<Self> {
        let d = ensure_square(u)?;
        let dev = unitarity_deviation(u);
        if dev > 1e-10 {
            return Err(Error::NotUnitary { deviation: dev });
        }
        // J = |v⟩⟨v| with v = Σ_i |i⟩ ⊗ U|i⟩
        let mut v = ComplexMatrix::zeros(d * d, 1);
        for i in 0..d {
            for b in 0..d {
                v[(i * d + b, 0)] = u[(b, i)];
            }
        }
        Ok(Self {
            dim_in: d,
            dim_out: d,
            choi: &v * v.adjoint(),
            cptp: true,
        })
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::from_unitary(&identity(d))
    }

    /// Completely dephasing channel `Δ` on dimension `d`.
    pub fn completely_dephasing(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        let mut choi = ComplexMatrix::zeros(d * d, d * d);
        for i in 0..d {
            choi[(i * d + i, i * d + i)] = ONE;
        }
        Ok(Self {
            dim_in: d,
            dim_out: d,
            choi,
            cptp: true,
        })
    }

    /// `ρ ↦ tr[ρ] σ`; Choi `I_A ⊗ σ`.
    pub fn replacement(sigma: &DensityMatrix, dim_in: usize) -> Result<Self> {
        if dim_in == 0 {
            return Err(Error::InvalidArgument(
                "input dimension must be >= 1".into(),
            ));
        }
        Ok(Self {
            dim_in,
            dim_out: sigma.dim(),
            choi: kron(&identity(dim_in), sigma.matrix()),
            cptp: true,
        })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn is_cptp(&self) -> bool {
        self.cptp
    }

    /// `N ⊗ M` with inputs ordered `A_1 A_2` and outputs `B_1 B_2`.
    pub fn tensor(&self, other: &QuantumChannel) -> QuantumChannel {
        let raw = kron(&self.choi, &other.choi);
        let dims = [self.dim_in, self.dim_out, other.dim_in, other.dim_out];
        let choi = permute_subsystems(&raw, &dims, &[0, 2, 1, 3]).expect("dims are consistent");
        QuantumChannel {
            dim_in: self.dim_in * other.dim_in,
            dim_out: self.dim_out * other.dim_out,
            choi,
            cptp: self.cptp && other.cptp,
        }
    }

    /// `N^{⊗l}`.
    pub fn tensor_power(&self, l: usize) -> Result<QuantumChannel> {
        if l == 0 {
            return Err(Error::InvalidArgument("tensor power needs l >= 1".into()));
        }
        let mut acc = self.clone();
        for _ in 1..l {
            acc = acc.tensor(self);
        }
        Ok(acc)
    }

    /// Applies the map to an arbitrary operator on the input space.
    pub fn apply_matrix(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.nrows() != self.dim_in || x.ncols() != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "input operator {}x{} for channel with input dim {}",
                x.nrows(),
                x.ncols(),
                self.dim_in
            )));
        }
        let (da, db) = (self.dim_in, self.dim_out);
        let mut out = ComplexMatrix::zeros(db, db);
        for a in 0..da {
            for a2 in 0..da {
                let w = x[(a, a2)];
                if w == ZERO {
                    continue;
                }
                for b in 0..db {
                    for b2 in 0..db {
                        out[(b, b2)] += w * self.choi[(a * db + b, a2 * db + b2)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Output state; requires a CPTP channel.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let out = self.apply_matrix(rho.matrix())?;
        if self.cptp {
            DensityMatrix::new(out)
        } else {
            Err(Error::InvalidChannel(
                "apply() needs a CPTP channel; use apply_matrix".into(),
            ))
        }
    }

    /// `N(|i⟩⟨j|)`, the `(i, j)` output block of the Choi matrix.
    pub fn choi_block(&self, i: usize, j: usize) -> ComplexMatrix {
        let db = self.dim_out;
        self.choi.view((i * db, j * db), (db, db)).into_owned()
    }
}
