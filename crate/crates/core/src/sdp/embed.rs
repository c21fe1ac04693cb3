use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::ComplexMatrix;

/// Real symmetric representation `[[Re H, -Im H], [Im H, Re H]]` of a
/// `d x d` Hermitian block.
///
/// The map is a `*`-homomorphism, so it preserves positivity in both
/// directions and doubles every eigenvalue's multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HermitianEmbedding {
    dim: usize,
}

impl HermitianEmbedding {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "embedding needs dimension >= 1".into(),
            ));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn real_dim(&self) -> usize {
        2 * self.dim
    }

    pub fn embed(&self, h: &ComplexMatrix) -> Result<DMatrix<f64>> {
        let d = self.dim;
        if h.nrows() != d || h.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "embedding of dimension {d} applied to {}x{} matrix",
                h.nrows(),
                h.ncols()
            )));
        }
        let mut y = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                let z = h[(i, j)];
                y[(i, j)] = z.re;
                y[(d + i, d + j)] = z.re;
                y[(i, d + j)] = -z.im;
                y[(d + i, j)] = z.im;
            }
        }
        Ok(y)
    }

    /// Inverse map; on matrices outside the image it returns the nearest
    /// preimage `(Y11 + Y22)/2 + i (Y21 - Y12)/2`, which keeps positivity.
    pub fn extract(&self, y: &DMatrix<f64>) -> Result<ComplexMatrix> {
        let d = self.dim;
        if y.nrows() != 2 * d || y.ncols() != 2 * d {
            return Err(Error::DimensionMismatch(format!(
                "expected {0}x{0} real matrix, got {1}x{2}",
                2 * d,
                y.nrows(),
                y.ncols()
            )));
        }
        Ok(ComplexMatrix::from_fn(d, d, |i, j| {
            Complex64::new(
                0.5 * (y[(i, j)] + y[(d + i, d + j)]),
                0.5 * (y[(d + i, j)] - y[(i, d + j)]),
            )
        }))
    }

    /// Entries `(row, col, weight)` of the upper triangle whose weighted sum
    /// is `Re H[p, q]`.
    pub fn real_part_coords(&self, p: usize, q: usize) -> [(usize, usize, f64); 2] {
        let d = self.dim;
        let (p, q) = (p.min(q), p.max(q));
        [(p, q, 0.5), (d + p, d + q, 0.5)]
    }

    /// Entries `(row, col, weight)` of the upper triangle whose weighted sum
    /// is `Im H[p, q]`, for `p < q`.
    pub fn imag_part_coords(&self, p: usize, q: usize) -> [(usize, usize, f64); 2] {
        let d = self.dim;
        debug_assert!(p < q);
        [(q, d + p, 0.5), (p, d + q, -0.5)]
    }
}

/// Descriptor for the real symmetric embedding of a `d x d` Hermitian block.
pub fn embed_hermitian(d: usize) -> Result<HermitianEmbedding> {
    HermitianEmbedding::new(d)
}
