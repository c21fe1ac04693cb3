use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::ComplexMatrix;

/// Handle to a Hermitian matrix variable of an [`SdpProblem`](super::SdpProblem).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub(crate) id: usize,
    pub(crate) dim: usize,
}

impl Var {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self) -> usize {
        self.id
    }
}

/// One coefficient of a linear map: `out[out] += coef * var[at]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct LinTerm {
    pub out: (usize, usize),
    pub var: Var,
    pub at: (usize, usize),
    pub coef: Complex64,
}

/// Matrix-valued affine function of the problem variables.
///
/// The linear part is kept as a sparse list of entry-to-entry coefficients,
/// which covers every map the channel programs need (partial traces,
/// multiplication by constants, block selection, dephasing).
#[derive(Clone, Debug, PartialEq)]
pub struct AffineExpr {
    rows: usize,
    cols: usize,
    constant: ComplexMatrix,
    terms: Vec<LinTerm>,
}

impl AffineExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            constant: ComplexMatrix::zeros(rows, cols),
            terms: Vec::new(),
        }
    }

    pub fn constant(m: ComplexMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            constant: m,
            terms: Vec::new(),
        }
    }

    /// The variable itself.
    pub fn var(v: Var) -> Self {
        let n = v.dim;
        let mut terms = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                terms.push(LinTerm {
                    out: (i, j),
                    var: v,
                    at: (i, j),
                    coef: Complex64::new(1.0, 0.0),
                });
            }
        }
        Self {
            rows: n,
            cols: n,
            constant: ComplexMatrix::zeros(n, n),
            terms,
        }
    }

    /// `x * m` for a 1x1 variable `x`.
    pub fn scalar_times(x: Var, m: &ComplexMatrix) -> Result<Self> {
        if x.dim != 1 {
            return Err(Error::MalformedProblem(format!(
                "scalar_times needs a 1x1 variable, got {0}x{0}",
                x.dim
            )));
        }
        let mut terms = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != Complex64::new(0.0, 0.0) {
                    terms.push(LinTerm {
                        out: (i, j),
                        var: x,
                        at: (0, 0),
                        coef: m[(i, j)],
                    });
                }
            }
        }
        Ok(Self {
            rows: m.nrows(),
            cols: m.ncols(),
            constant: ComplexMatrix::zeros(m.nrows(), m.ncols()),
            terms,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn constant_part(&self) -> &ComplexMatrix {
        &self.constant
    }

    pub(crate) fn terms(&self) -> &[LinTerm] {
        &self.terms
    }

    /// Variables referenced by the linear part.
    pub fn variables(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.terms.iter().map(|t| t.var).collect();
        v.sort();
        v.dedup();
        v
    }

    fn same_shape(&self, other: &Self, op: &str) {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch in AffineExpr {op}"
        );
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.constant *= Complex64::new(s, 0.0);
        for t in &mut self.terms {
            t.coef *= s;
        }
        self
    }

    pub fn scale_complex(mut self, s: Complex64) -> Self {
        self.constant *= s;
        for t in &mut self.terms {
            t.coef *= s;
        }
        self
    }

    pub fn plus_constant(mut self, m: &ComplexMatrix) -> Self {
        assert_eq!(
            (m.nrows(), m.ncols()),
            (self.rows, self.cols),
            "shape mismatch"
        );
        self.constant += m;
        self
    }

    /// Merges duplicate coefficients and drops exact zeros.
    pub fn compact(mut self) -> Self {
        let mut index: HashMap<((usize, usize), usize, (usize, usize)), usize> = HashMap::new();
        let mut merged: Vec<LinTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            let key = (t.out, t.var.id, t.at);
            match index.get(&key) {
                Some(&k) => merged[k].coef += t.coef,
                None => {
                    index.insert(key, merged.len());
                    merged.push(t);
                }
            }
        }
        merged.retain(|t| t.coef.norm() != 0.0);
        self.terms = merged;
        self
    }

    fn map_outputs(
        self,
        rows: usize,
        cols: usize,
        f: impl Fn(usize, usize) -> Option<(usize, usize)>,
    ) -> Self {
        let mut constant = ComplexMatrix::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if let Some((a, b)) = f(i, j) {
                    constant[(a, b)] += self.constant[(i, j)];
                }
            }
        }
        let terms = self
            .terms
            .into_iter()
            .filter_map(|t| f(t.out.0, t.out.1).map(|out| LinTerm { out, ..t }))
            .collect();
        Self {
            rows,
            cols,
            constant,
            terms,
        }
        .compact()
    }

    /// Partial trace over the listed subsystems of a square expression.
    pub fn partial_trace(self, dims: &[usize], traced: &[usize]) -> Result<Self> {
        let n: usize = dims.iter().product();
        if self.rows != n || self.cols != n || traced.iter().any(|&k| k >= dims.len()) {
            return Err(Error::DimensionMismatch(format!(
                "partial trace of {}x{} expression over dims {dims:?}",
                self.rows, self.cols
            )));
        }
        let kept: Vec<usize> = (0..dims.len()).filter(|k| !traced.contains(k)).collect();
        let kept_dim: usize = kept.iter().map(|&k| dims[k]).product();
        let split = |mut idx: usize| {
            let mut d = vec![0; dims.len()];
            for k in (0..dims.len()).rev() {
                d[k] = idx % dims[k];
                idx /= dims[k];
            }
            d
        };
        let digits: Vec<Vec<usize>> = (0..n).map(split).collect();
        let reduce = |d: &[usize]| kept.iter().fold(0, |acc, &k| acc * dims[k] + d[k]);
        Ok(self.map_outputs(kept_dim, kept_dim, |i, j| {
            let (di, dj) = (&digits[i], &digits[j]);
            if traced.iter().all(|&k| di[k] == dj[k]) {
                Some((reduce(di), reduce(dj)))
            } else {
                None
            }
        }))
    }

    /// Full trace as a 1x1 expression.
    pub fn trace(self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.map_outputs(1, 1, |i, j| (i == j).then_some((0, 0))))
    }

    /// Sub-block with top-left corner `(r0, c0)`.
    pub fn block(self, r0: usize, c0: usize, nr: usize, nc: usize) -> Result<Self> {
        if r0 + nr > self.rows || c0 + nc > self.cols {
            return Err(Error::DimensionMismatch("block out of range".into()));
        }
        Ok(self.map_outputs(nr, nc, |i, j| {
            (i >= r0 && i < r0 + nr && j >= c0 && j < c0 + nc).then(|| (i - r0, j - c0))
        }))
    }

    /// Keeps only the off-diagonal entries.
    pub fn off_diagonal(self) -> Self {
        let (r, c) = (self.rows, self.cols);
        self.map_outputs(r, c, |i, j| (i != j).then_some((i, j)))
    }

    /// Keeps only the diagonal entries (the dephased expression).
    pub fn diagonal_part(self) -> Self {
        let (r, c) = (self.rows, self.cols);
        self.map_outputs(r, c, |i, j| (i == j).then_some((i, j)))
    }

    /// `self * m` for a constant matrix `m`.
    pub fn mul_right(self, m: &ComplexMatrix) -> Result<Self> {
        if m.nrows() != self.cols {
            return Err(Error::DimensionMismatch("mul_right shape".into()));
        }
        let cols = m.ncols();
        let mut nz: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); m.nrows()];
        for k in 0..m.nrows() {
            for j in 0..cols {
                if m[(k, j)].norm() != 0.0 {
                    nz[k].push((j, m[(k, j)]));
                }
            }
        }
        let mut terms = Vec::new();
        for t in &self.terms {
            for &(j, w) in &nz[t.out.1] {
                terms.push(LinTerm {
                    out: (t.out.0, j),
                    coef: t.coef * w,
                    ..*t
                });
            }
        }
        Ok(Self {
            rows: self.rows,
            cols,
            constant: &self.constant * m,
            terms,
        }
        .compact())
    }

    /// `m * self` for a constant matrix `m`.
    pub fn mul_left(self, m: &ComplexMatrix) -> Result<Self> {
        if m.ncols() != self.rows {
            return Err(Error::DimensionMismatch("mul_left shape".into()));
        }
        let rows = m.nrows();
        let mut nz: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); m.ncols()];
        for i in 0..rows {
            for k in 0..m.ncols() {
                if m[(i, k)].norm() != 0.0 {
                    nz[k].push((i, m[(i, k)]));
                }
            }
        }
        let mut terms = Vec::new();
        for t in &self.terms {
            for &(i, w) in &nz[t.out.0] {
                terms.push(LinTerm {
                    out: (i, t.out.1),
                    coef: w * t.coef,
                    ..*t
                });
            }
        }
        Ok(Self {
            rows,
            cols: self.cols,
            constant: m * &self.constant,
            terms,
        }
        .compact())
    }

    /// Evaluates the expression at concrete variable values.
    pub fn evaluate(
        &self,
        value_of: impl Fn(Var) -> Option<ComplexMatrix>,
    ) -> Result<ComplexMatrix> {
        let mut out = self.constant.clone();
        let mut cache: HashMap<usize, ComplexMatrix> = HashMap::new();
        for t in &self.terms {
            if !cache.contains_key(&t.var.id) {
                let m = value_of(t.var)
                    .ok_or_else(|| Error::MissingVariable(format!("#{}", t.var.id)))?;
                cache.insert(t.var.id, m);
            }
            out[t.out] += t.coef * cache[&t.var.id][t.at];
        }
        Ok(out)
    }

    /// True when the linear part is exactly the identity map of one variable
    /// and the constant vanishes.
    pub(crate) fn as_plain_variable(&self) -> Option<Var> {
        let v = self.terms.first()?.var;
        if self.rows != v.dim || self.cols != v.dim || self.terms.len() != v.dim * v.dim {
            return None;
        }
        if self.constant.iter().any(|z| z.norm() != 0.0) {
            return None;
        }
        let mut seen = vec![false; v.dim * v.dim];
        for t in &self.terms {
            if t.var != v || t.out != t.at || t.coef != Complex64::new(1.0, 0.0) {
                return None;
            }
            seen[t.out.0 * v.dim + t.out.1] = true;
        }
        seen.iter().all(|&s| s).then_some(v)
    }

    pub(crate) fn has_complex_data(&self) -> bool {
        self.constant.iter().any(|z| z.im != 0.0) || self.terms.iter().any(|t| t.coef.im != 0.0)
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        self.same_shape(&rhs, "add");
        self.constant += rhs.constant;
        self.terms.extend(rhs.terms);
        self.compact()
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        self + rhs.scale(-1.0)
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scale(-1.0)
    }
}

impl Mul<AffineExpr> for f64 {
    type Output = AffineExpr;
    fn mul(self, rhs: AffineExpr) -> AffineExpr {
        rhs.scale(self)
    }
}
