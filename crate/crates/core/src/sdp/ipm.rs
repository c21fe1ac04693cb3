//! Primal-dual interior-point method on the homogeneous self-dual embedding
//! of a standard-form program
//!
//! ```text
//! min  <C, X> + c_fᵀ x_f   s.t.  A(X) + A_f x_f = b,   X ⪰ 0 (block diagonal)
//! ```
//!
//! with Nesterov-Todd scaling and a Mehrotra predictor-corrector.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

/// One equality row. Cone entries are `(block, r, c, v)` with `r <= c` and
/// contribute `v * X[block][r, c]`.
#[derive(Clone, Debug, Default)]
pub(crate) struct ConeRow {
    pub cone: Vec<(usize, usize, usize, f64)>,
    pub free: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub(crate) struct ConeProgram {
    pub blocks: Vec<usize>,
    pub nfree: usize,
    pub rows: Vec<ConeRow>,
    pub b: Vec<f64>,
    /// Objective entries `(block, r, c, v)`, same convention as rows.
    pub c_cone: Vec<(usize, usize, usize, f64)>,
    pub c_free: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    Stalled,
}

#[derive(Clone, Debug)]
pub(crate) struct IpmSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iterations: usize,
    /// Original norms of the normalized rows, for absolute residuals.
    pub row_scale: Vec<f64>,
    /// Constant added to the standard-form objective.
    pub obj_offset: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct IpmOutput {
    pub status: IpmStatus,
    /// For `Optimal` and failures: `X / τ`; for `DualInfeasible`: the ray.
    pub x: Vec<DMatrix<f64>>,
    pub xf: DVector<f64>,
    /// For `PrimalInfeasible`: the certificate with `bᵀy = 1`.
    pub y: DVector<f64>,
    pub iterations: usize,
}

struct Data<'a> {
    prog: &'a ConeProgram,
    m: usize,
    by_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
    af: DMatrix<f64>,
    b: DVector<f64>,
    c: Vec<DMatrix<f64>>,
    cf: DVector<f64>,
    nu: f64,
}

fn sym_from_entries(n: usize, entries: impl Iterator<Item = (usize, usize, f64)>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    for (r, c, v) in entries {
        if r == c {
            out[(r, r)] += v;
        } else {
            out[(r, c)] += 0.5 * v;
            out[(c, r)] += 0.5 * v;
        }
    }
    out
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

impl<'a> Data<'a> {
    fn new(prog: &'a ConeProgram) -> Self {
        let m = prog.rows.len();
        let nb = prog.blocks.len();
        let mut by_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>> = vec![Vec::new(); nb];
        let mut af = DMatrix::zeros(m, prog.nfree);
        for (i, row) in prog.rows.iter().enumerate() {
            let mut per: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nb];
            for &(k, r, c, v) in &row.cone {
                per[k].push((r, c, v));
            }
            for (k, e) in per.into_iter().enumerate() {
                if !e.is_empty() {
                    by_block[k].push((i, e));
                }
            }
            for &(j, v) in &row.free {
                af[(i, j)] += v;
            }
        }
        let c = prog
            .blocks
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                sym_from_entries(
                    n,
                    prog.c_cone
                        .iter()
                        .filter(|e| e.0 == k)
                        .map(|&(_, r, c, v)| (r, c, v)),
                )
            })
            .collect();
        Self {
            prog,
            m,
            by_block,
            af,
            b: DVector::from_column_slice(&prog.b),
            c,
            cf: DVector::from_column_slice(&prog.c_free),
            nu: prog.blocks.iter().sum::<usize>() as f64,
        }
    }

    /// `A_c(X)` over the cone blocks only.
    fn a_cone(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (k, rows) in self.by_block.iter().enumerate() {
            for (i, e) in rows {
                out[*i] += e.iter().map(|&(r, c, v)| v * x[k][(r, c)]).sum::<f64>();
            }
        }
        out
    }

    fn a_full(&self, x: &[DMatrix<f64>], xf: &DVector<f64>) -> DVector<f64> {
        self.a_cone(x) + &self.af * xf
    }

    /// `A_cᵀ y` as symmetric blocks.
    fn at_cone(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.prog
            .blocks
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                sym_from_entries(
                    n,
                    self.by_block[k]
                        .iter()
                        .flat_map(|(i, e)| e.iter().map(move |&(r, c, v)| (r, c, v * y[*i]))),
                )
            })
            .collect()
    }

    /// `M_ij = ⟨A_i, W A_j W⟩`. Sparse pairs use the entrywise formula;
    /// a row dense enough to make that expensive goes through `W A_j W`.
    fn schur(&self, w: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut mm = DMatrix::zeros(self.m, self.m);
        for (k, rows) in self.by_block.iter().enumerate() {
            let wk = &w[k];
            let n = wk.nrows() as f64;
            let mut prefix = 0usize;
            for (jj, (j, ej)) in rows.iter().enumerate() {
                prefix += ej.len();
                let dense = 4.0 * ej.len() as f64 * prefix as f64 > 2.0 * n * n * n;
                let g = dense.then(|| {
                    let aj = sym_from_entries(wk.nrows(), ej.iter().copied());
                    wk * aj * wk
                });
                for (i, ei) in &rows[..=jj] {
                    let s = match &g {
                        Some(g) => ei.iter().map(|&(p, q, u)| u * g[(p, q)]).sum::<f64>(),
                        None => {
                            let mut s = 0.0;
                            for &(p, q, u) in ei {
                                for &(r, t, v) in ej {
                                    s +=
                                        u * v * (wk[(p, r)] * wk[(q, t)] + wk[(p, t)] * wk[(q, r)]);
                                }
                            }
                            0.5 * s
                        }
                    };
                    mm[(*i, *j)] += s;
                    if i != j {
                        mm[(*j, *i)] += s;
                    }
                }
            }
        }
        mm
    }

    fn c_dot(&self, x: &[DMatrix<f64>], xf: &DVector<f64>) -> f64 {
        inner(&self.c, x) + self.cf.dot(xf)
    }
}

enum Factor {
    Chol(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
}

/// Factorization of `[[M, A_f], [A_fᵀ, 0]]` with a small quasi-definite
/// regularization, refined against the exact matrix.
struct Kkt<'a> {
    schur: DMatrix<f64>,
    af: &'a DMatrix<f64>,
    factor: Factor,
}

impl<'a> Kkt<'a> {
    fn new(schur: DMatrix<f64>, af: &'a DMatrix<f64>) -> Option<Self> {
        let m = schur.nrows();
        let f = af.ncols();
        let scale = schur.diagonal().iter().fold(1.0f64, |a, &v| a.max(v.abs()));
        let delta = 1e-14 * scale;
        let factor = if f == 0 {
            let mut reg = schur.clone();
            for i in 0..m {
                reg[(i, i)] += delta;
            }
            match Cholesky::new(reg.clone()) {
                Some(ch) => Factor::Chol(ch),
                None => Factor::Lu(LU::new(reg)),
            }
        } else {
            let mut k = DMatrix::zeros(m + f, m + f);
            k.view_mut((0, 0), (m, m)).copy_from(&schur);
            k.view_mut((0, m), (m, f)).copy_from(af);
            k.view_mut((m, 0), (f, m)).copy_from(&af.transpose());
            for i in 0..m {
                k[(i, i)] += delta;
            }
            for i in m..m + f {
                k[(i, i)] -= delta;
            }
            Factor::Lu(LU::new(k))
        };
        Some(Self { schur, af, factor })
    }

    fn raw_solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.factor {
            Factor::Chol(ch) => Some(ch.solve(rhs)),
            Factor::Lu(lu) => lu.solve(rhs),
        }
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = self.schur.nrows();
        let f = self.af.ncols();
        let (vy, vf) = (v.rows(0, m), v.rows(m, f));
        let mut out = DVector::zeros(m + f);
        out.rows_mut(0, m)
            .copy_from(&(&self.schur * vy + self.af * vf));
        if f > 0 {
            out.rows_mut(m, f).copy_from(&(self.af.transpose() * vy));
        }
        out
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let mut sol = self.raw_solve(rhs)?;
        for _ in 0..3 {
            let res = rhs - self.apply(&sol);
            if res.amax() <= 1e-15 * rhs.amax().max(1e-300) {
                break;
            }
            sol += self.raw_solve(&res)?;
        }
        sol.iter().all(|v| v.is_finite()).then_some(sol)
    }
}

/// NT scaling `R` with `Rᵀ S R = Λ = R⁻¹ X R⁻ᵀ`.
fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let l1 = Cholesky::new(x.clone())?.unpack();
    let l2 = Cholesky::new(s.clone())?.unpack();
    let svd = (l2.transpose() * &l1).svd(false, true);
    let v = svd.v_t?.transpose();
    let lam = svd.singular_values;
    if lam.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let mut r = l1 * v;
    for (j, &l) in lam.iter().enumerate() {
        r.column_mut(j).scale_mut(1.0 / l.sqrt());
    }
    Some((r, lam))
}

/// `(Λ ⋄ G)_ij = 2 G_ij / (λ_i + λ_j)`.
fn lyap_div(lam: &DVector<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| {
        2.0 * g[(i, j)] / (lam[i] + lam[j])
    })
}

/// Largest `α` keeping `diag(λ) + α D ⪰ 0` (infinite if unconstrained).
fn max_step(lam: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let n = lam.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| d[(i, j)] / (lam[i] * lam[j]).sqrt());
    let mut sym = scaled;
    symmetrize(&mut sym);
    let min = sym
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        -1.0 / min
    } else {
        f64::INFINITY
    }
}

struct Scaling {
    r: Vec<DMatrix<f64>>,
    lam: Vec<DVector<f64>>,
    w: Vec<DMatrix<f64>>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dxf: DVector<f64>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dtau: f64,
    dkappa: f64,
    dx_scaled: Vec<DMatrix<f64>>,
    ds_scaled: Vec<DMatrix<f64>>,
}

struct Newton<'d, 'a> {
    data: &'d Data<'a>,
    sc: &'d Scaling,
    kkt: Kkt<'d>,
    u1: DVector<f64>,
    v1: DVector<f64>,
    dx1: Vec<DMatrix<f64>>,
    denom_base: f64,
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rdf: DVector<f64>,
    rg: f64,
}

impl<'d, 'a> Newton<'d, 'a> {
    fn new(data: &'d Data<'a>, sc: &'d Scaling) -> Option<Self> {
        let m = data.m;
        let f = data.prog.nfree;
        let kkt = Kkt::new(data.schur(&sc.w), &data.af)?;
        let wcw: Vec<DMatrix<f64>> = sc.w.iter().zip(&data.c).map(|(w, c)| w * c * w).collect();
        let mut rhs = DVector::zeros(m + f);
        rhs.rows_mut(0, m).copy_from(&(&data.b + data.a_cone(&wcw)));
        rhs.rows_mut(m, f).copy_from(&data.cf);
        let sol = kkt.solve(&rhs)?;
        let u1 = sol.rows(0, m).into_owned();
        let v1 = sol.rows(m, f).into_owned();
        let atu = data.at_cone(&u1);
        let dx1: Vec<DMatrix<f64>> =
            sc.w.iter()
                .zip(atu.iter().zip(&data.c))
                .map(|(w, (a, c))| w * (a - c) * w)
                .collect();
        let denom_base = data.b.dot(&u1) - inner(&data.c, &dx1) - data.cf.dot(&v1);
        Some(Self {
            data,
            sc,
            kkt,
            u1,
            v1,
            dx1,
            denom_base,
        })
    }

    fn direction(
        &self,
        res: &Residuals,
        rc: &[DMatrix<f64>],
        r_tk: f64,
        eta: f64,
        tau: f64,
        kappa: f64,
    ) -> Option<Direction> {
        let data = self.data;
        let sc = self.sc;
        let m = data.m;
        let f = data.prog.nfree;
        let g: Vec<DMatrix<f64>> = sc.lam.iter().zip(rc).map(|(l, r)| lyap_div(l, r)).collect();
        let q: Vec<DMatrix<f64>> =
            sc.r.iter()
                .zip(&g)
                .map(|(r, g)| r * g * r.transpose())
                .collect();
        let inner_term: Vec<DMatrix<f64>> = q
            .iter()
            .zip(sc.w.iter().zip(&res.rd))
            .map(|(q, (w, rd))| q + (w * rd * w) * eta)
            .collect();
        let mut rhs = DVector::zeros(m + f);
        rhs.rows_mut(0, m)
            .copy_from(&(-(&res.rp * eta) - data.a_cone(&inner_term)));
        rhs.rows_mut(m, f).copy_from(&(-(&res.rdf * eta)));
        let sol = self.kkt.solve(&rhs)?;
        let u0 = sol.rows(0, m).into_owned();
        let v0 = sol.rows(m, f).into_owned();
        let atu0 = data.at_cone(&u0);
        let dx0: Vec<DMatrix<f64>> = q
            .iter()
            .zip(sc.w.iter().zip(atu0.iter().zip(&res.rd)))
            .map(|(q, (w, (a, rd)))| q + w * (a + rd * eta) * w)
            .collect();
        let num =
            -eta * res.rg - data.b.dot(&u0) + inner(&data.c, &dx0) + data.cf.dot(&v0) + r_tk / tau;
        let den = self.denom_base + kappa / tau;
        let dtau = num / den;
        if !dtau.is_finite() {
            return None;
        }
        let dy = &u0 + &self.u1 * dtau;
        let dxf = &v0 + &self.v1 * dtau;
        let dx: Vec<DMatrix<f64>> = dx0
            .iter()
            .zip(&self.dx1)
            .map(|(a, b)| {
                let mut d = a + b * dtau;
                symmetrize(&mut d);
                d
            })
            .collect();
        let aty = data.at_cone(&dy);
        let ds: Vec<DMatrix<f64>> = aty
            .iter()
            .zip(data.c.iter().zip(&res.rd))
            .map(|(a, (c, rd))| {
                let mut d = -a + c * dtau - rd * eta;
                symmetrize(&mut d);
                d
            })
            .collect();
        let ds_scaled: Vec<DMatrix<f64>> =
            sc.r.iter()
                .zip(&ds)
                .map(|(r, d)| {
                    let mut t = r.transpose() * d * r;
                    symmetrize(&mut t);
                    t
                })
                .collect();
        let dx_scaled: Vec<DMatrix<f64>> = g
            .iter()
            .zip(&ds_scaled)
            .map(|(g, d)| {
                let mut t = g - d;
                symmetrize(&mut t);
                t
            })
            .collect();
        let dkappa = (r_tk - kappa * dtau) / tau;
        Some(Direction {
            dx,
            dxf,
            dy,
            ds,
            dtau,
            dkappa,
            dx_scaled,
            ds_scaled,
        })
    }
}

fn step_to_boundary(sc: &Scaling, d: &Direction, tau: f64, kappa: f64) -> f64 {
    let mut alpha = f64::INFINITY;
    for (lam, (dx, ds)) in sc.lam.iter().zip(d.dx_scaled.iter().zip(&d.ds_scaled)) {
        alpha = alpha.min(max_step(lam, dx)).min(max_step(lam, ds));
    }
    if d.dtau < 0.0 {
        alpha = alpha.min(-tau / d.dtau);
    }
    if d.dkappa < 0.0 {
        alpha = alpha.min(-kappa / d.dkappa);
    }
    alpha
}

fn frob(blocks: &[DMatrix<f64>]) -> f64 {
    blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
}

pub(crate) fn solve(prog: &ConeProgram, settings: &IpmSettings) -> IpmOutput {
    let data = Data::new(prog);
    let nb = prog.blocks.len();
    let mut x: Vec<DMatrix<f64>> = prog
        .blocks
        .iter()
        .map(|&n| DMatrix::identity(n, n))
        .collect();
    let mut s = x.clone();
    let mut xf = DVector::zeros(prog.nfree);
    let mut y = DVector::zeros(data.m);
    let (mut tau, mut kappa) = (1.0f64, 1.0f64);
    let norm_c = (frob(&data.c).powi(2) + data.cf.norm_squared()).sqrt();

    let finish = |status, x: &[DMatrix<f64>], xf: &DVector<f64>, y: &DVector<f64>, tau: f64, it| {
        let x = x.iter().map(|b| b / tau).collect();
        IpmOutput {
            status,
            x,
            xf: xf / tau,
            y: y / tau,
            iterations: it,
        }
    };

    for it in 0..=settings.max_iterations {
        // residuals of the embedding
        let rp = data.a_full(&x, &xf) - &data.b * tau;
        let aty = data.at_cone(&y);
        let rd: Vec<DMatrix<f64>> = aty
            .iter()
            .zip(s.iter().zip(&data.c))
            .map(|(a, (s, c))| a + s - c * tau)
            .collect();
        let atyf = data.af.transpose() * &y;
        let rdf = &atyf - &data.cf * tau;
        let cx = data.c_dot(&x, &xf);
        let by = data.b.dot(&y);
        let rg = by - cx - kappa;

        let pobj = cx / tau + settings.obj_offset;
        let dobj = by / tau + settings.obj_offset;
        let pres_abs = rp
            .iter()
            .zip(&settings.row_scale)
            .map(|(r, sc)| (r * sc).abs())
            .fold(0.0, f64::max)
            / tau;
        let dres = (frob(&rd).powi(2) + rdf.norm_squared()).sqrt() / tau / (1.0 + norm_c);
        let gap = (pobj - dobj).abs();
        if pres_abs <= 0.5 * settings.tol_feas
            && dres <= settings.tol_feas
            && gap <= 0.5 * settings.tol_gap * (1.0 + pobj.abs())
        {
            return finish(IpmStatus::Optimal, &x, &xf, &y, tau, it);
        }
        if by > 0.0 {
            let dual_ray = (frob(&aty.iter().zip(&s).map(|(a, s)| a + s).collect::<Vec<_>>())
                .powi(2)
                + atyf.norm_squared())
            .sqrt();
            if dual_ray / by <= settings.tol_feas {
                return IpmOutput {
                    status: IpmStatus::PrimalInfeasible,
                    x: x.clone(),
                    xf: xf.clone(),
                    y: &y / by,
                    iterations: it,
                };
            }
        }
        if cx < 0.0 {
            let ray = data.a_full(&x, &xf).norm();
            if ray / -cx <= settings.tol_feas {
                return IpmOutput {
                    status: IpmStatus::DualInfeasible,
                    x: x.iter().map(|b| b / -cx).collect(),
                    xf: &xf / -cx,
                    y: y.clone(),
                    iterations: it,
                };
            }
        }
        if it == settings.max_iterations {
            return finish(IpmStatus::MaxIterations, &x, &xf, &y, tau, it);
        }

        let mut r = Vec::with_capacity(nb);
        let mut lam = Vec::with_capacity(nb);
        for (xb, sb) in x.iter().zip(&s) {
            match nt_scaling(xb, sb) {
                Some((rb, lb)) => {
                    r.push(rb);
                    lam.push(lb);
                }
                None => return finish(IpmStatus::Stalled, &x, &xf, &y, tau, it),
            }
        }
        let w = r.iter().map(|rb| rb * rb.transpose()).collect();
        let sc = Scaling { r, lam, w };
        let mu = (inner(&x, &s) + tau * kappa) / (data.nu + 1.0);
        let res = Residuals { rp, rd, rdf, rg };

        let Some(newton) = Newton::new(&data, &sc) else {
            return finish(IpmStatus::Stalled, &x, &xf, &y, tau, it);
        };
        // predictor
        let rc_aff: Vec<DMatrix<f64>> = sc
            .lam
            .iter()
            .map(|l| -DMatrix::from_diagonal(&l.map(|v| v * v)))
            .collect();
        let Some(aff) = newton.direction(&res, &rc_aff, -tau * kappa, 1.0, tau, kappa) else {
            return finish(IpmStatus::Stalled, &x, &xf, &y, tau, it);
        };
        let alpha_aff = step_to_boundary(&sc, &aff, tau, kappa).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);
        // corrector
        let rc: Vec<DMatrix<f64>> = sc
            .lam
            .iter()
            .zip(aff.dx_scaled.iter().zip(&aff.ds_scaled))
            .map(|(l, (dx, ds))| {
                let n = l.len();
                let prod = dx * ds;
                let jordan = (&prod + prod.transpose()) * 0.5;
                DMatrix::from_fn(n, n, |i, j| {
                    let base = if i == j {
                        sigma * mu - l[i] * l[i]
                    } else {
                        0.0
                    };
                    base - jordan[(i, j)]
                })
            })
            .collect();
        let r_tk = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        let Some(dir) = newton.direction(&res, &rc, r_tk, 1.0 - sigma, tau, kappa) else {
            return finish(IpmStatus::Stalled, &x, &xf, &y, tau, it);
        };
        let alpha = (0.99 * step_to_boundary(&sc, &dir, tau, kappa)).min(1.0);
        if !(alpha > 1e-12) {
            return finish(IpmStatus::Stalled, &x, &xf, &y, tau, it);
        }
        for k in 0..nb {
            x[k] += &dir.dx[k] * alpha;
            s[k] += &dir.ds[k] * alpha;
            symmetrize(&mut x[k]);
            symmetrize(&mut s[k]);
        }
        xf += &dir.dxf * alpha;
        y += &dir.dy * alpha;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        if !(tau > 0.0 && kappa > 0.0) {
            return finish(
                IpmStatus::Stalled,
                &x,
                &xf,
                &y,
                tau.max(f64::MIN_POSITIVE),
                it,
            );
        }
    }
    unreachable!("loop returns at max_iterations")
}
