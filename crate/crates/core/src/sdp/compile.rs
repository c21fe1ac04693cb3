//! Lowering of [`SdpProblem`] to the real standard form of the
//! interior-point core, and recovery of Hermitian values afterwards.
//!
//! A Hermitian variable is parameterized by `u_pq = Re X_pq` (`p <= q`) and
//! `w_pq = Im X_pq` (`p < q`). PSD variables become cone blocks, other PSD
//! expressions get a slack block, and everything else is a free parameter.
//! When no problem data has an imaginary part the optimum can be taken real
//! (average any optimum with its conjugate), so blocks keep their size and
//! the `w` parameters are dropped.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::embed::HermitianEmbedding;
use super::expr::{AffineExpr, LinTerm, Var};
use super::ipm::{self, ConeProgram, ConeRow, IpmSettings, IpmStatus};
use super::{check_feasibility, SdpProblem, SdpSolution, Sense, SolveStatus, SolverConfig};
use crate::quantum::ComplexMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Param {
    U(usize, usize),
    W(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Coord {
    Cone(usize, usize, usize),
    Free(usize),
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    block: usize,
    n: usize,
    embedded: bool,
}

#[derive(Clone, Copy, Debug)]
enum Layout {
    Cone(Slot),
    Free,
}

#[derive(Clone, Copy)]
enum Part {
    Re,
    Im,
}

/// `Re` and `Im` of `coef * X[p, q]` in terms of the parameters.
fn entry_params(p: usize, q: usize, coef: Complex64) -> ([(Param, f64); 2], [(Param, f64); 2]) {
    if p == q {
        let u = Param::U(p, p);
        return ([(u, coef.re), (u, 0.0)], [(u, coef.im), (u, 0.0)]);
    }
    let (lo, hi, sign) = if p < q { (p, q, 1.0) } else { (q, p, -1.0) };
    let (u, w) = (Param::U(lo, hi), Param::W(lo, hi));
    (
        [(u, coef.re), (w, -coef.im * sign)],
        [(u, coef.im), (w, coef.re * sign)],
    )
}

/// Coefficients at or below this fraction of the largest coefficient of
/// their constraint are cancellation noise and are dropped.
const CANCEL_TOL: f64 = 1e-13;

#[derive(Default)]
struct RowAcc {
    coeffs: HashMap<Coord, f64>,
    scale: f64,
}

impl RowAcc {
    fn with_scale(scale: f64) -> Self {
        Self {
            coeffs: HashMap::new(),
            scale,
        }
    }

    fn add(&mut self, c: Coord, v: f64) {
        *self.coeffs.entry(c).or_insert(0.0) += v;
        self.scale = self.scale.max(v.abs());
    }

    fn into_sorted(self) -> Vec<(Coord, f64)> {
        let cut = CANCEL_TOL * self.scale;
        let mut out: Vec<(Coord, f64)> = self
            .coeffs
            .into_iter()
            .filter(|&(_, v)| v.abs() > cut)
            .collect();
        out.sort_by_key(|a| a.0);
        out
    }
}

struct RawRow {
    coeffs: Vec<(Coord, f64)>,
    rhs: f64,
}

struct Builder {
    complex: bool,
    blocks: Vec<usize>,
    layouts: Vec<Layout>,
    free_index: HashMap<(usize, Param), usize>,
    free_params: Vec<(usize, Param)>,
}

impl Builder {
    fn new_slot(&mut self, n: usize) -> Slot {
        let embedded = self.complex && n > 1;
        self.blocks.push(if embedded { 2 * n } else { n });
        Slot {
            block: self.blocks.len() - 1,
            n,
            embedded,
        }
    }

    fn cone_coords(&self, slot: Slot, param: Param, out: &mut Vec<(Coord, f64)>) {
        let b = slot.block;
        match (param, slot.embedded) {
            (Param::U(p, q), false) => out.push((Coord::Cone(b, p, q), 1.0)),
            (Param::W(..), false) => {}
            (Param::U(p, q), true) => {
                let e = HermitianEmbedding::new(slot.n).expect("n >= 1");
                out.extend(
                    e.real_part_coords(p, q)
                        .iter()
                        .map(|&(r, c, w)| (Coord::Cone(b, r, c), w)),
                );
            }
            (Param::W(p, q), true) => {
                let e = HermitianEmbedding::new(slot.n).expect("n >= 1");
                out.extend(
                    e.imag_part_coords(p, q)
                        .iter()
                        .map(|&(r, c, w)| (Coord::Cone(b, r, c), w)),
                );
            }
        }
    }

    fn param_coords(&mut self, var: usize, param: Param, out: &mut Vec<(Coord, f64)>) {
        match self.layouts[var] {
            Layout::Cone(slot) => self.cone_coords(slot, param, out),
            Layout::Free => {
                if matches!(param, Param::W(..)) && !self.complex {
                    return;
                }
                let next = self.free_params.len();
                let idx = *self.free_index.entry((var, param)).or_insert(next);
                if idx == next {
                    self.free_params.push((var, param));
                }
                out.push((Coord::Free(idx), 1.0));
            }
        }
    }

    /// Adds `part(coef * X[at])` to `row`.
    fn add_term(
        &mut self,
        row: &mut RowAcc,
        t: &LinTerm,
        part: Part,
        scratch: &mut Vec<(Coord, f64)>,
    ) {
        let (re, im) = entry_params(t.at.0, t.at.1, t.coef);
        let chosen = match part {
            Part::Re => re,
            Part::Im => im,
        };
        for (param, w) in chosen {
            if w == 0.0 {
                continue;
            }
            scratch.clear();
            self.param_coords(t.var.id, param, scratch);
            for &(coord, cw) in scratch.iter() {
                row.add(coord, w * cw);
            }
        }
    }

    fn finish_row(row: RowAcc, rhs: f64) -> RawRow {
        RawRow {
            coeffs: row.into_sorted(),
            rhs,
        }
    }
}

/// Largest coefficient magnitude of an expression.
fn expr_scale(expr: &AffineExpr) -> f64 {
    expr.terms().iter().fold(0.0, |a, t| a.max(t.coef.norm()))
}

fn bucket_terms(expr: &AffineExpr) -> HashMap<(usize, usize), Vec<LinTerm>> {
    let mut out: HashMap<(usize, usize), Vec<LinTerm>> = HashMap::new();
    for t in expr.terms() {
        out.entry(t.out).or_default().push(*t);
    }
    out
}

pub(super) struct Compiled {
    program: ConeProgram,
    layouts: Vec<Layout>,
    free_params: Vec<(usize, Param)>,
    /// Free parameter index to program column, for parameters that survived.
    free_column: Vec<Option<usize>>,
    /// Raw row index of every program row, and its original norm.
    kept_rows: Vec<(usize, f64)>,
    num_raw_rows: usize,
    sense: Sense,
    obj_const: f64,
}

enum Lowered {
    Program(Compiled),
    /// Presolve proved infeasibility; multipliers over the raw rows.
    Infeasible(Vec<f64>),
    /// A free parameter with nonzero cost appears in no constraint.
    Unbounded,
}

fn lower(p: &SdpProblem) -> Lowered {
    let complex = p.has_complex_data();
    let mut bld = Builder {
        complex,
        blocks: Vec::new(),
        layouts: vec![Layout::Free; p.vars.len()],
        free_index: HashMap::new(),
        free_params: Vec::new(),
    };
    let mut slack_for: Vec<Option<Slot>> = vec![None; p.psd.len()];
    for (k, c) in p.psd.iter().enumerate() {
        match c.expr.as_plain_variable() {
            Some(v) if matches!(bld.layouts[v.id], Layout::Free) => {
                bld.layouts[v.id] = Layout::Cone(bld.new_slot(v.dim));
            }
            _ => slack_for[k] = Some(bld.new_slot(c.expr.shape().0)),
        }
    }

    let mut raw: Vec<RawRow> = Vec::new();
    let mut scratch = Vec::new();
    for eq in &p.equalities {
        let buckets = bucket_terms(&eq.expr);
        let scale = expr_scale(&eq.expr);
        let (n, _) = eq.expr.shape();
        let target = &eq.rhs - eq.expr.constant_part();
        for a in 0..n {
            for b in 0..n {
                let parts: &[Part] = if complex {
                    &[Part::Re, Part::Im]
                } else {
                    &[Part::Re]
                };
                for &part in parts {
                    let mut row = RowAcc::with_scale(scale);
                    if let Some(ts) = buckets.get(&(a, b)) {
                        for t in ts {
                            bld.add_term(&mut row, t, part, &mut scratch);
                        }
                    }
                    let rhs = match part {
                        Part::Re => target[(a, b)].re,
                        Part::Im => target[(a, b)].im,
                    };
                    raw.push(Builder::finish_row(row, rhs));
                }
            }
        }
    }
    for (c, slot) in p.psd.iter().zip(&slack_for) {
        let Some(slot) = *slot else { continue };
        let buckets = bucket_terms(&c.expr);
        let scale = expr_scale(&c.expr);
        let n = slot.n;
        let constant = c.expr.constant_part();
        for a in 0..n {
            for b in a..n {
                let mut parts = vec![(Part::Re, Param::U(a, b))];
                if slot.embedded && a < b {
                    parts.push((Part::Im, Param::W(a, b)));
                }
                for (part, param) in parts {
                    // slack - lin(expr) = const
                    let mut row = RowAcc::with_scale(scale);
                    scratch.clear();
                    bld.cone_coords(slot, param, &mut scratch);
                    for &(coord, w) in &scratch {
                        row.add(coord, w);
                    }
                    if let Some(ts) = buckets.get(&(a, b)) {
                        for t in ts {
                            let neg = LinTerm {
                                coef: -t.coef,
                                ..*t
                            };
                            bld.add_term(&mut row, &neg, part, &mut scratch);
                        }
                    }
                    let rhs = match part {
                        Part::Re => constant[(a, b)].re,
                        Part::Im => constant[(a, b)].im,
                    };
                    raw.push(Builder::finish_row(row, rhs));
                }
            }
        }
    }

    let (sense, obj_terms, obj_const) = match &p.objective {
        Some((sense, e)) => {
            let mut row = RowAcc::default();
            for t in e.terms() {
                bld.add_term(&mut row, t, Part::Re, &mut scratch);
            }
            let sign = if *sense == Sense::Minimize { 1.0 } else { -1.0 };
            let terms: Vec<(Coord, f64)> = row
                .into_sorted()
                .into_iter()
                .map(|(c, v)| (c, sign * v))
                .collect();
            (*sense, terms, sign * e.constant_part()[(0, 0)].re)
        }
        None => (Sense::Minimize, Vec::new(), 0.0),
    };

    // presolve: normalize, drop empty and duplicate rows
    let num_raw_rows = raw.len();
    let mut kept_rows = Vec::new();
    let mut rows = Vec::new();
    let mut b = Vec::new();
    let mut seen: HashMap<Vec<(Coord, i64)>, usize> = HashMap::new();
    let mut normalized: Vec<(Vec<(Coord, f64)>, f64, f64)> = Vec::new();
    for (i, r) in raw.iter().enumerate() {
        let norm = r
            .coeffs
            .iter()
            .map(|&(c, v)| match c {
                Coord::Cone(_, p, q) if p != q => 0.5 * v * v,
                _ => v * v,
            })
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            if r.rhs.abs() > 1e-12 {
                let mut y = vec![0.0; num_raw_rows];
                y[i] = 1.0 / r.rhs;
                return Lowered::Infeasible(y);
            }
            continue;
        }
        let flip = if r.coeffs[0].1 < 0.0 { -1.0 } else { 1.0 };
        let coeffs: Vec<(Coord, f64)> = r
            .coeffs
            .iter()
            .map(|&(c, v)| (c, flip * v / norm))
            .collect();
        let rhs = flip * r.rhs / norm;
        let key: Vec<(Coord, i64)> = coeffs
            .iter()
            .map(|&(c, v)| (c, (v * 1e9).round() as i64))
            .collect();
        if let Some(&k) = seen.get(&key) {
            let (other, other_rhs, other_flip): &(Vec<(Coord, f64)>, f64, f64) = &normalized[k];
            let close = other
                .iter()
                .zip(&coeffs)
                .all(|(a, b)| (a.1 - b.1).abs() <= 1e-12);
            if close {
                if (other_rhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()) {
                    continue;
                }
                // rows agree up to scale but demand different values
                let (j, nj) = kept_rows[k];
                let t = 1.0 / (other_rhs - rhs);
                let mut y = vec![0.0; num_raw_rows];
                y[j] = t * other_flip / nj;
                y[i] = -t * flip / norm;
                return Lowered::Infeasible(y);
            }
        }
        seen.insert(key, normalized.len());
        normalized.push((coeffs.clone(), rhs, flip));
        kept_rows.push((i, norm));
        rows.push(coeffs);
        b.push(rhs);
    }

    // keep only free parameters that some row touches
    let mut used = vec![false; bld.free_params.len()];
    for r in &rows {
        for &(c, _) in r {
            if let Coord::Free(j) = c {
                used[j] = true;
            }
        }
    }
    for &(c, v) in &obj_terms {
        if let Coord::Free(j) = c {
            if !used[j] && v != 0.0 {
                return Lowered::Unbounded;
            }
        }
    }
    let mut free_column = vec![None; bld.free_params.len()];
    let mut nfree = 0;
    for (j, &u) in used.iter().enumerate() {
        if u {
            free_column[j] = Some(nfree);
            nfree += 1;
        }
    }
    let to_row = |coeffs: &[(Coord, f64)]| {
        let mut row = ConeRow::default();
        for &(c, v) in coeffs {
            match c {
                Coord::Cone(k, p, q) => row.cone.push((k, p, q, v)),
                Coord::Free(j) => {
                    if let Some(col) = free_column[j] {
                        row.free.push((col, v));
                    }
                }
            }
        }
        row
    };
    let cone_rows: Vec<ConeRow> = rows.iter().map(|r| to_row(r)).collect();
    let obj_row = to_row(&obj_terms);
    let mut c_free = vec![0.0; nfree];
    for (j, v) in obj_row.free {
        c_free[j] += v;
    }
    Lowered::Program(Compiled {
        program: ConeProgram {
            blocks: bld.blocks,
            nfree,
            rows: cone_rows,
            b,
            c_cone: obj_row.cone,
            c_free,
        },
        layouts: bld.layouts,
        free_params: bld.free_params,
        free_column,
        kept_rows,
        num_raw_rows,
        sense,
        obj_const,
    })
}

impl Compiled {
    fn recover(
        &self,
        p: &SdpProblem,
        x: &[DMatrix<f64>],
        xf: &DVector<f64>,
    ) -> BTreeMap<String, ComplexMatrix> {
        let mut out = BTreeMap::new();
        let mut free_vals: Vec<ComplexMatrix> = p
            .vars
            .iter()
            .map(|v| ComplexMatrix::zeros(v.dim, v.dim))
            .collect();
        for (j, &(var, param)) in self.free_params.iter().enumerate() {
            let val = self.free_column[j].map(|col| xf[col]).unwrap_or(0.0);
            let m = &mut free_vals[var];
            match param {
                Param::U(a, b) => {
                    m[(a, b)].re = val;
                    m[(b, a)].re = val;
                }
                Param::W(a, b) => {
                    m[(a, b)].im = val;
                    m[(b, a)].im = -val;
                }
            }
        }
        for (id, (decl, fv)) in p.vars.iter().zip(free_vals).enumerate() {
            let value = match self.layouts[id] {
                Layout::Free => fv,
                Layout::Cone(slot) if slot.embedded => HermitianEmbedding::new(slot.n)
                    .and_then(|e| e.extract(&x[slot.block]))
                    .expect("block sizes match layout"),
                Layout::Cone(slot) => x[slot.block].map(|v| Complex64::new(v, 0.0)),
            };
            out.insert(decl.name.clone(), value);
        }
        out
    }

    fn raw_multipliers(&self, y: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.num_raw_rows];
        for (k, &(i, norm)) in self.kept_rows.iter().enumerate() {
            out[i] = y[k] / norm;
        }
        out
    }
}

fn infinite(sense: Sense, positive: bool) -> f64 {
    let up = (sense == Sense::Minimize) == positive;
    if up {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

fn column(v: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_iterator(v.len(), 1, v.iter().map(|&x| Complex64::new(x, 0.0)))
}

fn infeasible(sense: Sense, y: Vec<f64>, iterations: usize) -> SdpSolution {
    let mut assignments = BTreeMap::new();
    assignments.insert("farkas_y".to_string(), column(&y));
    SdpSolution {
        status: SolveStatus::Infeasible,
        primal_value: infinite(sense, true),
        dual_value: infinite(sense, true),
        assignments,
        max_equality_residual: f64::NAN,
        min_psd_eigenvalue: f64::NAN,
        iterations,
    }
}

pub(super) fn solve_problem(p: &SdpProblem, cfg: &SolverConfig) -> SdpSolution {
    let sense = p.objective.as_ref().map(|o| o.0).unwrap_or(Sense::Minimize);
    let failure = |iterations| SdpSolution {
        status: SolveStatus::NumericalFailure,
        primal_value: f64::NAN,
        dual_value: f64::NAN,
        assignments: BTreeMap::new(),
        max_equality_residual: f64::NAN,
        min_psd_eigenvalue: f64::NAN,
        iterations,
    };
    if cfg.validate().is_err() {
        return failure(0);
    }
    let compiled = match lower(p) {
        Lowered::Program(c) => c,
        Lowered::Infeasible(y) => return infeasible(sense, y, 0),
        Lowered::Unbounded => {
            return SdpSolution {
                status: SolveStatus::Unbounded,
                primal_value: infinite(sense, false),
                dual_value: infinite(sense, false),
                ..failure(0)
            }
        }
    };
    let settings = IpmSettings {
        tol_feas: cfg.tol_feas,
        tol_gap: cfg.tol_gap,
        max_iterations: cfg.max_iterations,
        row_scale: compiled.kept_rows.iter().map(|&(_, n)| n).collect(),
        obj_offset: compiled.obj_const,
    };
    let out = ipm::solve(&compiled.program, &settings);
    match out.status {
        IpmStatus::PrimalInfeasible => {
            infeasible(sense, compiled.raw_multipliers(&out.y), out.iterations)
        }
        IpmStatus::DualInfeasible => SdpSolution {
            status: SolveStatus::Unbounded,
            primal_value: infinite(sense, false),
            dual_value: infinite(sense, false),
            assignments: compiled.recover(p, &out.x, &out.xf),
            ..failure(out.iterations)
        },
        status => {
            let assignments = compiled.recover(p, &out.x, &out.xf);
            let report = check_feasibility(p, &assignments).expect("every variable is recovered");
            let sign = if compiled.sense == Sense::Minimize {
                1.0
            } else {
                -1.0
            };
            let primal_value = match &p.objective {
                Some((_, e)) => e
                    .evaluate(|v: Var| assignments.get(&p.vars[v.id].name).cloned())
                    .map(|m| m[(0, 0)].re)
                    .unwrap_or(f64::NAN),
                None => 0.0,
            };
            let by: f64 = compiled
                .program
                .b
                .iter()
                .zip(out.y.iter())
                .map(|(b, y)| b * y)
                .sum();
            let dual_value = sign * (by + compiled.obj_const);
            let mut sol = SdpSolution {
                status: SolveStatus::Optimal,
                primal_value,
                dual_value,
                assignments,
                max_equality_residual: report.max_equality_residual,
                min_psd_eigenvalue: report.min_psd_eigenvalue,
                iterations: out.iterations,
            };
            let certified = sol.diagnostics().is_certified(cfg);
            if status != IpmStatus::Optimal || !certified {
                sol.status = SolveStatus::NumericalFailure;
            }
            sol
        }
    }
}
