//! Dense standard-form linear programming: `min cᵀx  s.t.  Ax = b, x ≥ 0`.
//!
//! [`solve_lp`] is a two-phase revised primal simplex with an explicit basis
//! inverse, refactored from scratch every 50 pivots. Entering columns are
//! priced by most negative reduced cost; a run of degenerate pivots switches
//! to Bland's smallest-index rule until the objective moves again, which rules
//! out cycling. Ratio-test ties always go to the smallest basic index. Every
//! optimal answer is checked against primal, dual and gap certificates before
//! it is returned. [`vertex_enumerate_oracle`] brute-forces tiny instances.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, eq_matrix: DMatrix<f64>, eq_rhs: Vec<f64>) -> Result<Self> {
        let lp = Self { objective, eq_matrix, eq_rhs };
        lp.validate()?;
        Ok(lp)
    }

    pub fn rows(&self) -> usize {
        self.eq_matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.eq_matrix.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.eq_matrix.shape();
        if self.objective.len() != n || self.eq_rhs.len() != m {
            return Err(Error::Dimension(format!(
                "objective {} / rhs {} do not match a {m}x{n} matrix",
                self.objective.len(),
                self.eq_rhs.len()
            )));
        }
        let finite = self.objective.iter().chain(&self.eq_rhs).chain(self.eq_matrix.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("linear program contains non-finite data".into()));
        }
        Ok(())
    }

    fn rhs_scale(&self) -> f64 {
        self.eq_rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Certificate values of an optimal solution; zero for other statuses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖Ax − b‖∞`
    pub primal_feas: f64,
    /// Largest negative reduced cost.
    pub dual_feas: f64,
    /// `max_j |x_j · d_j|`
    pub complementarity: f64,
    /// `|cᵀx − bᵀy|`
    pub duality_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        Self { status, x: None, objective_value: None, residuals: Residuals::default(), iterations }
    }
}

pub const DEFAULT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const ELIM_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 50;
// Consecutive degenerate pivots before pricing switches to Bland's rule.
const BLAND_AFTER: usize = 20;
const PERTURBATION: f64 = 1e-7;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

// Indices of a maximal independent subset of rows of [A | b], or None if some
// dependent row has an inconsistent right-hand side.
fn independent_rows(a: &DMatrix<f64>, b: &[f64]) -> Option<Vec<usize>> {
    let (m, n) = a.shape();
    let mut basis: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    let mut kept = Vec::new();
    let b_scale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for i in 0..m {
        let mut row: Vec<f64> = (0..n).map(|j| a[(i, j)]).collect();
        let mut rhs = b[i];
        let scale = row.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for (prow, prhs, pcol) in &basis {
            let f = row[*pcol] / prow[*pcol];
            if f != 0.0 {
                row.iter_mut().zip(prow).for_each(|(r, p)| *r -= f * p);
                rhs -= f * prhs;
            }
        }
        let (pcol, pval) =
            row.iter().enumerate().fold((0, 0.0f64), |best, (j, v)| if v.abs() > best.1 { (j, v.abs()) } else { best });
        if pval <= ELIM_TOL * scale.max(1.0) {
            if rhs.abs() > 1e-9 * b_scale {
                return None;
            }
        } else {
            basis.push((row, rhs, pcol));
            kept.push(i);
        }
    }
    Some(kept)
}

struct Simplex<'a> {
    a: &'a DMatrix<f64>,
    b: Vec<f64>,
    rows: Vec<usize>,
    sign: Vec<f64>,
    n: usize,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    xb: Vec<f64>,
    pivots_since_refactor: usize,
    iterations: usize,
    max_iter: usize,
}

impl<'a> Simplex<'a> {
    fn m(&self) -> usize {
        self.rows.len()
    }

    // Entry (r, j) of the working matrix [sign·A_rows | I].
    fn entry(&self, r: usize, j: usize) -> f64 {
        if j < self.n {
            self.sign[r] * self.a[(self.rows[r], j)]
        } else if j - self.n == r {
            1.0
        } else {
            0.0
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        (0..self.m()).map(|r| self.entry(r, j)).collect()
    }

    fn binv_times(&self, v: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut out = vec![0.0; m];
        for (c, &vc) in v.iter().enumerate() {
            if vc != 0.0 {
                let col = self.binv.column(c);
                for r in 0..m {
                    out[r] += col[r] * vc;
                }
            }
        }
        out
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        if m == 0 {
            return Ok(());
        }
        let mut bmat = DMatrix::zeros(m, m);
        for (c, &j) in self.basis.iter().enumerate() {
            for r in 0..m {
                bmat[(r, c)] = self.entry(r, j);
            }
        }
        self.binv =
            bmat.lu().try_inverse().ok_or_else(|| Error::NumericalFailure("basis matrix became singular".into()))?;
        self.xb = self.binv_times(&self.b);
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m();
        (0..m).map(|c| (0..m).map(|r| cost[self.basis[r]] * self.binv[(r, c)]).sum()).collect()
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        if j < self.n {
            let col = self.a.column(j);
            cost[j] - (0..self.m()).map(|r| y[r] * self.sign[r] * col[self.rows[r]]).sum::<f64>()
        } else {
            cost[j] - y[j - self.n]
        }
    }

    /// Run simplex iterations on `cost` over columns `0..ncols`. Returns false
    /// on an unbounded ray.
    fn run(&mut self, cost: &[f64], ncols: usize, tol: f64) -> Result<bool> {
        let m = self.m();
        let mut in_basis = vec![false; self.n + m];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        let mut degenerate_streak = 0;
        loop {
            if self.iterations >= self.max_iter {
                return Err(Error::NumericalFailure(format!("simplex iteration limit {} reached", self.max_iter)));
            }
            let y = self.duals(cost);
            let candidates = (0..ncols).filter(|&j| !in_basis[j]);
            let enter = if degenerate_streak >= BLAND_AFTER {
                candidates.into_iter().find(|&j| self.reduced_cost(cost, &y, j) < -tol)
            } else {
                candidates
                    .map(|j| (j, self.reduced_cost(cost, &y, j)))
                    .filter(|&(_, d)| d < -tol)
                    .fold(None, |best: Option<(usize, f64)>, (j, d)| match best {
                        Some((_, bd)) if bd <= d => best,
                        _ => Some((j, d)),
                    })
                    .map(|(j, _)| j)
            };
            let Some(enter) = enter else {
                return Ok(true);
            };
            let u = self.binv_times(&self.column(enter));
            let ratio = |r: usize| self.xb[r].max(0.0) / u[r];
            let min_ratio = (0..m).filter(|&r| u[r] > PIVOT_TOL).map(ratio).fold(f64::INFINITY, f64::min);
            let slack = 1e-12 * min_ratio.max(1.0);
            let leave =
                (0..m).filter(|&r| u[r] > PIVOT_TOL && ratio(r) <= min_ratio + slack).min_by_key(|&r| self.basis[r]);
            let Some(r) = leave else {
                return Ok(false);
            };
            if min_ratio <= 0.0 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(r, enter, &u);
            in_basis[self.basis[r]] = false;
            in_basis[enter] = true;
            self.basis[r] = enter;
            self.iterations += 1;
            self.pivots_since_refactor += 1;
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
        }
    }

    fn pivot(&mut self, r: usize, _enter: usize, u: &[f64]) {
        let m = self.m();
        let ur = u[r];
        let step = self.xb[r].max(0.0) / ur;
        for (i, (xb, &ui)) in self.xb.iter_mut().zip(u).enumerate() {
            if i != r {
                *xb -= step * ui;
            }
        }
        self.xb[r] = step;
        for c in 0..m {
            let v = self.binv[(r, c)] / ur;
            self.binv[(r, c)] = v;
            if v != 0.0 {
                for (i, &ui) in u.iter().enumerate() {
                    if i != r && ui != 0.0 {
                        self.binv[(i, c)] -= ui * v;
                    }
                }
            }
        }
    }

    // Pivot zero-level artificials out of the basis where a structural column
    // can replace them.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for r in 0..self.m() {
            if self.basis[r] < self.n {
                continue;
            }
            let row: Vec<f64> = (0..self.m()).map(|c| self.binv[(r, c)]).collect();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.basis.contains(&j) {
                    continue;
                }
                let v: f64 = (0..self.m()).map(|c| row[c] * self.entry(c, j)).sum();
                if v.abs() > PIVOT_TOL && best.is_none_or(|(_, b)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((j, _)) = best {
                let u = self.binv_times(&self.column(j));
                self.pivot(r, j, &u);
                self.basis[r] = j;
                self.iterations += 1;
            }
        }
        self.refactor()
    }
}

/// Solve `lp` with reduced-cost tolerance `tol` (see [`DEFAULT_TOL`]).
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<LpSolution> {
    lp.validate()?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance {tol} must be positive")));
    }
    let n = lp.cols();
    let Some(rows) = independent_rows(&lp.eq_matrix, &lp.eq_rhs) else {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    };
    let m = rows.len();
    let sign: Vec<f64> = rows.iter().map(|&i| if lp.eq_rhs[i] < 0.0 { -1.0 } else { 1.0 }).collect();
    let b: Vec<f64> = rows.iter().zip(&sign).map(|(&i, s)| s * lp.eq_rhs[i]).collect();
    let mut sx = Simplex {
        a: &lp.eq_matrix,
        b: b.clone(),
        rows,
        sign,
        n,
        basis: (n..n + m).collect(),
        binv: DMatrix::identity(m, m),
        xb: b,
        pivots_since_refactor: 0,
        iterations: 0,
        max_iter: 50 * (n + m) + 1000,
    };

    let b_scale = 1.0 + lp.rhs_scale();
    if m > 0 {
        let phase1: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
        sx.run(&phase1, n + m, tol)?;
        sx.refactor()?;
        let infeas: f64 = sx.basis.iter().zip(&sx.xb).filter(|(j, _)| **j >= n).map(|(_, v)| v.abs()).sum();
        if infeas > 1e-9 * b_scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, sx.iterations));
        }
        sx.drive_out_artificials()?;
    }

    let mut cost = lp.objective.clone();
    cost.extend(std::iter::repeat_n(0.0, m));
    let start_basis = sx.basis.clone();
    let b_true = sx.b.clone();

    // Perturbed pass: lift every basic value by a small distinct amount so the
    // vertex walk is non-degenerate, then drop the lift and keep the final
    // basis if it is still primal feasible.
    if m > 0 {
        let lifted: Vec<f64> =
            (0..m).map(|i| sx.xb[i] + PERTURBATION * b_scale * (1.0 + ((i + 1) as f64 * GOLDEN).fract())).collect();
        sx.b = (0..m).map(|r| sx.basis.iter().zip(&lifted).map(|(&j, v)| sx.entry(r, j) * v).sum()).collect();
        sx.xb = lifted;
        let bounded = sx.run(&cost, n, tol)?;
        sx.b = b_true.clone();
        sx.refactor()?;
        if !bounded {
            return Ok(LpSolution::without_point(LpStatus::Unbounded, sx.iterations));
        }
        if sx.xb.iter().all(|&v| v >= -1e-12 * b_scale) {
            if let Ok(sol) = certify(lp, &sx, &cost, tol) {
                return Ok(sol);
            }
        }
        sx.basis = start_basis;
        sx.refactor()?;
    }
    if !sx.run(&cost, n, tol)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, sx.iterations));
    }
    sx.refactor()?;
    certify(lp, &sx, &cost, tol)
}

fn certify(lp: &LinearProgram, sx: &Simplex<'_>, cost: &[f64], tol: f64) -> Result<LpSolution> {
    let n = lp.cols();
    let mut x = vec![0.0; n];
    for (r, &j) in sx.basis.iter().enumerate() {
        if j < n {
            x[j] = sx.xb[r];
        } else if sx.xb[r].abs() > 1e-9 * (1.0 + lp.rhs_scale()) {
            return Err(Error::NumericalFailure("artificial variable left at a nonzero level".into()));
        }
    }
    let min_x = x.iter().fold(0.0f64, |a, &v| a.min(v));
    if min_x < -1e-10 {
        return Err(Error::NumericalFailure(format!("solution violates x >= 0 by {:e}", -min_x)));
    }
    let xv = DVector::from_column_slice(&x);
    let ax = &lp.eq_matrix * &xv;
    let primal_feas = ax.iter().zip(&lp.eq_rhs).fold(0.0f64, |a, (l, r)| a.max((l - r).abs()));

    let yw = sx.duals(cost);
    let mut y = vec![0.0; lp.rows()];
    for (r, &i) in sx.rows.iter().enumerate() {
        y[i] = sx.sign[r] * yw[r];
    }
    let mut dual_feas = 0.0f64;
    let mut complementarity = 0.0f64;
    for (j, &xj) in x.iter().enumerate() {
        let d = lp.objective[j] - lp.eq_matrix.column(j).iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        dual_feas = dual_feas.max(-d);
        complementarity = complementarity.max((xj * d).abs());
    }
    let objective: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let dual_obj: f64 = lp.eq_rhs.iter().zip(&y).map(|(b, v)| b * v).sum();
    let duality_gap = (objective - dual_obj).abs();
    let residuals = Residuals { primal_feas, dual_feas, complementarity, duality_gap };

    let b_scale = 1.0 + lp.rhs_scale();
    if primal_feas > 1e-8 * b_scale {
        return Err(Error::NumericalFailure(format!("primal residual {primal_feas:e}")));
    }
    if duality_gap > 1e-8 * (1.0 + objective.abs()) {
        return Err(Error::NumericalFailure(format!("duality gap {duality_gap:e}")));
    }
    let c_scale = 1.0 + lp.objective.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if dual_feas > 10.0 * tol * c_scale {
        return Err(Error::NumericalFailure(format!("dual infeasibility {dual_feas:e}")));
    }
    for v in &mut x {
        *v = v.max(0.0);
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x: Some(x),
        objective_value: Some(objective),
        residuals,
        iterations: sx.iterations,
    })
}

const ORACLE_MAX_N: usize = 16;

fn combinations(n: usize, r: usize, mut visit: impl FnMut(&[usize])) {
    if r > n {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..r).rev().find(|&i| idx[i] != i + n - r) else {
            return;
        };
        idx[i] += 1;
        for t in i + 1..r {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

// Basic solutions of `a x = b` over every square column subset with x ≥ 0.
fn basic_feasible_solutions(a: &DMatrix<f64>, b: &[f64]) -> Vec<Vec<f64>> {
    let (r, n) = a.shape();
    let b_scale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let rhs = DVector::from_column_slice(b);
    let mut out = Vec::new();
    if r == 0 {
        return vec![vec![0.0; n]];
    }
    combinations(n, r, |cols| {
        let sub = a.select_columns(cols);
        let col_norms: f64 = cols.iter().map(|&j| a.column(j).norm().max(1e-300)).product();
        let lu = sub.clone().lu();
        if lu.determinant().abs() <= 1e-10 * col_norms {
            return;
        }
        let Some(xs) = lu.solve(&rhs) else { return };
        if (&sub * &xs - &rhs).amax() > 1e-9 * b_scale {
            return;
        }
        if xs.iter().all(|&v| v >= -1e-9) {
            let mut x = vec![0.0; n];
            for (t, &j) in cols.iter().enumerate() {
                x[j] = xs[t].max(0.0);
            }
            out.push(x);
        }
    });
    out
}

fn reduced_system(a: &DMatrix<f64>, b: &[f64]) -> Option<(DMatrix<f64>, Vec<f64>)> {
    let rows = independent_rows(a, b)?;
    Some((a.select_rows(&rows), rows.iter().map(|&i| b[i]).collect()))
}

/// Exact optimum by enumerating basic feasible solutions (`N ≤ 16`).
///
/// Ties in the objective are broken by the lexicographically smallest `x`.
pub fn vertex_enumerate_oracle(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.cols();
    if n > ORACLE_MAX_N {
        return Err(Error::Dimension(format!("oracle limited to N <= {ORACLE_MAX_N}, got {n}")));
    }
    let Some((a, b)) = reduced_system(&lp.eq_matrix, &lp.eq_rhs) else {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    };
    let vertices = basic_feasible_solutions(&a, &b);
    if vertices.is_empty() {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    }

    // Recession directions: d ≥ 0, A d = 0, normalised by 1ᵀd = 1.
    let ray_a = a.clone().insert_row(a.nrows(), 1.0);
    let mut ray_b = vec![0.0; ray_a.nrows()];
    *ray_b.last_mut().unwrap() = 1.0;
    if let Some((ra, rb)) = reduced_system(&ray_a, &ray_b) {
        for d in basic_feasible_solutions(&ra, &rb) {
            let slope: f64 = lp.objective.iter().zip(&d).map(|(c, v)| c * v).sum();
            if slope < -1e-9 {
                return Ok(LpSolution::without_point(LpStatus::Unbounded, 0));
            }
        }
    }

    let value = |x: &[f64]| lp.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
    let mut best = &vertices[0];
    let mut best_val = value(best);
    for x in &vertices[1..] {
        let v = value(x);
        let tie = (v - best_val).abs() <= 1e-9 * (1.0 + best_val.abs());
        let lex_smaller = x.iter().zip(best).find(|(p, q)| (**p - **q).abs() > 1e-12).is_some_and(|(p, q)| p < q);
        if (!tie && v < best_val) || (tie && lex_smaller) {
            best = x;
            best_val = v;
        }
    }
    let xv = DVector::from_column_slice(best);
    let primal_feas = (&lp.eq_matrix * &xv).iter().zip(&lp.eq_rhs).fold(0.0f64, |acc, (l, r)| acc.max((l - r).abs()));
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x: Some(best.clone()),
        objective_value: Some(best_val),
        residuals: Residuals { primal_feas, ..Residuals::default() },
        iterations: 0,
    })
}
