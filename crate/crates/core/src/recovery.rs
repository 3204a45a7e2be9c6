//! Planted sparse recovery on Gaussian ensembles: instance generation, l1 and
//! non-negative l1 decoding, exact null-space-property checks for tiny sizes,
//! and empirical phase diagrams.

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, DEFAULT_TOL};
use crate::par;
use crate::rng::{derive_seed, gaussian_vec, stream};
use crate::thresholds::ThresholdKind;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// A planted problem `y = A·x_true`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub a: DMatrix<f64>,
    pub x_true: Vec<f64>,
    pub y: Vec<f64>,
    pub model: ThresholdKind,
    pub seed: u64,
}

impl Instance {
    pub fn support(&self) -> Vec<usize> {
        (0..self.x_true.len()).filter(|&i| self.x_true[i] != 0.0).collect()
    }
}

/// Gaussian `m×n` matrix with a `k`-sparse planted signal.
///
/// The support is the last `k` indices, except for the strong model, which
/// draws a uniformly random support. Nonzero magnitudes are `|N(0,1)| + 0.1`;
/// signs are uniform except for the non-negative model, where all are `+`.
pub fn gaussian_instance(n: usize, m: usize, k: usize, model: ThresholdKind, seed: u64) -> Result<Instance> {
    if m == 0 || m > n || k > n {
        return Err(Error::Dimension(format!("need 1 <= m <= n and k <= n, got n = {n}, m = {m}, k = {k}")));
    }
    let mut rng = stream(seed);
    let a = DMatrix::from_row_slice(m, n, &gaussian_vec(&mut rng, m * n));
    let support: Vec<usize> = match model {
        ThresholdKind::Strong => {
            let mut s = sample(&mut rng, n, k).into_vec();
            s.sort_unstable();
            s
        }
        _ => (n - k..n).collect(),
    };
    let mut x_true = vec![0.0; n];
    for &i in &support {
        let g: f64 = rng.sample(StandardNormal);
        let magnitude = g.abs() + 0.1;
        let negative = model != ThresholdKind::WeakNonnegative && rng.random_bool(0.5);
        x_true[i] = if negative { -magnitude } else { magnitude };
    }
    let y = (&a * DVector::from_column_slice(&x_true)).iter().copied().collect();
    Ok(Instance { a, x_true, y, model, seed })
}

fn check_system(a: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if a.nrows() != y.len() {
        return Err(Error::Dimension(format!("A has {} rows but y has {} entries", a.nrows(), y.len())));
    }
    Ok(())
}

fn optimal_point(lp: &LinearProgram) -> Result<Vec<f64>> {
    let sol = solve_lp(lp, DEFAULT_TOL)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.x.expect("optimal solution carries a point")),
        LpStatus::Infeasible => Err(Error::Infeasible("no feasible point for the measurements".into())),
        LpStatus::Unbounded => Err(Error::Unbounded("decoder objective unbounded".into())),
    }
}

/// `argmin ‖x‖₁` subject to `A x = y`.
pub fn l1_solve(a: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    check_system(a, y)?;
    let (m, n) = a.shape();
    let mut split = DMatrix::zeros(m, 2 * n);
    split.columns_mut(0, n).copy_from(a);
    split.columns_mut(n, n).copy_from(&(-a));
    let lp = LinearProgram::new(vec![1.0; 2 * n], split, y.to_vec())?;
    let uv = optimal_point(&lp)?;
    Ok((0..n).map(|i| uv[i] - uv[n + i]).collect())
}

/// `argmin Σ x` subject to `A x = y`, `x ≥ 0`.
pub fn nonneg_l1_solve(a: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    check_system(a, y)?;
    let lp = LinearProgram::new(vec![1.0; a.ncols()], a.clone(), y.to_vec())?;
    optimal_point(&lp)
}

/// `‖x_hat − x_true‖₂ ≤ 1e-5 · max(1, ‖x_true‖₂)`.
pub fn recovery_success(x_true: &[f64], x_hat: &[f64]) -> bool {
    if x_true.len() != x_hat.len() {
        return false;
    }
    let err = x_true.iter().zip(x_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = x_true.iter().map(|v| v * v).sum::<f64>().sqrt();
    err <= 1e-5 * norm.max(1.0)
}

/// Decode with the solver that matches `model` and test the result.
pub fn decode(instance: &Instance) -> Result<bool> {
    let x_hat = match instance.model {
        ThresholdKind::WeakNonnegative => nonneg_l1_solve(&instance.a, &instance.y)?,
        _ => l1_solve(&instance.a, &instance.y)?,
    };
    Ok(recovery_success(&instance.x_true, &x_hat))
}

/// Fixed-support variants of the null-space check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NspVariant {
    /// Every sign pattern on the last `k` indices.
    Sectional,
    /// Negative signs on the last `k` indices.
    WeakSigns,
    /// Non-negative signals on the last `k` indices, decoded with `x ≥ 0`.
    Nonnegative,
}

impl FromStr for NspVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "sectional" => Ok(NspVariant::Sectional),
            "weak" | "weak-signs" => Ok(NspVariant::WeakSigns),
            "nonneg" | "nonnegative" | "weak-nonneg" => Ok(NspVariant::Nonnegative),
            other => Err(Error::Parse(format!("unknown NSP variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NspVerdict {
    Holds,
    Fails,
    /// The worst case sits within `1e-9` of the threshold; counted as not holding.
    Boundary,
}

impl fmt::Display for NspVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NspVerdict::Holds => "holds",
            NspVerdict::Fails => "fails",
            NspVerdict::Boundary => "boundary",
        })
    }
}

/// A null-space vector violating (or touching) the condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NspWitness {
    pub support: Vec<usize>,
    /// Sign row paired with the support; empty for the non-negative variant.
    pub signs: Vec<f64>,
    pub w: Vec<f64>,
    /// Off-support mass of `w` after normalisation.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NspReport {
    pub verdict: NspVerdict,
    pub witness: Option<NspWitness>,
}

impl NspReport {
    pub fn holds(&self) -> bool {
        self.verdict == NspVerdict::Holds
    }
}

const NSP_MAX_N: usize = 14;
const NSP_MAX_K: usize = 4;
const NSP_TOL: f64 = 1e-9;

/// Orthonormal basis of `null(A)` as the columns of an `n×d` matrix.
pub fn null_space_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let mut square = DMatrix::zeros(n.max(m), n);
    square.rows_mut(0, m).copy_from(a);
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max();
    let cut = 1e-10 * smax.max(1e-300) * n.max(m) as f64;
    let null: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] <= cut).collect();
    let mut basis = DMatrix::zeros(n, null.len());
    for (c, &i) in null.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    basis
}

fn check_budget(a: &DMatrix<f64>, k: usize) -> Result<()> {
    let n = a.ncols();
    if n > NSP_MAX_N || k > NSP_MAX_K {
        return Err(Error::Dimension(format!(
            "null-space check limited to n <= {NSP_MAX_N}, k <= {NSP_MAX_K}; got n = {n}, k = {k}"
        )));
    }
    if k >= n && n > 0 {
        return Err(Error::Dimension(format!("need k < n, got k = {k}, n = {n}")));
    }
    Ok(())
}

fn classify(value: f64) -> NspVerdict {
    if value < 1.0 - NSP_TOL {
        NspVerdict::Fails
    } else if value <= 1.0 + NSP_TOL {
        NspVerdict::Boundary
    } else {
        NspVerdict::Holds
    }
}

// Smallest off-support mass of w = N v over null vectors with
// Σ_{i∈K} s_i w_i = −1: Σ|w_i| over K̄, or Σ w_i with w_K̄ ≥ 0 when `nonneg`.
fn worst_case(basis: &DMatrix<f64>, support: &[usize], signs: &[f64], nonneg: bool) -> Result<Option<(f64, Vec<f64>)>> {
    let (n, d) = basis.shape();
    let off: Vec<usize> = (0..n).filter(|i| !support.contains(i)).collect();
    let q = off.len();
    // Variables: v⁺ (d), v⁻ (d), then t (q) and slacks (2q) or w_K̄ (q).
    let extra = if nonneg { q } else { 3 * q };
    let rows = 1 + if nonneg { q } else { 2 * q };
    let cols = 2 * d + extra;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = vec![0.0; rows];
    let mut c = vec![0.0; cols];
    for col in 0..d {
        let v: f64 = support.iter().zip(signs).map(|(&i, s)| s * basis[(i, col)]).sum();
        a[(0, col)] = v;
        a[(0, d + col)] = -v;
    }
    b[0] = -1.0;
    for (r, &i) in off.iter().enumerate() {
        if nonneg {
            for col in 0..d {
                a[(1 + r, col)] = basis[(i, col)];
                a[(1 + r, d + col)] = -basis[(i, col)];
            }
            a[(1 + r, 2 * d + r)] = -1.0;
            c[2 * d + r] = 1.0;
        } else {
            let (up, down) = (1 + 2 * r, 2 + 2 * r);
            for col in 0..d {
                a[(up, col)] = basis[(i, col)];
                a[(up, d + col)] = -basis[(i, col)];
                a[(down, col)] = -basis[(i, col)];
                a[(down, d + col)] = basis[(i, col)];
            }
            let t = 2 * d + r;
            a[(up, t)] = -1.0;
            a[(down, t)] = -1.0;
            a[(up, 2 * d + q + 2 * r)] = 1.0;
            a[(down, 2 * d + q + 2 * r + 1)] = 1.0;
            c[t] = 1.0;
        }
    }
    let sol = solve_lp(&LinearProgram::new(c, a, b)?, DEFAULT_TOL)?;
    match sol.status {
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::NumericalFailure("null-space program reported unbounded".into())),
        LpStatus::Optimal => {
            let x = sol.x.expect("optimal solution carries a point");
            let v = DVector::from_iterator(d, (0..d).map(|j| x[j] - x[d + j]));
            let w = (basis * v).iter().copied().collect();
            Ok(Some((sol.objective_value.unwrap_or(f64::NAN), w)))
        }
    }
}

fn kernel_witness(basis: &DMatrix<f64>, support: &[usize]) -> Option<Vec<f64>> {
    let (n, d) = basis.shape();
    let off: Vec<usize> = (0..n).filter(|i| !support.contains(i)).collect();
    let restricted = basis.select_rows(&off);
    let inner = null_space_basis(&restricted);
    if inner.ncols() == 0 || d == 0 {
        return None;
    }
    Some((basis * inner.column(0)).iter().copied().collect())
}

fn scan(
    basis: &DMatrix<f64>,
    supports: &[Vec<usize>],
    sign_rows: impl Fn(usize) -> Vec<Vec<f64>>,
    nonneg: bool,
) -> Result<NspReport> {
    let mut boundary: Option<NspWitness> = None;
    for support in supports {
        if let Some(w) = kernel_witness(basis, support) {
            let witness = NspWitness { support: support.clone(), signs: Vec::new(), w, value: 0.0 };
            return Ok(NspReport { verdict: NspVerdict::Fails, witness: Some(witness) });
        }
        for signs in sign_rows(support.len()) {
            let Some((value, w)) = worst_case(basis, support, &signs, nonneg)? else { continue };
            let witness = NspWitness { support: support.clone(), signs: signs.clone(), w, value };
            match classify(value) {
                NspVerdict::Fails => return Ok(NspReport { verdict: NspVerdict::Fails, witness: Some(witness) }),
                NspVerdict::Boundary if boundary.is_none() => boundary = Some(witness),
                _ => {}
            }
        }
    }
    Ok(match boundary {
        Some(w) => NspReport { verdict: NspVerdict::Boundary, witness: Some(w) },
        None => NspReport { verdict: NspVerdict::Holds, witness: None },
    })
}

fn all_sign_rows(k: usize) -> Vec<Vec<f64>> {
    (0..1usize << k).map(|mask| (0..k).map(|i| if mask & (1 << i) != 0 { -1.0 } else { 1.0 }).collect()).collect()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn trivially_holds(basis: &DMatrix<f64>, k: usize) -> bool {
    k == 0 || basis.ncols() == 0
}

/// Null-space property over every `k`-support and sign pattern.
pub fn nsp_report_strong(a: &DMatrix<f64>, k: usize) -> Result<NspReport> {
    check_budget(a, k)?;
    let basis = null_space_basis(a);
    if trivially_holds(&basis, k) {
        return Ok(NspReport { verdict: NspVerdict::Holds, witness: None });
    }
    scan(&basis, &subsets(a.ncols(), k), all_sign_rows, false)
}

pub fn nsp_check_strong(a: &DMatrix<f64>, k: usize) -> Result<bool> {
    Ok(nsp_report_strong(a, k)?.holds())
}

/// Null-space condition for signals supported on the last `k` indices.
pub fn nsp_report_fixed_support(a: &DMatrix<f64>, k: usize, variant: NspVariant) -> Result<NspReport> {
    check_budget(a, k)?;
    let basis = null_space_basis(a);
    if trivially_holds(&basis, k) {
        return Ok(NspReport { verdict: NspVerdict::Holds, witness: None });
    }
    let n = a.ncols();
    let support = vec![(n - k..n).collect::<Vec<_>>()];
    match variant {
        NspVariant::Sectional => scan(&basis, &support, all_sign_rows, false),
        NspVariant::WeakSigns => scan(&basis, &support, |k| vec![vec![-1.0; k]], false),
        NspVariant::Nonnegative => scan(&basis, &support, |k| vec![vec![1.0; k]], true),
    }
}

pub fn nsp_check_fixed_support(a: &DMatrix<f64>, k: usize, variant: NspVariant) -> Result<bool> {
    Ok(nsp_report_fixed_support(a, k, variant)?.holds())
}

/// One `(α, β)` cell of an empirical phase diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    pub successes: usize,
    pub lp_failures: usize,
    pub seed: u64,
}

impl PhaseCell {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trial {
    Recovered,
    Missed,
    SolverFailure,
}

/// Success counts over an `alpha_grid × beta_grid` table, alpha-major.
///
/// Trial `t` of cell `(i, j)` uses the instance seed
/// `derive_seed(seed, [i, j, t])`; cells hold `m = round(α n)` and
/// `k = round(β n)`.
pub fn phase_diagram(
    n: usize,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    trials: usize,
    model: ThresholdKind,
    seed: u64,
) -> Result<Vec<PhaseCell>> {
    if trials == 0 || n == 0 {
        return Err(Error::InvalidConfig("n and trials must be positive".into()));
    }
    for &g in alpha_grid.iter().chain(beta_grid) {
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::Domain(format!("grid value {g} outside (0, 1]")));
        }
    }
    let mut cells = Vec::with_capacity(alpha_grid.len() * beta_grid.len());
    for &alpha in alpha_grid {
        for &beta in beta_grid {
            let m = (alpha * n as f64).round() as usize;
            if m == 0 {
                return Err(Error::Domain(format!("alpha = {alpha} gives no measurements at n = {n}")));
            }
            let k = (beta * n as f64).round() as usize;
            cells.push(PhaseCell { alpha, beta, n, m, k, trials, successes: 0, lp_failures: 0, seed });
        }
    }
    let nb = beta_grid.len();
    let outcomes = par::map_indexed(cells.len() * trials, |unit| {
        let (ci, t) = (unit / trials, unit % trials);
        let cell = &cells[ci];
        let trial_seed = derive_seed(seed, &[(ci / nb) as u64, (ci % nb) as u64, t as u64]);
        let instance = match gaussian_instance(n, cell.m, cell.k, model, trial_seed) {
            Ok(i) => i,
            Err(_) => return Trial::SolverFailure,
        };
        match decode(&instance) {
            Ok(true) => Trial::Recovered,
            Ok(false) => Trial::Missed,
            Err(_) => Trial::SolverFailure,
        }
    });
    for (unit, outcome) in outcomes.into_iter().enumerate() {
        let cell = &mut cells[unit / trials];
        match outcome {
            Trial::Recovered => cell.successes += 1,
            Trial::Missed => {}
            Trial::SolverFailure => cell.lp_failures += 1,
        }
    }
    Ok(cells)
}

/// Parse a matrix: a first line `m n`, then `m` rows of `n` numbers.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad dimension '{t}'"))))
        .collect::<Result<_>>()?;
    let [m, n] = dims[..] else {
        return Err(Error::Parse(format!("header must be 'm n', got '{header}'")));
    };
    let mut data = Vec::with_capacity(m * n);
    for r in 0..m {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing row {}", r + 1)))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number '{t}' in row {}", r + 1))))
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(Error::Parse(format!("row {} has {} entries, expected {n}", r + 1, row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("row {} has non-finite entries", r + 1)));
        }
        data.extend(row);
    }
    if lines.next().is_some() {
        return Err(Error::Parse(format!("more than {m} rows")));
    }
    Ok(DMatrix::from_row_slice(m, n, &data))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}
