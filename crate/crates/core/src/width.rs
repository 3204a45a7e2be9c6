//! Gaussian width of the failure sets: per-sample scenario vectors, the dual
//! upper bound `B`, an exact primal oracle for tiny `n`, and a Monte Carlo
//! estimate of `E[B]/√n` compared against Gordon's budget `√m − 1/(4√m)`.
//!
//! The feasible set of the primal program is the failure set
//! `{y : y ≥ 0 on the sign-constrained block, Σ_{i>n−k} y_i ≥ Σ_{i≤n−k} y_i, ‖y‖ ≤ 1}`.
//! A random null space that misses it guarantees recovery.

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{derive_seed, gaussian_vec, stream};
use crate::thresholds::{alpha_bound, SolverConfig, ThresholdKind};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// A Gaussian sample rearranged for one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioVector {
    pub kind: ThresholdKind,
    pub values: Vec<f64>,
    pub k: usize,
    /// `+1` on the first `n − k` entries, `−1` on the last `k`.
    pub z: Vec<f64>,
}

impl ScenarioVector {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    fn free(&self) -> usize {
        self.n() - self.k
    }

    fn dot_z(&self) -> f64 {
        self.values.iter().zip(&self.z).map(|(v, z)| v * z).sum()
    }

    /// Number of leading coordinates constrained to be non-negative in the primal.
    pub fn sign_constrained(&self) -> usize {
        match self.kind {
            ThresholdKind::Strong | ThresholdKind::Sectional => self.n(),
            _ => self.free(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Rearrange `h` into the scenario vector of `kind`.
pub fn scenario_vector(kind: ThresholdKind, h: &[f64], k: usize) -> Result<ScenarioVector> {
    let n = h.len();
    if k == 0 || k >= n {
        return Err(Error::Dimension(format!("need 0 < k < n, got k = {k}, n = {n}")));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("sample contains non-finite entries".into()));
    }
    let split = n - k;
    let sort = |v: &mut [f64]| v.sort_by(f64::total_cmp);
    let values = match kind {
        ThresholdKind::Strong => {
            let mut v: Vec<f64> = h.iter().map(|x| x.abs()).collect();
            sort(&mut v);
            v
        }
        ThresholdKind::Sectional | ThresholdKind::WeakFixedSupportSigns => {
            let mut v: Vec<f64> = h[..split].iter().map(|x| x.abs()).collect();
            sort(&mut v);
            if kind == ThresholdKind::Sectional {
                v.extend(h[split..].iter().map(|x| x.abs()));
            } else {
                v.extend_from_slice(&h[split..]);
            }
            v
        }
        ThresholdKind::WeakNonnegative => {
            let mut v = h[..split].to_vec();
            sort(&mut v);
            v.extend(h[split..].iter().map(|x| -x));
            v
        }
    };
    let z = (0..n).map(|i| if i < split { 1.0 } else { -1.0 }).collect();
    Ok(ScenarioVector { kind, values, k, z })
}

/// Outcome of the per-sample dual multiplier search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CSelection {
    Index(usize),
    NoFeasible,
}

// ν(c) for c = 0..=n−k, from prefix sums of the leading block.
fn nu_values(sv: &ScenarioVector) -> Vec<f64> {
    let n = sv.n();
    let total = sv.dot_z();
    let mut prefix = 0.0;
    let mut out = Vec::with_capacity(sv.free() + 1);
    out.push(total / n as f64);
    for c in 1..=sv.free() {
        prefix += sv.values[c - 1];
        out.push((total - prefix) / (n - c) as f64);
    }
    out
}

/// Largest admissible `c`: `ν(c) ≥ sv_c` with `sv_0 = −∞`, and `ν(c) ≥ 0`.
pub fn select_c_exact(sv: &ScenarioVector) -> CSelection {
    let nu = nu_values(sv);
    let c = (1..nu.len()).rev().find(|&c| nu[c] >= sv.values[c - 1]).unwrap_or(0);
    if nu[c] >= 0.0 {
        CSelection::Index(c)
    } else {
        CSelection::NoFeasible
    }
}

/// How `c` is chosen in [`dual_width_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CMode {
    /// `c = round((1 − θ̂)·n)` from the threshold solver, same for every sample.
    Population,
    /// Per-sample optimal `c` from [`select_c_exact`].
    ExactDual,
}

impl fmt::Display for CMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CMode::Population => "population",
            CMode::ExactDual => "exact",
        })
    }
}

impl FromStr for CMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "population" => Ok(CMode::Population),
            "exact" | "exact-dual" | "exact_dual" => Ok(CMode::ExactDual),
            other => Err(Error::Parse(format!("unknown c mode '{other}'"))),
        }
    }
}

// √(Σ_{i>c} sv_i² − (svᵀz − Σ_{i≤c} sv_i)²/(n − c)), summed as Σ_{i>c} (sv_i − ν z_i)².
fn bound_at(sv: &ScenarioVector, c: usize, nu_c: f64) -> f64 {
    sv.values[c..].iter().zip(&sv.z[c..]).map(|(v, z)| (v - nu_c * z).powi(2)).sum::<f64>().sqrt()
}

// Value of the dual with the linear-constraint multiplier at zero.
fn multiplier_free_bound(sv: &ScenarioVector) -> f64 {
    let s = sv.sign_constrained();
    sv.values.iter().enumerate().map(|(i, &v)| if i < s { v.max(0.0) } else { v }).map(|v| v * v).sum::<f64>().sqrt()
}

/// Dual upper bound `B` on `max svᵀy` over the failure set.
///
/// When no admissible `c` exists the bound falls back to the value with a
/// zero multiplier on the linear constraint, which is `‖sv‖₂` for the
/// magnitude-based kinds.
pub fn dual_width_bound(sv: &ScenarioVector, c_mode: CMode, population_c: Option<usize>) -> Result<f64> {
    let nu = nu_values(sv);
    match c_mode {
        CMode::ExactDual => Ok(match select_c_exact(sv) {
            CSelection::Index(c) => bound_at(sv, c, nu[c]),
            CSelection::NoFeasible => multiplier_free_bound(sv),
        }),
        CMode::Population => {
            let c = population_c.ok_or_else(|| Error::InvalidConfig("population mode needs a value of c".into()))?;
            if c > sv.free() {
                return Err(Error::Dimension(format!("c = {c} exceeds n - k = {}", sv.free())));
            }
            let admissible = (c == 0 || nu[c] >= sv.values[c - 1]) && nu[c] >= 0.0;
            Ok(if admissible { bound_at(sv, c, nu[c]) } else { sv.norm() })
        }
    }
}

const ORACLE_MAX_N: usize = 12;

/// Exact `max svᵀy` over the failure set by active-set enumeration (`n ≤ 12`).
pub fn primal_width_oracle(sv: &ScenarioVector) -> Result<f64> {
    let n = sv.n();
    if n > ORACLE_MAX_N {
        return Err(Error::Dimension(format!("oracle limited to n <= {ORACLE_MAX_N}, got {n}")));
    }
    let s = sv.sign_constrained();
    let scale = sv.norm().max(1.0);
    let tol = 1e-12 * scale;
    let mut best = 0.0f64;
    let mut p = vec![0.0; n];
    for zero_mask in 0u32..(1 << s) {
        let free: Vec<usize> = (0..n).filter(|&i| i >= s || zero_mask & (1 << i) == 0).collect();
        if free.is_empty() {
            continue;
        }
        for tight in [false, true] {
            p.iter_mut().for_each(|x| *x = 0.0);
            for &i in &free {
                p[i] = sv.values[i];
            }
            if tight {
                let shift = free.iter().map(|&i| p[i] * sv.z[i]).sum::<f64>() / free.len() as f64;
                for &i in &free {
                    p[i] -= shift * sv.z[i];
                }
            }
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= tol {
                continue;
            }
            let signs_ok = (0..s).all(|i| p[i] >= -tol);
            let zdot: f64 = p.iter().zip(&sv.z).map(|(a, b)| a * b).sum();
            if signs_ok && zdot <= tol * norm.max(1.0) {
                best = best.max(norm);
            }
        }
    }
    Ok(best)
}

/// Summary of a Monte Carlo width estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthReport {
    pub kind: ThresholdKind,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    pub c_mode: CMode,
    /// `c` used in population mode.
    pub population_c: Option<usize>,
    /// `(1 − θ̂)·n − population_c`.
    pub population_c_residual: Option<f64>,
    /// Samples whose dual search found no admissible `c`.
    pub no_feasible: usize,
    pub mean_b_over_sqrt_n: f64,
    pub std_err: f64,
    pub gordon_budget: f64,
    pub pass: bool,
}

/// `√m − 1/(4√m)`.
pub fn gordon_budget(m: usize) -> f64 {
    let r = (m as f64).sqrt();
    r - 1.0 / (4.0 * r)
}

/// Mean and standard error of `B/√n` over `samples` standard normal draws.
///
/// Sample `i` draws from its own stream seeded by `derive_seed(seed, [i])`, and
/// the reduction runs in index order, so the report does not depend on the
/// number of worker threads.
pub fn width_monte_carlo(
    kind: ThresholdKind,
    n: usize,
    k: usize,
    samples: usize,
    m: usize,
    seed: u64,
    c_mode: CMode,
) -> Result<WidthReport> {
    if k == 0 || k >= n {
        return Err(Error::Dimension(format!("need 0 < k < n, got k = {k}, n = {n}")));
    }
    if samples < 2 {
        return Err(Error::InvalidConfig("at least two samples are needed".into()));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("m must be positive".into()));
    }
    let (population_c, population_c_residual) = match c_mode {
        CMode::ExactDual => (None, None),
        CMode::Population => {
            let beta = k as f64 / n as f64;
            let theta = alpha_bound(kind, beta, &SolverConfig::default())?.theta_hat;
            let target = (1.0 - theta) * n as f64;
            let c = (target.round().max(0.0) as usize).min(n - k);
            (Some(c), Some(target - c as f64))
        }
    };
    let sqrt_n = (n as f64).sqrt();
    let draws: Vec<Result<(f64, bool)>> = par::map_indexed(samples, |i| {
        let mut rng = stream(derive_seed(seed, &[i as u64]));
        let h = gaussian_vec(&mut rng, n);
        let sv = scenario_vector(kind, &h, k)?;
        let infeasible = select_c_exact(&sv) == CSelection::NoFeasible;
        Ok((dual_width_bound(&sv, c_mode, population_c)? / sqrt_n, infeasible))
    });
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
    let count = samples as f64;
    let mean = draws.iter().map(|d| d.0).sum::<f64>() / count;
    let var = draws.iter().map(|d| (d.0 - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let std_err = (var / count).sqrt();
    let budget = gordon_budget(m);
    Ok(WidthReport {
        kind,
        n,
        k,
        m,
        samples,
        seed,
        c_mode,
        population_c,
        population_c_residual,
        no_feasible: draws.iter().filter(|d| d.1).count(),
        mean_b_over_sqrt_n: mean,
        std_err,
        gordon_budget: budget,
        pass: mean + 3.0 * std_err < budget / sqrt_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn strong(h: &[f64], k: usize) -> ScenarioVector {
        scenario_vector(ThresholdKind::Strong, h, k).unwrap()
    }

    #[test]
    fn scenario_examples() {
        let sv = strong(&[-3.0, 1.0, 2.0], 1);
        assert_eq!(sv.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(sv.z, vec![1.0, 1.0, -1.0]);
        let w = scenario_vector(ThresholdKind::WeakFixedSupportSigns, &[-3.0, 1.0, -2.0], 1).unwrap();
        assert_eq!(w.values, vec![1.0, 3.0, -2.0]);
        let p = scenario_vector(ThresholdKind::WeakNonnegative, &[-3.0, 1.0, -2.0], 1).unwrap();
        assert_eq!(p.values, vec![-3.0, 1.0, 2.0]);
        let s = scenario_vector(ThresholdKind::Sectional, &[-3.0, 1.0, -2.0, 0.5], 2).unwrap();
        assert_eq!(s.values, vec![1.0, 3.0, 2.0, 0.5]);
    }

    #[test]
    fn scenario_rejects_bad_k() {
        assert!(scenario_vector(ThresholdKind::Strong, &[1.0, 2.0], 0).is_err());
        assert!(scenario_vector(ThresholdKind::Strong, &[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn c_selection_examples() {
        assert_eq!(select_c_exact(&strong(&[1.0, 2.0, 3.0, 4.0], 1)), CSelection::Index(0));
        assert_eq!(select_c_exact(&strong(&[0.1, 3.0, 4.0, 5.0], 1)), CSelection::Index(1));
        assert_eq!(select_c_exact(&strong(&[1.0, 2.0], 1)), CSelection::NoFeasible);
    }

    #[test]
    fn dual_bound_examples() {
        let b = |h: &[f64]| dual_width_bound(&strong(h, 1), CMode::ExactDual, None).unwrap();
        assert_abs_diff_eq!(b(&[1.0, 2.0]), 5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(b(&[1.0, 2.0, 3.0, 4.0]), 29f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(b(&[0.1, 3.0, 4.0, 5.0]), (50.0f64 - 4.0 / 3.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn primal_oracle_examples() {
        let o = |h: &[f64]| primal_width_oracle(&strong(h, 1)).unwrap();
        assert_abs_diff_eq!(o(&[1.0, 2.0]), 5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(o(&[1.0, 2.0, 3.0, 4.0]), 29f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(o(&[0.1, 3.0, 4.0, 5.0]), (50.0f64 - 4.0 / 3.0).sqrt(), epsilon = 1e-12);
        assert!(primal_width_oracle(&strong(&[1.0; 13], 1)).is_err());
    }

    #[test]
    fn primal_at_least_sampled_points() {
        // Any feasible y gives a lower bound on the oracle.
        let sv = strong(&[1.0, 2.0, 3.0, 4.0], 1);
        let best = primal_width_oracle(&sv).unwrap();
        let mut rng = stream(3);
        for _ in 0..20_000 {
            let g = gaussian_vec(&mut rng, 4);
            let y: Vec<f64> = g.iter().map(|v| v.abs()).collect();
            let zdot: f64 = y.iter().zip(&sv.z).map(|(a, b)| a * b).sum();
            if zdot > 0.0 {
                continue;
            }
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let val: f64 = y.iter().zip(&sv.values).map(|(a, b)| a * b).sum::<f64>() / norm;
            assert!(val <= best + 1e-12);
        }
    }

    #[test]
    fn population_mode_needs_c() {
        let sv = strong(&[1.0, 2.0, 3.0, 4.0], 1);
        assert!(dual_width_bound(&sv, CMode::Population, None).is_err());
        assert!(dual_width_bound(&sv, CMode::Population, Some(4)).is_err());
        assert_abs_diff_eq!(dual_width_bound(&sv, CMode::Population, Some(0)).unwrap(), 29f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn monte_carlo_strong_below_one() {
        let r = width_monte_carlo(ThresholdKind::Strong, 1000, 100, 200, 500, 1, CMode::ExactDual).unwrap();
        assert!(r.mean_b_over_sqrt_n < 1.0);
        assert!(r.std_err >= 0.0);
    }

    #[test]
    fn monte_carlo_rejects_bad_input() {
        assert!(width_monte_carlo(ThresholdKind::Strong, 10, 0, 10, 5, 1, CMode::ExactDual).is_err());
        assert!(width_monte_carlo(ThresholdKind::Strong, 10, 2, 1, 5, 1, CMode::ExactDual).is_err());
    }

    #[test]
    fn population_report_records_c() {
        let r =
            width_monte_carlo(ThresholdKind::WeakFixedSupportSigns, 500, 50, 20, 250, 9, CMode::Population).unwrap();
        let c = r.population_c.unwrap();
        assert!(c <= 450);
        assert!(r.population_c_residual.unwrap().abs() <= 0.5);
    }

    #[test]
    fn budget_formula() {
        assert_abs_diff_eq!(gordon_budget(4), 2.0 - 0.125, epsilon = 1e-15);
    }
}
