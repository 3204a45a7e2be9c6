//! Fixed-point equations for the tail fraction θ̂ and the resulting lower
//! bounds on the undersampling ratio α = m/n, for the four recovery regimes.

use crate::error::{Error, Result};
use crate::par;
use crate::scalar_funcs::{
    abs_quantile_split, mean_abs_normal, normal_quantile_split, tail_m1_abs, tail_m1_gauss, tail_m2_abs, tail_m2_signed,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Which recovery guarantee a threshold refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    /// Every support and every sign pattern.
    Strong,
    /// Every sign pattern on a fixed support.
    Sectional,
    /// A fixed support with fixed signs.
    WeakFixedSupportSigns,
    /// Fixed support, signs known to be positive and enforced by the solver.
    WeakNonnegative,
}

impl ThresholdKind {
    pub const ALL: [ThresholdKind; 4] = [
        ThresholdKind::Strong,
        ThresholdKind::Sectional,
        ThresholdKind::WeakFixedSupportSigns,
        ThresholdKind::WeakNonnegative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ThresholdKind::Strong => "strong",
            ThresholdKind::Sectional => "sectional",
            ThresholdKind::WeakFixedSupportSigns => "weak",
            ThresholdKind::WeakNonnegative => "weak-nonneg",
        }
    }
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "strong" => Ok(ThresholdKind::Strong),
            "sectional" => Ok(ThresholdKind::Sectional),
            "weak" | "weak-fixed-support-signs" => Ok(ThresholdKind::WeakFixedSupportSigns),
            "weak-nonneg" | "weak-nonnegative" | "nonneg" | "nonnegative" => Ok(ThresholdKind::WeakNonnegative),
            other => Err(Error::Parse(format!("unknown threshold kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Slack constant of the finite-n statements; 0 gives the limiting curve.
    pub eps: f64,
    /// Target accuracy of the θ root.
    pub theta_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { eps: 0.0, theta_tol: 1e-12, max_iter: 200 }
    }
}

impl SolverConfig {
    pub fn with_eps(eps: f64) -> Self {
        Self { eps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidConfig(format!("eps = {} must lie in [0, 1)", self.eps)));
        }
        if !(self.theta_tol > 0.0 && self.theta_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("theta_tol = {} must be positive", self.theta_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Diagnostics attached to a [`CurvePoint`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointFlags {
    /// More than one sign change was seen; the largest root was taken.
    pub multiple_roots: bool,
    /// No root: the dual multiplier is non-positive for every θ, so the bound
    /// falls back to the full norm and `alpha_min = 1`.
    pub saturated: bool,
    /// The point could not be computed; `theta_hat` and `alpha_min` are NaN.
    pub failed: bool,
}

impl PointFlags {
    pub fn is_clean(&self) -> bool {
        !(self.multiple_roots || self.saturated || self.failed)
    }
}

impl fmt::Display for PointFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.multiple_roots {
            parts.push("multiple_roots");
        }
        if self.saturated {
            parts.push("saturated");
        }
        if self.failed {
            parts.push("failed");
        }
        f.write_str(&parts.join("|"))
    }
}

impl FromStr for PointFlags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut flags = PointFlags::default();
        for part in s.split('|').filter(|p| !p.is_empty()) {
            match part {
                "multiple_roots" => flags.multiple_roots = true,
                "saturated" => flags.saturated = true,
                "failed" => flags.failed = true,
                other => return Err(Error::Parse(format!("unknown flag '{other}'"))),
            }
        }
        Ok(flags)
    }
}

/// One solved point of a threshold curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub kind: ThresholdKind,
    pub beta: f64,
    pub theta_hat: f64,
    pub alpha_min: f64,
    pub eps: f64,
    /// θ-equation residual at `theta_hat`.
    pub residual: f64,
    pub flags: PointFlags,
}

/// A certified root of the θ equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaRoot {
    pub theta: f64,
    pub residual: f64,
    pub sign_changes: usize,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta = {beta} outside (0, 1)")))
    }
}

// Argument of the quantile term and its complement, kept apart so that neither
// end of the bracket loses precision to cancellation.
fn quantile_arg(kind: ThresholdKind, theta: f64, beta: f64, eps: f64) -> (f64, f64) {
    match kind {
        ThresholdKind::Strong => {
            let u = 1.0 - theta;
            ((1.0 + eps) * u, theta - eps * u)
        }
        _ => {
            let q = (1.0 - theta) / (1.0 - beta);
            ((1.0 + eps) * q, (theta - beta) / (1.0 - beta) - eps * q)
        }
    }
}

// Tail fraction handed to the tail moments of the off-support block.
fn block_tail(theta: f64, beta: f64) -> f64 {
    (theta - beta) / (1.0 - beta)
}

/// Left-hand side of the θ equation for `kind`.
pub fn theta_residual(kind: ThresholdKind, theta: f64, beta: f64, eps: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(theta > beta && theta <= 1.0) {
        return Err(Error::Domain(format!("theta = {theta} outside ({beta}, 1]")));
    }
    let shrink = 1.0 - eps;
    let (arg, comp) = quantile_arg(kind, theta, beta, eps);
    let domain = || Error::Domain(format!("quantile argument {arg} outside the support at theta = {theta}"));
    let mean = match kind {
        ThresholdKind::Strong => tail_m1_abs(theta) - 2.0 * tail_m1_abs(beta),
        ThresholdKind::WeakFixedSupportSigns => (1.0 - beta) * tail_m1_abs(block_tail(theta, beta)),
        ThresholdKind::Sectional => (1.0 - beta) * tail_m1_abs(block_tail(theta, beta)) - mean_abs_normal() * beta,
        ThresholdKind::WeakNonnegative => (1.0 - beta) * tail_m1_gauss(block_tail(theta, beta)),
    };
    let quantile = match kind {
        ThresholdKind::WeakNonnegative => {
            if arg == 0.0 {
                return Ok(f64::INFINITY);
            }
            if !(arg > 0.0 && comp > 0.0) {
                return Err(domain());
            }
            normal_quantile_split(arg, comp)
        }
        _ => {
            if !(arg >= 0.0 && comp > 0.0) {
                return Err(domain());
            }
            abs_quantile_split(arg, comp)
        }
    };
    Ok(shrink * mean / theta - quantile)
}

/// Right-hand side of the α inequality for `kind` at a given θ̂.
pub fn alpha_at(kind: ThresholdKind, theta_hat: f64, beta: f64) -> f64 {
    if kind == ThresholdKind::Strong {
        let mean = tail_m1_abs(theta_hat) - 2.0 * tail_m1_abs(beta);
        return tail_m2_abs(theta_hat) - mean * mean / theta_hat;
    }
    let tail = block_tail(theta_hat, beta);
    let (second, mean) = match kind {
        ThresholdKind::WeakFixedSupportSigns => (tail_m2_abs(tail), (1.0 - beta) * tail_m1_abs(tail)),
        ThresholdKind::Sectional => (tail_m2_abs(tail), (1.0 - beta) * tail_m1_abs(tail) - mean_abs_normal() * beta),
        _ => (tail_m2_signed(tail), (1.0 - beta) * tail_m1_gauss(tail)),
    };
    (1.0 - beta) * second + beta - mean * mean / theta_hat
}

const EDGE: f64 = 1e-12;
const PRESCAN: usize = 256;

fn bracket(kind: ThresholdKind, beta: f64, eps: f64) -> (f64, f64) {
    let domain = match kind {
        ThresholdKind::Strong => 1.0 - 1.0 / (1.0 + eps),
        _ => 1.0 - (1.0 - beta) / (1.0 + eps),
    };
    (beta.max(domain) + EDGE, 1.0 - EDGE)
}

/// Conditioning factor of the θ residual.
///
/// Apart from the strong kind the residual is a function of
/// `(1 - θ)/(1 - β)`, so θ's floating-point resolution limits it to about
/// `ulp/(1 - β)`. Certification uses `10·theta_tol·residual_scale`.
pub fn residual_scale(kind: ThresholdKind, beta: f64) -> f64 {
    match kind {
        ThresholdKind::Strong => 1.0,
        _ => 1.0 / (1.0 - beta),
    }
}

/// Locate θ̂ together with its residual and the number of sign changes seen.
pub fn solve_theta_detailed(kind: ThresholdKind, beta: f64, cfg: &SolverConfig) -> Result<ThetaRoot> {
    cfg.validate()?;
    check_beta(beta)?;
    let (lo, hi) = bracket(kind, beta, cfg.eps);
    let res = |t: f64| theta_residual(kind, t, beta, cfg.eps);

    let grid: Vec<f64> =
        (0..=PRESCAN).map(|i| if i == PRESCAN { hi } else { lo + (hi - lo) * i as f64 / PRESCAN as f64 }).collect();
    let values = grid.iter().map(|&t| res(t)).collect::<Result<Vec<_>>>()?;
    let changes: Vec<usize> =
        (0..PRESCAN).filter(|&i| values[i] == 0.0 || (values[i] < 0.0) != (values[i + 1] < 0.0)).collect();
    let Some(&last) = changes.last() else {
        return Err(Error::NoRoot { lo, hi, r_lo: values[0], r_hi: values[PRESCAN] });
    };
    if values[PRESCAN] == 0.0 {
        return Ok(ThetaRoot { theta: hi, residual: 0.0, sign_changes: changes.len() });
    }

    let (mut a, mut b) = (grid[last], grid[last + 1]);
    let (mut ra, mut rb) = (values[last], values[last + 1]);
    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let rm = res(mid)?;
        if rm == 0.0 {
            a = mid;
            b = mid;
            ra = 0.0;
            rb = 0.0;
            break;
        }
        if (rm < 0.0) == (ra < 0.0) {
            a = mid;
            ra = rm;
        } else {
            b = mid;
            rb = rm;
        }
    }
    let (theta, residual) = if ra.abs() <= rb.abs() { (a, ra) } else { (b, rb) };
    let bound = 10.0 * cfg.theta_tol * residual_scale(kind, beta);
    if residual.abs() > bound {
        return Err(Error::Uncertified { theta, residual, bound });
    }
    Ok(ThetaRoot { theta, residual, sign_changes: changes.len() })
}

/// Root θ̂ of the θ equation on `(beta, 1)`; the largest one if there are several.
pub fn solve_theta(kind: ThresholdKind, beta: f64, cfg: &SolverConfig) -> Result<f64> {
    solve_theta_detailed(kind, beta, cfg).map(|r| r.theta)
}

/// Solve for θ̂ and evaluate the minimal α at which the bound certifies recovery.
///
/// `beta = 0` gives `alpha_min = 0` (the empty signal). When the θ equation has
/// no root because its residual is non-positive on the whole bracket, the
/// point is flagged `saturated` with `theta_hat = 1` and `alpha_min = 1`.
pub fn alpha_bound(kind: ThresholdKind, beta: f64, cfg: &SolverConfig) -> Result<CurvePoint> {
    cfg.validate()?;
    let mut point = CurvePoint {
        kind,
        beta,
        theta_hat: 0.0,
        alpha_min: 0.0,
        eps: cfg.eps,
        residual: 0.0,
        flags: PointFlags::default(),
    };
    if beta == 0.0 {
        return Ok(point);
    }
    match solve_theta_detailed(kind, beta, cfg) {
        Ok(root) => {
            point.theta_hat = root.theta;
            point.residual = root.residual;
            point.flags.multiple_roots = root.sign_changes > 1;
            point.alpha_min = alpha_at(kind, root.theta, beta);
            Ok(point)
        }
        Err(Error::NoRoot { r_hi, .. }) if r_hi <= 0.0 => {
            point.theta_hat = 1.0;
            point.residual = theta_residual(kind, 1.0, beta, cfg.eps)?;
            point.alpha_min = 1.0;
            point.flags.saturated = true;
            Ok(point)
        }
        Err(e) => Err(e),
    }
}

/// Threshold curve over a strictly increasing β grid in `[0, 1)`.
///
/// Points that cannot be solved are kept with `flags.failed` set.
pub fn curve(kind: ThresholdKind, beta_grid: &[f64], cfg: &SolverConfig) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    if let Some(bad) = beta_grid.iter().find(|b| !(**b >= 0.0 && **b < 1.0)) {
        return Err(Error::Domain(format!("grid value {bad} outside [0, 1)")));
    }
    if beta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("beta grid must be strictly increasing".into()));
    }
    Ok(par::map_slice(beta_grid, |&beta| {
        alpha_bound(kind, beta, cfg).unwrap_or(CurvePoint {
            kind,
            beta,
            theta_hat: f64::NAN,
            alpha_min: f64::NAN,
            eps: cfg.eps,
            residual: f64::NAN,
            flags: PointFlags { failed: true, ..PointFlags::default() },
        })
    }))
}

const BETA_LO: f64 = 1e-8;
const BETA_HI: f64 = 1.0 - 1e-8;

/// Largest β whose bound needs no more than `alpha` measurements per unknown.
///
/// If every β in the search range stays below `alpha` the upper end of the
/// range, `1 - 1e-8`, is returned.
pub fn invert_alpha(kind: ThresholdKind, alpha: f64, cfg: &SolverConfig) -> Result<f64> {
    cfg.validate()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0, 1]")));
    }
    let below = |beta: f64| -> Result<bool> { Ok(alpha_bound(kind, beta, cfg)?.alpha_min < alpha) };
    let (mut lo, mut hi) = (BETA_LO, BETA_HI);
    if !below(lo)? {
        let a_lo = alpha_bound(kind, lo, cfg)?.alpha_min;
        return Err(Error::NoRoot { lo, hi, r_lo: a_lo - alpha, r_hi: f64::NAN });
    }
    if below(hi)? {
        return Ok(hi);
    }
    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// β at which the bound reaches `alpha = 1`.
pub fn beta_max(kind: ThresholdKind, cfg: &SolverConfig) -> Result<f64> {
    invert_alpha(kind, 1.0, cfg)
}
