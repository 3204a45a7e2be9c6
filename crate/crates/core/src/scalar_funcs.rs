//! Error function, its inverse, quantiles of the four scalar laws built from a
//! standard normal `X` (`|X|`, `X²`, `X`, `sign(X)·X²`), and the limiting
//! upper-tail moments of those laws.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// A number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Probability(f64);

impl Probability {
    pub fn new(p: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(Error::Domain(format!("probability {p} outside [0, 1]")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Upper-tail mass in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TailFraction(f64);

impl TailFraction {
    pub fn new(theta: f64) -> Result<Self> {
        if theta > 0.0 && theta <= 1.0 {
            Ok(Self(theta))
        } else {
            Err(Error::Domain(format!("tail fraction {theta} outside (0, 1]")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Standard error function.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

// Rational approximation of the normal quantile (P. J. Acklam), relative error
// about 1.2e-9. Returns Φ⁻¹(P) for P = 1 - c/2 >= 1/2, given the half-width
// a = 2P - 1 and c = 1 - a, both supplied exactly by the caller.
fn acklam_upper(a: f64, c: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    // Upper tail mass 1 - P.
    let tail = 0.5 * c;
    if tail > 0.024_25 {
        let q = 0.5 * a;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * tail.ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

// erfinv(a) for a in [0, 1) with c = 1 - a given separately, so callers that
// know the complement exactly do not lose it to rounding.
fn erfinv_nonneg(a: f64, c: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let mut y = acklam_upper(a, c) / SQRT_2;
    for _ in 0..2 {
        let f = if a <= 0.5 { erf(y) - a } else { c - erfc(y) };
        let df = FRAC_2_SQRT_PI * (-y * y).exp();
        if df == 0.0 {
            break;
        }
        y -= f / df;
    }
    y
}

/// Inverse error function on `(-1, 1)`.
pub fn erfinv(p: f64) -> Result<f64> {
    if !(p > -1.0 && p < 1.0) {
        return Err(Error::Domain(format!("erfinv argument {p} outside (-1, 1)")));
    }
    let a = p.abs();
    Ok(erfinv_nonneg(a, 1.0 - a).copysign(p))
}

fn normal_quantile(p: f64) -> f64 {
    normal_quantile_split(p, 1.0 - p)
}

// Φ⁻¹(p) with the complement c = 1 - p supplied by the caller.
pub(crate) fn normal_quantile_split(p: f64, c: f64) -> f64 {
    if p >= 0.5 {
        SQRT_2 * erfinv_nonneg(2.0 * p - 1.0, 2.0 * c)
    } else {
        -SQRT_2 * erfinv_nonneg(1.0 - 2.0 * p, 2.0 * p)
    }
}

// Quantile of |X| at p with the complement c = 1 - p supplied by the caller.
pub(crate) fn abs_quantile_split(p: f64, c: f64) -> f64 {
    SQRT_2 * erfinv_nonneg(p, c)
}

fn check_half_open(p: f64) -> Result<f64> {
    let p = Probability::new(p)?.get();
    if p == 1.0 {
        return Err(Error::Domain("quantile at p = 1 is infinite".into()));
    }
    Ok(p)
}

fn check_open(p: f64) -> Result<f64> {
    let p = Probability::new(p)?.get();
    if p == 0.0 || p == 1.0 {
        return Err(Error::Domain(format!("quantile at p = {p} is infinite")));
    }
    Ok(p)
}

/// Quantile of `|X|`: `√2·erfinv(p)` on `[0, 1)`.
pub fn inv_cdf_abs(p: f64) -> Result<f64> {
    let p = check_half_open(p)?;
    Ok(SQRT_2 * erfinv_nonneg(p, 1.0 - p))
}

/// Quantile of `X²`, the square of [`inv_cdf_abs`].
pub fn inv_cdf_sq(p: f64) -> Result<f64> {
    let x = inv_cdf_abs(p)?;
    Ok(x * x)
}

/// Quantile of `X` on `(0, 1)`.
pub fn inv_cdf_gauss(p: f64) -> Result<f64> {
    let p = check_open(p)?;
    Ok(normal_quantile(p))
}

/// Quantile of `sign(X)·X²` on `(0, 1)`.
pub fn inv_cdf_signed_sq(p: f64) -> Result<f64> {
    let x = inv_cdf_gauss(p)?;
    Ok(x * x.abs())
}

// Upper quantile of |X| at tail mass theta, i.e. F_a⁻¹(1 - theta) with the
// complement passed through untouched.
fn abs_upper_quantile(theta: f64) -> f64 {
    SQRT_2 * erfinv_nonneg(1.0 - theta, theta)
}

fn clamp_theta(theta: f64) -> f64 {
    theta.clamp(0.0, 1.0)
}

/// `lim E[sum of the top θn values of |h|] / n`.
///
/// Arguments are clamped into `[0, 1]`; `theta = 0` is the empty-tail limit.
pub fn tail_m1_abs(theta: f64) -> f64 {
    let theta = clamp_theta(theta);
    if theta == 0.0 {
        return 0.0;
    }
    let e = erfinv_nonneg(1.0 - theta, theta);
    SQRT_2_OVER_PI * (-e * e).exp()
}

/// `lim E[sum of squares of the top θn values of |h|] / n`.
pub fn tail_m2_abs(theta: f64) -> f64 {
    let theta = clamp_theta(theta);
    if theta == 0.0 {
        return 0.0;
    }
    let x0 = abs_upper_quantile(theta);
    theta + 2.0 * x0 * normal_pdf(x0)
}

/// `lim E[sum of the top θn values of h] / n` for signed `h`.
pub fn tail_m1_gauss(theta: f64) -> f64 {
    let theta = clamp_theta(theta);
    if theta == 0.0 || theta == 1.0 {
        return 0.0;
    }
    normal_pdf(normal_quantile(theta))
}

/// `lim E[sum of h_i² over the top θn values of h] / n` for signed `h`.
pub fn tail_m2_signed(theta: f64) -> f64 {
    let theta = clamp_theta(theta);
    if theta == 0.0 || theta == 1.0 {
        return theta;
    }
    let x0 = -normal_quantile(theta);
    theta + x0 * normal_pdf(x0)
}

/// Law selector for [`quad_tail_moment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailDist {
    /// `|X|`
    Abs,
    /// `X²`
    Sq,
    /// `X`
    Gauss,
    /// `sign(X)·X²`
    SignedSq,
}

impl TailDist {
    pub const ALL: [TailDist; 4] = [TailDist::Abs, TailDist::Sq, TailDist::Gauss, TailDist::SignedSq];

    /// Closed-form tail moment at tail fraction `theta`.
    pub fn closed_form(self, theta: f64) -> f64 {
        match self {
            TailDist::Abs => tail_m1_abs(theta),
            TailDist::Sq => tail_m2_abs(theta),
            TailDist::Gauss => tail_m1_gauss(theta),
            TailDist::SignedSq => tail_m2_signed(theta),
        }
    }
}

const TRUNCATION: f64 = 1e-14;

/// `∫_{F⁻¹(q)}^∞ t dF(t)` by adaptive Gauss–Kronrod quadrature.
///
/// The integral is pulled back to the underlying normal variable `x` and cut
/// at the `1 - 1e-14` quantile (and at `1e-14` from below for the signed laws
/// when `q` is smaller than that). For `SignedSq` the integrand is the
/// magnitude `|t|`, so the value is the second moment carried by the upper
/// tail, which is what [`tail_m2_signed`] measures.
pub fn quad_tail_moment(dist: TailDist, q: f64) -> Result<f64> {
    let q = check_half_open(q)?;
    let hi_abs = SQRT_2 * erfinv_nonneg(1.0 - TRUNCATION, TRUNCATION);
    let hi_gauss = normal_quantile(1.0 - TRUNCATION);
    let lo_signed = |q: f64| normal_quantile(q.max(TRUNCATION));
    let value = match dist {
        TailDist::Abs => adaptive(|x| 2.0 * x * normal_pdf(x), inv_cdf_abs(q)?, hi_abs),
        TailDist::Sq => adaptive(|x| 2.0 * x * x * normal_pdf(x), inv_cdf_abs(q)?, hi_abs),
        TailDist::Gauss => adaptive(|x| x * normal_pdf(x), lo_signed(q), hi_gauss),
        TailDist::SignedSq => adaptive(|x| x * x * normal_pdf(x), lo_signed(q), hi_gauss),
    };
    Ok(value)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (k, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return k;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    rec(&f, a, b, 1e-13, 40)
}

/// `√(2/π)`, the mean of `|X|`.
pub fn mean_abs_normal() -> f64 {
    (2.0 / PI).sqrt()
}
