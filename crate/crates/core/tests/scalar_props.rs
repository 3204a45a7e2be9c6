use cs_thresh::rng::{gaussian_vec, stream};
use cs_thresh::scalar_funcs::*;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn erfinv_round_trip_on_fine_grid() {
    let mut worst = 0.0f64;
    let mut p = -1.0 + 1e-6;
    while p < 1.0 - 1e-6 {
        worst = worst.max((erf(erfinv(p).unwrap()) - p).abs());
        p += 1e-3;
    }
    assert!(worst <= 1e-12, "worst round-trip error {worst:e}");
}

#[test]
fn normal_quantile_agrees_with_statrs() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    for i in 1..1000 {
        let p = i as f64 / 1000.0;
        let ours = inv_cdf_gauss(p).unwrap();
        let theirs = normal.inverse_cdf(p);
        assert!((ours - theirs).abs() <= 1e-9 * (1.0 + theirs.abs()), "p = {p}: {ours} vs {theirs}");
        assert!((normal.cdf(ours) - p).abs() <= 1e-10, "p = {p}");
        let own_cdf = 0.5 * erfc(-ours / std::f64::consts::SQRT_2);
        assert!((own_cdf - p).abs() <= 1e-14 * p.max(1e-3), "p = {p}");
    }
}

#[test]
fn closed_forms_match_quadrature_at_50_quantiles() {
    for dist in TailDist::ALL {
        for i in 0..50 {
            let q = 0.999 * (i as f64 + 0.5) / 50.0;
            let quad = quad_tail_moment(dist, q).unwrap();
            let closed = dist.closed_form(1.0 - q);
            assert!((quad - closed).abs() <= 1e-9, "{dist:?} q = {q}: {closed} vs {quad}");
        }
    }
}

#[test]
fn tail_moments_increase_except_gaussian_first_moment() {
    let grid: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
    for f in [tail_m1_abs as fn(f64) -> f64, tail_m2_abs, tail_m2_signed] {
        for w in grid.windows(2) {
            assert!(f(w[1]) > f(w[0]), "not increasing at {}", w[0]);
        }
    }
    // the signed first moment peaks at one half and falls back to zero
    for w in grid.windows(2) {
        if w[1] <= 0.5 {
            assert!(tail_m1_gauss(w[1]) > tail_m1_gauss(w[0]));
        } else if w[0] >= 0.5 {
            assert!(tail_m1_gauss(w[1]) < tail_m1_gauss(w[0]));
        }
    }
    assert!((tail_m1_gauss(0.5) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    assert_eq!(tail_m1_gauss(1.0), 0.0);
}

#[test]
fn law_of_large_numbers_for_sorted_magnitudes() {
    let n = 100_000;
    let mut h: Vec<f64> = gaussian_vec(&mut stream(2024), n).into_iter().map(f64::abs).collect();
    h.sort_by(|a, b| b.total_cmp(a));
    for theta in [0.2, 0.5, 0.8] {
        let top = (theta * n as f64).round() as usize;
        let mean = h[..top].iter().sum::<f64>() / n as f64;
        assert!((mean - tail_m1_abs(theta)).abs() <= 5e-3, "theta = {theta}: {mean}");
        let mean_sq = h[..top].iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((mean_sq - tail_m2_abs(theta)).abs() <= 1e-2, "theta = {theta}: {mean_sq}");
    }
}

#[test]
fn full_tail_recovers_plain_moments() {
    assert!((tail_m1_abs(1.0) - mean_abs_normal()).abs() < 1e-15);
    assert!((tail_m2_abs(1.0) - 1.0).abs() < 1e-15);
    assert_eq!(tail_m1_abs(0.0), 0.0);
    assert_eq!(tail_m2_abs(0.0), 0.0);
}

proptest! {
    #[test]
    fn erfinv_inverts_erf(x in -5.5f64..5.5) {
        let p = erf(x);
        prop_assume!(p.abs() < 1.0 - 1e-15);
        let back = erfinv(p).unwrap();
        prop_assert!((erf(back) - p).abs() <= 1e-15 + 1e-15 * p.abs());
    }

    #[test]
    fn erfinv_is_odd(p in -0.999_999f64..0.999_999) {
        prop_assert_eq!(erfinv(-p).unwrap(), -erfinv(p).unwrap());
    }

    #[test]
    fn square_law_is_square_of_abs_law(p in 0.0f64..1.0) {
        let a = inv_cdf_abs(p).unwrap();
        prop_assert_eq!(inv_cdf_sq(p).unwrap(), a * a);
    }

    #[test]
    fn gaussian_quantile_is_antisymmetric(p in 1e-6f64..0.999_999) {
        let lhs = inv_cdf_gauss(1.0 - p).unwrap();
        let rhs = -inv_cdf_gauss(p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + rhs.abs()) + 1e-13);
    }

    #[test]
    fn signed_square_law_is_odd(p in 1e-6f64..0.999_999) {
        let lhs = inv_cdf_signed_sq(1.0 - p).unwrap();
        let rhs = -inv_cdf_signed_sq(p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn quantiles_reject_out_of_range(p in prop_oneof![-10.0f64..-1e-12, (1.0f64 + 1e-12)..10.0]) {
        prop_assert!(inv_cdf_abs(p).is_err());
        prop_assert!(inv_cdf_gauss(p).is_err());
        prop_assert!(Probability::new(p).is_err());
    }

    #[test]
    fn tail_moments_bounded_by_full_moments(theta in 0.0f64..=1.0) {
        prop_assert!(tail_m1_abs(theta) <= mean_abs_normal() + 1e-15);
        prop_assert!(tail_m2_abs(theta) <= 1.0 + 1e-15);
        prop_assert!(tail_m2_abs(theta) >= theta - 1e-15);
        // Cauchy-Schwarz on the tail event
        prop_assert!(tail_m1_abs(theta).powi(2) <= theta * tail_m2_abs(theta) + 1e-15);
    }
}
