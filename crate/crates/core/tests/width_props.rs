use cs_thresh::rng::{gaussian_vec, stream};
use cs_thresh::width::*;
use cs_thresh::{par, ThresholdKind};
use proptest::prelude::*;

fn any_kind() -> impl Strategy<Value = ThresholdKind> {
    prop::sample::select(ThresholdKind::ALL.to_vec())
}

fn sample_and_k(max_n: usize) -> impl Strategy<Value = (Vec<f64>, usize)> {
    (2..=max_n).prop_flat_map(|n| (prop::collection::vec(-3.0f64..3.0, n), 1..n))
}

fn exact(sv: &ScenarioVector) -> f64 {
    dual_width_bound(sv, CMode::ExactDual, None).unwrap()
}

#[test]
fn duality_on_random_gaussian_samples() {
    let mut rng = stream(77);
    let mut checked = 0;
    for n in 2..=6 {
        for k in 1..n {
            for kind in ThresholdKind::ALL {
                for _ in 0..10 {
                    let h = gaussian_vec(&mut rng, n);
                    let sv = scenario_vector(kind, &h, k).unwrap();
                    let dual = exact(&sv);
                    let primal = primal_width_oracle(&sv).unwrap();
                    assert!(dual >= primal - 1e-10, "{kind:?} {h:?} k = {k}");
                    assert!((dual - primal).abs() <= 1e-8, "{kind:?} {h:?} k = {k}: {dual} vs {primal}");
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, 600);
}

#[test]
fn report_is_independent_of_thread_count() {
    for (kind, mode) in [
        (ThresholdKind::Strong, CMode::ExactDual),
        (ThresholdKind::Sectional, CMode::Population),
        (ThresholdKind::WeakFixedSupportSigns, CMode::ExactDual),
        (ThresholdKind::WeakNonnegative, CMode::Population),
    ] {
        let run = || width_monte_carlo(kind, 400, 40, 64, 200, 11, mode).unwrap();
        let seq = par::force_sequential(run);
        for threads in [1, 4] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let got = pool.install(run);
            assert_eq!(got, seq);
            assert_eq!(got.mean_b_over_sqrt_n.to_bits(), seq.mean_b_over_sqrt_n.to_bits());
            assert_eq!(got.std_err.to_bits(), seq.std_err.to_bits());
        }
    }
}

#[test]
fn strong_mean_below_one() {
    let r = width_monte_carlo(ThresholdKind::Strong, 1000, 100, 200, 500, 3, CMode::ExactDual).unwrap();
    assert!(r.mean_b_over_sqrt_n < 1.0);
    assert!(r.std_err > 0.0);
}

#[test]
fn bound_never_exceeds_norm() {
    let mut rng = stream(5);
    for kind in ThresholdKind::ALL {
        for _ in 0..200 {
            let h = gaussian_vec(&mut rng, 30);
            let sv = scenario_vector(kind, &h, 7).unwrap();
            assert!(exact(&sv) <= sv.norm() * (1.0 + 1e-15));
            assert!(dual_width_bound(&sv, CMode::Population, Some(12)).unwrap() >= exact(&sv) - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dual_dominates_primal((h, k) in sample_and_k(6), kind in any_kind()) {
        let sv = scenario_vector(kind, &h, k).unwrap();
        let dual = exact(&sv);
        let primal = primal_width_oracle(&sv).unwrap();
        prop_assert!(dual >= primal - 1e-10);
        prop_assert!((dual - primal).abs() <= 1e-8);
    }

    #[test]
    fn scale_equivariance((h, k) in sample_and_k(20), kind in any_kind(), t in prop_oneof![Just(1e-3), 0.01f64..100.0, Just(1e3)]) {
        let sv = scenario_vector(kind, &h, k).unwrap();
        let scaled: Vec<f64> = h.iter().map(|v| v * t).collect();
        let svt = scenario_vector(kind, &scaled, k).unwrap();
        let (b, bt) = (exact(&sv), exact(&svt));
        prop_assert!((bt - t * b).abs() <= 1e-12 * (1.0 + t * b));
    }

    #[test]
    fn no_feasible_branch_uses_unconstrained_bound((h, k) in sample_and_k(20), kind in any_kind()) {
        let sv = scenario_vector(kind, &h, k).unwrap();
        if select_c_exact(&sv) == CSelection::NoFeasible {
            let b = exact(&sv);
            match kind {
                ThresholdKind::WeakNonnegative => {
                    let free = sv.n() - sv.k;
                    let expect = sv.values[..free].iter().map(|v| v.max(0.0).powi(2)).sum::<f64>()
                        + sv.values[free..].iter().map(|v| v * v).sum::<f64>();
                    prop_assert_eq!(b, expect.sqrt());
                }
                _ => prop_assert_eq!(b, sv.norm()),
            }
        }
    }

    #[test]
    fn strong_width_grows_with_k(h in prop::collection::vec(-3.0f64..3.0, 3..=6)) {
        let n = h.len();
        let widths: Vec<f64> = (1..n)
            .map(|k| primal_width_oracle(&scenario_vector(ThresholdKind::Strong, &h, k).unwrap()).unwrap())
            .collect();
        for w in widths.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn scenario_layout(h in prop::collection::vec(-3.0f64..3.0, 4..=30), kind in any_kind()) {
        let k = h.len() / 3;
        prop_assume!(k >= 1);
        let sv = scenario_vector(kind, &h, k).unwrap();
        let free = h.len() - k;
        for w in sv.values[..free].windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        prop_assert!(sv.z[..free].iter().all(|&z| z == 1.0));
        prop_assert!(sv.z[free..].iter().all(|&z| z == -1.0));
    }
}
