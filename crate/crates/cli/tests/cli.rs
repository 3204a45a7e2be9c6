use cs_thresh::thresholds::{curve, CurvePoint, SolverConfig};
use cs_thresh::ThresholdKind;
use cs_thresh_cli::{curve_csv, parse_curve_csv};
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cs-thresh"))
        .args(args)
        .env_remove("CS_THRESH_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn strong_curve_has_24_rows_and_saturates_at_the_end() {
    let o = cli(&["curve", "--kind", "strong", "--beta", "0.01:0.24:0.01"]);
    assert_eq!(o.status.code(), Some(0));
    let pts = parse_curve_csv(&stdout(&o)).unwrap();
    assert_eq!(pts.len(), 24);
    for w in pts.windows(2) {
        assert!(w[1].alpha_min >= w[0].alpha_min);
    }
    let last = pts.last().unwrap();
    assert!((last.alpha_min - 1.0).abs() < 1e-9);
    assert!(last.flags.saturated);
}

#[test]
fn single_point_grid() {
    let o = cli(&["curve", "--kind", "strong", "--beta", "0.24:0.24:0.01"]);
    assert_eq!(o.status.code(), Some(0));
    let pts = parse_curve_csv(&stdout(&o)).unwrap();
    assert_eq!(pts.len(), 1);
    assert!((pts[0].alpha_min - 1.0).abs() < 1e-9);
}

#[test]
fn empty_grid_is_a_usage_error() {
    let o = cli(&["curve", "--kind", "strong", "--beta", "0.5:0.4:0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_arguments_exit_2() {
    for args in [
        vec!["curve", "--kind", "bogus", "--beta", "0.1"],
        vec!["curve", "--kind", "weak", "--beta", "0.1", "--eps", "-1"],
        vec!["curve", "--kind", "weak", "--beta", "x:y:z"],
        vec!["invert", "--kind", "weak", "--alpha", "1.5"],
        vec!["width", "--kind", "strong", "--n", "10", "--k", "20", "--m", "5"],
        vec!["phase", "--n", "20", "--alpha", "0.5", "--beta", "0.1", "--model", "weak", "--trials", "0"],
        vec!["check-nsp", "--matrix", "/nonexistent/matrix.txt", "--k", "1", "--variant", "strong"],
        vec![],
    ] {
        let o = cli(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unsolvable_point_is_written_flagged_and_exits_1() {
    let o = cli(&["curve", "--kind", "nonneg", "--beta", "0.1,0.999999999999"]);
    assert_eq!(o.status.code(), Some(1));
    let pts = parse_curve_csv(&stdout(&o)).unwrap();
    assert_eq!(pts.len(), 2);
    assert!(pts[0].flags.is_clean());
    assert!(pts[1].flags.failed);
    assert!(pts[1].alpha_min.is_nan());
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let cfg = SolverConfig::default();
    for kind in ThresholdKind::ALL {
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.037).collect();
        let pts = curve(kind, &grid, &cfg).unwrap();
        let back = parse_curve_csv(&curve_csv(&pts)).unwrap();
        assert_eq!(back.len(), pts.len());
        for (a, b) in pts.iter().zip(&back) {
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.beta.to_bits(), b.beta.to_bits());
            assert_eq!(a.theta_hat.to_bits(), b.theta_hat.to_bits());
            assert_eq!(a.alpha_min.to_bits(), b.alpha_min.to_bits());
            assert_eq!(a.eps.to_bits(), b.eps.to_bits());
            assert_eq!(a.flags, b.flags);
        }
    }
}

#[test]
fn json_round_trip_is_bit_exact() {
    let o = cli(&["curve", "--kind", "sectional", "--beta", "0.02:0.6:0.02", "--eps", "0.1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let pts: Vec<CurvePoint> = serde_json::from_str(&stdout(&o)).unwrap();
    let csv = cli(&["curve", "--kind", "sectional", "--beta", "0.02:0.6:0.02", "--eps", "0.1"]);
    let from_csv = parse_curve_csv(&stdout(&csv)).unwrap();
    assert_eq!(pts.len(), from_csv.len());
    for (a, b) in pts.iter().zip(&from_csv) {
        assert_eq!(a.alpha_min.to_bits(), b.alpha_min.to_bits());
        assert_eq!(a.theta_hat.to_bits(), b.theta_hat.to_bits());
        assert_eq!(a.flags, b.flags);
    }
    let again = serde_json::to_string_pretty(&pts).unwrap() + "\n";
    assert_eq!(again, stdout(&o));
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let runs: Vec<Vec<&str>> = vec![
        vec!["width", "--kind", "strong", "--n", "300", "--k", "20", "--m", "150", "--samples", "40", "--seed", "9"],
        vec![
            "width",
            "--kind",
            "weak-nonneg",
            "--n",
            "300",
            "--k",
            "20",
            "--m",
            "150",
            "--samples",
            "40",
            "--seed",
            "9",
            "--c-mode",
            "population",
        ],
        vec![
            "phase",
            "--n",
            "40",
            "--alpha",
            "0.3,0.6",
            "--beta",
            "0.1:0.3:0.1",
            "--trials",
            "5",
            "--model",
            "weak",
            "--seed",
            "4",
        ],
        vec!["curve", "--kind", "weak", "--beta", "0.05:0.95:0.05"],
    ];
    for args in runs {
        let outs: Vec<Vec<u8>> = ["1", "2", "4"]
            .iter()
            .map(|t| {
                let mut a = vec!["--threads", t];
                a.extend(&args);
                let o = cli(&a);
                assert_eq!(o.status.code(), Some(0), "{a:?}");
                o.stdout
            })
            .collect();
        assert_eq!(outs[0], outs[1], "{args:?}");
        assert_eq!(outs[0], outs[2], "{args:?}");
    }
}

#[test]
fn threads_env_fallback() {
    let o = Command::new(env!("CARGO_BIN_EXE_cs-thresh"))
        .args(["invert", "--kind", "strong", "--alpha", "0.5"])
        .env("CS_THRESH_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let bad = Command::new(env!("CARGO_BIN_EXE_cs-thresh"))
        .args(["invert", "--kind", "strong", "--alpha", "0.5"])
        .env("CS_THRESH_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn invert_matches_library() {
    let o = cli(&["invert", "--kind", "weak", "--alpha", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let beta: f64 = row[2].parse().unwrap();
    assert!((beta - 0.19284483309074046).abs() < 1e-9);
}

#[test]
fn out_and_svg_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let svg = dir.path().join("c.svg");
    let o = cli(&[
        "curve",
        "--kind",
        "weak",
        "--beta",
        "0.1:0.9:0.1",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(parse_curve_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap().len(), 9);
    let plot = std::fs::read_to_string(&svg).unwrap();
    assert!(plot.starts_with("<svg") && plot.contains("<polyline"));
}

#[test]
fn check_nsp_reports_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.txt");
    // null space spanned by (1, 1, -3): the third coordinate dominates
    std::fs::write(&path, "2 3\n3 0 1\n0 3 1\n").unwrap();
    let o = cli(&["check-nsp", "--matrix", path.to_str().unwrap(), "--k", "1", "--variant", "strong"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("verdict,fails"), "{text}");
    assert!(text.contains("support,2"), "{text}");

    std::fs::write(&path, "2 3\n1 0 1\n0 1 1\n").unwrap();
    let o = cli(&[
        "check-nsp",
        "--matrix",
        path.to_str().unwrap(),
        "--k",
        "1",
        "--variant",
        "sectional",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "holds");
}
