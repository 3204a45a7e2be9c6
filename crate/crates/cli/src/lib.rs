//! Argument parsing and output formatting for the `cs-thresh` binary.

use cs_thresh::recovery::PhaseCell;
use cs_thresh::thresholds::{CurvePoint, PointFlags};
use cs_thresh::ThresholdKind;
use std::fmt::Write as _;

pub const CURVE_HEADER: &str = "kind,beta,theta_hat,alpha_min,eps,flags";
pub const PHASE_HEADER: &str = "alpha,beta,n,trials,successes,lp_failures,seed";
pub const INVERT_HEADER: &str = "kind,alpha,beta,eps";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Expand a grid description.
///
/// Accepted forms are `start:stop:step`, a comma-separated list, or one number.
/// A range keeps every `start + i*step` up to `stop` plus half a step, and is
/// empty when `stop < start`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parse = |t: &str| -> Result<f64, String> {
        let v: f64 = t.trim().parse().map_err(|_| format!("'{t}' is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("'{t}' is not finite"))
        }
    };
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
            if step <= 0.0 {
                return Err(format!("step must be positive in '{text}'"));
            }
            if stop < start {
                Vec::new()
            } else {
                let count = ((stop - start) / step + 0.5).floor() as usize + 1;
                (0..count).map(|i| start + i as f64 * step).collect()
            }
        }
        [single] => single.split(',').map(parse).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("grid '{text}' must be start:stop:step, a list, or a number")),
    };
    if grid.is_empty() {
        return Err(format!("grid '{text}' is empty"));
    }
    Ok(grid)
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.kind,
            num(p.beta),
            num(p.theta_hat),
            num(p.alpha_min),
            num(p.eps),
            p.flags
        );
    }
    out
}

/// Inverse of [`curve_csv`]; the residual column is not stored and comes back as NaN.
pub fn parse_curve_csv(text: &str) -> Result<Vec<CurvePoint>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err("missing curve header".into());
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(format!("expected 6 fields in '{line}'"));
            }
            let n = |s: &str| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
            Ok(CurvePoint {
                kind: f[0].parse::<ThresholdKind>().map_err(|e| e.to_string())?,
                beta: n(f[1])?,
                theta_hat: n(f[2])?,
                alpha_min: n(f[3])?,
                eps: n(f[4])?,
                residual: f64::NAN,
                flags: f[5].parse::<PointFlags>().map_err(|e| e.to_string())?,
            })
        })
        .collect()
}

pub fn phase_csv(cells: &[PhaseCell]) -> String {
    let mut out = String::from(PHASE_HEADER);
    out.push('\n');
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(c.alpha),
            num(c.beta),
            c.n,
            c.trials,
            c.successes,
            c.lp_failures,
            c.seed
        );
    }
    out
}

/// Polyline plot of `alpha_min` against `beta`, skipping failed points.
pub fn curve_svg(points: &[CurvePoint]) -> String {
    let (w, h, pad) = (640.0, 480.0, 48.0);
    let good: Vec<&CurvePoint> = points.iter().filter(|p| !p.flags.failed).collect();
    let x_max = good.iter().map(|p| p.beta).fold(0.0f64, f64::max).max(1e-12);
    let y_max = good.iter().map(|p| p.alpha_min).fold(1.0f64, f64::max);
    let sx = |b: f64| pad + b / x_max * (w - 2.0 * pad);
    let sy = |a: f64| h - pad - a / y_max * (h - 2.0 * pad);
    let pts: Vec<String> = good.iter().map(|p| format!("{:.2},{:.2}", sx(p.beta), sy(p.alpha_min))).collect();
    let kind = points.first().map(|p| p.kind.name()).unwrap_or("");
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
            "<rect x=\"{pad}\" y=\"{pad}\" width=\"{iw}\" height=\"{ih}\" fill=\"none\" stroke=\"#888\"/>\n",
            "<text x=\"{pad}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"14\">{kind}: alpha_min vs beta (beta up to {xm:.3}, alpha up to {ym:.3})</text>\n",
            "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{pts}\"/>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        pad = pad,
        iw = w - 2.0 * pad,
        ih = h - 2.0 * pad,
        ty = pad - 16.0,
        kind = kind,
        xm = x_max,
        ym = y_max,
        pts = pts.join(" ")
    )
}
