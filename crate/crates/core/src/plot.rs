//! Deterministic SVG scatter plots of measured values against their
//! bounds.
//!
//! No plotting dependency: the output is a self-contained SVG string built
//! with fixed-precision number formatting, so the same report always
//! yields byte-identical bytes. Each trial contributes one point with the
//! bound on the x axis and the measured value on the y axis; everything
//! strictly below the dashed y = x line satisfied its bound.

use crate::harness::report::SuiteReport;
use crate::icl::TrajectoryStep;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

/// The finite (log_bound, log_actual) pairs of a report, in plot (x, y)
/// order. The bound column is reconstructed from the principal slack, so
/// the extraction works for every suite; trials with an infinite entry
/// (zero shifts) are skipped.
pub fn report_points(report: &SuiteReport) -> Vec<(f64, f64)> {
    report
        .records
        .iter()
        .filter_map(|r| {
            let bound = r.log_bound_db.unwrap_or(r.log_actual + r.slack_log);
            (r.log_actual.is_finite() && bound.is_finite()).then_some((bound, r.log_actual))
        })
        .collect()
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Builds the scatter SVG. An empty point list yields axes over a default
/// range.
pub fn scatter_svg(points: &[(f64, f64)], title: &str) -> String {
    let (x0, x1) = padded_range(points.iter().map(|p| p.0));
    let (y0, y1) = padded_range(points.iter().map(|p| p.1));
    let sx = |v: f64| MARGIN_LEFT + (v - x0) / (x1 - x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT);
    let sy = |v: f64| {
        HEIGHT - MARGIN_BOTTOM - (v - y0) / (y1 - y0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    };

    let mut svg = String::with_capacity(4096 + 64 * points.len());
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"16\" \
         text-anchor=\"middle\">{}</text>\n",
        fmt(WIDTH / 2.0),
        escape(title)
    ));

    // Axes.
    let bottom = HEIGHT - MARGIN_BOTTOM;
    let right = WIDTH - MARGIN_RIGHT;
    svg.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = fmt(MARGIN_LEFT),
        r = fmt(right),
        t = fmt(MARGIN_TOP),
        b = fmt(bottom),
    ));
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"black\"/>\n\
             <text x=\"{x}\" y=\"{ty}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"middle\">{label}</text>\n",
            x = fmt(sx(xv)),
            b = fmt(bottom),
            b2 = fmt(bottom + 5.0),
            ty = fmt(bottom + 18.0),
            label = fmt(xv),
        ));
        svg.push_str(&format!(
            "<line x1=\"{l}\" y1=\"{y}\" x2=\"{l2}\" y2=\"{y}\" stroke=\"black\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"end\">{label}</text>\n",
            l = fmt(MARGIN_LEFT),
            l2 = fmt(MARGIN_LEFT - 5.0),
            y = fmt(sy(yv)),
            tx = fmt(MARGIN_LEFT - 8.0),
            ty = fmt(sy(yv) + 4.0),
            label = fmt(yv),
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"13\" \
         text-anchor=\"middle\">log bound</text>\n",
        fmt((MARGIN_LEFT + right) / 2.0),
        fmt(HEIGHT - 12.0),
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"monospace\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">log actual</text>\n",
        fmt((MARGIN_TOP + bottom) / 2.0),
        fmt((MARGIN_TOP + bottom) / 2.0),
    ));

    // y = x reference, clipped to the visible rectangle.
    let lo = x0.max(y0);
    let hi = x1.min(y1);
    if lo < hi {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"gray\" \
             stroke-dasharray=\"6 4\"/>\n",
            fmt(sx(lo)),
            fmt(sy(lo)),
            fmt(sx(hi)),
            fmt(sy(hi)),
        ));
    }

    for (x, y) in points {
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"#4878a8\" fill-opacity=\"0.6\"/>\n",
            fmt(sx(*x)),
            fmt(sy(*y)),
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Scatter of a suite report: one circle per trial.
pub fn emit_plot(report: &SuiteReport) -> String {
    scatter_svg(&report_points(report), &report.suite)
}

/// The finite (log_bound, log_actual) pairs of a trajectory dump: one per
/// step that carries a certified bound and a nonzero measured shift.
pub fn trajectory_points(steps: &[TrajectoryStep]) -> Vec<(f64, f64)> {
    steps
        .iter()
        .filter_map(|s| {
            let bound = s.log_bound?;
            let actual = s.delta_b_norm.ln();
            (actual.is_finite() && bound.is_finite()).then_some((bound, actual))
        })
        .collect()
}

/// Scatter of a trajectory dump: one circle per certified step.
pub fn emit_trajectory_plot(steps: &[TrajectoryStep]) -> String {
    scatter_svg(&trajectory_points(steps), "trajectory")
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
