//! Minimal SVG line plots (log-log and linear), no plotting dependency.
//! Output is fully determined by the data: no timestamps, no randomness.

use std::fmt::Write as _;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const W: f64 = 640.0;
const H: f64 = 440.0;
const MARGIN: f64 = 56.0;

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
        (a..=b).map(|e| 10f64.powi(e)).filter(|&v| v >= lo * 0.999 && v <= hi * 1.001).collect()
    } else {
        let span = hi - lo;
        let step = 10f64.powf(span.log10().floor());
        let step = if span / step > 5.0 { step } else { step / 2.0 };
        let mut v = (lo / step).ceil() * step;
        let mut out = vec![];
        while v <= hi + 1e-12 * span {
            out.push(v);
            v += step;
        }
        out
    }
}

/// Render series to an SVG string. `log_x`/`log_y` select log axes; points
/// with non-positive coordinates on a log axis are dropped.
pub fn plot(title: &str, series: &[Series], log_x: bool, log_y: bool) -> String {
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let usable: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| (!log_x || *x > 0.0) && (!log_y || *y > 0.0))
        .map(|&(x, y)| (x, y))
        .collect();
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        xml_escape(title)
    );
    if usable.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &usable {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 == x1 {
        x1 = x0 + 1.0;
    }
    if y0 == y1 {
        y1 = y0 * 1.5 + 1e-12;
    }
    let (ux0, ux1) = (tx(x0), tx(x1));
    let (uy0, uy1) = (ty(y0), ty(y1));
    let px = |x: f64| MARGIN + (tx(x) - ux0) / (ux1 - ux0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (ty(y) - uy0) / (uy1 - uy0) * (H - 2.0 * MARGIN);

    // axes and ticks
    let _ = write!(
        svg,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for t in ticks(x0, x1, log_x) {
        let _ = write!(
            svg,
            "<line x1=\"{0:.2}\" y1=\"{1}\" x2=\"{0:.2}\" y2=\"{2}\" stroke=\"#ccc\"/>\n\
             <text x=\"{0:.2}\" y=\"{3}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{4}</text>\n",
            px(t),
            MARGIN,
            H - MARGIN,
            H - MARGIN + 16.0,
            fmt_tick(t)
        );
    }
    for t in ticks(y0, y1, log_y) {
        let _ = write!(
            svg,
            "<line x1=\"{1}\" y1=\"{0:.2}\" x2=\"{2}\" y2=\"{0:.2}\" stroke=\"#ccc\"/>\n\
             <text x=\"{3}\" y=\"{0:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{4}</text>\n",
            py(t),
            MARGIN,
            W - MARGIN,
            MARGIN - 6.0,
            fmt_tick(t)
        );
    }
    // series
    for (si, s) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|(x, y)| (!log_x || *x > 0.0) && (!log_y || *y > 0.0))
            .map(|&(x, y)| (px(x), py(y)))
            .collect();
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = write!(svg, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n", path.join(" "));
        }
        for (x, y) in &pts {
            let _ = write!(svg, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\"/>\n");
        }
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            W - MARGIN - 150.0,
            MARGIN + 16.0 + 16.0 * si as f64,
            xml_escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        format!("{v}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
