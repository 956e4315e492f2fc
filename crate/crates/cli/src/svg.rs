//! Minimal SVG line and bar charts.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 48.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str, desc: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n<title>{}</title>\n<desc>{}</desc>\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        escape(title),
        escape(desc),
        W / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, x: (f64, f64), y: (f64, f64), x_label: &str, y_label: &str) {
    let (x1, y1) = (W - RIGHT, H - BOTTOM);
    let _ = writeln!(
        out,
        "<g stroke=\"black\"><line x1=\"{LEFT}\" y1=\"{y1}\" x2=\"{x1}\" y2=\"{y1}\"/><line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{y1}\"/></g>"
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let px = LEFT + f * (x1 - LEFT);
        let py = y1 - f * (y1 - TOP);
        let _ = writeln!(out, "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", y1 + 16.0, tick(x.0 + f * (x.1 - x.0)));
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", LEFT - 6.0, py + 4.0, tick(y.0 + f * (y.1 - y.0)));
    }
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", (LEFT + x1) / 2.0, H - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        (TOP + y1) / 2.0,
        (TOP + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// One polyline per series, with exactly one vertex per data point, and an
/// optional dashed horizontal reference line.
pub fn line_chart(title: &str, desc: &str, x_label: &str, y_label: &str, series: &[Series], reference: Option<(&str, f64)>) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut xl, mut xh, mut yl, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        xl = xl.min(x);
        xh = xh.max(x);
        yl = yl.min(y);
        yh = yh.max(y);
    }
    if let Some((_, r)) = reference {
        yl = yl.min(r);
        yh = yh.max(r);
    }
    if !xl.is_finite() {
        (xl, xh, yl, yh) = (0.0, 1.0, 0.0, 1.0);
    }
    let x = span(xl, xh);
    let y = span(yl, yh);
    let px = |v: f64| LEFT + (v - x.0) / (x.1 - x.0) * (W - RIGHT - LEFT);
    let py = |v: f64| (H - BOTTOM) - (v - y.0) / (y.1 - y.0) * (H - BOTTOM - TOP);

    let mut out = String::new();
    header(&mut out, title, desc);
    axes(&mut out, x, y, x_label, y_label);
    if let Some((name, r)) = reference {
        let _ = writeln!(
            out,
            "<line x1=\"{LEFT}\" y1=\"{0:.2}\" x2=\"{1}\" y2=\"{0:.2}\" stroke=\"grey\" stroke-dasharray=\"5 4\"/><text x=\"{2}\" y=\"{3:.2}\" fill=\"grey\">{4}</text>",
            py(r),
            W - RIGHT,
            W - RIGHT + 8.0,
            py(r) + 4.0,
            escape(name)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let pts: Vec<String> = s.points.iter().map(|&(a, b)| format!("{:.2},{:.2}", px(a), py(b))).collect();
        let _ = writeln!(
            out,
            "<polyline data-series=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>",
            escape(&s.name),
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{:.1}\" width=\"12\" height=\"3\" fill=\"{colour}\"/><text x=\"{}\" y=\"{:.1}\">{}</text>",
            W - RIGHT + 8.0,
            ly,
            W - RIGHT + 24.0,
            ly + 5.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bars from zero, labelled with their values.
pub fn bar_chart(title: &str, desc: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let top = bars.iter().map(|b| b.1).fold(0.0_f64, f64::max);
    let y = (0.0, if top > 0.0 { top * 1.15 } else { 1.0 });
    let mut out = String::new();
    header(&mut out, title, desc);
    axes(&mut out, (0.0, bars.len() as f64), y, "", y_label);
    let plot_w = W - RIGHT - LEFT;
    let slot = plot_w / bars.len().max(1) as f64;
    for (i, (name, v)) in bars.iter().enumerate() {
        let h = v / (y.1 - y.0) * (H - BOTTOM - TOP);
        let x = LEFT + slot * (i as f64 + 0.2);
        let _ = writeln!(
            out,
            "<rect data-bar=\"{0}\" x=\"{1:.2}\" y=\"{2:.2}\" width=\"{3:.2}\" height=\"{4:.2}\" fill=\"{5}\"/><text x=\"{6:.2}\" y=\"{7:.2}\" text-anchor=\"middle\">{0} {8:.3}</text>",
            escape(name),
            x,
            H - BOTTOM - h,
            slot * 0.6,
            h,
            COLOURS[i % COLOURS.len()],
            x + slot * 0.3,
            H - BOTTOM - h - 6.0,
            v
        );
    }
    out.push_str("</svg>\n");
    out
}
