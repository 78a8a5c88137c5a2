//! Small dependency-free SVG charts. Output is deterministic: coordinates
//! are printed with two decimals.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    s
}

/// Maps data bounds onto the plotting area.
struct Frame {
    x: [f64; 2],
    y: [f64; 2],
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let bounds = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if !lo.is_finite() {
                [0.0, 1.0]
            } else if hi - lo <= 0.0 {
                [lo - 0.5, hi + 0.5]
            } else {
                [lo, hi]
            }
        };
        Frame { x: bounds(&mut xs.clone()), y: bounds(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x[0]) / (self.x[1] - self.x[0]) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y[0]) / (self.y[1] - self.y[0]) * (H - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String) {
        let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
        let _ = writeln!(out, r#"<path d="M{x0:.2} {y1:.2}V{y0:.2}H{x1:.2}" fill="none" stroke="black"/>"#);
        let _ = writeln!(out, r#"<text x="{x0:.2}" y="{:.2}" text-anchor="start">{}</text>"#, y0 + 16.0, fmt_tick(self.x[0]));
        let _ = writeln!(out, r#"<text x="{x1:.2}" y="{:.2}" text-anchor="end">{}</text>"#, y0 + 16.0, fmt_tick(self.x[1]));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{y0:.2}" text-anchor="end">{}</text>"#, x0 - 4.0, fmt_tick(self.y[0]));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 4.0, y1 + 4.0, fmt_tick(self.y[1]));
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, W - MARGIN - 120.0, y - 9.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{y:.2}">{}</text>"#, W - MARGIN - 105.0, escape(name));
    }
}

/// Line chart of one or more `(name, x, y)` series sharing axes.
pub fn line_chart(title: &str, series: &[(&str, &[f64], &[f64])]) -> String {
    let frame = Frame::new(
        series.iter().flat_map(|s| s.1.iter().copied()),
        series.iter().flat_map(|s| s.2.iter().copied()),
    );
    let mut out = header(title);
    frame.axes(&mut out);
    for (i, (_, xs, ys)) in series.iter().enumerate() {
        let mut d = String::new();
        for (k, (&x, &y)) in xs.iter().zip(ys.iter()).filter(|(x, y)| x.is_finite() && y.is_finite()).enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if k == 0 { "M" } else { "L" }, frame.px(x), frame.py(y));
        }
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.2"/>"#, PALETTE[i % PALETTE.len()]);
    }
    legend(&mut out, &series.iter().map(|s| s.0).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Scatter plot of named point groups.
pub fn scatter(title: &str, groups: &[(&str, &[[f64; 2]])]) -> String {
    let frame = Frame::new(
        groups.iter().flat_map(|g| g.1.iter().map(|p| p[0])),
        groups.iter().flat_map(|g| g.1.iter().map(|p| p[1])),
    );
    let mut out = header(title);
    frame.axes(&mut out);
    for (i, (_, pts)) in groups.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for p in pts.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#, frame.px(p[0]), frame.py(p[1]));
        }
    }
    legend(&mut out, &groups.iter().map(|g| g.0).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Histogram of the finite `values` over their min-max range.
pub fn histogram(title: &str, values: &[f64], n_bins: usize) -> String {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let n_bins = n_bins.max(1);
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0usize; n_bins];
    if !finite.is_empty() {
        let width = hi - lo;
        for v in &finite {
            let b = if width > 0.0 { (((v - lo) / width * n_bins as f64) as usize).min(n_bins - 1) } else { 0 };
            counts[b] += 1;
        }
    }
    let (lo, hi) = if finite.is_empty() { (0.0, 1.0) } else if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = Frame { x: [lo, hi], y: [0.0, top] };
    let mut out = header(title);
    frame.axes(&mut out);
    let bw = (hi - lo) / n_bins as f64;
    for (i, &c) in counts.iter().enumerate() {
        let x0 = frame.px(lo + bw * i as f64);
        let x1 = frame.px(lo + bw * (i + 1) as f64);
        let y = frame.py(c as f64);
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="white"/>"#,
            x1 - x0,
            frame.py(0.0) - y,
            PALETTE[0]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Confusion matrix heat map; rows are true classes, columns predictions.
pub fn heatmap(title: &str, labels: &[String], counts: &[Vec<usize>]) -> String {
    let n = labels.len().max(1);
    let cell = ((W.min(H) - 2.0 * MARGIN) / n as f64).min(60.0);
    let top = counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let mut out = header(title);
    let x0 = (W - cell * n as f64) / 2.0;
    let y0 = MARGIN;
    for (r, row) in counts.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let shade = 255 - (200.0 * v as f64 / top).round() as u8;
            let (x, y) = (x0 + cell * c as f64, y0 + cell * r as f64);
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="rgb({shade},{shade},255)" stroke="gray"/>"#
            );
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#, x + cell / 2.0, y + cell / 2.0 + 4.0);
        }
    }
    for (i, l) in labels.iter().enumerate() {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 4.0, y0 + cell * (i as f64 + 0.5) + 4.0, escape(l));
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x0 + cell * (i as f64 + 0.5),
            y0 + cell * n as f64 + 16.0,
            escape(l)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed_and_deterministic() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 1.0, f64::NAN];
        let a = line_chart("a < b", &[("gen", &x, &y), ("truth", &x, &x)]);
        assert_eq!(a, line_chart("a < b", &[("gen", &x, &y), ("truth", &x, &x)]));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("a &lt; b") && !a.contains("NaN"));
        assert_eq!(a.matches("<path").count(), 3);
    }

    #[test]
    fn degenerate_inputs_do_not_panic() {
        assert!(histogram("empty", &[], 10).contains("</svg>"));
        assert_eq!(histogram("const", &[1.0, 1.0], 4).matches("<rect").count(), 1 + 4);
        assert!(scatter("none", &[]).contains("</svg>"));
        assert!(heatmap("one", &["a".into()], &[vec![3]]).contains(">3</text>"));
    }
}
