//! Minimal self-contained SVG output: line charts and match overlays.

use std::fmt::Write;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Data range padded so flat series still get a visible extent.
fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

impl LineChart {
    /// Renders into the box `(x, y, w, h)` as an SVG group.
    pub fn render(&self, x: f64, y: f64, w: f64, h: f64) -> String {
        let (left, right, top, bottom) = (60.0, 20.0, 30.0, 40.0);
        let (pw, ph) = (w - left - right, h - top - bottom);
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let (x0, x1) = extent(all().map(|p| p.0));
        let (y0, y1) = extent(all().map(|p| p.1));
        let sx = |v: f64| x + left + (v - x0) / (x1 - x0) * pw;
        let sy = |v: f64| y + top + ph - (v - y0) / (y1 - y0) * ph;

        let mut g = String::new();
        let _ = writeln!(g, "<g font-family=\"sans-serif\" font-size=\"11\">");
        let _ = writeln!(
            g,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{pw:.1}\" height=\"{ph:.1}\" fill=\"none\" stroke=\"#444\"/>",
            x + left,
            y + top
        );
        let _ = writeln!(
            g,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
            x + left + pw / 2.0,
            y + 18.0,
            escape(&self.title)
        );
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
            let _ = writeln!(
                g,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                sx(xv),
                y + top + ph + 14.0,
                tick(xv)
            );
            let _ = writeln!(
                g,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
                x + left - 4.0,
                sy(yv) + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            g,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            x + left + pw / 2.0,
            y + h - 6.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            g,
            "<text transform=\"translate({:.1},{:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
            x + 12.0,
            y + top + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, s) in self.series.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(a, b)| format!("{:.2},{:.2}", sx(a), sy(b)))
                .collect();
            let _ = writeln!(
                g,
                "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>",
                pts.join(" ")
            );
            if s.points.len() <= 50 {
                for p in &pts {
                    let (a, b) = p.split_once(',').expect("formatted as a pair");
                    let _ = writeln!(g, "<circle cx=\"{a}\" cy=\"{b}\" r=\"2.5\" fill=\"{colour}\"/>");
                }
            }
            let _ = writeln!(
                g,
                "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{colour}\">{}</text>",
                x + left + 6.0,
                y + top + 14.0 + 13.0 * k as f64,
                escape(&s.label)
            );
        }
        g.push_str("</g>\n");
        g
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

pub fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Charts laid out side by side.
pub fn panels(charts: &[LineChart]) -> String {
    let (w, h) = (480.0, 360.0);
    let body: String =
        charts.iter().enumerate().map(|(k, c)| c.render(k as f64 * w, 0.0, w, h)).collect();
    document(w * charts.len().max(1) as f64, h, &body)
}

/// Scene points, transformed model points and the matched pairs, drawn in
/// the first two coordinates.
pub fn overlay(transformed_model: &[Vec<f64>], scene: &[Vec<f64>], pairs: &[(usize, usize)]) -> String {
    let size = 520.0;
    let margin = 20.0;
    let all = || transformed_model.iter().chain(scene);
    let (x0, x1) = extent(all().map(|p| p[0]));
    let (y0, y1) = extent(all().map(|p| p[1]));
    let span = (x1 - x0).max(y1 - y0);
    let sx = |v: f64| margin + (v - x0) / span * (size - 2.0 * margin);
    let sy = |v: f64| size - margin - (v - y0) / span * (size - 2.0 * margin);
    let mut body = String::new();
    for &(i, j) in pairs {
        let (a, b) = (&transformed_model[i], &scene[j]);
        let _ = writeln!(
            body,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\" stroke-width=\"0.8\"/>",
            sx(a[0]),
            sy(a[1]),
            sx(b[0]),
            sy(b[1])
        );
    }
    for p in scene {
        let _ = writeln!(
            body,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"none\" stroke=\"#1f77b4\"/>",
            sx(p[0]),
            sy(p[1])
        );
    }
    for p in transformed_model {
        let _ = writeln!(
            body,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"#d62728\"/>",
            sx(p[0]),
            sy(p[1])
        );
    }
    document(size, size, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_well_formed() {
        let chart = LineChart {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series { label: "s".into(), points: vec![(0.0, 1.0), (1.0, f64::NAN)] }],
        };
        let svg = panels(&[chart.clone(), chart]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert!(!svg.contains("NaN"));
    }
}
