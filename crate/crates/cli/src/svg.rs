//! Minimal line-chart SVG writer. Output bytes depend only on the input.

use std::fmt::Write as _;

pub struct Series {
    pub label: String,
    /// `(x, y)` with `y` in `[0, 1]`.
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render(title: &str, x_label: &str, series: &[Series]) -> String {
    let x_max = series.iter().flat_map(|s| &s.points).map(|p| p.0).fold(0.0, f64::max);
    let x_max = if x_max > 0.0 { x_max } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + plot_w * x / x_max;
    let sy = |y: f64| TOP + plot_h * (1.0 - y);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#, LEFT + plot_w / 2.0, escape(title));
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let (x, y) = (sx(t * x_max), sy(t));
        let _ = writeln!(out, r##"<line x1="{LEFT:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e0e0e0"/>"##, LEFT + plot_w);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t:.1}</text>"#, LEFT - 6.0, y + 4.0);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#, TOP + plot_h + 16.0, t * x_max);
    }
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + plot_w / 2.0, HEIGHT - 14.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">certified accuracy</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 12.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(out, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_series_in_order() {
        let s = vec![
            Series { label: "a<b".into(), points: vec![(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)] },
            Series { label: "second".into(), points: vec![(0.0, 0.8), (1.0, 0.1)] },
        ];
        let svg = render("t", "x", &s);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.find("#1f77b4").unwrap() < svg.find("#d62728").unwrap());
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg, render("t", "x", &s));
    }
}
