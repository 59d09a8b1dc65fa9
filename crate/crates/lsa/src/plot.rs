//! Minimal SVG line chart for sweep results.

use std::fmt::Write;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 56.0;

/// Points are drawn in the given order, evenly spaced along x and labelled
/// with their x value; y is scaled to the data range.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN / 1.5);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    if !points.is_empty() {
        let lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let pad = if hi > lo { (hi - lo) * 0.1 } else { lo.abs().max(1.0) * 0.05 };
        let (lo, hi) = (lo - pad, hi + pad);
        let step = if points.len() > 1 { (x1 - x0 - 20.0) / (points.len() - 1) as f64 } else { 0.0 };
        let coords: Vec<(f64, f64)> = points
            .iter()
            .enumerate()
            .map(|(i, &(_, y))| {
                let px = if points.len() > 1 { x0 + 10.0 + step * i as f64 } else { (x0 + x1) / 2.0 };
                (px, y0 - (y - lo) / (hi - lo) * (y0 - y1))
            })
            .collect();
        for (label, y) in [(hi, y1), (lo, y0)] {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{label:.3}</text>"#, x0 - 4.0, y + 4.0);
        }
        let path: Vec<String> = coords.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, path.join(" "));
        for (&(x, y), &(vx, vy)) in coords.iter().zip(points) {
            let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3.5" fill="steelblue"><title>{vx}: {vy:.4}</title></circle>"#);
            let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{vx}</text>"#, y0 + 16.0);
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
