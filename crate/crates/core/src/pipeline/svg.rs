//! Minimal SVG charts for headless runs.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const BAR_HEIGHT: f64 = 22.0;
const MARGIN: f64 = 40.0;
const LABEL_WIDTH: f64 = 120.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal signed bar chart; positive bars go right of the zero line.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let height = MARGIN * 2.0 + BAR_HEIGHT * bars.len().max(1) as f64;
    let max = bars.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max).max(1e-12);
    let has_negative = bars.iter().any(|(_, v)| *v < 0.0);
    let plot_w = WIDTH - LABEL_WIDTH - MARGIN;
    let zero = if has_negative { LABEL_WIDTH + plot_w / 2.0 } else { LABEL_WIDTH };
    let scale = if has_negative { plot_w / 2.0 } else { plot_w } / max;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14">{}</text>"#, MARGIN / 2.0, escape(title));
    for (i, (label, v)) in bars.iter().enumerate() {
        let y = MARGIN + i as f64 * BAR_HEIGHT;
        let w = v.abs() * scale;
        let x = if *v < 0.0 { zero - w } else { zero };
        let color = if *v < 0.0 { "#3b7dd8" } else { "#d8533b" };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LABEL_WIDTH - 6.0,
            y + BAR_HEIGHT * 0.7,
            escape(label)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="{color}"/>"#,
            y + 2.0,
            BAR_HEIGHT - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10">{:.3}</text>"#,
            x + w + 4.0,
            y + BAR_HEIGHT * 0.7,
            v
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{zero:.1}" y1="{MARGIN}" x2="{zero:.1}" y2="{:.1}" stroke="#444"/>"##,
        height - MARGIN
    );
    s.push_str("</svg>\n");
    s
}

/// Polyline through `(x, y)` points with min/max axis labels.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let height = 360.0;
    let (x0, x1) = bounds(points.iter().map(|p| p.0));
    let (y0, y1) = bounds(points.iter().map(|p| p.1));
    let px = |x: f64| LABEL_WIDTH / 2.0 + (x - x0) / (x1 - x0) * (WIDTH - LABEL_WIDTH / 2.0 - MARGIN);
    let py = |y: f64| height - MARGIN - (y - y0) / (y1 - y0) * (height - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14">{}</text>"#, MARGIN / 2.0, escape(title));
    let path: Vec<String> = points.iter().map(|(x, y)| format!("{:.1},{:.1}", px(*x), py(*y))).collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#d8533b" stroke-width="2"/>"##,
        path.join(" ")
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        height - 8.0,
        escape(x_label)
    );
    let _ = writeln!(s, r#"<text x="8" y="{:.1}">{}</text>"#, height / 2.0, escape(y_label));
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="10">{x0:.3}</text><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{x1:.3}</text>"#,
        px(x0),
        height - MARGIN + 14.0,
        px(x1),
        height - MARGIN + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="{:.1}" font-size="10">{y1:.3}</text><text x="4" y="{:.1}" font-size="10">{y0:.3}</text>"#,
        py(y1) + 4.0,
        py(y0)
    );
    s.push_str("</svg>\n");
    s
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let b = bar_chart("w <x>", &[("hemo".into(), -0.3), ("sc".into(), 0.2)]);
        assert!(b.starts_with("<svg") && b.trim_end().ends_with("</svg>"));
        assert!(b.contains("w &lt;x&gt;"));
        assert_eq!(b.matches("<rect").count(), 2);
        let l = line_chart("pdp", "hemo", "p", &[(1.0, 0.2), (2.0, 0.2)]);
        assert!(l.contains("<polyline"));
    }
}
