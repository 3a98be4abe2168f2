//! Minimal static SVG emission for precision-recall curves.

use std::fmt::Write as _;

use lens_core::eval::PrCurve;

const WIDTH: f64 = 560.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn sx(recall: f64) -> f64 {
    MARGIN + recall * (WIDTH - 2.0 * MARGIN)
}

fn sy(precision: f64) -> f64 {
    HEIGHT - MARGIN - precision * (HEIGHT - 2.0 * MARGIN)
}

/// Renders one polyline per named curve with axes and a legend.
pub fn pr_curves_svg(curves: &[(String, &PrCurve)]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // Axes with 0.0..1.0 ticks.
    let (x0, y0, x1, y1) = (sx(0.0), sy(0.0), sx(1.0), sy(1.0));
    let _ = writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{v:.1}</text>"#,
            sx(v),
            y0 + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{v:.1}</text>"#,
            x0 - 8.0,
            sy(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">Recall</text>"#,
        sx(0.5),
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {})">Precision</text>"#,
        sy(0.5),
        sy(0.5)
    );

    for (idx, (name, curve)) in curves.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let points: Vec<String> = curve
            .points
            .iter()
            .map(|(recall, precision)| format!("{},{}", sx(*recall), sy(*precision)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = MARGIN + 16.0 * idx as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            WIDTH - MARGIN - 110.0,
            WIDTH - MARGIN - 90.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12">{name}</text>"#,
            WIDTH - MARGIN - 84.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_contains_curves_and_labels() {
        let curve = PrCurve {
            points: vec![(0.0, 1.0), (0.5, 0.8), (1.0, 0.6)],
            thresholds: vec![f64::INFINITY, 0.9, 0.1],
        };
        let svg = pr_curves_svg(&[("lens".to_string(), &curve)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("lens"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
