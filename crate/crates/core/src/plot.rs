//! Static SVG scatter plots of two-pair rate regions.

use std::fmt::Write;

use crate::hull::Point;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One overlaid region: its points and hull vertices.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [Point],
    pub hull: &'a [Point],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round a positive axis limit up to 1, 2 or 5 times a power of ten.
fn nice_ceil(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    let e = 10f64.powf(x.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * e).find(|&v| v >= x).unwrap_or(10.0 * e)
}

/// Scatter of every series' points with its hull drawn as a closed polyline.
/// `comment` lines are embedded verbatim in an XML comment.
pub fn region_svg(series: &[Series], comment: &str) -> String {
    let all = series.iter().flat_map(|s| s.points.iter().chain(s.hull));
    let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
    for p in all {
        max_x = max_x.max(p[0]);
        max_y = max_y.max(p[1]);
    }
    let (max_x, max_y) = (nice_ceil(max_x), nice_ceil(max_y));
    let sx = |x: f64| MARGIN + x / max_x * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y / max_y * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    if !comment.is_empty() {
        let _ = writeln!(out, "<!-- {} -->", comment.replace("--", "- -"));
    }
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    // axes and ticks
    let (x0, y0, x1, y1) = (sx(0.0), sy(0.0), sx(max_x), sy(max_y));
    let _ = writeln!(out, r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" stroke="black" fill="none"/>"#);
    for t in 0..=5 {
        let fx = max_x * t as f64 / 5.0;
        let fy = max_y * t as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            sx(fx),
            y0 + 16.0,
            trim(fx)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            sy(fy) + 4.0,
            trim(fy)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">Sum-Rate Pair 1</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">Sum-Rate Pair 2</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (n, s) in series.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let _ = writeln!(out, r#"<g fill="{color}" fill-opacity="0.35">"#);
        for p in s.points {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#, sx(p[0]), sy(p[1]));
        }
        let _ = writeln!(out, "</g>");
        if !s.hull.is_empty() {
            let pts: Vec<String> = s.hull.iter().map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1]))).collect();
            let _ = writeln!(
                out,
                r#"<polygon points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
        }
        let ly = MARGIN + 16.0 * n as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}" font-size="12" fill="{color}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
