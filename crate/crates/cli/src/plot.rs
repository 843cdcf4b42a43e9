//! Minimal SVG line chart of a response curve.

use std::fmt::Write;

use causal_distill::attribution::AttributionMap;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

pub fn response_curve_svg(map: &AttributionMap) -> String {
    let (x0, x1) = (map.grid[0], map.grid[map.grid.len() - 1]);
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| MARGIN + (x - x0) / span * (WIDTH - 2.0 * MARGIN);
    // mu lives in [0, 1]
    let py = |y: f64| HEIGHT - MARGIN - y * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {b} H{r} M{m} {b} V{m}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let points: Vec<String> = map
        .grid
        .iter()
        .zip(&map.mu)
        .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#,
        points.join(" ")
    );
    for (x, y) in map.grid.iter().zip(&map.mu) {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="steelblue"/>"#, px(*x), py(*y));
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="13">{} (CFI {:.4})</text>"#,
        MARGIN,
        escape(&map.feature),
        map.cfi
    );
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="11">{x0:.3}</text>"#,
        HEIGHT - MARGIN + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{x1:.3}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
