//! CSV tables and SVG heatmaps.

use std::fmt::Write as _;

use crate::error::Result;

/// Side of the square SVG canvas, in pixels.
pub const CANVAS: usize = 512;

/// Renders rows as CSV text with a header line.
pub fn csv_text<R: AsRef<[String]>>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.as_ref())?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

// viridis at 0, 1/4, 1/2, 3/4, 1
const STOPS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

/// Colour for `t ∈ [0, 1]`.
pub fn colormap(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let s = t * (STOPS.len() - 1) as f64;
    let i = (s.floor() as usize).min(STOPS.len() - 2);
    let f = s - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// A `cols × rows` heatmap on the unit square with `(0, 0)` at the bottom
/// left. Non-finite values are drawn grey.
pub fn heatmap_svg(cols: usize, rows: usize, value: impl Fn(usize, usize) -> f64, title: &str) -> String {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for ix in 0..cols {
        for iy in 0..rows {
            let v = value(ix, iy);
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = (CANVAS as f64 / cols as f64, CANVAS as f64 / rows as f64);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(s, "<title>{} (min {lo:.6}, max {hi:.6})</title>", escape(title));
    for iy in 0..rows {
        for ix in 0..cols {
            let v = value(ix, iy);
            let fill = if v.is_finite() {
                colormap((v - lo) / span)
            } else {
                "#808080".to_string()
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
                ix as f64 * w,
                (rows - 1 - iy) as f64 * h,
                w,
                h
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
