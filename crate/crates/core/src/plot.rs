//! Minimal SVG line charts.

use std::fmt::Write;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Line<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Draws `lines` into the box `(x0, y0, w, h)`; every line is indexed from 0
/// over `x_len` positions.
fn panel(out: &mut String, lines: &[Line], x_len: usize, x0: f64, y0: f64, w: f64, h: f64) {
    let (lo, hi) = bounds(lines.iter().flat_map(|l| l.values.iter()));
    let span_x = (x_len.max(2) - 1) as f64;
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#999"/>"##
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{hi:.4}</text>"##,
        x0 - 4.0,
        y0 + 10.0
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{lo:.4}</text>"##,
        x0 - 4.0,
        y0 + h
    );
    for (k, line) in lines.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut points = String::new();
        for (i, v) in line.values.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let px = x0 + w * i as f64 / span_x;
            let py = y0 + h - h * (v - lo) / (hi - lo);
            let _ = write!(points, "{px:.2},{py:.2} ");
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
            points.trim_end()
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{}</text>"#,
            x0 + 6.0 + 110.0 * k as f64,
            y0 + 14.0,
            escape(line.label)
        );
    }
}

/// One panel with every line overlaid.
pub fn line_chart(title: &str, lines: &[Line]) -> String {
    let (width, height) = (960.0, 400.0);
    let x_len = lines.iter().map(|l| l.values.len()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    panel(&mut out, lines, x_len, 70.0, 30.0, width - 90.0, height - 50.0);
    out.push_str("</svg>\n");
    out
}

/// One panel per line, stacked vertically with a shared x axis.
pub fn stacked_chart(title: &str, lines: &[Line]) -> String {
    let width = 960.0;
    let panel_h = 90.0;
    let gap = 10.0;
    let height = 40.0 + lines.len() as f64 * (panel_h + gap);
    let x_len = lines.iter().map(|l| l.values.len()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (k, line) in lines.iter().enumerate() {
        let y0 = 30.0 + k as f64 * (panel_h + gap);
        panel(
            &mut out,
            std::slice::from_ref(line),
            x_len,
            70.0,
            y0,
            width - 90.0,
            panel_h,
        );
    }
    out.push_str("</svg>\n");
    out
}
