//! Scatter plots of 2D embeddings.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a",
];

const SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;

/// Renders `points` colored by `labels`; the radius scales with the embedding extent.
pub fn scatter_svg(points: &[[f64; 2]], labels: &[usize], title: &str) -> Result<String> {
    if points.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} points, {} labels",
            points.len(),
            labels.len()
        )));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let scale = (SIZE - 2.0 * MARGIN) / extent;
    let radius = (2.0 * (SIZE / (points.len().max(1) as f64).sqrt()) / 10.0).clamp(0.8, 4.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (p, &l) in points.iter().zip(labels) {
        let x = MARGIN + (p[0] - lo[0]) * scale;
        let y = SIZE - MARGIN - (p[1] - lo[1]) * scale;
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{radius:.2}" fill="{}"/>"#,
            PALETTE[l % PALETTE.len()]
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_scatter_svg(path: &Path, points: &[[f64; 2]], labels: &[usize], title: &str) -> Result<()> {
    let svg = scatter_svg(points, labels, title)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
