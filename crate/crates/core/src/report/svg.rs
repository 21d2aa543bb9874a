//! Standalone SVG heatmaps of distance matrices.
//!
//! Output is a pure function of the matrix and title: fixed layout, fixed
//! two-stop color ramp, no timestamps.

use std::fmt::Write as _;
use std::path::Path;

use crate::distance::DistanceMatrix;
use crate::stats::fmt_sig;

const CELL: usize = 16;
const MARGIN: usize = 32;
const FOOTER: usize = 40;

/// Ramp endpoints: dark for the minimum, bright for the maximum.
pub const LOW: Rgb = Rgb(48, 18, 59);
pub const HIGH: Rgb = Rgb(250, 226, 52);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub fn hex(&self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

/// Linear ramp position of `v` in `[min, max]`; a flat matrix maps to 0.
pub fn ramp_position(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((v - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn ramp_color(t: f64) -> Rgb {
    let lerp = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    Rgb(lerp(LOW.0, HIGH.0), lerp(LOW.1, HIGH.1), lerp(LOW.2, HIGH.2))
}

/// Row-major cell colors as drawn in the heatmap.
pub fn cell_colors(m: &DistanceMatrix) -> Vec<Rgb> {
    let (min, max) = value_range(m);
    m.entries().iter().map(|&v| ramp_color(ramp_position(v, min, max))).collect()
}

fn value_range(m: &DistanceMatrix) -> (f64, f64) {
    let min = m.entries().iter().copied().fold(f64::INFINITY, f64::min);
    let max = m.entries().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

pub fn heatmap_svg(m: &DistanceMatrix, title: &str) -> String {
    let k = m.dims();
    let grid = k * CELL;
    let width = grid + 2 * MARGIN;
    let height = grid + MARGIN + FOOTER;
    let (min, max) = value_range(m);
    let colors = cell_colors(m);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="20" font-family="monospace" font-size="12">{}</text>"#,
        escape(title)
    );
    for i in 0..k {
        for j in 0..k {
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                MARGIN + j * CELL,
                MARGIN + i * CELL,
                colors[i * k + j].hex()
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" font-family="monospace" font-size="11">min={} max={}</text>"#,
        MARGIN + grid + 24,
        fmt_sig(min, 6),
        fmt_sig(max, 6)
    );
    out.push_str("</svg>\n");
    out
}

pub fn emit_heatmap(m: &DistanceMatrix, title: &str, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, heatmap_svg(m, title))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
