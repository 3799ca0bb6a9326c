//! Hand-written SVG of the long-only and unconstrained frontiers.

use std::fmt::Write as _;
use std::path::Path;

use lifefolio::markowitz::{unconstrained_frontier_variance, FrontierConstants, MarkowitzError};
use lifefolio::portfolio::ConstrainedFrontier;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

/// (standard deviation, mean) vertices.
pub type Curve = Vec<(f64, f64)>;

#[derive(Debug, thiserror::Error)]
pub enum SvgError {
    #[error("frontier has no points")]
    Empty,
    #[error(transparent)]
    Frontier(#[from] MarkowitzError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Long-only and unconstrained curves, both sampled at the long-only means.
pub fn frontier_curves(
    frontier: &ConstrainedFrontier,
    constants: &FrontierConstants,
) -> Result<(Curve, Curve), SvgError> {
    if frontier.points.is_empty() {
        return Err(SvgError::Empty);
    }
    let mut constrained = Vec::with_capacity(frontier.points.len());
    let mut free = Vec::with_capacity(frontier.points.len());
    for p in &frontier.points {
        constrained.push((p.variance.max(0.0).sqrt(), p.mean));
        let v = unconstrained_frontier_variance(constants, p.mean)?;
        free.push((v.max(0.0).sqrt(), p.mean));
    }
    Ok((constrained, free))
}

struct Scale {
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Scale {
    fn px(&self, x: f64) -> f64 {
        LEFT + x / self.x_max * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - TOP - BOTTOM)
    }
}

fn polyline(out: &mut String, id: &str, style: &str, pts: &[(f64, f64)], s: &Scale) {
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", s.px(x), s.py(y)))
        .collect();
    let _ = writeln!(out, r#"<polyline id="{id}" fill="none" {style} points="{}"/>"#, coords.join(" "));
}

pub fn frontier_svg(frontier: &ConstrainedFrontier, constants: &FrontierConstants) -> Result<String, SvgError> {
    let (constrained, free) = frontier_curves(frontier, constants)?;
    let all = || constrained.iter().chain(&free);
    let x_max = all().map(|p| p.0).fold(0.0, f64::max);
    let x_max = if x_max > 0.0 { x_max * 1.1 } else { 1.0 };
    let (lo, hi) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.01 * hi.abs().max(1.0) };
    let s = Scale { x_max, y_min: lo - pad, y_max: hi + pad };

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<!-- Efficient frontiers. Viewport {WIDTH}x{HEIGHT}; plot area inset {LEFT} left, {RIGHT} right, \
         {TOP} top, {BOTTOM} bottom. x: standard deviation from 0, y: mean. -->"
    );
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    let (x0, y0) = (LEFT, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r#"<path d="M{x0},{TOP} L{x0},{y0} L{},{y0}" fill="none" stroke="black"/>"#,
        WIDTH - RIGHT
    );
    for i in 0..=TICKS {
        let t = i as f64 / TICKS as f64;
        let xv = t * s.x_max;
        let px = s.px(xv);
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(out, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{xv:.3}</text>"#, y0 + 20.0);
        let yv = s.y_min + t * (s.y_max - s.y_min);
        let py = s.py(yv);
        let _ = writeln!(out, r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#, x0 - 8.0, py + 4.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">standard deviation</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">mean</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0
    );

    polyline(&mut out, "unconstrained", r##"stroke="#888888" stroke-width="2" stroke-dasharray="6 4""##, &free, &s);
    polyline(&mut out, "constrained", r##"stroke="#1f5fa8" stroke-width="2""##, &constrained, &s);

    let lx = WIDTH - RIGHT - 200.0;
    let _ = writeln!(out, r##"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="#888888" stroke-width="2" stroke-dasharray="6 4"/>"##, TOP + 10.0, lx + 30.0, TOP + 10.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}">unconstrained frontier</text>"#, lx + 38.0, TOP + 14.0);
    let _ = writeln!(out, r##"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="#1f5fa8" stroke-width="2"/>"##, TOP + 30.0, lx + 30.0, TOP + 30.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}">long-only frontier</text>"#, lx + 38.0, TOP + 34.0);
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_frontier_svg(
    frontier: &ConstrainedFrontier,
    constants: &FrontierConstants,
    path: &Path,
) -> Result<(), SvgError> {
    let svg = frontier_svg(frontier, constants)?;
    std::fs::write(path, svg).map_err(|source| SvgError::Write {
        path: path.to_path_buf(),
        source,
    })
}
