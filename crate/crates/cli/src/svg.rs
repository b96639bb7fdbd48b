//! Self-contained SVG heatmap of the distillation gain over `(η, γ)`.

use std::fmt::Write;

use nlbox_core::optimize::{GridPoint, ETA_MAX, GAMMA_MAX};
use nlbox_core::{eta_gamma_from_phi, EtaGammaParams, PlanarAngle};

/// Cells per axis are capped so the file stays small.
pub const MAX_CELLS: usize = 120;

const PLOT: f64 = 600.0;
const MARGIN: f64 = 60.0;

fn to_x(eta: f64) -> f64 {
    MARGIN + eta / ETA_MAX * PLOT
}

fn to_y(gamma: f64) -> f64 {
    MARGIN + (1.0 - gamma / GAMMA_MAX) * PLOT
}

/// Diverging map: blue for negative gain, white at zero, red for positive.
fn color(gain: f64, scale: f64) -> String {
    let t = (gain / scale).clamp(-1.0, 1.0);
    let fade = |v: f64| (255.0 * (1.0 - v)).round() as u8;
    let (r, g, b) = if t >= 0.0 {
        (255, fade(t), fade(t))
    } else {
        (fade(-t), fade(-t), 255)
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// `points` must come from a `resolution × resolution` grid in row-major
/// order (η outer).
pub fn heatmap(points: &[GridPoint], resolution: usize, optimum: Option<EtaGammaParams>) -> String {
    let scale = points
        .iter()
        .map(|p| p.gain.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let cell = PLOT / resolution as f64;
    let size = PLOT + 2.0 * MARGIN;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<g shape-rendering="crispEdges">"#).unwrap();
    for (k, p) in points.iter().enumerate() {
        let (i, j) = (k / resolution, k % resolution);
        let x = MARGIN + i as f64 * cell;
        let y = MARGIN + PLOT - (j + 1) as f64 * cell;
        let opacity = if p.feasible { 1.0 } else { 0.3 };
        writeln!(
            s,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{w:.3}" fill="{c}" fill-opacity="{opacity}"/>"#,
            w = cell,
            c = color(p.gain, scale)
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();

    // Attainable-region boundary traced by the planar family.
    let mut line = String::new();
    for k in 1..400 {
        let phi = PlanarAngle::new(k as f64 / 400.0 * PlanarAngle::MAX).expect("inside (0, π/6)");
        let p = eta_gamma_from_phi(phi);
        write!(line, "{:.2},{:.2} ", to_x(p.eta()), to_y(p.gamma())).unwrap();
    }
    writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2"/>"#,
        line.trim_end()
    )
    .unwrap();
    // Local bound γ = 3η.
    writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="6 4"/>"#,
        to_x(0.0),
        to_y(0.0),
        to_x(ETA_MAX),
        to_y(3.0 * ETA_MAX)
    )
    .unwrap();
    if let Some(p) = optimum {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="none" stroke="black" stroke-width="2"/>"#,
            to_x(p.eta()),
            to_y(p.gamma())
        )
        .unwrap();
    }

    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for k in 0..=4 {
        let eta = ETA_MAX * k as f64 / 4.0;
        let gamma = GAMMA_MAX * k as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{:.3}</text>"#,
            to_x(eta),
            MARGIN + PLOT + 18.0,
            eta
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{:.3}</text>"#,
            MARGIN - 6.0,
            to_y(gamma) + 4.0,
            gamma
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">η</text>"#,
        MARGIN + PLOT / 2.0,
        MARGIN + PLOT + 40.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{:.2}" font-size="14" text-anchor="middle">γ</text>"#,
        MARGIN + PLOT / 2.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{:.2}" y="30" font-size="14" text-anchor="middle">distillation gain (max |gain| = {:.4})</text>"#,
        MARGIN + PLOT / 2.0,
        scale
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}
