//! Standalone SVG plots of 2D problems, paths and cost rasters.

use std::fmt::Write as _;
use std::path::Path;

use base64::Engine as _;

use crate::error::{Error, Result};
use crate::geom::Obstacle;
use crate::optimizer::Problem;
use crate::oracle::{write_file, Raster};

/// Longer side of the drawing in SVG user units.
const CANVAS: f64 = 600.0;

const PALETTE: [&str; 6] = ["#2ca02c", "#9467bd", "#d62728", "#1f77b4", "#ff7f0e", "#17becf"];

/// A sampled path with a legend label.
#[derive(Debug, Clone)]
pub struct LabeledPath {
    pub label: String,
    pub points: Vec<Vec<f64>>,
}

impl LabeledPath {
    pub fn new(label: impl Into<String>, points: Vec<Vec<f64>>) -> Self {
        LabeledPath {
            label: label.into(),
            points,
        }
    }
}

/// Maps workspace coordinates onto the canvas, y pointing up.
struct View {
    min: [f64; 2],
    max: [f64; 2],
    scale: f64,
}

impl View {
    fn new(problem: &Problem) -> Self {
        let b = &problem.scene.bounds;
        let min = [b.min[0], b.min[1]];
        let max = [b.max[0], b.max[1]];
        let scale = CANVAS / (max[0] - min[0]).max(max[1] - min[1]);
        View { min, max, scale }
    }

    fn width(&self) -> f64 {
        (self.max[0] - self.min[0]) * self.scale
    }

    fn height(&self) -> f64 {
        (self.max[1] - self.min[1]) * self.scale
    }

    fn x(&self, x: f64) -> f64 {
        (x - self.min[0]) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        (self.max[1] - y) * self.scale
    }

    fn len(&self, d: f64) -> f64 {
        d * self.scale
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// PNG of the raster's gray levels, highest y in the top row.
pub fn raster_png(raster: &Raster) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, raster.width as u32, raster.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::InvalidArgument(format!("png header: {e}")))?;
        writer
            .write_image_data(&raster.to_gray())
            .map_err(|e| Error::InvalidArgument(format!("png data: {e}")))?;
    }
    Ok(out)
}

/// SVG document for a 2D problem with optional paths and background raster.
pub fn svg_string(problem: &Problem, paths: &[LabeledPath], heatmap: Option<&Raster>) -> Result<String> {
    problem.validate()?;
    if problem.scene.dim != 2 {
        return Err(Error::Unsupported(format!(
            "rendering needs a 2D problem, got {}D",
            problem.scene.dim
        )));
    }
    for p in paths {
        if let Some(bad) = p.points.iter().find(|q| q.len() != 2) {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: bad.len(),
            });
        }
    }
    let v = View::new(problem);
    let mut s = String::new();
    // Writing into a String cannot fail.
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.3}" height="{h:.3}" viewBox="0 0 {w:.3} {h:.3}">"#,
        w = v.width(),
        h = v.height()
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{:.3}" height="{:.3}" fill="white"/>"#, v.width(), v.height());
    if let Some(r) = heatmap {
        let data = base64::engine::general_purpose::STANDARD.encode(raster_png(r)?);
        let _ = writeln!(
            s,
            r#"<image class="heatmap" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" preserveAspectRatio="none" href="data:image/png;base64,{data}"/>"#,
            v.x(r.x_range.0),
            v.y(r.y_range.1),
            v.len(r.x_range.1 - r.x_range.0),
            v.len(r.y_range.1 - r.y_range.0),
        );
    }
    for o in &problem.scene.obstacles {
        match o {
            Obstacle::Sphere { center, radius } => {
                let _ = writeln!(
                    s,
                    r##"<circle class="obstacle" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="#555555" fill-opacity="0.6" stroke="black"/>"##,
                    v.x(center[0]),
                    v.y(center[1]),
                    v.len(*radius)
                );
            }
            Obstacle::Box { center, half_extents } => {
                let _ = writeln!(
                    s,
                    r##"<rect class="obstacle" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#555555" fill-opacity="0.6" stroke="black"/>"##,
                    v.x(center[0] - half_extents[0]),
                    v.y(center[1] + half_extents[1]),
                    v.len(2.0 * half_extents[0]),
                    v.len(2.0 * half_extents[1])
                );
            }
        }
    }
    for (k, p) in paths.iter().enumerate() {
        let pts = p
            .points
            .iter()
            .map(|q| format!("{:.3},{:.3}", v.x(q[0]), v.y(q[1])))
            .collect::<Vec<_>>()
            .join(" ");
        let color = PALETTE[k % PALETTE.len()];
        let dash = if k >= PALETTE.len() { r#" stroke-dasharray="6 3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline class="path" data-label="{}" points="{pts}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            escape(&p.label)
        );
        let _ = writeln!(
            s,
            r#"<text x="8" y="{:.3}" font-family="sans-serif" font-size="14" fill="{color}">{}</text>"#,
            18.0 * (k + 1) as f64,
            escape(&p.label)
        );
    }
    for (class, q, color) in [("start", &problem.start, "#1f77b4"), ("goal", &problem.goal, "#d62728")] {
        let _ = writeln!(
            s,
            r#"<circle class="{class}" cx="{:.3}" cy="{:.3}" r="6" fill="{color}" stroke="black"/>"#,
            v.x(q[0]),
            v.y(q[1])
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes [`svg_string`] to `out`.
pub fn render_svg(problem: &Problem, paths: &[LabeledPath], heatmap: Option<&Raster>, out: &Path) -> Result<()> {
    write_file(out, svg_string(problem, paths, heatmap)?.as_bytes())
}
