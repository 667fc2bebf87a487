//! Deterministic scanline rasterizer: nonzero winding fill with regular
//! sub-grid supersampling.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::num::{Point2, Real};
use crate::ogv::VectorGlyph;
use crate::raster::GrayImage;

pub const FLATTEN_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub struct RenderParams {
    /// Output canvas side in pixels.
    pub canvas: usize,
    /// Supersampling factor per axis (regular sub-grid).
    pub supersample: usize,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            canvas: 256,
            supersample: 4,
        }
    }
}

impl RenderParams {
    pub fn validate(&self) -> Result<()> {
        if self.canvas < 8 {
            return Err(Error::argument("render canvas must be >= 8"));
        }
        if !(1..=8).contains(&self.supersample) {
            return Err(Error::argument("supersample must be in 1..=8"));
        }
        Ok(())
    }
}

struct Edge {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

fn collect_edges<F: Real>(
    glyph: &VectorGlyph<F>,
    loop_filter: Option<&[usize]>,
    scale: (f64, f64),
) -> Result<Vec<Edge>> {
    let mut edges = Vec::new();
    for (li, l) in glyph.loops.iter().enumerate() {
        if let Some(keep) = loop_filter {
            if !keep.contains(&li) {
                continue;
            }
        }
        if l.segments.is_empty() || !l.is_closed(F::c(1e-6)) {
            return Err(Error::Render(format!("loop {li} is open or empty")));
        }
        let poly: Vec<Point2<f64>> = l
            .flatten(F::c(FLATTEN_TOLERANCE))
            .into_iter()
            .map(|p| {
                let q = p.to_f64();
                Point2::new(q.x * scale.0, q.y * scale.1)
            })
            .collect();
        for w in poly.windows(2) {
            if w[0].y != w[1].y {
                edges.push(Edge {
                    x0: w[0].x,
                    y0: w[0].y,
                    x1: w[1].x,
                    y1: w[1].y,
                });
            }
        }
        // explicit closing edge in case flattening left a gap
        if let (Some(&first), Some(&last)) = (poly.first(), poly.last()) {
            if first != last && first.y != last.y {
                edges.push(Edge {
                    x0: last.x,
                    y0: last.y,
                    x1: first.x,
                    y1: first.y,
                });
            }
        }
    }
    Ok(edges)
}

fn rasterize_edges(edges: &[Edge], params: &RenderParams) -> GrayImage<f64> {
    let n = params.canvas;
    let ss = params.supersample;
    let mut counts = vec![0u32; n * n];
    for py in 0..n {
        for sy in 0..ss {
            let ys = py as f64 + (sy as f64 + 0.5) / ss as f64;
            // crossings of this sub-row with direction
            let mut crossings: Vec<(f64, i32)> = Vec::new();
            for e in edges {
                let (dir, ylo, yhi, xa, ya, xb, yb) = if e.y1 > e.y0 {
                    (1, e.y0, e.y1, e.x0, e.y0, e.x1, e.y1)
                } else {
                    (-1, e.y1, e.y0, e.x1, e.y1, e.x0, e.y0)
                };
                if ys >= ylo && ys < yhi {
                    let x = xa + (ys - ya) * (xb - xa) / (yb - ya);
                    crossings.push((x, dir));
                }
            }
            if crossings.is_empty() {
                continue;
            }
            crossings.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut ci = 0usize;
            let mut winding = 0i32;
            for px in 0..n {
                for sx in 0..ss {
                    let xs = px as f64 + (sx as f64 + 0.5) / ss as f64;
                    while ci < crossings.len() && crossings[ci].0 <= xs {
                        winding += crossings[ci].1;
                        ci += 1;
                    }
                    if winding != 0 {
                        counts[py * n + px] += 1;
                    }
                }
            }
        }
    }
    let denom = (ss * ss) as f64;
    GrayImage {
        width: n,
        height: n,
        values: counts.into_iter().map(|c| c as f64 / denom).collect(),
    }
}

fn canvas_scale<F: Real>(glyph: &VectorGlyph<F>, params: &RenderParams) -> (f64, f64) {
    (
        params.canvas as f64 / glyph.canvas.0 as f64,
        params.canvas as f64 / glyph.canvas.1 as f64,
    )
}

/// Render the glyph's loops into a coverage image: per-pixel fraction of
/// supersample points inside under nonzero winding.
pub fn render<F: Real>(glyph: &VectorGlyph<F>, params: &RenderParams) -> Result<GrayImage<F>> {
    params.validate()?;
    let edges = collect_edges(glyph, None, canvas_scale(glyph, params))?;
    let img = rasterize_edges(&edges, params);
    Ok(GrayImage {
        width: img.width,
        height: img.height,
        values: img.values.into_iter().map(F::c).collect(),
    })
}

/// Render each label's loops separately.
pub fn render_components<F: Real>(
    glyph: &VectorGlyph<F>,
    assignment: &BTreeMap<usize, String>,
    params: &RenderParams,
) -> Result<Vec<(String, GrayImage<F>)>> {
    params.validate()?;
    for li in 0..glyph.loops.len() {
        if !assignment.contains_key(&li) {
            return Err(Error::argument(format!("loop {li} has no label assignment")));
        }
    }
    // keep first-appearance order of labels for determinism
    let mut labels: Vec<String> = Vec::new();
    for li in 0..glyph.loops.len() {
        let l = &assignment[&li];
        if !labels.contains(l) {
            labels.push(l.clone());
        }
    }
    let scale = canvas_scale(glyph, params);
    let mut out = Vec::with_capacity(labels.len());
    for label in labels {
        let keep: Vec<usize> = (0..glyph.loops.len())
            .filter(|li| assignment[li] == label)
            .collect();
        let edges = collect_edges(glyph, Some(&keep), scale)?;
        let img = rasterize_edges(&edges, params);
        out.push((
            label,
            GrayImage {
                width: img.width,
                height: img.height,
                values: img.values.into_iter().map(F::c).collect(),
            },
        ));
    }
    Ok(out)
}
