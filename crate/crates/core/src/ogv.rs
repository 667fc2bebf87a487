//! Oracle glyph vectorization: smoothed skeleton normals, left/right
//! contour offsetting, spline fitting and closed-loop assembly.

use crate::error::{Error, Result};
use crate::num::{Point2, Real};
use crate::raster::{distance_transform, Bitmap};
use crate::skeleton::{resample_path, trace_paths, zhang_suen_thin};
use crate::spline::{fit_cubic_spline, CubicSegment};

#[derive(Debug, Clone)]
pub struct OgvParams<F> {
    /// Half stroke width in pixels; estimated from the distance transform
    /// when absent.
    pub stroke_width: Option<F>,
    /// Sliding-window size for normal smoothing; odd.
    pub window: usize,
    /// Max spline fit deviation in pixels.
    pub spline_tolerance: F,
    /// Skeleton resampling spacing in pixels.
    pub resample_spacing: F,
}

impl<F: Real> Default for OgvParams<F> {
    fn default() -> Self {
        Self {
            stroke_width: None,
            window: 5,
            spline_tolerance: F::c(0.75),
            resample_spacing: F::c(3.0),
        }
    }
}

impl<F: Real> OgvParams<F> {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.stroke_width {
            if w <= F::zero() {
                return Err(Error::argument("stroke width must be > 0"));
            }
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::argument("smoothing window must be odd and >= 1"));
        }
        if self.spline_tolerance <= F::zero() {
            return Err(Error::argument("spline tolerance must be > 0"));
        }
        if self.resample_spacing <= F::zero() {
            return Err(Error::argument("resample spacing must be > 0"));
        }
        Ok(())
    }
}

/// Closed chain of cubic segments; segment i ends where segment i+1 starts
/// and the last segment returns to the first anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphLoop<F> {
    pub segments: Vec<CubicSegment<F>>,
}

impl<F: Real> GlyphLoop<F> {
    pub fn is_closed(&self, tol: F) -> bool {
        match (self.segments.first(), self.segments.last()) {
            (Some(first), Some(last)) => last.p3.dist(first.p0) <= tol,
            _ => false,
        }
    }

    /// Flatten the whole loop into a closed polygon.
    pub fn flatten(&self, tolerance: F) -> Vec<Point2<F>> {
        let mut out = Vec::new();
        if let Some(first) = self.segments.first() {
            out.push(first.p0);
            for seg in &self.segments {
                seg.flatten_into(tolerance, &mut out);
            }
        }
        out
    }
}

/// Vector glyph: closed Bézier loops plus the skeleton polylines they were
/// built around. The flat control-point list (contour points first, then
/// skeleton points) is index-stable across deformation.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGlyph<F> {
    pub loops: Vec<GlyphLoop<F>>,
    pub skeletons: Vec<Vec<Point2<F>>>,
    pub canvas: (usize, usize),
}

impl<F: Real> VectorGlyph<F> {
    pub fn is_empty(&self) -> bool {
        self.loops.is_empty() && self.skeletons.iter().all(|s| s.is_empty())
    }

    /// Number of contour control points in the flat list.
    pub fn contour_point_count(&self) -> usize {
        self.loops.iter().map(|l| l.segments.len() * 3).sum()
    }

    /// Contour control points followed by skeleton points.
    pub fn control_points(&self) -> Vec<Point2<F>> {
        let mut out = Vec::new();
        for l in &self.loops {
            for seg in &l.segments {
                out.push(seg.p0);
                out.push(seg.p1);
                out.push(seg.p2);
            }
        }
        for s in &self.skeletons {
            out.extend(s.iter().copied());
        }
        out
    }

    /// Rebuild the glyph from a flat control-point list produced by
    /// [`control_points`]. Loop/segment topology is unchanged.
    pub fn with_control_points(&self, points: &[Point2<F>]) -> Result<Self> {
        let expected = self.control_points().len();
        if points.len() != expected {
            return Err(Error::argument(format!(
                "control point count {} does not match glyph ({expected})",
                points.len()
            )));
        }
        let mut out = self.clone();
        let mut idx = 0;
        for l in &mut out.loops {
            let n = l.segments.len();
            let base = idx;
            for (i, seg) in l.segments.iter_mut().enumerate() {
                seg.p0 = points[base + 3 * i];
                seg.p1 = points[base + 3 * i + 1];
                seg.p2 = points[base + 3 * i + 2];
                seg.p3 = points[base + 3 * ((i + 1) % n)];
            }
            idx += 3 * n;
        }
        for s in &mut out.skeletons {
            for p in s.iter_mut() {
                *p = points[idx];
                idx += 1;
            }
        }
        Ok(out)
    }
}

/// Unit normals along a polyline: forward difference directions rotated
/// 90 degrees CCW; the last point reuses the last direction. Duplicate
/// consecutive points reuse the previous direction.
pub fn direction_normals<F: Real>(points: &[Point2<F>]) -> Result<Vec<Point2<F>>> {
    if points.len() < 2 {
        return Err(Error::argument("normals need a path with >= 2 points"));
    }
    let mut dirs: Vec<Point2<F>> = Vec::with_capacity(points.len());
    let mut last_dir: Option<Point2<F>> = None;
    for w in points.windows(2) {
        match (w[1] - w[0]).normalized() {
            Some(d) => {
                dirs.push(d);
                last_dir = Some(d);
            }
            None => {
                log::warn!("duplicate consecutive path point {:?} skipped", w[0]);
                dirs.push(last_dir.unwrap_or_else(|| Point2::new(F::one(), F::zero())));
            }
        }
    }
    // fix leading duplicates that had no prior direction
    if let Some(first_real) = dirs.iter().copied().find(|d| d.norm() > F::zero()) {
        for d in dirs.iter_mut() {
            if d.norm() == F::zero() {
                *d = first_real;
            }
        }
    }
    let last = *dirs.last().unwrap();
    dirs.push(last);
    Ok(dirs.into_iter().map(|d| d.perp()).collect())
}

/// Sliding-window mean of unit normals, renormalized. For open paths the
/// window shrinks at the ends; for closed paths it wraps.
pub fn smooth_normals<F: Real>(normals: &[Point2<F>], k: usize, closed: bool) -> Result<Vec<Point2<F>>> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::argument("window size must be odd and >= 1"));
    }
    if k == 1 {
        return Ok(normals.to_vec());
    }
    let n = normals.len() as i64;
    let half = (k / 2) as i64;
    Ok((0..n)
        .map(|j| {
            let mut acc = Point2::zero();
            for o in -half..=half {
                let i = j + o;
                let idx = if closed {
                    i.rem_euclid(n)
                } else if i < 0 || i >= n {
                    continue;
                } else {
                    i
                };
                acc += normals[idx as usize];
            }
            acc.normalized().unwrap_or(normals[j as usize])
        })
        .collect())
}

/// Offset the skeleton by +/- w along the smoothed unit normals.
pub fn offset_contours<F: Real>(
    points: &[Point2<F>],
    normals: &[Point2<F>],
    w: F,
) -> (Vec<Point2<F>>, Vec<Point2<F>>) {
    assert_eq!(points.len(), normals.len(), "one normal per point");
    let left = points
        .iter()
        .zip(normals)
        .map(|(&p, &n)| p + n * w)
        .collect();
    let right = points
        .iter()
        .zip(normals)
        .map(|(&p, &n)| p - n * w)
        .collect();
    (left, right)
}

/// Join the left fit (forward), a flat end cap, the reversed right fit and
/// a flat start cap into one closed loop.
pub fn assemble_loop<F: Real>(
    left: &[CubicSegment<F>],
    right: &[CubicSegment<F>],
) -> GlyphLoop<F> {
    let mut segments: Vec<CubicSegment<F>> = left.to_vec();
    let right_rev: Vec<CubicSegment<F>> = right
        .iter()
        .rev()
        .map(|s| CubicSegment::new(s.p3, s.p2, s.p1, s.p0))
        .collect();
    let left_end = left.last().map(|s| s.p3).unwrap_or_else(Point2::zero);
    let right_start = right_rev.first().map(|s| s.p0).unwrap_or(left_end);
    segments.push(CubicSegment::line(left_end, right_start));
    segments.extend(right_rev.iter().copied());
    let right_end = right_rev.last().map(|s| s.p3).unwrap_or(right_start);
    let left_start = left.first().map(|s| s.p0).unwrap_or(right_end);
    segments.push(CubicSegment::line(right_end, left_start));
    GlyphLoop { segments }
}

fn close_contour_loop<F: Real>(segs: Vec<CubicSegment<F>>) -> GlyphLoop<F> {
    let mut segments = segs;
    if let (Some(&first), Some(&last)) = (segments.first(), segments.last()) {
        if last.p3.dist(first.p0) > F::c(1e-9) {
            segments.push(CubicSegment::line(last.p3, first.p0));
        }
    }
    GlyphLoop { segments }
}

/// Mean distance-transform value over skeleton pixels, shifted to a
/// half-width estimate.
pub fn estimate_stroke_width<F: Real>(img: &Bitmap, skeleton: &Bitmap) -> F {
    let dt = distance_transform(img);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (x, y) in skeleton.foreground() {
        sum += dt.get(x, y);
        n += 1;
    }
    if n == 0 {
        return F::one();
    }
    F::c((sum / n as f64 - 0.5).max(0.75))
}

/// Full OGV pipeline: thin, trace, resample, smooth normals, offset, fit
/// and assemble one closed loop per skeleton path.
pub fn vectorize<F: Real>(img: &Bitmap, params: &OgvParams<F>) -> Result<VectorGlyph<F>> {
    params.validate()?;
    if img.foreground_count() == 0 {
        return Err(Error::Degenerate("empty glyph: no foreground pixels".into()));
    }
    let thin = zhang_suen_thin(img);
    let set = trace_paths(&thin);
    let w = params
        .stroke_width
        .unwrap_or_else(|| estimate_stroke_width(img, &thin));

    let mut loops = Vec::new();
    let mut skeletons = Vec::new();
    for path in &set.paths {
        if path.points.len() < 2 {
            // isolated dot: emit a small diamond loop around it
            let (x, y) = path.points[0];
            let c = Point2::new(F::c(x as f64), F::c(y as f64));
            let quad = [
                c + Point2::new(w, F::zero()),
                c + Point2::new(F::zero(), w),
                c - Point2::new(w, F::zero()),
                c - Point2::new(F::zero(), w),
            ];
            let segments = (0..4)
                .map(|i| CubicSegment::line(quad[i], quad[(i + 1) % 4]))
                .collect();
            loops.push(GlyphLoop { segments });
            skeletons.push(vec![c]);
            continue;
        }
        let closed = path.points.first() == path.points.last() && path.points.len() > 3;
        let pts = resample_path::<F>(path, params.resample_spacing)?;
        let normals = direction_normals(&pts)?;
        let smoothed = smooth_normals(&normals, params.window, closed)?;
        let (left, right) = offset_contours(&pts, &smoothed, w);
        let left_fit = fit_cubic_spline(&left, params.spline_tolerance)?;
        let right_fit = fit_cubic_spline(&right, params.spline_tolerance)?;
        if closed {
            // a cyclic stroke becomes two concentric loops with opposite
            // orientation so nonzero winding leaves the ring hollow
            loops.push(close_contour_loop(left_fit));
            let right_rev: Vec<CubicSegment<F>> = right_fit
                .iter()
                .rev()
                .map(|s| CubicSegment::new(s.p3, s.p2, s.p1, s.p0))
                .collect();
            loops.push(close_contour_loop(right_rev));
        } else {
            loops.push(assemble_loop(&left_fit, &right_fit));
        }
        skeletons.push(pts);
    }
    Ok(VectorGlyph {
        loops,
        skeletons,
        canvas: (img.width, img.height),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(coords: &[(f64, f64)]) -> Vec<Point2<f64>> {
        coords.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn normals_of_horizontal_path() {
        let n = direction_normals(&pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)])).unwrap();
        assert_eq!(n, pts(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)]));
    }

    #[test]
    fn normal_of_vertical_step() {
        let n = direction_normals(&pts(&[(0.0, 0.0), (0.0, 1.0)])).unwrap();
        assert_eq!(n[0], Point2::new(-1.0, 0.0));
    }

    #[test]
    fn circle_normals_are_radial() {
        let center = Point2::new(50.0f64, 50.0);
        let r = 20.0;
        let circle: Vec<Point2<f64>> = (0..64)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 64.0;
                center + Point2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        let normals = direction_normals(&circle).unwrap();
        for (i, (&p, &n)) in circle.iter().zip(normals.iter()).enumerate().take(63) {
            let radial = (p - center).normalized().unwrap();
            // forward differences tilt by half the step angle
            let align = radial.dot(n).abs();
            assert!(align > 0.995, "point {i}: |cos| = {align}");
        }
    }

    #[test]
    fn smoothing_identity_cases() {
        let constant = pts(&[(0.0, 1.0); 5]);
        assert_eq!(smooth_normals(&constant, 3, false).unwrap(), constant);
        let arbitrary = pts(&[(1.0, 0.0), (0.0, 1.0), (1.0, 0.0)]);
        assert_eq!(smooth_normals(&arbitrary, 1, false).unwrap(), arbitrary);
        assert!(smooth_normals(&arbitrary, 2, false).is_err());
    }

    #[test]
    fn smoothing_alternating_matches_window_mean() {
        let alternating = pts(&[(0.0, 1.0), (1.0, 0.0), (0.0, 1.0), (1.0, 0.0), (0.0, 1.0)]);
        let sm = smooth_normals(&alternating, 3, false).unwrap();
        // interior index 1: mean of (0,1),(1,0),(0,1) = (1/3)(1,2), renormalized
        let expected = Point2::new(1.0, 2.0).normalized().unwrap();
        assert!(sm[1].dist(expected) < 1e-12);
        // brute-force window oracle over all interior points
        for j in 1..4 {
            let mean = (alternating[j - 1] + alternating[j] + alternating[j + 1]) / 3.0;
            let oracle = mean.normalized().unwrap();
            assert!(sm[j].dist(oracle) < 1e-12);
        }
    }

    #[test]
    fn offset_distance_exact() {
        let line = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let normals = pts(&[(0.0, 1.0); 3]);
        let (l, r) = offset_contours(&line, &normals, 2.0);
        for (i, &p) in line.iter().enumerate() {
            assert_eq!(l[i], p + Point2::new(0.0, 2.0));
            assert_eq!(r[i], p - Point2::new(0.0, 2.0));
            assert!((l[i].dist(p) - 2.0).abs() < 1e-12);
            assert!((r[i].dist(p) - 2.0).abs() < 1e-12);
        }
        let (l0, r0) = offset_contours(&line, &normals, 0.0);
        assert_eq!(l0, line);
        assert_eq!(r0, line);
    }

    #[test]
    fn circle_offset_radii() {
        let center = Point2::new(0.0f64, 0.0);
        let r = 10.0;
        let circle: Vec<Point2<f64>> = (0..=128)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 128.0;
                center + Point2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        let normals = direction_normals(&circle).unwrap();
        let smoothed = smooth_normals(&normals, 3, true).unwrap();
        let (left, right) = offset_contours(&circle, &smoothed, r / 2.0);
        for i in 0..circle.len() - 1 {
            let (rl, rr) = (left[i].dist(center), right[i].dist(center));
            // normals point inward for CCW traversal
            let (inner, outer) = if rl < rr { (rl, rr) } else { (rr, rl) };
            assert!((inner - r / 2.0).abs() < 0.05, "inner {inner}");
            assert!((outer - 1.5 * r).abs() < 0.05, "outer {outer}");
        }
    }

    #[test]
    fn assembled_loop_closes() {
        let left = vec![CubicSegment::line(
            Point2::new(0.0f64, 2.0),
            Point2::new(10.0, 2.0),
        )];
        let right = vec![CubicSegment::line(
            Point2::new(0.0, -2.0),
            Point2::new(10.0, -2.0),
        )];
        let l = assemble_loop(&left, &right);
        assert!(l.is_closed(1e-12));
        assert_eq!(l.segments.len(), 4);
        // first anchor equals last segment endpoint exactly
        assert_eq!(l.segments.last().unwrap().p3, l.segments[0].p0);
    }

    #[test]
    fn u_stroke_loop_is_simple() {
        // U-shaped skeleton
        let mut path = Vec::new();
        for y in (0..20).rev() {
            path.push(Point2::new(0.0f64, y as f64));
        }
        for x in 1..20 {
            path.push(Point2::new(x as f64, 0.0));
        }
        for y in 1..20 {
            path.push(Point2::new(19.0, y as f64));
        }
        let normals = direction_normals(&path).unwrap();
        let smoothed = smooth_normals(&normals, 5, false).unwrap();
        let (left, right) = offset_contours(&path, &smoothed, 2.0);
        let lf = fit_cubic_spline(&left, 0.5).unwrap();
        let rf = fit_cubic_spline(&right, 0.5).unwrap();
        let l = assemble_loop(&lf, &rf);
        assert!(l.is_closed(1e-9));
        // pairwise intersection sweep over the flattened polygon
        let poly = l.flatten(0.05);
        let n = poly.len();
        for i in 0..n - 1 {
            for j in i + 1..n - 1 {
                if j == i || (j + 1) % (n - 1) == i || (i + 1) % (n - 1) == j {
                    continue;
                }
                assert!(
                    !segments_cross(poly[i], poly[i + 1], poly[j], poly[j + 1]),
                    "edges {i} and {j} intersect"
                );
            }
        }
    }

    fn segments_cross(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, d: Point2<f64>) -> bool {
        let orient = |p: Point2<f64>, q: Point2<f64>, r: Point2<f64>| (q - p).cross(r - p);
        let (o1, o2) = (orient(a, b, c), orient(a, b, d));
        let (o3, o4) = (orient(c, d, a), orient(c, d, b));
        o1 * o2 < -1e-12 && o3 * o4 < -1e-12
    }

    #[test]
    fn vectorize_bar_single_stroke() {
        let mut b = Bitmap::new(26, 9).unwrap();
        for y in 3..6 {
            for x in 3..23 {
                b.set(x, y, true);
            }
        }
        let g = vectorize(&b, &OgvParams::default()).unwrap();
        assert_eq!(g.loops.len(), 1);
        assert_eq!(g.skeletons.len(), 1);
        assert!(g.loops[0].is_closed(1e-9));
    }

    #[test]
    fn vectorize_empty_is_error() {
        let b = Bitmap::new(8, 8).unwrap();
        assert!(vectorize(&b, &OgvParams::<f64>::default()).is_err());
    }

    #[test]
    fn vectorize_plus_sign_paths() {
        let mut b = Bitmap::new(31, 31).unwrap();
        for y in 13..18 {
            for x in 2..29 {
                b.set(x, y, true);
            }
        }
        for x in 13..18 {
            for y in 2..29 {
                b.set(x, y, true);
            }
        }
        let g: VectorGlyph<f64> = vectorize(&b, &OgvParams::default()).unwrap();
        // four arms meeting at a junction
        assert_eq!(g.skeletons.len(), 4, "expected 4 skeleton paths");
        assert_eq!(g.loops.len(), 4);
    }

    #[test]
    fn control_point_round_trip() {
        let mut b = Bitmap::new(26, 9).unwrap();
        for y in 3..6 {
            for x in 3..23 {
                b.set(x, y, true);
            }
        }
        let g: VectorGlyph<f64> = vectorize(&b, &OgvParams::default()).unwrap();
        let cps = g.control_points();
        let rebuilt = g.with_control_points(&cps).unwrap();
        assert_eq!(g, rebuilt);
        // perturbing one point keeps topology and the shared-anchor rule
        let mut moved = cps.clone();
        moved[0] += Point2::new(1.0, 0.0);
        let deformed = g.with_control_points(&moved).unwrap();
        assert_eq!(deformed.loops[0].segments.len(), g.loops[0].segments.len());
        assert!(deformed.loops[0].is_closed(1e-9));
    }
}
