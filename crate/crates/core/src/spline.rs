//! Cubic Bézier segments and least-squares spline fitting with adaptive
//! subdivision (Schneider-style).

use crate::error::{Error, Result};
use crate::num::{Point2, Real};

/// One cubic Bézier segment with on-curve endpoints p0/p3 and off-curve
/// controls p1/p2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicSegment<F> {
    pub p0: Point2<F>,
    pub p1: Point2<F>,
    pub p2: Point2<F>,
    pub p3: Point2<F>,
}

impl<F: Real> CubicSegment<F> {
    pub fn new(p0: Point2<F>, p1: Point2<F>, p2: Point2<F>, p3: Point2<F>) -> Self {
        Self { p0, p1, p2, p3 }
    }

    /// Straight line as a degree-elevated cubic: controls at the 1/3 points.
    pub fn line(a: Point2<F>, b: Point2<F>) -> Self {
        let third = F::c(1.0 / 3.0);
        Self {
            p0: a,
            p1: a.lerp(b, third),
            p2: a.lerp(b, third + third),
            p3: b,
        }
    }

    pub fn eval(&self, t: F) -> Point2<F> {
        let u = F::one() - t;
        let uu = u * u;
        let tt = t * t;
        self.p0 * (uu * u)
            + self.p1 * (F::c(3.0) * uu * t)
            + self.p2 * (F::c(3.0) * u * tt)
            + self.p3 * (tt * t)
    }

    pub fn deriv(&self, t: F) -> Point2<F> {
        let u = F::one() - t;
        let three = F::c(3.0);
        (self.p1 - self.p0) * (three * u * u)
            + (self.p2 - self.p1) * (F::c(6.0) * u * t)
            + (self.p3 - self.p2) * (three * t * t)
    }

    /// Recursive flattening to a polyline within the given chordal tolerance.
    /// Appends every point except the segment start.
    pub fn flatten_into(&self, tolerance: F, out: &mut Vec<Point2<F>>) {
        if self.is_flat(tolerance) {
            out.push(self.p3);
        } else {
            let (a, b) = self.split(F::c(0.5));
            a.flatten_into(tolerance, out);
            b.flatten_into(tolerance, out);
        }
    }

    fn is_flat(&self, tolerance: F) -> bool {
        // distance of controls from the chord bounds the curve deviation
        let d1 = dist_to_chord(self.p1, self.p0, self.p3);
        let d2 = dist_to_chord(self.p2, self.p0, self.p3);
        d1.max(d2) * F::c(0.75) <= tolerance
    }

    pub fn split(&self, t: F) -> (Self, Self) {
        let p01 = self.p0.lerp(self.p1, t);
        let p12 = self.p1.lerp(self.p2, t);
        let p23 = self.p2.lerp(self.p3, t);
        let p012 = p01.lerp(p12, t);
        let p123 = p12.lerp(p23, t);
        let mid = p012.lerp(p123, t);
        (
            Self::new(self.p0, p01, p012, mid),
            Self::new(mid, p123, p23, self.p3),
        )
    }
}

fn dist_to_chord<F: Real>(p: Point2<F>, a: Point2<F>, b: Point2<F>) -> F {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == F::zero() {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).max(F::zero()).min(F::one());
    p.dist(a + ab * t)
}

/// Distance from a point to a cubic, minimized over a dense parameter
/// sampling plus local refinement. Used for fit-error measurement.
pub fn point_curve_distance<F: Real>(p: Point2<F>, seg: &CubicSegment<F>) -> F {
    let n = 64;
    let mut best_t = F::zero();
    let mut best = F::infinity();
    for i in 0..=n {
        let t = F::from_usize_c(i) / F::from_usize_c(n);
        let d = p.dist(seg.eval(t));
        if d < best {
            best = d;
            best_t = t;
        }
    }
    // a few Newton steps on d/dt |seg(t)-p|^2
    let mut t = best_t;
    for _ in 0..8 {
        let q = seg.eval(t) - p;
        let dq = seg.deriv(t);
        let num = q.dot(dq);
        let den = dq.dot(dq) + q.dot(second_deriv(seg, t));
        if den.abs() < F::c(1e-12) {
            break;
        }
        t = (t - num / den).max(F::zero()).min(F::one());
    }
    best.min(p.dist(seg.eval(t)))
}

fn second_deriv<F: Real>(seg: &CubicSegment<F>, t: F) -> Point2<F> {
    let six = F::c(6.0);
    let u = F::one() - t;
    (seg.p2 - seg.p1 * F::c(2.0) + seg.p0) * (six * u)
        + (seg.p3 - seg.p2 * F::c(2.0) + seg.p1) * (six * t)
}

/// Fit a chain of cubic Bézier segments through ordered points so that the
/// maximum deviation at the input points stays within `tolerance`.
/// Endpoints are interpolated exactly.
pub fn fit_cubic_spline<F: Real>(points: &[Point2<F>], tolerance: F) -> Result<Vec<CubicSegment<F>>> {
    if points.len() < 2 {
        return Err(Error::argument("spline fitting needs at least 2 points"));
    }
    if tolerance <= F::zero() {
        return Err(Error::argument("spline tolerance must be > 0"));
    }
    // drop exactly coincident consecutive points
    let mut pts: Vec<Point2<F>> = Vec::with_capacity(points.len());
    for &p in points {
        if pts.last().map(|&q| q != p).unwrap_or(true) {
            pts.push(p);
        }
    }
    if pts.len() < 2 {
        // fully coincident input: single degenerate segment
        let p = points[0];
        return Ok(vec![CubicSegment::new(p, p, p, p)]);
    }
    let t1 = tangent(&pts, 0, 1);
    let t2 = tangent(&pts, pts.len() - 1, pts.len() - 2);
    let mut out = Vec::new();
    fit_recursive(&pts, t1, t2, tolerance, 0, &mut out);
    Ok(out)
}

fn tangent<F: Real>(pts: &[Point2<F>], from: usize, towards: usize) -> Point2<F> {
    let mut i = towards;
    loop {
        if let Some(t) = (pts[i] - pts[from]).normalized() {
            return t;
        }
        if i == pts.len() - 1 || i == 0 {
            return Point2::new(F::one(), F::zero());
        }
        i = if towards > from { i + 1 } else { i - 1 };
    }
}

fn chord_params<F: Real>(pts: &[Point2<F>]) -> Vec<F> {
    let mut u = vec![F::zero()];
    for w in pts.windows(2) {
        let last = *u.last().unwrap();
        u.push(last + w[0].dist(w[1]));
    }
    let total = *u.last().unwrap();
    if total > F::zero() {
        for v in &mut u {
            *v /= total;
        }
    }
    u
}

fn fit_recursive<F: Real>(
    pts: &[Point2<F>],
    t1: Point2<F>,
    t2: Point2<F>,
    tolerance: F,
    depth: usize,
    out: &mut Vec<CubicSegment<F>>,
) {
    if pts.len() == 2 {
        out.push(CubicSegment::line(pts[0], pts[1]));
        return;
    }
    let mut u = chord_params(pts);
    let mut bez = generate_bezier(pts, &u, t1, t2);
    let (mut err, mut worst) = max_error(pts, &bez, &u);
    if err <= tolerance {
        out.push(bez);
        return;
    }
    // Newton-Raphson reparameterization before giving up on a single segment
    for _ in 0..4 {
        u = reparameterize(pts, &u, &bez);
        bez = generate_bezier(pts, &u, t1, t2);
        let (e, w) = max_error(pts, &bez, &u);
        err = e;
        worst = w;
        if err <= tolerance {
            out.push(bez);
            return;
        }
    }
    if depth > 32 {
        out.push(bez);
        return;
    }
    // split at the point of maximum error and recurse
    let split = worst.clamp(1, pts.len() - 2);
    let center_t = center_tangent(pts, split);
    fit_recursive(&pts[..=split], t1, center_t, tolerance, depth + 1, out);
    fit_recursive(&pts[split..], -center_t, t2, tolerance, depth + 1, out);
}

fn center_tangent<F: Real>(pts: &[Point2<F>], i: usize) -> Point2<F> {
    let v = pts[i - 1] - pts[i + 1];
    v.normalized().unwrap_or_else(|| {
        tangent(pts, i, i.saturating_sub(1))
    })
}

/// Least-squares placement of the two inner control points along the given
/// unit tangents (Schneider's generate_bezier).
fn generate_bezier<F: Real>(
    pts: &[Point2<F>],
    u: &[F],
    t1: Point2<F>,
    t2: Point2<F>,
) -> CubicSegment<F> {
    let first = pts[0];
    let last = pts[pts.len() - 1];
    let three = F::c(3.0);
    let mut c = [[F::zero(); 2]; 2];
    let mut x = [F::zero(); 2];
    for (&p, &t) in pts.iter().zip(u.iter()) {
        let s = F::one() - t;
        let b0 = s * s * s;
        let b1 = three * t * s * s;
        let b2 = three * t * t * s;
        let b3 = t * t * t;
        let a0 = t1 * b1;
        let a1 = t2 * b2;
        c[0][0] += a0.dot(a0);
        c[0][1] += a0.dot(a1);
        c[1][1] += a1.dot(a1);
        let tmp = p - (first * (b0 + b1) + last * (b2 + b3));
        x[0] += a0.dot(tmp);
        x[1] += a1.dot(tmp);
    }
    c[1][0] = c[0][1];
    let det_c = c[0][0] * c[1][1] - c[1][0] * c[0][1];
    let (mut alpha_l, mut alpha_r) = if det_c.abs() > F::c(1e-12) {
        (
            (x[0] * c[1][1] - x[1] * c[0][1]) / det_c,
            (c[0][0] * x[1] - c[1][0] * x[0]) / det_c,
        )
    } else {
        let c0 = c[0][0] + c[0][1];
        let c1 = c[1][0] + c[1][1];
        let a = if c0.abs() > F::c(1e-12) {
            x[0] / c0
        } else if c1.abs() > F::c(1e-12) {
            x[1] / c1
        } else {
            F::zero()
        };
        (a, a)
    };
    // fall back to a heuristic when the solution collapses or reverses
    let seg_len = first.dist(last);
    let eps = F::c(1e-6) * seg_len;
    if alpha_l < eps || alpha_r < eps {
        let d = seg_len / three;
        alpha_l = d;
        alpha_r = d;
    }
    CubicSegment::new(first, first + t1 * alpha_l, last + t2 * alpha_r, last)
}

fn max_error<F: Real>(pts: &[Point2<F>], bez: &CubicSegment<F>, u: &[F]) -> (F, usize) {
    let mut worst = 0usize;
    let mut max = F::zero();
    for (i, (&p, &t)) in pts.iter().zip(u.iter()).enumerate() {
        let d = p.dist(bez.eval(t));
        if d > max {
            max = d;
            worst = i;
        }
    }
    (max, worst)
}

fn reparameterize<F: Real>(pts: &[Point2<F>], u: &[F], bez: &CubicSegment<F>) -> Vec<F> {
    pts.iter()
        .zip(u.iter())
        .map(|(&p, &t)| {
            let q = bez.eval(t) - p;
            let dq = bez.deriv(t);
            let ddq = second_deriv(bez, t);
            let num = q.dot(dq);
            let den = dq.dot(dq) + q.dot(ddq);
            if den.abs() < F::c(1e-12) {
                t
            } else {
                (t - num / den).max(F::zero()).min(F::one())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_segment_controls_collinear() {
        let segs = fit_cubic_spline(
            &[
                Point2::new(0.0f64, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(2.0, 2.0),
                Point2::new(3.0, 3.0),
            ],
            0.1,
        )
        .unwrap();
        assert_eq!(segs.len(), 1);
        let s = &segs[0];
        let chord = s.p3 - s.p0;
        assert!(chord.cross(s.p1 - s.p0).abs() < 1e-9);
        assert!(chord.cross(s.p2 - s.p0).abs() < 1e-9);
    }

    #[test]
    fn refit_sampled_cubic() {
        let truth = CubicSegment::new(
            Point2::new(0.0f64, 0.0),
            Point2::new(10.0, 40.0),
            Point2::new(60.0, 40.0),
            Point2::new(80.0, 0.0),
        );
        let samples: Vec<Point2<f64>> = (0..=24).map(|i| truth.eval(i as f64 / 24.0)).collect();
        let segs = fit_cubic_spline(&samples, 1e-6).unwrap();
        // max deviation at the sample points stays below 1e-6
        for &p in &samples {
            let d = segs
                .iter()
                .map(|s| point_curve_distance(p, s))
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-6, "sample off-curve by {d}");
        }
        // endpoints interpolated exactly
        assert_eq!(segs[0].p0, samples[0]);
        assert_eq!(segs.last().unwrap().p3, *samples.last().unwrap());
    }

    #[test]
    fn quarter_circle_within_tolerance() {
        let samples: Vec<Point2<f64>> = (0..=32)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 * i as f64 / 32.0;
                Point2::new(100.0 * a.cos(), 100.0 * a.sin())
            })
            .collect();
        let segs = fit_cubic_spline(&samples, 0.5).unwrap();
        // dense-sampling oracle for max deviation
        for &p in &samples {
            let d = segs
                .iter()
                .map(|s| point_curve_distance(p, s))
                .fold(f64::INFINITY, f64::min);
            assert!(d <= 0.5, "deviation {d} above tolerance");
        }
    }

    #[test]
    fn coincident_points_degenerate_segment() {
        let p = Point2::new(3.0f64, 4.0);
        let segs = fit_cubic_spline(&[p, p, p], 0.1).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].p0, p);
        assert_eq!(segs[0].p3, p);
    }

    #[test]
    fn too_few_points_is_error() {
        assert!(fit_cubic_spline(&[Point2::new(0.0f64, 0.0)], 0.1).is_err());
    }

    #[test]
    fn split_is_continuous() {
        let seg = CubicSegment::new(
            Point2::new(0.0f64, 0.0),
            Point2::new(1.0, 2.0),
            Point2::new(3.0, 2.0),
            Point2::new(4.0, 0.0),
        );
        let (a, b) = seg.split(0.3);
        assert!(a.p3.dist(b.p0) < 1e-12);
        assert!(a.eval(1.0).dist(seg.eval(0.3)) < 1e-12);
    }
}
