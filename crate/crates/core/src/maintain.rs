//! Glyph maintenance: skeleton-to-contour anchors over a Delaunay
//! triangulation, the angular skeleton-structure loss with its analytic
//! gradient, tone loss, and the glyph distance metric.

use crate::delaunay::Triangulation;
use crate::error::{Error, Result};
use crate::num::{Point2, Real};
use crate::ogv::VectorGlyph;
use crate::raster::{gaussian_blur, GrayImage};
use crate::skeleton::resample_polyline;

const ZERO_LENGTH_EPS: f64 = 1e-9;

/// One skeleton-to-contour reference vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor<F> {
    /// Index of the skeleton point in the flat control-point list.
    pub skeleton: usize,
    /// Index of the contour point in the flat control-point list.
    pub contour: usize,
    /// Index of the triangle that linked the pair.
    pub triangle: usize,
    /// Reference vector from skeleton point to contour point.
    pub reference: Point2<F>,
}

#[derive(Debug, Clone)]
pub struct SkeletonAnchors<F> {
    pub anchors: Vec<Anchor<F>>,
    /// Near-zero reference vectors dropped during construction.
    pub dropped: usize,
}

/// Link every skeleton point to the contour vertices of its incident
/// triangles. One anchor per unique (skeleton, contour) pair; the reference
/// vectors are frozen from the positions the triangulation was built on.
pub fn build_anchors<F: Real>(
    tri: &Triangulation<F>,
    glyph: &VectorGlyph<F>,
) -> Result<SkeletonAnchors<F>> {
    let points = glyph.control_points();
    if tri.vertices.len() != points.len() {
        return Err(Error::argument(format!(
            "triangulation has {} vertices but glyph has {} control points",
            tri.vertices.len(),
            points.len()
        )));
    }
    let contour_count = glyph.contour_point_count();
    let mut anchors: Vec<Anchor<F>> = Vec::new();
    let mut dropped = 0usize;
    let mut linked = vec![false; points.len()];
    for (t, triangle) in tri.triangles.iter().enumerate() {
        for &j in triangle {
            if j < contour_count {
                continue;
            }
            for &i in triangle {
                if i >= contour_count {
                    continue;
                }
                if anchors
                    .iter()
                    .any(|a| a.skeleton == j && a.contour == i)
                {
                    continue;
                }
                let alpha = points[i] - points[j];
                if alpha.norm().as_f64() < ZERO_LENGTH_EPS {
                    dropped += 1;
                    continue;
                }
                linked[j] = true;
                anchors.push(Anchor {
                    skeleton: j,
                    contour: i,
                    triangle: t,
                    reference: alpha,
                });
            }
        }
    }
    for (j, l) in linked.iter().enumerate().skip(contour_count) {
        if !l {
            log::warn!("skeleton point {j} has no incident contour vertices");
        }
    }
    Ok(SkeletonAnchors { anchors, dropped })
}

/// Mean ReLU(-cos) over the angles between reference vectors and their
/// deformed counterparts. In [0, 1]; 0 iff no deformed vector turns past
/// 90 degrees. Zero-length deformed vectors are skipped with the
/// denominator decremented.
pub fn skst_loss<F: Real>(anchors: &SkeletonAnchors<F>, deformed: &[Point2<F>]) -> Result<F> {
    let (loss, _) = skst_loss_and_gradient(anchors, deformed, false)?;
    Ok(loss)
}

/// Analytic gradient of [`skst_loss`] with respect to every deformed
/// position. Zero where the ReLU is inactive.
pub fn skst_gradient<F: Real>(
    anchors: &SkeletonAnchors<F>,
    deformed: &[Point2<F>],
) -> Result<Vec<Point2<F>>> {
    let (_, grad) = skst_loss_and_gradient(anchors, deformed, true)?;
    Ok(grad.expect("gradient requested"))
}

pub fn skst_loss_and_gradient<F: Real>(
    anchors: &SkeletonAnchors<F>,
    deformed: &[Point2<F>],
    with_gradient: bool,
) -> Result<(F, Option<Vec<Point2<F>>>)> {
    for a in &anchors.anchors {
        if a.skeleton >= deformed.len() || a.contour >= deformed.len() {
            return Err(Error::argument(
                "deformed position list shorter than anchor indices",
            ));
        }
    }
    struct Active<F> {
        contour: usize,
        skeleton: usize,
        /// -dcos/d(alpha_hat), pre-division by N
        dir: Point2<F>,
    }
    let mut active: Vec<Active<F>> = Vec::new();
    let mut sum = F::zero();
    let mut n = anchors.anchors.len();
    for a in &anchors.anchors {
        let hat = deformed[a.contour] - deformed[a.skeleton];
        let h = hat.norm();
        if h.as_f64() < ZERO_LENGTH_EPS {
            n -= 1;
            continue;
        }
        let u = a.reference / a.reference.norm();
        let hat_u = hat / h;
        let cos = u.dot(hat_u);
        if cos < F::zero() {
            sum += -cos;
            if with_gradient {
                active.push(Active {
                    contour: a.contour,
                    skeleton: a.skeleton,
                    dir: -(u - hat_u * cos) / h,
                });
            }
        }
    }
    let n_f = if n == 0 { F::one() } else { F::from_usize_c(n) };
    let loss = sum / n_f;
    let grad = if with_gradient {
        let mut g = vec![Point2::<F>::zero(); deformed.len()];
        for a in &active {
            g[a.contour] += a.dir / n_f;
            g[a.skeleton] -= a.dir / n_f;
        }
        Some(g)
    } else {
        None
    };
    Ok((loss, grad))
}

/// Mean squared difference of the two Gaussian-blurred rasters.
pub fn tone_loss<F: Real>(
    original: &GrayImage<F>,
    current: &GrayImage<F>,
    sigma: F,
) -> Result<F> {
    if original.width != current.width || original.height != current.height {
        return Err(Error::argument(format!(
            "tone loss dimension mismatch: {}x{} vs {}x{}",
            original.width, original.height, current.width, current.height
        )));
    }
    let a = gaussian_blur(original, sigma)?;
    let b = gaussian_blur(current, sigma)?;
    let n = F::from_usize_c(a.values.len());
    let sum: F = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(sum / n)
}

/// Pre-blurred variant used when the original's blur is cached.
pub fn tone_loss_blurred<F: Real>(
    original_blurred: &GrayImage<F>,
    current: &GrayImage<F>,
    sigma: F,
) -> Result<F> {
    if original_blurred.width != current.width || original_blurred.height != current.height {
        return Err(Error::argument("tone loss dimension mismatch"));
    }
    let b = gaussian_blur(current, sigma)?;
    let n = F::from_usize_c(b.values.len());
    let sum: F = original_blurred
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(sum / n)
}

pub const DISTANCE_SAMPLES: usize = 512;

/// 512 arc-length-uniform outline samples after normalizing the control
/// point bounding box into the unit square centered at the origin.
pub fn outline_samples<F: Real>(glyph: &VectorGlyph<F>) -> Result<Vec<Point2<F>>> {
    if glyph.loops.is_empty() {
        return Err(Error::argument("cannot sample an empty glyph"));
    }
    // normalize on the control-point bounding box so the normalization
    // commutes exactly with translation and uniform scaling
    let cps: Vec<Point2<F>> = glyph
        .loops
        .iter()
        .flat_map(|l| l.segments.iter().flat_map(|s| [s.p0, s.p1, s.p2, s.p3]))
        .collect();
    let mut min = cps[0];
    let mut max = cps[0];
    for &p in &cps {
        min = Point2::new(min.x.min(p.x), min.y.min(p.y));
        max = Point2::new(max.x.max(p.x), max.y.max(p.y));
    }
    let center = (min + max) / F::c(2.0);
    let extent = (max.x - min.x).max(max.y - min.y);
    let scale = if extent > F::zero() {
        F::one() / extent
    } else {
        F::one()
    };

    let polylines: Vec<Vec<Point2<F>>> = glyph
        .loops
        .iter()
        .map(|l| {
            let mut norm = l.clone();
            for seg in &mut norm.segments {
                seg.p0 = (seg.p0 - center) * scale;
                seg.p1 = (seg.p1 - center) * scale;
                seg.p2 = (seg.p2 - center) * scale;
                seg.p3 = (seg.p3 - center) * scale;
            }
            norm.flatten(F::c(1e-4))
        })
        .collect();
    let lengths: Vec<F> = polylines
        .iter()
        .map(|p| p.windows(2).map(|w| w[0].dist(w[1])).sum())
        .collect();
    let total: F = lengths.iter().copied().sum();
    if total <= F::zero() {
        return Err(Error::argument("glyph outline has zero length"));
    }
    let mut out = Vec::with_capacity(DISTANCE_SAMPLES);
    let mut assigned = 0usize;
    for (li, poly) in polylines.iter().enumerate() {
        let share = if li + 1 == polylines.len() {
            DISTANCE_SAMPLES - assigned
        } else {
            ((lengths[li] / total).as_f64() * DISTANCE_SAMPLES as f64).round() as usize
        };
        let share = share.max(1).min(DISTANCE_SAMPLES - assigned);
        assigned += share;
        let spacing = lengths[li] / F::from_usize_c(share);
        let samples = resample_polyline(poly, spacing);
        out.extend(samples.into_iter().take(share));
        if assigned >= DISTANCE_SAMPLES {
            break;
        }
    }
    Ok(out)
}

/// Mean of the two directed Chamfer distances between the outline sample
/// sets. Symmetric; 0 for identical glyphs and for translated or uniformly
/// scaled copies.
pub fn glyph_distance<F: Real>(a: &VectorGlyph<F>, b: &VectorGlyph<F>) -> Result<F> {
    let sa = outline_samples(a)?;
    let sb = outline_samples(b)?;
    Ok((chamfer_directed(&sa, &sb) + chamfer_directed(&sb, &sa)) / F::c(2.0))
}

fn chamfer_directed<F: Real>(from: &[Point2<F>], to: &[Point2<F>]) -> F {
    let sum: F = from
        .iter()
        .map(|&p| {
            to.iter()
                .map(|&q| p.dist(q))
                .fold(F::infinity(), |a, b| a.min(b))
        })
        .sum();
    sum / F::from_usize_c(from.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delaunay::delaunay;
    use crate::ogv::GlyphLoop;
    use crate::spline::CubicSegment;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    /// Square contour loop (4 line segments) plus one center skeleton point.
    fn square_glyph() -> VectorGlyph<f64> {
        let corners = [p(0.0, 0.0), p(10.0, 0.0), p(10.0, 10.0), p(0.0, 10.0)];
        let segments = (0..4)
            .map(|i| CubicSegment::line(corners[i], corners[(i + 1) % 4]))
            .collect();
        VectorGlyph {
            loops: vec![GlyphLoop { segments }],
            skeletons: vec![vec![p(5.0, 5.0)]],
            canvas: (16, 16),
        }
    }

    fn square_anchors() -> (VectorGlyph<f64>, SkeletonAnchors<f64>, Vec<Point2<f64>>) {
        let glyph = square_glyph();
        let points = glyph.control_points();
        let tri = delaunay(&points).unwrap();
        let anchors = build_anchors(&tri, &glyph).unwrap();
        (glyph, anchors, points)
    }

    #[test]
    fn square_center_anchors_point_to_contour() {
        let (glyph, anchors, points) = square_anchors();
        let nc = glyph.contour_point_count();
        assert!(!anchors.anchors.is_empty());
        for a in &anchors.anchors {
            assert!(a.skeleton >= nc);
            assert!(a.contour < nc);
            assert_eq!(a.reference, points[a.contour] - points[a.skeleton]);
        }
        // anchor count matches a brute-force incidence scan over triangles
        let tri = delaunay(&points).unwrap();
        let mut pairs = std::collections::BTreeSet::new();
        for t in &tri.triangles {
            for &j in t {
                if j < nc {
                    continue;
                }
                for &i in t {
                    if i < nc && points[i].dist(points[j]) > 1e-9 {
                        pairs.insert((j, i));
                    }
                }
            }
        }
        assert_eq!(anchors.anchors.len(), pairs.len());
    }

    #[test]
    fn no_skeleton_means_no_anchors() {
        let mut glyph = square_glyph();
        glyph.skeletons.clear();
        let points = glyph.control_points();
        let tri = delaunay(&points).unwrap();
        let anchors = build_anchors(&tri, &glyph).unwrap();
        assert!(anchors.anchors.is_empty());
    }

    #[test]
    fn skst_zero_at_identity_and_translation() {
        let (_, anchors, points) = square_anchors();
        assert_eq!(skst_loss(&anchors, &points).unwrap(), 0.0);
        let shifted: Vec<Point2<f64>> = points.iter().map(|&q| q + p(10.0, 10.0)).collect();
        assert_eq!(skst_loss(&anchors, &shifted).unwrap(), 0.0);
        let scaled: Vec<Point2<f64>> = points.iter().map(|&q| q * 3.5).collect();
        assert_eq!(skst_loss(&anchors, &scaled).unwrap(), 0.0);
    }

    #[test]
    fn skst_counts_flipped_anchors() {
        // synthetic anchor set: 4 unit reference vectors
        let anchors = SkeletonAnchors {
            anchors: (0..4)
                .map(|i| Anchor {
                    skeleton: 4,
                    contour: i,
                    triangle: 0,
                    reference: [p(1.0, 0.0), p(0.0, 1.0), p(-1.0, 0.0), p(0.0, -1.0)][i],
                })
                .collect(),
            dropped: 0,
        };
        // deformed: contours 0..3 at reference positions, then flip one
        let mut deformed = vec![p(1.0, 0.0), p(0.0, 1.0), p(-1.0, 0.0), p(0.0, -1.0), p(0.0, 0.0)];
        assert_eq!(skst_loss(&anchors, &deformed).unwrap(), 0.0);
        deformed[0] = p(-1.0, 0.0); // alpha flipped 180 degrees
        assert!((skst_loss(&anchors, &deformed).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn skst_range_bounded() {
        let (_, anchors, points) = square_anchors();
        let mut s = 5u64;
        for _ in 0..200 {
            let deformed: Vec<Point2<f64>> = points
                .iter()
                .map(|&q| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                    let dx = ((s >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 40.0;
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                    let dy = ((s >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 40.0;
                    q + p(dx, dy)
                })
                .collect();
            let l = skst_loss(&anchors, &deformed).unwrap();
            assert!((0.0..=1.0).contains(&l));
        }
    }

    #[test]
    fn gradient_zero_at_identity() {
        let (_, anchors, points) = square_anchors();
        let g = skst_gradient(&anchors, &points).unwrap();
        assert!(g.iter().all(|v| v.x == 0.0 && v.y == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (_, anchors, points) = square_anchors();
        let mut s = 11u64;
        let mut rnd = |scale: f64| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * scale
        };
        for _ in 0..20 {
            // deformations large enough to activate some ReLU terms
            let deformed: Vec<Point2<f64>> = points
                .iter()
                .map(|&q| q + p(rnd(18.0), rnd(18.0)))
                .collect();
            let g = skst_gradient(&anchors, &deformed).unwrap();
            let h = 1e-4;
            for i in 0..deformed.len() {
                for dim in 0..2 {
                    let mut plus = deformed.clone();
                    let mut minus = deformed.clone();
                    if dim == 0 {
                        plus[i].x += h;
                        minus[i].x -= h;
                    } else {
                        plus[i].y += h;
                        minus[i].y -= h;
                    }
                    let fd = (skst_loss(&anchors, &plus).unwrap()
                        - skst_loss(&anchors, &minus).unwrap())
                        / (2.0 * h);
                    let analytic = if dim == 0 { g[i].x } else { g[i].y };
                    let denom = fd.abs().max(analytic.abs()).max(1e-8);
                    assert!(
                        (fd - analytic).abs() / denom < 1e-4,
                        "point {i} dim {dim}: fd {fd} vs analytic {analytic}"
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_local_to_active_anchors() {
        let (glyph, anchors, points) = square_anchors();
        let nc = glyph.contour_point_count();
        // flip only the skeleton point far past every contour point
        let mut deformed = points.clone();
        deformed[nc] = p(500.0, 500.0);
        let g = skst_gradient(&anchors, &deformed).unwrap();
        let active: std::collections::BTreeSet<usize> = anchors
            .anchors
            .iter()
            .flat_map(|a| [a.contour, a.skeleton])
            .collect();
        for (i, v) in g.iter().enumerate() {
            if !active.contains(&i) {
                assert_eq!((v.x, v.y), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn tone_loss_basics() {
        let zeros: GrayImage<f64> = GrayImage::new(16, 16).unwrap();
        let ones = zeros.map(|_| 1.0);
        assert_eq!(tone_loss(&zeros, &zeros, 2.0).unwrap(), 0.0);
        assert!((tone_loss(&zeros, &ones, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let small: GrayImage<f64> = GrayImage::new(8, 8).unwrap();
        assert!(tone_loss(&zeros, &small, 2.0).is_err());
    }

    #[test]
    fn tone_loss_matches_blur_mse_oracle() {
        let mut a: GrayImage<f64> = GrayImage::new(64, 64).unwrap();
        let mut b: GrayImage<f64> = GrayImage::new(64, 64).unwrap();
        for y in 20..40 {
            for x in 20..40 {
                a.set(x, y, 1.0);
                b.set(x + 4, y, 1.0);
            }
        }
        let loss = tone_loss(&a, &b, 8.0).unwrap();
        let ba = gaussian_blur(&a, 8.0).unwrap();
        let bb = gaussian_blur(&b, 8.0).unwrap();
        let mse: f64 = ba
            .values
            .iter()
            .zip(&bb.values)
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum::<f64>()
            / (64.0 * 64.0);
        assert!((loss - mse).abs() < 1e-10);
        assert!(loss > 0.0);
    }

    #[test]
    fn distance_identity_and_similarity() {
        let g = square_glyph();
        assert_eq!(glyph_distance(&g, &g).unwrap(), 0.0);
        // translated + uniformly scaled copy
        let mut h = g.clone();
        for l in &mut h.loops {
            for seg in &mut l.segments {
                for q in [&mut seg.p0, &mut seg.p1, &mut seg.p2, &mut seg.p3] {
                    *q = *q * 2.0 + p(30.0, -7.0);
                }
            }
        }
        assert!(glyph_distance(&g, &h).unwrap() < 1e-12);
    }

    #[test]
    fn distance_symmetric_and_matches_chamfer_oracle() {
        let g = square_glyph();
        let mut tri = g.clone();
        tri.loops = vec![GlyphLoop {
            segments: vec![
                CubicSegment::line(p(0.0, 0.0), p(8.0, 0.0)),
                CubicSegment::line(p(8.0, 0.0), p(0.0, 6.0)),
                CubicSegment::line(p(0.0, 6.0), p(0.0, 0.0)),
            ],
        }];
        let d_ab = glyph_distance(&g, &tri).unwrap();
        let d_ba = glyph_distance(&tri, &g).unwrap();
        assert!((d_ab - d_ba).abs() < 1e-12);
        assert!(d_ab > 0.0);
        // O(n^2) oracle over the same sample sets
        let sa = outline_samples(&g).unwrap();
        let sb = outline_samples(&tri).unwrap();
        let mut fwd = 0.0;
        for &q in &sa {
            fwd += sb.iter().map(|&r| q.dist(r)).fold(f64::INFINITY, f64::min);
        }
        let mut bwd = 0.0;
        for &q in &sb {
            bwd += sa.iter().map(|&r| q.dist(r)).fold(f64::INFINITY, f64::min);
        }
        let oracle = (fwd / sa.len() as f64 + bwd / sb.len() as f64) / 2.0;
        assert!((d_ab - oracle).abs() < 1e-9);
    }

    #[test]
    fn distance_empty_is_error() {
        let g = square_glyph();
        let empty = VectorGlyph {
            loops: vec![],
            skeletons: vec![],
            canvas: (16, 16),
        };
        assert!(glyph_distance(&g, &empty).is_err());
    }
}
