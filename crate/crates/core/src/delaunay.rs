//! Bowyer-Watson Delaunay triangulation with robust orientation and
//! in-circle predicates (exact rational fallback near degeneracy).

use num_rational::BigRational;
use num_traits::Signed;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::{Point2, Real};

#[derive(Debug, Clone, Serialize)]
pub struct Triangulation<F: Real> {
    #[serde(serialize_with = "serialize_points")]
    pub vertices: Vec<Point2<F>>,
    pub triangles: Vec<[usize; 3]>,
}

fn serialize_points<F: Real, S: serde::Serializer>(
    points: &[Point2<F>],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(points.len()))?;
    for p in points {
        seq.serialize_element(&[p.x.as_f64(), p.y.as_f64()])?;
    }
    seq.end()
}

impl<F: Real> Triangulation<F> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("triangulation serializes")
    }
}

fn rat(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite coordinate")
}

/// Sign of the orientation determinant: positive when c lies left of a->b.
pub fn orient2d(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> i32 {
    let det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    let mag = (b.x - a.x).abs() * (c.y - a.y).abs() + (b.y - a.y).abs() * (c.x - a.x).abs();
    if det.abs() > 1e-10 * mag.max(1.0) {
        return det.signum() as i32;
    }
    // exact fallback
    let d = (rat(b.x) - rat(a.x)) * (rat(c.y) - rat(a.y))
        - (rat(b.y) - rat(a.y)) * (rat(c.x) - rat(a.x));
    sign_of(&d)
}

fn sign_of(r: &BigRational) -> i32 {
    if r.is_positive() {
        1
    } else if r.is_negative() {
        -1
    } else {
        0
    }
}

/// Sign of the in-circle determinant for CCW triangle (a, b, c): positive
/// when d lies strictly inside the circumcircle.
pub fn incircle(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, d: Point2<f64>) -> i32 {
    let adx = a.x - d.x;
    let ady = a.y - d.y;
    let bdx = b.x - d.x;
    let bdy = b.y - d.y;
    let cdx = c.x - d.x;
    let cdy = c.y - d.y;
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    let det = adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx)
        + ad * (bdx * cdy - bdy * cdx);
    let mag = adx.abs() * (bdy.abs() * cd + bd * cdy.abs())
        + ady.abs() * (bdx.abs() * cd + bd * cdx.abs())
        + ad * (bdx.abs() * cdy.abs() + bdy.abs() * cdx.abs());
    if det.abs() > 1e-10 * mag.max(1.0) {
        return det.signum() as i32;
    }
    let (adx, ady) = (rat(a.x) - rat(d.x), rat(a.y) - rat(d.y));
    let (bdx, bdy) = (rat(b.x) - rat(d.x), rat(b.y) - rat(d.y));
    let (cdx, cdy) = (rat(c.x) - rat(d.x), rat(c.y) - rat(d.y));
    let ad = &adx * &adx + &ady * &ady;
    let bd = &bdx * &bdx + &bdy * &bdy;
    let cd = &cdx * &cdx + &cdy * &cdy;
    let det = &adx * (&bdy * &cd - &bd * &cdy) - &ady * (&bdx * &cd - &bd * &cdx)
        + &ad * (&bdx * &cdy - &bdy * &cdx);
    sign_of(&det)
}

/// Delaunay triangulation over the given positions. Duplicate positions are
/// collapsed onto their first occurrence; triangle indices always refer to
/// the input list. Deterministic under input order; exactly cocircular
/// configurations are resolved by insertion order.
pub fn delaunay<F: Real>(points: &[Point2<F>]) -> Result<Triangulation<F>> {
    let pts: Vec<Point2<f64>> = points.iter().map(|p| p.to_f64()).collect();
    // collapse duplicates onto first occurrence
    let mut unique: Vec<usize> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        if !unique.iter().any(|&j| pts[j] == *p) {
            unique.push(i);
        }
    }
    if unique.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need >= 3 distinct points, got {}",
            unique.len()
        )));
    }
    let collinear = unique
        .iter()
        .all(|&i| orient2d(pts[unique[0]], pts[unique[1]], pts[i]) == 0);
    if collinear {
        return Err(Error::Degenerate("all points are collinear".into()));
    }

    // super-triangle well outside the data
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &i in &unique {
        min_x = min_x.min(pts[i].x);
        min_y = min_y.min(pts[i].y);
        max_x = max_x.max(pts[i].x);
        max_y = max_y.max(pts[i].y);
    }
    let span = (max_x - min_x).max(max_y - min_y).max(1.0);
    let cx = (min_x + max_x) / 2.0;
    let cy = (min_y + max_y) / 2.0;
    let m = 20.0 * span;
    let sa = Point2::new(cx - m, cy - m * 0.7);
    let sb = Point2::new(cx + m, cy - m * 0.7);
    let sc = Point2::new(cx, cy + m);

    let n = pts.len();
    let mut all: Vec<Point2<f64>> = pts.clone();
    all.push(sa);
    all.push(sb);
    all.push(sc);
    let (ia, ib, ic) = (n, n + 1, n + 2);

    let mut triangles: Vec<[usize; 3]> = vec![[ia, ib, ic]];
    for &pi in &unique {
        let p = all[pi];
        let mut bad: Vec<usize> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            let (a, b, c) = (all[tri[0]], all[tri[1]], all[tri[2]]);
            if incircle(a, b, c, p) > 0 {
                bad.push(t);
            }
        }
        // boundary = edges used by exactly one bad triangle
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &t in &bad {
            let tri = triangles[t];
            for e in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                let rev = (e.1, e.0);
                if let Some(pos) = edges.iter().position(|&x| x == rev) {
                    edges.remove(pos);
                } else {
                    edges.push(e);
                }
            }
        }
        for &t in bad.iter().rev() {
            triangles.remove(t);
        }
        for (u, v) in edges {
            triangles.push([u, v, pi]);
        }
    }
    triangles.retain(|tri| tri.iter().all(|&v| v < n));
    // normalize orientation to CCW and index order for determinism
    for tri in &mut triangles {
        if orient2d(all[tri[0]], all[tri[1]], all[tri[2]]) < 0 {
            tri.swap(1, 2);
        }
        let min_pos = (0..3).min_by_key(|&i| tri[i]).unwrap();
        tri.rotate_left(min_pos);
    }
    triangles.sort();

    Ok(Triangulation {
        vertices: points.to_vec(),
        triangles,
    })
}

/// Brute-force empty-circumcircle check used by tests and the acceptance
/// suite: every triangle's circumcircle must contain no other vertex
/// strictly inside (within predicate tolerance).
pub fn verify_delaunay<F: Real>(tri: &Triangulation<F>) -> bool {
    let pts: Vec<Point2<f64>> = tri.vertices.iter().map(|p| p.to_f64()).collect();
    for t in &tri.triangles {
        let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
        for (i, &p) in pts.iter().enumerate() {
            if t.contains(&i) || pts[t[0]] == p || pts[t[1]] == p || pts[t[2]] == p {
                continue;
            }
            if incircle(a, b, c, p) > 0 {
                return false;
            }
        }
    }
    true
}
