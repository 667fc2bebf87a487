//! Zhang-Suen thinning and skeleton path tracing.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::{Point2, Real};
use crate::raster::Bitmap;

/// Ordered lattice path along a single-pixel-wide skeleton. Consecutive
/// points are 8-neighbors; a closed path repeats its first point last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkeletonPath {
    pub points: Vec<(i32, i32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkeletonSet {
    pub paths: Vec<SkeletonPath>,
    /// Lattice points with three or more skeleton neighbors.
    pub junctions: Vec<(i32, i32)>,
}

impl SkeletonSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("skeleton set serializes")
    }
}

/// Neighbors in Zhang-Suen order P2..P9 (N, NE, E, SE, S, SW, W, NW).
const ZS_OFFSETS: [(i64, i64); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

fn neighbors(img: &Bitmap, x: i64, y: i64) -> [bool; 8] {
    let mut n = [false; 8];
    for (i, (dx, dy)) in ZS_OFFSETS.iter().enumerate() {
        n[i] = img.get(x + dx, y + dy);
    }
    n
}

/// Number of 0->1 transitions around the neighborhood.
fn transitions(n: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count()
}

/// 8-connected components of the foreground.
fn components(img: &Bitmap) -> Vec<Vec<(usize, usize)>> {
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut out = Vec::new();
    for (x, y) in img.foreground() {
        if seen.contains(&(x, y)) {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![(x, y)];
        while let Some(q) = stack.pop() {
            if !seen.insert(q) {
                continue;
            }
            comp.push(q);
            for (dx, dy) in ZS_OFFSETS {
                let (nx, ny) = (q.0 as i64 + dx, q.1 as i64 + dy);
                if img.get(nx, ny) && !seen.contains(&(nx as usize, ny as usize)) {
                    stack.push((nx as usize, ny as usize));
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Classic two-subiteration Zhang-Suen thinning. Border pixels are treated
/// as background. Iterates to a fixed point. Small blocks that the parallel
/// deletion rule would erase entirely are restored as single pixels so each
/// input component keeps a skeleton.
pub fn zhang_suen_thin(img: &Bitmap) -> Bitmap {
    let input_components = components(img);
    let mut current = img.clone();
    loop {
        let mut changed = false;
        for sub in 0..2 {
            let mut to_delete = Vec::new();
            for (x, y) in current.foreground() {
                let (xi, yi) = (x as i64, y as i64);
                let n = neighbors(&current, xi, yi);
                let b = n.iter().filter(|v| **v).count();
                if !(2..=6).contains(&b) || transitions(&n) != 1 {
                    continue;
                }
                // n[0]=P2, n[2]=P4, n[4]=P6, n[6]=P8
                let ok = if sub == 0 {
                    (!n[0] || !n[2] || !n[4]) && (!n[2] || !n[4] || !n[6])
                } else {
                    (!n[0] || !n[2] || !n[6]) && (!n[0] || !n[4] || !n[6])
                };
                if ok {
                    to_delete.push((x, y));
                }
            }
            if !to_delete.is_empty() {
                changed = true;
                for (x, y) in to_delete {
                    current.set(x, y, false);
                }
            }
        }
        if !changed {
            break;
        }
    }
    for comp in input_components {
        if !comp.iter().any(|&(x, y)| current.get(x as i64, y as i64)) {
            let &(x, y) = comp.iter().min_by_key(|&&(x, y)| (y, x)).unwrap();
            current.set(x, y, true);
        }
    }
    current
}

/// Skeleton neighbors with redundant diagonal steps removed: a diagonal
/// edge is dropped when either shared orthogonal pixel already carries the
/// connection. This keeps stroke arms separate where they meet a junction.
fn reduced_neighbors(img: &Bitmap, x: i64, y: i64) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for (dx, dy) in ZS_OFFSETS {
        if !img.get(x + dx, y + dy) {
            continue;
        }
        if dx != 0 && dy != 0 && (img.get(x + dx, y) || img.get(x, y + dy)) {
            continue;
        }
        out.push(((x + dx) as i32, (y + dy) as i32));
    }
    out
}

/// Decompose a thinned skeleton into edge-disjoint paths plus junctions.
///
/// Pixels with >= 3 skeleton neighbors (under reduced adjacency) are
/// junctions. Paths run between endpoints/junctions; junction pixels are
/// appended to every incident path. Cycles are emitted closed (first point
/// repeated last).
pub fn trace_paths(skeleton: &Bitmap) -> SkeletonSet {
    let mut junctions: BTreeSet<(i32, i32)> = BTreeSet::new();
    let mut path_pixels: BTreeSet<(i32, i32)> = BTreeSet::new();
    for (x, y) in skeleton.foreground() {
        let p = (x as i32, y as i32);
        if reduced_neighbors(skeleton, x as i64, y as i64).len() >= 3 {
            junctions.insert(p);
        } else {
            path_pixels.insert(p);
        }
    }

    let path_neighbors = |p: (i32, i32)| -> Vec<(i32, i32)> {
        reduced_neighbors(skeleton, p.0 as i64, p.1 as i64)
            .into_iter()
            .filter(|q| path_pixels.contains(q))
            .collect()
    };
    let junction_neighbors = |p: (i32, i32)| -> Vec<(i32, i32)> {
        reduced_neighbors(skeleton, p.0 as i64, p.1 as i64)
            .into_iter()
            .filter(|q| junctions.contains(q))
            .collect()
    };

    let mut visited: BTreeSet<(i32, i32)> = BTreeSet::new();
    let mut paths: Vec<SkeletonPath> = Vec::new();

    let walk = |start: (i32, i32), visited: &mut BTreeSet<(i32, i32)>| -> Vec<(i32, i32)> {
        let mut chain = vec![start];
        visited.insert(start);
        let mut current = start;
        loop {
            let next = path_neighbors(current)
                .into_iter()
                .filter(|q| !visited.contains(q))
                .min();
            match next {
                Some(q) => {
                    visited.insert(q);
                    chain.push(q);
                    current = q;
                }
                None => break,
            }
        }
        chain
    };

    // open chains start at pixels with at most one path neighbor
    let endpoints: Vec<(i32, i32)> = path_pixels
        .iter()
        .copied()
        .filter(|&p| path_neighbors(p).len() <= 1)
        .collect();
    for start in endpoints {
        if visited.contains(&start) {
            continue;
        }
        let mut chain = walk(start, &mut visited);
        // rejoin incident junctions at both ends
        if let Some(&j) = junction_neighbors(chain[0]).first() {
            chain.insert(0, j);
        }
        if chain.len() >= 2 {
            let last = *chain.last().unwrap();
            if let Some(j) = junction_neighbors(last)
                .into_iter()
                .find(|j| Some(j) != chain.first())
            {
                chain.push(j);
            }
        }
        paths.push(SkeletonPath { points: chain });
    }

    // remaining path pixels form cycles
    let leftovers: Vec<(i32, i32)> = path_pixels
        .iter()
        .copied()
        .filter(|p| !visited.contains(p))
        .collect();
    for start in leftovers {
        if visited.contains(&start) {
            continue;
        }
        let mut chain = walk(start, &mut visited);
        chain.push(start);
        paths.push(SkeletonPath { points: chain });
    }

    // junction-only clusters still need coverage: emit single-point paths
    // for junctions with no incident path pixels
    for &j in &junctions {
        let covered = paths.iter().any(|p| p.points.contains(&j));
        if !covered {
            paths.push(SkeletonPath { points: vec![j] });
        }
    }

    SkeletonSet {
        paths,
        junctions: junctions.into_iter().collect(),
    }
}

/// Resample a lattice path to arc-length-uniform positions including both
/// endpoints.
pub fn resample_path<F: Real>(path: &SkeletonPath, spacing: F) -> Result<Vec<Point2<F>>> {
    if spacing <= F::zero() {
        return Err(Error::argument("resample spacing must be > 0"));
    }
    if path.points.len() < 2 {
        return Err(Error::argument("cannot resample a path with < 2 points"));
    }
    let pts: Vec<Point2<F>> = path
        .points
        .iter()
        .map(|&(x, y)| Point2::new(F::c(x as f64), F::c(y as f64)))
        .collect();
    Ok(resample_polyline(&pts, spacing))
}

/// Arc-length-uniform resampling of an arbitrary polyline.
pub fn resample_polyline<F: Real>(pts: &[Point2<F>], spacing: F) -> Vec<Point2<F>> {
    let mut cum = vec![F::zero()];
    for w in pts.windows(2) {
        let d = w[0].dist(w[1]);
        let last = *cum.last().unwrap();
        cum.push(last + d);
    }
    let total = *cum.last().unwrap();
    if total == F::zero() {
        return vec![pts[0], pts[pts.len() - 1]];
    }
    let n_seg = (total / spacing).as_f64().round().max(1.0) as usize;
    let mut out = Vec::with_capacity(n_seg + 1);
    let mut seg = 0usize;
    for i in 0..=n_seg {
        let target = total * F::from_usize_c(i) / F::from_usize_c(n_seg);
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let t = if span > F::zero() {
            (target - cum[seg]) / span
        } else {
            F::zero()
        };
        out.push(pts[seg].lerp(pts[seg + 1], t.max(F::zero()).min(F::one())));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_from_rows(rows: &[&str]) -> Bitmap {
        let h = rows.len();
        let w = rows[0].len();
        let mut b = Bitmap::new(w, h).unwrap();
        for (y, row) in rows.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                if c == '#' {
                    b.set(x, y, true);
                }
            }
        }
        b
    }

    fn has_2x2_block(b: &Bitmap) -> bool {
        for y in 0..b.height.saturating_sub(1) {
            for x in 0..b.width.saturating_sub(1) {
                if b.get(x as i64, y as i64)
                    && b.get(x as i64 + 1, y as i64)
                    && b.get(x as i64, y as i64 + 1)
                    && b.get(x as i64 + 1, y as i64 + 1)
                {
                    return true;
                }
            }
        }
        false
    }

    pub(crate) fn component_count(b: &Bitmap) -> usize {
        let mut seen = BTreeSet::new();
        let mut count = 0;
        for (x, y) in b.foreground() {
            let p = (x as i32, y as i32);
            if seen.contains(&p) {
                continue;
            }
            count += 1;
            let mut stack = vec![p];
            while let Some(q) = stack.pop() {
                if !seen.insert(q) {
                    continue;
                }
                for (dx, dy) in ZS_OFFSETS {
                    let r = (q.0 + dx as i32, q.1 + dy as i32);
                    if b.get(r.0 as i64, r.1 as i64) && !seen.contains(&r) {
                        stack.push(r);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn single_pixel_unchanged() {
        let mut b = Bitmap::new(5, 5).unwrap();
        b.set(2, 2, true);
        assert_eq!(zhang_suen_thin(&b), b);
    }

    #[test]
    fn horizontal_bar_thins_to_line() {
        let mut b = Bitmap::new(24, 7).unwrap();
        for y in 2..5 {
            for x in 2..22 {
                b.set(x, y, true);
            }
        }
        let t = zhang_suen_thin(&b);
        assert!(!has_2x2_block(&t));
        assert!(t.foreground_count() > 10);
        // every foreground pixel is on a single row
        let rows: BTreeSet<usize> = t.foreground().map(|(_, y)| y).collect();
        assert_eq!(rows.len(), 1);
        // subset of the input
        for (x, y) in t.foreground() {
            assert!(b.get(x as i64, y as i64));
        }
    }

    #[test]
    fn thinning_idempotent_on_random_blobs() {
        let mut s = 99u64;
        for _ in 0..20 {
            let mut b = Bitmap::new(32, 32).unwrap();
            for _ in 0..6 {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                let cx = 4 + (s >> 33) as usize % 24;
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                let cy = 4 + (s >> 33) as usize % 24;
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                let r = 2 + (s >> 33) as usize % 4;
                for y in cy.saturating_sub(r)..(cy + r).min(31) {
                    for x in cx.saturating_sub(r)..(cx + r).min(31) {
                        b.set(x, y, true);
                    }
                }
            }
            let once = zhang_suen_thin(&b);
            let twice = zhang_suen_thin(&once);
            assert_eq!(once, twice);
            assert!(!has_2x2_block(&once));
            assert_eq!(component_count(&b), component_count(&once));
        }
    }

    #[test]
    fn trace_straight_line() {
        let mut b = Bitmap::new(12, 3).unwrap();
        for x in 1..11 {
            b.set(x, 1, true);
        }
        let set = trace_paths(&b);
        assert_eq!(set.paths.len(), 1);
        assert_eq!(set.paths[0].points.len(), 10);
        assert!(set.junctions.is_empty());
        // ordered: consecutive points are 8-neighbors
        for w in set.paths[0].points.windows(2) {
            assert!((w[0].0 - w[1].0).abs() <= 1 && (w[0].1 - w[1].1).abs() <= 1);
        }
    }

    #[test]
    fn trace_plus_sign() {
        let b = blob_from_rows(&[
            ".....#.....",
            ".....#.....",
            ".....#.....",
            ".....#.....",
            ".....#.....",
            "###########",
            ".....#.....",
            ".....#.....",
            ".....#.....",
            ".....#.....",
            ".....#.....",
        ]);
        let set = trace_paths(&b);
        assert_eq!(set.junctions.len(), 1);
        assert_eq!(set.junctions[0], (5, 5));
        assert_eq!(set.paths.len(), 4);
        // every path rejoins the junction
        for p in &set.paths {
            assert!(p.points.contains(&(5, 5)));
        }
    }

    #[test]
    fn trace_empty() {
        let b = Bitmap::new(4, 4).unwrap();
        let set = trace_paths(&b);
        assert!(set.paths.is_empty());
        assert!(set.junctions.is_empty());
    }

    #[test]
    fn trace_cycle_closes() {
        let b = blob_from_rows(&[
            ".###.",
            ".#.#.",
            ".###.",
        ]);
        let set = trace_paths(&b);
        assert_eq!(set.paths.len(), 1);
        let pts = &set.paths[0].points;
        assert_eq!(pts.first(), pts.last());
        assert_eq!(pts.len(), 9); // 8 pixels + repeated start
    }

    #[test]
    fn trace_completeness() {
        let b = blob_from_rows(&[
            "#......#",
            ".#....#.",
            "..#..#..",
            "...##...",
            "...##...",
            "..#..#..",
            ".#....#.",
            "#......#",
        ]);
        let set = trace_paths(&b);
        let mut covered: BTreeSet<(i32, i32)> = BTreeSet::new();
        for p in &set.paths {
            covered.extend(p.points.iter().copied());
        }
        covered.extend(set.junctions.iter().copied());
        assert_eq!(covered.len(), b.foreground_count());
    }

    #[test]
    fn resample_straight_line() {
        let path = SkeletonPath {
            points: (0..10).map(|x| (x, 0)).collect(),
        };
        let out: Vec<Point2<f64>> = resample_path(&path, 1.0).unwrap();
        assert_eq!(out.len(), 10);
        let two: Vec<Point2<f64>> = resample_path(&path, 9.0).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0], Point2::new(0.0, 0.0));
        assert_eq!(two[1], Point2::new(9.0, 0.0));
    }

    #[test]
    fn resample_l_shape_matches_arc_length_oracle() {
        // L-shape: 5 right then 5 down, total length 10
        let mut points = vec![];
        for x in 0..=5 {
            points.push((x, 0));
        }
        for y in 1..=5 {
            points.push((5, y));
        }
        let path = SkeletonPath { points };
        let out: Vec<Point2<f64>> = resample_path(&path, 2.0).unwrap();
        assert_eq!(out.len(), 6);
        // oracle: position at arc length s walks the corner at s=5
        for (i, p) in out.iter().enumerate() {
            let s = 10.0 * i as f64 / 5.0;
            let expected = if s <= 5.0 {
                Point2::new(s, 0.0)
            } else {
                Point2::new(5.0, s - 5.0)
            };
            assert!(p.dist(expected) < 1e-9, "sample {i}: {p:?} vs {expected:?}");
        }
    }

    #[test]
    fn resample_rejects_degenerate() {
        let single = SkeletonPath { points: vec![(0, 0)] };
        assert!(resample_path::<f64>(&single, 1.0).is_err());
        let path = SkeletonPath { points: vec![(0, 0), (1, 0)] };
        assert!(resample_path::<f64>(&path, 0.0).is_err());
    }
}
