//! Marching-squares level curves of node data, plus small polyline metrics.

use crate::geom::{periodic_delta, Vec2};
use crate::grid::Grid2;
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<Vec2>,
    /// First and last points coincide topologically (the last is not repeated).
    pub closed: bool,
}

impl Polyline {
    pub fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.points.len();
        let extra = if self.closed && n > 2 { 1 } else { 0 };
        (0..(n.saturating_sub(1) + extra)).map(move |k| (self.points[k], self.points[(k + 1) % n]))
    }

    /// Shoelace area; positive for counter-clockwise closed curves.
    pub fn signed_area(&self) -> f64 {
        if !self.closed {
            return 0.0;
        }
        0.5 * self.segments().map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>()
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }
}

/// Contour `{G = level}` over the cells of the grid interior (no wrap-around).
/// Nodes sit at `(i h1, j h2)`.
pub fn extract_front(grid: &Grid2, level: f64) -> Vec<Polyline> {
    march(grid, level, false)
}

/// Same as [`extract_front`] but also over the cells that straddle the
/// periodic seams; polylines are unwrapped so consecutive points are close.
pub fn extract_front_periodic(grid: &Grid2, level: f64) -> Vec<Polyline> {
    march(grid, level, true)
}

type EdgeId = usize;

fn march(grid: &Grid2, level: f64, periodic: bool) -> Vec<Polyline> {
    let (n1, n2) = (grid.n1(), grid.n2());
    let (h1, h2) = (grid.h1(), grid.h2());
    let (c1, c2) = if periodic { (n1, n2) } else { (n1 - 1, n2 - 1) };

    let above = |i: usize, j: usize| grid.get(i % n1, j % n2) >= level;
    // horizontal edge (i,j)-(i+1,j) is 2*idx, vertical (i,j)-(i,j+1) is 2*idx+1
    let h_edge = |i: usize, j: usize| 2 * ((j % n2) * n1 + (i % n1));
    let v_edge = |i: usize, j: usize| 2 * ((j % n2) * n1 + (i % n1)) + 1;
    let crossing = |id: EdgeId| -> Vec2 {
        let k = id / 2;
        let (i, j) = (k % n1, k / n1);
        let (i2, j2) = if id % 2 == 0 {
            ((i + 1) % n1, j)
        } else {
            (i, (j + 1) % n2)
        };
        let (a, b) = (grid.get(i, j), grid.get(i2, j2));
        let s = if a == b {
            0.5
        } else {
            ((level - a) / (b - a)).clamp(0.0, 1.0)
        };
        let base = Vec2::new(i as f64 * h1, j as f64 * h2);
        if id % 2 == 0 {
            base + Vec2::new(s * h1, 0.0)
        } else {
            base + Vec2::new(0.0, s * h2)
        }
    };

    let mut segments: Vec<(EdgeId, EdgeId)> = Vec::new();
    for j in 0..c2 {
        for i in 0..c1 {
            let (bl, br, tr, tl) = (above(i, j), above(i + 1, j), above(i + 1, j + 1), above(i, j + 1));
            let bottom = h_edge(i, j);
            let top = h_edge(i, j + 1);
            let left = v_edge(i, j);
            let right = v_edge(i + 1, j);
            let mut cut = Vec::with_capacity(4);
            if bl != br {
                cut.push(bottom);
            }
            if br != tr {
                cut.push(right);
            }
            if tr != tl {
                cut.push(top);
            }
            if tl != bl {
                cut.push(left);
            }
            match cut.len() {
                2 => segments.push((cut[0], cut[1])),
                4 => {
                    let centre = 0.25
                        * (grid.get(i % n1, j % n2)
                            + grid.get((i + 1) % n1, j % n2)
                            + grid.get((i + 1) % n1, (j + 1) % n2)
                            + grid.get(i % n1, (j + 1) % n2));
                    // pair edges around the corners whose sign differs from the centre
                    if (centre >= level) == bl {
                        segments.push((bottom, right));
                        segments.push((top, left));
                    } else {
                        segments.push((bottom, left));
                        segments.push((right, top));
                    }
                }
                _ => {}
            }
        }
    }

    let mut by_edge: HashMap<EdgeId, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(k);
        by_edge.entry(b).or_default().push(k);
    }

    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    // open chains start at edges touched by a single segment
    let mut starts: Vec<usize> = (0..segments.len()).collect();
    starts.sort_by_key(|&k| {
        let (a, b) = segments[k];
        let open = by_edge[&a].len() == 1 || by_edge[&b].len() == 1;
        (!open, k)
    });
    for k0 in starts {
        if used[k0] {
            continue;
        }
        let (a, b) = segments[k0];
        let (first, mut cursor) = if by_edge[&b].len() == 1 { (b, a) } else { (a, b) };
        used[k0] = true;
        let mut edges = vec![first, cursor];
        let mut closed = false;
        loop {
            let next = by_edge[&cursor].iter().copied().find(|&s| !used[s]);
            let Some(s) = next else { break };
            used[s] = true;
            let (x, y) = segments[s];
            cursor = if x == cursor { y } else { x };
            if cursor == first {
                closed = true;
                break;
            }
            edges.push(cursor);
        }
        let mut points: Vec<Vec2> = Vec::with_capacity(edges.len());
        for id in edges {
            let p = crossing(id);
            let p = match points.last() {
                Some(&q) if periodic => q + Vec2::new(periodic_delta(p.x - q.x), periodic_delta(p.y - q.y)),
                _ => p,
            };
            points.push(p);
        }
        out.push(Polyline { points, closed });
    }
    out
}

/// Distance from `x` to the segment `[a, b]`.
pub fn point_segment_distance(x: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    let s = if len2 == 0.0 {
        0.0
    } else {
        ((x - a).dot(ab) / len2).clamp(0.0, 1.0)
    };
    (x - (a + ab * s)).norm()
}

/// Distance from `x` to the union of the polylines (`∞` if empty).
pub fn distance_to_curves(x: Vec2, curves: &[Polyline]) -> f64 {
    let mut best = f64::INFINITY;
    for c in curves {
        if c.points.len() == 1 {
            best = best.min((x - c.points[0]).norm());
        }
        for (a, b) in c.segments() {
            best = best.min(point_segment_distance(x, a, b));
        }
    }
    best
}

/// Symmetric Hausdorff distance between two curve families, measured from
/// the vertices of each to the segments of the other. Zero when both are
/// empty, infinite when exactly one is.
pub fn hausdorff(a: &[Polyline], b: &[Polyline]) -> f64 {
    let directed = |from: &[Polyline], to: &[Polyline]| {
        from.iter()
            .flat_map(|c| c.points.iter())
            .map(|&x| distance_to_curves(x, to))
            .fold(0.0f64, f64::max)
    };
    let empty = |c: &[Polyline]| c.iter().all(|p| p.points.is_empty());
    match (empty(a), empty(b)) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => directed(a, b).max(directed(b, a)),
    }
}
