//! Signed distance to a contour, negative on the sublevel side, with a smooth cut-off.

use rayon::prelude::*;

use super::contour::{Contour, Point};
use crate::grid::Grid2D;

/// Cut-off signed distance sampled on a grid.
#[derive(Debug, Clone)]
pub struct SignedDistanceField {
    pub grid: Grid2D,
    pub d: Vec<f64>,
    pub d0cut: f64,
}

/// Identity on `[-d0, d0]`, `d0 (1 + t + t^2 - t^3)` with `t = (|s| - d0)/d0` up to
/// `2 d0`, constant beyond. C1 and nondecreasing.
pub fn cutoff(s: f64, d0: f64) -> f64 {
    let a = s.abs();
    let v = if a <= d0 {
        a
    } else if a >= 2.0 * d0 {
        2.0 * d0
    } else {
        let t = (a - d0) / d0;
        d0 * (1.0 + t + t * t - t * t * t)
    };
    v.copysign(s)
}

struct Polyline<'a> {
    pts: &'a [Point],
    closed: bool,
}

// Left unit normal of segment a -> b (the sublevel side).
fn left_normal(a: Point, b: Point) -> Point {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    if len == 0.0 {
        [0.0, 0.0]
    } else {
        [-dy / len, dx / len]
    }
}

/// Signed distance from `p` to the contour: nearest point by brute force, sign
/// from the segment side, or from the averaged normal when the nearest point
/// is a vertex.
pub fn signed_distance_to(contour: &Contour, p: Point) -> f64 {
    let lines: Vec<Polyline> = contour
        .loops
        .iter()
        .map(|l| Polyline { pts: l, closed: true })
        .chain(contour.open.iter().map(|l| Polyline { pts: l, closed: false }))
        .collect();
    signed_distance_lines(&lines, p)
}

fn signed_distance_lines(lines: &[Polyline], p: Point) -> f64 {
    let mut best = f64::INFINITY;
    let mut sign = 1.0;
    for line in lines {
        let n = line.pts.len();
        let segs = if line.closed { n } else { n.saturating_sub(1) };
        for k in 0..segs {
            let a = line.pts[k];
            let b = line.pts[(k + 1) % n];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let c = [a[0] + t * dx, a[1] + t * dy];
            let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
            if d2 < best {
                best = d2;
                // normal to use for the side test
                let normal = if t > 0.0 && t < 1.0 {
                    left_normal(a, b)
                } else {
                    // vertex: average the normals of the two segments meeting there
                    let v = if t == 0.0 { k } else { (k + 1) % n };
                    let prev = if v > 0 {
                        Some(line.pts[v - 1])
                    } else if line.closed {
                        Some(line.pts[n - 1])
                    } else {
                        None
                    };
                    let next = if v + 1 < n {
                        Some(line.pts[v + 1])
                    } else if line.closed {
                        Some(line.pts[0])
                    } else {
                        None
                    };
                    let here = line.pts[v];
                    let n1 = prev.map(|q| left_normal(q, here)).unwrap_or([0.0, 0.0]);
                    let n2 = next.map(|q| left_normal(here, q)).unwrap_or([0.0, 0.0]);
                    [n1[0] + n2[0], n1[1] + n2[1]]
                };
                let side = (p[0] - c[0]) * normal[0] + (p[1] - c[1]) * normal[1];
                sign = if side > 0.0 { -1.0 } else { 1.0 };
            }
        }
    }
    sign * best.sqrt()
}

/// Uncut signed distance at every grid node.
pub fn signed_distance_raw(contour: &Contour, grid: &Grid2D) -> Vec<f64> {
    let lines: Vec<Polyline> = contour
        .loops
        .iter()
        .map(|l| Polyline { pts: l, closed: true })
        .chain(contour.open.iter().map(|l| Polyline { pts: l, closed: false }))
        .collect();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(grid.nx).enumerate().for_each(|(j, row)| {
        let y = grid.y(j);
        for (i, o) in row.iter_mut().enumerate() {
            *o = signed_distance_lines(&lines, [grid.x(i), y]);
        }
    });
    out
}

/// Signed distance with the cut-off applied.
pub fn signed_distance(contour: &Contour, grid: &Grid2D, d0cut: f64) -> SignedDistanceField {
    let d = signed_distance_raw(contour, grid).into_iter().map(|s| cutoff(s, d0cut)).collect();
    SignedDistanceField { grid: *grid, d, d0cut }
}

/// A third of the distance from the contour to the edges of the box.
pub fn default_cutoff(contour: &Contour, grid: &Grid2D) -> f64 {
    let gap = contour
        .loops
        .iter()
        .chain(&contour.open)
        .flatten()
        .map(|p| p[0].min(grid.lx - p[0]).min(p[1]).min(grid.ly - p[1]))
        .fold(f64::INFINITY, f64::min);
    gap / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::extract_contour;

    fn circle(n: usize) -> (Grid2D, Contour) {
        let g = Grid2D::unit(n).unwrap();
        let vals = g.sample(|x, y| (x - 0.5).hypot(y - 0.5) - 0.25);
        let c = extract_contour(&g, &vals, 0.0).unwrap();
        (g, c)
    }

    #[test]
    fn circle_distances() {
        let (g, c) = circle(65);
        let raw = signed_distance_raw(&c, &g);
        let mid = g.idx(32, 32);
        assert!((raw[mid] + 0.25).abs() < g.hx);
        let worst = g
            .sample(|x, y| (x - 0.5).hypot(y - 0.5) - 0.25)
            .iter()
            .zip(&raw)
            .map(|(e, r)| (e - r).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.5 * g.hx, "{worst}");
        let f = signed_distance(&c, &g, 0.1);
        assert!((f.d[mid] + 0.2).abs() < 1e-15);
        let top = f.d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(top, 0.2);
    }

    #[test]
    fn flat_interface_unit_gradient() {
        let g = Grid2D::unit(41).unwrap();
        let vals = g.sample(|_, y| y - 0.37);
        let c = extract_contour(&g, &vals, 0.0).unwrap();
        let f = signed_distance(&c, &g, 0.2);
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                if f.d[g.idx(i, j)].abs() < 0.15 {
                    let dy = (f.d[g.idx(i, j + 1)] - f.d[g.idx(i, j - 1)]) / (2.0 * g.hy);
                    let dx = (f.d[g.idx(i + 1, j)] - f.d[g.idx(i - 1, j)]) / (2.0 * g.hx);
                    assert!((dx.hypot(dy) - 1.0).abs() < 1e-6);
                }
            }
        }
        // below the line is the sublevel side
        assert!(f.d[g.idx(5, 2)] < 0.0 && f.d[g.idx(5, 30)] > 0.0);
    }

    #[test]
    fn cutoff_shape() {
        let d0 = 0.1;
        assert_eq!(cutoff(0.05, d0), 0.05);
        assert_eq!(cutoff(-0.3, d0), -0.2);
        let h = 1e-7;
        let slope = |s: f64| (cutoff(s + h, d0) - cutoff(s - h, d0)) / (2.0 * h);
        assert!((slope(d0) - 1.0).abs() < 1e-5);
        assert!(slope(2.0 * d0).abs() < 1e-5);
        let mut prev = -1.0;
        for k in 0..=300 {
            let v = cutoff(k as f64 * 0.001, d0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn default_cutoff_is_third_of_gap() {
        let (g, c) = circle(65);
        assert!((default_cutoff(&c, &g) - 0.25 / 3.0).abs() < 0.01);
    }
}
