//! Marching squares with linear edge interpolation.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::Grid2D;

pub type Point = [f64; 2];

/// Level set of a grid field as polylines. Closed loops do not repeat their
/// first point. Every polyline has the sublevel side (`u < level`) on its left,
/// so loops around a low region run counter-clockwise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Contour {
    pub level: f64,
    pub loops: Vec<Vec<Point>>,
    /// Chains ending on the boundary of the box.
    pub open: Vec<Vec<Point>>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum EdgeKey {
    // edge (i, j)-(i+1, j)
    H(usize, usize),
    // edge (i, j)-(i, j+1)
    V(usize, usize),
}

impl Contour {
    pub fn is_empty(&self) -> bool {
        self.loops.is_empty() && self.open.is_empty()
    }

    /// Segments of every polyline, loops closed.
    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let closed = self.loops.iter().flat_map(|l| {
            (0..l.len()).map(move |k| (l[k], l[(k + 1) % l.len()]))
        });
        let open = self.open.iter().flat_map(|l| l.windows(2).map(|w| (w[0], w[1])));
        closed.chain(open)
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| dist(a, b)).sum()
    }

    pub fn point_count(&self) -> usize {
        self.loops.iter().chain(&self.open).map(Vec::len).sum()
    }

    /// CSV `loop_id,x,y`; loops list their first point again at the end.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["loop_id", "x", "y"])?;
        for (id, l) in self.loops.iter().enumerate() {
            for p in l.iter().chain(l.first()) {
                w.write_record([id.to_string(), format!("{:.17e}", p[0]), format!("{:.17e}", p[1])])?;
            }
        }
        for (k, l) in self.open.iter().enumerate() {
            let id = self.loops.len() + k;
            for p in l {
                w.write_record([id.to_string(), format!("{:.17e}", p[0]), format!("{:.17e}", p[1])])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

struct Segment {
    from: EdgeKey,
    to: EdgeKey,
    p: Point,
    q: Point,
}

/// Extracts the `level` set of `values` on `grid`.
pub fn extract_contour(grid: &Grid2D, values: &[f64], level: f64) -> Result<Contour> {
    let (nx, ny) = (grid.nx, grid.ny);
    let v = |i: usize, j: usize| values[j * nx + i];
    let low = |x: f64| x < level;
    // crossing on an edge, always interpolated from the lower-index node
    let point = |key: EdgeKey| -> Point {
        let (i0, j0, i1, j1) = match key {
            EdgeKey::H(i, j) => (i, j, i + 1, j),
            EdgeKey::V(i, j) => (i, j, i, j + 1),
        };
        let (a, b) = (v(i0, j0), v(i1, j1));
        let t = if b == a { 0.5 } else { ((level - a) / (b - a)).clamp(0.0, 1.0) };
        [grid.x(i0) + t * (grid.x(i1) - grid.x(i0)), grid.y(j0) + t * (grid.y(j1) - grid.y(j0))]
    };

    let mut segments: Vec<Segment> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            let case = (0..4).fold(0u8, |acc, k| acc | ((low(c[k]) as u8) << k));
            if case == 0 || case == 15 {
                continue;
            }
            let edges = [EdgeKey::H(i, j), EdgeKey::V(i + 1, j), EdgeKey::H(i, j + 1), EdgeKey::V(i, j)];
            // edge k joins corners (k, k+1 mod 4) except the top edge, which
            // joins corners 3 and 2; the crossing test is symmetric anyway
            let crosses = |k: usize| low(c[k]) != low(c[(k + 1) % 4]);
            // (edge, edge, corner cut off by the segment in a saddle cell)
            let pairs: Vec<(usize, usize, Option<usize>)> = if case == 5 || case == 10 {
                let centre_low = low(0.25 * (c[0] + c[1] + c[2] + c[3]));
                // with corners 0, 2 low: a low centre isolates the high corners 1, 3
                if (case == 5) == centre_low {
                    vec![(0, 1, Some(1)), (2, 3, Some(3))]
                } else {
                    vec![(0, 3, Some(0)), (1, 2, Some(2))]
                }
            } else {
                let e: Vec<usize> = (0..4).filter(|&k| crosses(k)).collect();
                vec![(e[0], e[1], None)]
            };
            let corner = [
                [grid.x(i), grid.y(j)],
                [grid.x(i + 1), grid.y(j)],
                [grid.x(i + 1), grid.y(j + 1)],
                [grid.x(i), grid.y(j + 1)],
            ];
            let edge_mid = |e: usize| {
                let (p, q) = (corner[e], corner[(e + 1) % 4]);
                [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
            };
            for (ea, eb, isolated) in pairs {
                let (ka, kb) = (edges[ea], edges[eb]);
                let (pa, pb) = (point(ka), point(kb));
                // Orient with the low corners on the left. The side test uses the
                // edge midpoints, which separate the corners the same way as the
                // crossings but never degenerate when a node sits on the level.
                let (ma, mb) = (edge_mid(ea), edge_mid(eb));
                let side = |k: usize| {
                    let s = (mb[0] - ma[0]) * (corner[k][1] - ma[1])
                        - (mb[1] - ma[1]) * (corner[k][0] - ma[0]);
                    if low(c[k]) {
                        s
                    } else {
                        -s
                    }
                };
                let score = match isolated {
                    Some(k) => side(k),
                    None => (0..4).map(side).sum(),
                };
                segments.push(if score < 0.0 {
                    Segment { from: kb, to: ka, p: pb, q: pa }
                } else {
                    Segment { from: ka, to: kb, p: pa, q: pb }
                });
            }
        }
    }
    if segments.is_empty() {
        return Err(Error::EmptyContour);
    }
    Ok(chain(segments, level))
}

fn chain(segments: Vec<Segment>, level: f64) -> Contour {
    let mut by_start: HashMap<EdgeKey, usize> = HashMap::with_capacity(segments.len());
    let mut has_pred = vec![false; segments.len()];
    for (k, s) in segments.iter().enumerate() {
        by_start.insert(s.from, k);
    }
    for s in &segments {
        if let Some(&n) = by_start.get(&s.to) {
            has_pred[n] = true;
        }
    }
    let mut used = vec![false; segments.len()];
    let mut contour = Contour { level, ..Default::default() };
    let follow = |start: usize, used: &mut Vec<bool>| -> (Vec<Point>, bool) {
        let mut pts = vec![segments[start].p];
        let mut k = start;
        used[k] = true;
        loop {
            let q = segments[k].q;
            if pts.last() != Some(&q) {
                pts.push(q);
            }
            match by_start.get(&segments[k].to) {
                Some(&n) if n == start => {
                    if pts.len() > 1 && pts.last() == pts.first() {
                        pts.pop();
                    }
                    return (pts, true);
                }
                Some(&n) if !used[n] => {
                    used[n] = true;
                    k = n;
                }
                _ => return (pts, false),
            }
        }
    };
    // open chains start at segments without a predecessor
    for k in 0..segments.len() {
        if !used[k] && !has_pred[k] {
            let (pts, _) = follow(k, &mut used);
            contour.open.push(pts);
        }
    }
    for k in 0..segments.len() {
        if !used[k] {
            let (pts, closed) = follow(k, &mut used);
            if closed {
                contour.loops.push(pts);
            } else {
                contour.open.push(pts);
            }
        }
    }
    contour
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line() {
        let g = Grid2D::unit(33).unwrap();
        let vals = g.sample(|x, _| x - 0.5);
        let c = extract_contour(&g, &vals, 0.0).unwrap();
        assert!(c.loops.is_empty());
        assert_eq!(c.open.len(), 1);
        assert!(c.open[0].iter().all(|p| (p[0] - 0.5).abs() < 1e-14));
        // low side (x < 0.5) on the left: the line runs upward
        let l = &c.open[0];
        assert!(l[0][1] < l[l.len() - 1][1]);
        assert!((c.length() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cone_circle() {
        let g = Grid2D::unit(65).unwrap();
        let vals = g.sample(|x, y| (x - 0.5).hypot(y - 0.5) - 0.25);
        let c = extract_contour(&g, &vals, 0.0).unwrap();
        assert_eq!(c.loops.len(), 1);
        assert!(c.open.is_empty());
        let len = 2.0 * std::f64::consts::PI * 0.25;
        assert!((c.length() - len).abs() < 2.0 * g.hx);
        // counter-clockwise around the low disc
        let l = &c.loops[0];
        let area: f64 = (0..l.len())
            .map(|k| {
                let (p, q) = (l[k], l[(k + 1) % l.len()]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
            * 0.5;
        assert!(area > 0.0);
    }

    #[test]
    fn high_blob_runs_clockwise() {
        let g = Grid2D::unit(65).unwrap();
        let vals = g.sample(|x, y| 0.25 - (x - 0.5).hypot(y - 0.5));
        let c = extract_contour(&g, &vals, 0.0).unwrap();
        let l = &c.loops[0];
        let area: f64 = (0..l.len())
            .map(|k| {
                let (p, q) = (l[k], l[(k + 1) % l.len()]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum();
        assert!(area < 0.0);
    }

    #[test]
    fn constant_is_empty() {
        let g = Grid2D::unit(17).unwrap();
        assert!(matches!(extract_contour(&g, &vec![1.0; g.len()], 0.0), Err(Error::EmptyContour)));
    }

    #[test]
    fn saddle_by_cell_average() {
        let g = Grid2D::unit(16).unwrap();
        // two discs touching diagonally: checkerboard-like saddle cells stay consistent
        let vals = g.sample(|x, y| ((6.0 * x).sin() * (6.0 * y).sin()).max(-0.9));
        let c = extract_contour(&g, &vals, 0.0).unwrap();
        // every loop is closed and has at least three points
        assert!(c.loops.iter().all(|l| l.len() >= 3));
        assert!(c.length() > 0.0);
    }

    #[test]
    fn csv_closes_loops() {
        let g = Grid2D::unit(33).unwrap();
        let vals = g.sample(|x, y| (x - 0.5).hypot(y - 0.5) - 0.25);
        let c = extract_contour(&g, &vals, 0.0).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "loop_id,x,y");
        assert_eq!(lines.len(), 1 + c.loops[0].len() + 1);
        assert_eq!(lines[1], lines[lines.len() - 1]);
    }
}
