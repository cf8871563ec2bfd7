//! Areas, curvature, Hausdorff distance and layer width.

use serde::{Deserialize, Serialize};

use super::contour::{dist, extract_contour, Contour, Point};
use super::distance::signed_distance_to;
use crate::error::{Error, Result};
use crate::grid::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionAreas {
    pub area_plus: f64,
    pub area_minus: f64,
    /// `area_plus - area_minus`.
    pub gamma: f64,
}

fn shoelace(l: &[Point]) -> f64 {
    let n = l.len();
    0.5 * (0..n)
        .map(|k| {
            let (p, q) = (l[k], l[(k + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

/// Areas of the sublevel region (enclosed by the loops) and its complement.
pub fn region_areas(contour: &Contour, domain_area: f64) -> Result<RegionAreas> {
    if !contour.open.is_empty() {
        return Err(Error::InvalidArgument(
            "region areas need closed loops; the contour reaches the boundary".into(),
        ));
    }
    if contour.loops.is_empty() {
        return Err(Error::EmptyContour);
    }
    // counter-clockwise loops bound low regions, clockwise loops bound holes
    let area_minus: f64 = contour.loops.iter().map(|l| shoelace(l)).sum();
    let area_plus = domain_area - area_minus;
    Ok(RegionAreas { area_plus, area_minus, gamma: area_plus - area_minus })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSample {
    pub point: Point,
    pub kappa: f64,
}

/// Equally spaced points along a closed loop.
pub fn resample_loop(l: &[Point], count: usize) -> Vec<Point> {
    let n = l.len();
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for k in 0..n {
        let last = *cum.last().expect("nonempty");
        cum.push(last + dist(l[k], l[(k + 1) % n]));
    }
    let total = cum[n];
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for m in 0..count {
        let s = total * m as f64 / count as f64;
        while seg + 1 < n && cum[seg + 1] <= s {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let t = if span > 0.0 { (s - cum[seg]) / span } else { 0.0 };
        let (a, b) = (l[seg], l[(seg + 1) % n]);
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    out
}

/// Signed curvature of the circle through three points; positive when the
/// turn `a -> b -> c` is counter-clockwise, zero for collinear points.
pub fn circumcurvature(a: Point, b: Point, c: Point) -> f64 {
    let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
    let denom = dist(a, b) * dist(b, c) * dist(a, c);
    if denom == 0.0 || cross == 0.0 {
        0.0
    } else {
        2.0 * cross / denom
    }
}

/// Curvature along every loop with at least eight points. Loops are resampled
/// by arclength and each sample uses the circle through its neighbours a
/// fixed stride away, which damps the vertex jitter of marching squares.
pub fn curvature_samples(contour: &Contour) -> Vec<CurvatureSample> {
    let mut out = Vec::new();
    for l in contour.loops.iter().filter(|l| l.len() >= 8) {
        let count = l.len();
        let pts = resample_loop(l, count);
        let stride = (count / 32).max(1);
        for k in 0..count {
            let a = pts[(k + count - stride) % count];
            let c = pts[(k + stride) % count];
            out.push(CurvatureSample { point: pts[k], kappa: circumcurvature(a, pts[k], c) });
        }
    }
    out
}

fn densify(contour: &Contour, spacing: f64) -> Vec<Point> {
    let mut out = Vec::new();
    for (a, b) in contour.segments() {
        let pieces = (dist(a, b) / spacing).ceil().max(1.0) as usize;
        for m in 0..pieces {
            let t = m as f64 / pieces as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    for l in &contour.open {
        if let Some(&p) = l.last() {
            out.push(p);
        }
    }
    out
}

fn directed(a: &Contour, b: &Contour, spacing: f64) -> f64 {
    use rayon::prelude::*;
    let samples = densify(a, spacing);
    let segs: Vec<(Point, Point)> = b.segments().collect();
    let per: Vec<f64> = samples
        .par_iter()
        .map(|&p| {
            segs.iter()
                .map(|&(s, e)| point_segment(p, s, e))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    per.into_iter().fold(0.0, f64::max)
}

fn point_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

/// Symmetric Hausdorff distance, sampling each polyline at `spacing` and
/// measuring exact point-to-segment distances to the other.
pub fn hausdorff(a: &Contour, b: &Contour, spacing: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyContour);
    }
    Ok(directed(a, b, spacing).max(directed(b, a, spacing)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionWidth {
    /// `area{-1 + eta <= u <= 1 - eta} / length(a-level)`.
    pub width: f64,
    pub band_area: f64,
    pub length: f64,
    /// Spread of the signed distance to the `a`-level over band nodes.
    pub max_extent: f64,
}

fn sublevel_area(grid: &Grid2D, values: &[f64], level: f64) -> Result<f64> {
    match extract_contour(grid, values, level) {
        Ok(c) if c.open.is_empty() => Ok(region_areas(&c, grid.area())?.area_minus),
        Ok(_) => Ok(sublevel_area_sampled(grid, values, level)),
        Err(Error::EmptyContour) => {
            Ok(if values[0] < level { grid.area() } else { 0.0 })
        }
        Err(e) => Err(e),
    }
}

// bilinear sub-sampling, 8 x 8 points per cell
fn sublevel_area_sampled(grid: &Grid2D, values: &[f64], level: f64) -> f64 {
    let s = 8;
    let mut count = 0usize;
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            let c = [
                values[grid.idx(i, j)],
                values[grid.idx(i + 1, j)],
                values[grid.idx(i + 1, j + 1)],
                values[grid.idx(i, j + 1)],
            ];
            let all_low = c.iter().all(|&v| v < level);
            let all_high = c.iter().all(|&v| v >= level);
            if all_low {
                count += s * s;
                continue;
            }
            if all_high {
                continue;
            }
            for b in 0..s {
                let ty = (b as f64 + 0.5) / s as f64;
                for a in 0..s {
                    let tx = (a as f64 + 0.5) / s as f64;
                    let v = (1.0 - ty) * ((1.0 - tx) * c[0] + tx * c[1])
                        + ty * ((1.0 - tx) * c[3] + tx * c[2]);
                    if v < level {
                        count += 1;
                    }
                }
            }
        }
    }
    count as f64 * grid.hx * grid.hy / (s * s) as f64
}

/// Integral-mean thickness of the layer around `contour` (the `a`-level of `values`).
pub fn transition_width(
    grid: &Grid2D,
    values: &[f64],
    eta: f64,
    contour: &Contour,
) -> Result<TransitionWidth> {
    if contour.is_empty() {
        return Err(Error::EmptyContour);
    }
    let upper = sublevel_area(grid, values, 1.0 - eta)?;
    let lower = sublevel_area(grid, values, -1.0 + eta)?;
    let band_area = upper - lower;
    let length = contour.length();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let u = values[grid.idx(i, j)];
            if u.abs() <= 1.0 - eta {
                let d = signed_distance_to(contour, [grid.x(i), grid.y(j)]);
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
    }
    let max_extent = if hi >= lo { hi - lo } else { 0.0 };
    Ok(TransitionWidth { width: band_area / length, band_area, length, max_extent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle_contour(g: &Grid2D, c: Point, r: f64) -> Contour {
        let vals = g.sample(|x, y| (x - c[0]).hypot(y - c[1]) - r);
        extract_contour(g, &vals, 0.0).unwrap()
    }

    #[test]
    fn circle_areas() {
        let g = Grid2D::unit(129).unwrap();
        let r = 0.25;
        let a = region_areas(&circle_contour(&g, [0.5, 0.5], r), 1.0).unwrap();
        assert!((a.gamma - (1.0 - 2.0 * PI * r * r)).abs() < 4.0 * g.hx * 2.0 * PI * r * g.hx);
        let r = (2.0 * PI).powf(-0.5);
        let a = region_areas(&circle_contour(&g, [0.5, 0.5], r), 1.0).unwrap();
        assert!(a.gamma.abs() < 1e-3);
    }

    #[test]
    fn two_discs_add() {
        let g = Grid2D::unit(129).unwrap();
        let vals = g.sample(|x, y| {
            ((x - 0.25).hypot(y - 0.3) - 0.1).min((x - 0.7).hypot(y - 0.6) - 0.15)
        });
        let c = extract_contour(&g, &vals, 0.0).unwrap();
        assert_eq!(c.loops.len(), 2);
        let a = region_areas(&c, 1.0).unwrap();
        assert!((a.area_minus - PI * (0.01 + 0.0225)).abs() < 1e-3);
    }

    #[test]
    fn circle_curvature() {
        let g = Grid2D::unit(129).unwrap();
        let k = curvature_samples(&circle_contour(&g, [0.5, 0.5], 0.25));
        assert!(k.iter().all(|s| (s.kappa - 4.0).abs() < 0.2), "{:?}", k.iter().map(|s| s.kappa).fold(0.0, f64::max));
    }

    #[test]
    fn square_side_is_flat() {
        let g = Grid2D::unit(101).unwrap();
        let vals = g.sample(|x, y| (x - 0.5).abs().max((y - 0.5).abs()) - 0.303);
        let k = curvature_samples(&extract_contour(&g, &vals, 0.0).unwrap());
        let flat = k
            .iter()
            .filter(|s| (s.point[0] - 0.5).abs() < 0.15 && (s.point[1] - 0.5).abs() > 0.29)
            .map(|s| s.kappa.abs())
            .fold(0.0, f64::max);
        assert!(flat < 1e-9, "{flat}");
    }

    #[test]
    fn ellipse_peak_curvature() {
        let g = Grid2D::unit(201).unwrap();
        let vals = g.sample(|x, y| ((x - 0.5) / 0.3).hypot((y - 0.5) / 0.2) - 1.0);
        let k = curvature_samples(&extract_contour(&g, &vals, 0.0).unwrap());
        let peak = k.iter().map(|s| s.kappa).fold(0.0, f64::max);
        assert!((peak - 7.5).abs() < 0.75, "{peak}");
    }

    #[test]
    fn hausdorff_cases() {
        let g = Grid2D::unit(129).unwrap();
        let a = circle_contour(&g, [0.5, 0.5], 0.25);
        assert!(hausdorff(&a, &a, g.hx / 2.0).unwrap() < 1e-15);
        let b = circle_contour(&g, [0.5, 0.5], 0.27);
        assert!((hausdorff(&a, &b, g.hx / 2.0).unwrap() - 0.02).abs() < 1e-3);
        let c = circle_contour(&g, [0.51, 0.5], 0.25);
        assert!((hausdorff(&a, &c, g.hx / 2.0).unwrap() - 0.01).abs() < 1e-3);
        assert_eq!(hausdorff(&a, &c, 0.003).unwrap(), hausdorff(&c, &a, 0.003).unwrap());
    }

    #[test]
    fn tanh_band_width() {
        let g = Grid2D::unit(201).unwrap();
        let eps = 0.02;
        let eta = 0.2;
        let r = 0.3;
        let vals = g.sample(|x, y| (((x - 0.5).hypot(y - 0.5) - r) / (eps * 2f64.sqrt())).tanh());
        let c = extract_contour(&g, &vals, 0.0).unwrap();
        let w = transition_width(&g, &vals, eta, &c).unwrap();
        let exact = 2.0 * eps * 2f64.sqrt() * (1.0 - eta).atanh();
        assert!((w.width - exact).abs() < 0.01 * exact, "{} vs {exact}", w.width);
        assert!((w.max_extent - exact).abs() < 2.0 * g.hx);
        let wider = transition_width(&g, &vals, 0.05, &c).unwrap();
        assert!(wider.width > w.width);
    }
}
