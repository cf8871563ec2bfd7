//! Uniform node-centred grids on `[0, Lx] x [0, Ly]` and scalar fields on them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes `x_i = i hx`, `i = 0..nx`, with `hx = Lx / (nx - 1)`; likewise in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 16 || ny < 16 {
            return Err(Error::InvalidArgument(format!("grid needs nx, ny >= 16 (got {nx} x {ny})")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidArgument(format!("extent must be positive (got {lx} x {ly})")));
        }
        Ok(Self { nx, ny, lx, ly, hx: lx / (nx - 1) as f64, hy: ly / (ny - 1) as f64 })
    }

    /// Square `[0,1]^2` with `n` nodes per side.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    /// Unit square with spacing at most `h`.
    pub fn unit_with_spacing(h: f64) -> Result<Self> {
        Self::unit((1.0 / h - 1e-9).ceil() as usize + 1)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn h_max(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn h_min(&self) -> f64 {
        self.hx.min(self.hy)
    }

    /// Trapezoid weight of column `i` (times `hx`).
    #[inline]
    pub fn wx(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5 * self.hx
        } else {
            self.hx
        }
    }

    #[inline]
    pub fn wy(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny - 1 {
            0.5 * self.hy
        } else {
            self.hy
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample<F: Fn(f64, f64) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        v.par_chunks_mut(self.nx).enumerate().for_each(|(j, row)| {
            let y = self.y(j);
            for (i, out) in row.iter_mut().enumerate() {
                *out = f(self.x(i), y);
            }
        });
        v
    }

    /// Trapezoid integral. Row sums run in parallel and are combined in row
    /// order, so the result does not depend on the worker count.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let rows: Vec<f64> = values
            .par_chunks(self.nx)
            .enumerate()
            .map(|(j, row)| {
                let mut s = 0.5 * (row[0] + row[self.nx - 1]);
                for v in &row[1..self.nx - 1] {
                    s += v;
                }
                s * self.hx * self.wy(j)
            })
            .collect();
        rows.iter().sum()
    }

    /// Trapezoid-weighted inner product `sum w_ij a_ij b_ij`, deterministic.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let rows: Vec<f64> = a
            .par_chunks(self.nx)
            .zip(b.par_chunks(self.nx))
            .enumerate()
            .map(|(j, (ra, rb))| {
                let n = self.nx;
                let mut s = 0.5 * (ra[0] * rb[0] + ra[n - 1] * rb[n - 1]);
                for k in 1..n - 1 {
                    s += ra[k] * rb[k];
                }
                s * self.hx * self.wy(j)
            })
            .collect();
        rows.iter().sum()
    }

    /// Five-point Laplacian with ghost reflection (`u_{-1} = u_1`) for one row.
    #[inline]
    pub(crate) fn laplacian_row(&self, u: &[f64], j: usize, out: &mut [f64]) {
        let nx = self.nx;
        let ihx2 = 1.0 / (self.hx * self.hx);
        let ihy2 = 1.0 / (self.hy * self.hy);
        let row = &u[j * nx..(j + 1) * nx];
        let down = if j == 0 { &u[nx..2 * nx] } else { &u[(j - 1) * nx..j * nx] };
        let up = if j == self.ny - 1 {
            &u[(j - 1) * nx..j * nx]
        } else {
            &u[(j + 1) * nx..(j + 2) * nx]
        };
        for i in 0..nx {
            let left = if i == 0 { row[1] } else { row[i - 1] };
            let right = if i == nx - 1 { row[nx - 2] } else { row[i + 1] };
            out[i] = (left - 2.0 * row[i] + right) * ihx2 + (down[i] - 2.0 * row[i] + up[i]) * ihy2;
        }
    }

    /// Five-point Neumann Laplacian of a whole field.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        out.par_chunks_mut(self.nx).enumerate().for_each(|(j, row)| self.laplacian_row(u, j, row));
        out
    }

    /// Bilinear interpolation; points outside are clamped to the box.
    pub fn interpolate(&self, values: &[f64], x: f64, y: f64) -> f64 {
        let sx = (x / self.hx).clamp(0.0, (self.nx - 1) as f64);
        let sy = (y / self.hy).clamp(0.0, (self.ny - 1) as f64);
        let i = (sx.floor() as usize).min(self.nx - 2);
        let j = (sy.floor() as usize).min(self.ny - 2);
        let (tx, ty) = (sx - i as f64, sy - j as f64);
        let v00 = values[self.idx(i, j)];
        let v10 = values[self.idx(i + 1, j)];
        let v01 = values[self.idx(i, j + 1)];
        let v11 = values[self.idx(i + 1, j + 1)];
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }
}

/// Values on a grid at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub grid: Grid2D,
    pub values: Vec<f64>,
    pub time: f64,
}

/// JSON sidecar of a binary snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub nx: usize,
    pub ny: usize,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: f64,
    pub time: f64,
    pub epsilon: f64,
}

impl Field2D {
    pub fn new(grid: Grid2D, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64 + Sync>(grid: Grid2D, f: F) -> Self {
        Self { values: grid.sample(f), grid, time: 0.0 }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| if v.abs() > m || v.is_nan() { v.abs() } else { m })
    }

    /// `int u` over the box.
    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// Writes `<stem>.bin` (little-endian f64, row-major) and `<stem>.json`.
    pub fn write_snapshot(&self, stem: &Path, epsilon: f64) -> Result<(PathBuf, PathBuf)> {
        let bin = stem.with_extension("bin");
        let json = stem.with_extension("json");
        let mut w = BufWriter::new(File::create(&bin)?);
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        let meta = SnapshotMeta {
            nx: self.grid.nx,
            ny: self.grid.ny,
            lx: self.grid.lx,
            ly: self.grid.ly,
            time: self.time,
            epsilon,
        };
        std::fs::write(&json, serde_json::to_string_pretty(&meta)?)?;
        Ok((bin, json))
    }

    /// Reads a snapshot pair written by [`Field2D::write_snapshot`].
    pub fn read_snapshot(stem: &Path) -> Result<(Self, SnapshotMeta)> {
        let meta: SnapshotMeta =
            serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        let grid = Grid2D::new(meta.nx, meta.ny, meta.lx, meta.ly)?;
        let mut bytes = Vec::new();
        BufReader::new(File::open(stem.with_extension("bin"))?).read_to_end(&mut bytes)?;
        if bytes.len() != 8 * grid.len() {
            return Err(Error::InvalidArgument(format!(
                "snapshot holds {} bytes, expected {}",
                bytes.len(),
                8 * grid.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok((Self { grid, values, time: meta.time }, meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_of_constants_and_odd_fields() {
        let g = Grid2D::unit(33).unwrap();
        assert!((g.integrate(&vec![1.0; g.len()]) - 1.0).abs() < 1e-14);
        let odd = g.sample(|x, y| (x - 0.5) * (1.0 + y * y));
        assert!(g.integrate(&odd).abs() < 1e-12);
        let g2 = Grid2D::new(21, 41, 2.0, 0.5).unwrap();
        assert!((g2.integrate(&g2.sample(|x, _| x)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn laplacian_of_neumann_mode() {
        let g = Grid2D::unit(101).unwrap();
        let pi = std::f64::consts::PI;
        let u = g.sample(|x, y| (pi * x).cos() * (2.0 * pi * y).cos());
        let lap = g.laplacian(&u);
        let worst = lap
            .iter()
            .zip(&u)
            .map(|(l, u)| (l + 5.0 * pi * pi * u).abs())
            .fold(0.0, f64::max);
        assert!(worst < 5.0 * pi * pi * 1e-3, "{worst}");
    }

    #[test]
    fn snapshot_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::new(17, 19, 1.0, 1.5).unwrap();
        let f = Field2D { values: g.sample(|x, y| x.sin() - y), grid: g, time: 0.25 };
        let stem = dir.path().join("snap");
        f.write_snapshot(&stem, 0.04).unwrap();
        let (back, meta) = Field2D::read_snapshot(&stem).unwrap();
        assert_eq!(back, f);
        assert_eq!(meta.epsilon, 0.04);
        let json = std::fs::read_to_string(stem.with_extension("json")).unwrap();
        assert!(json.contains("\"Lx\"") && json.contains("\"nx\""));
    }

    #[test]
    fn rejects_small_grids() {
        assert!(Grid2D::new(8, 32, 1.0, 1.0).is_err());
    }
}
