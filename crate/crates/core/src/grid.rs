//! Periodic node grids on the torus `[0, 2π)²` and the `GFLM` snapshot format.
//!
//! Node `(i, j)` sits at `(i·h₁, j·h₂)`; values are stored row-major with `j`
//! selecting the row, so `data[j * n1 + i]`.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Smallest grid the stencil code accepts.
pub const MIN_NODES: usize = 4;

const MAGIC: &[u8; 4] = b"GFLM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    n1: usize,
    n2: usize,
    data: Vec<f64>,
}

impl Grid2 {
    pub fn zeros(n1: usize, n2: usize) -> Result<Self> {
        Self::filled(n1, n2, 0.0)
    }

    pub fn filled(n1: usize, n2: usize, value: f64) -> Result<Self> {
        check_dims(n1, n2)?;
        Ok(Grid2 {
            n1,
            n2,
            data: vec![value; n1 * n2],
        })
    }

    pub fn from_vec(n1: usize, n2: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(n1, n2)?;
        if data.len() != n1 * n2 {
            return Err(Error::invalid(
                "grid",
                "data",
                format!("expected {} values, got {}", n1 * n2, data.len()),
            ));
        }
        Ok(Grid2 { n1, n2, data })
    }

    /// Samples `f` at every node.
    pub fn from_fn(n1: usize, n2: usize, f: impl Fn(Vec2) -> f64) -> Result<Self> {
        check_dims(n1, n2)?;
        let (h1, h2) = (TAU / n1 as f64, TAU / n2 as f64);
        let data = (0..n2)
            .flat_map(|j| (0..n1).map(move |i| (i, j)))
            .map(|(i, j)| f(Vec2::new(i as f64 * h1, j as f64 * h2)))
            .collect();
        Ok(Grid2 { n1, n2, data })
    }

    pub fn same_shape(&self, value: f64) -> Grid2 {
        Grid2 {
            n1: self.n1,
            n2: self.n2,
            data: vec![value; self.data.len()],
        }
    }

    #[inline]
    pub fn n1(&self) -> usize {
        self.n1
    }

    #[inline]
    pub fn n2(&self) -> usize {
        self.n2
    }

    #[inline]
    pub fn h1(&self) -> f64 {
        TAU / self.n1 as f64
    }

    #[inline]
    pub fn h2(&self) -> f64 {
        TAU / self.n2 as f64
    }

    /// The smaller of the two spacings.
    pub fn h(&self) -> f64 {
        self.h1().min(self.h2())
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(i as f64 * self.h1(), j as f64 * self.h2())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n1 + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.n1 + i] = v;
    }

    /// Value at integer offsets from `(i, j)`, wrapping periodically.
    #[inline]
    pub fn get_wrapped(&self, i: isize, j: isize) -> f64 {
        let ii = i.rem_euclid(self.n1 as isize) as usize;
        let jj = j.rem_euclid(self.n2 as isize) as usize;
        self.data[jj * self.n1 + ii]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Periodic bilinear interpolation at an arbitrary point of the plane.
    #[inline]
    pub fn interpolate(&self, x: Vec2) -> f64 {
        let fx = x.x * (self.n1 as f64 / TAU);
        let fy = x.y * (self.n2 as f64 / TAU);
        let ix = fx.floor();
        let iy = fy.floor();
        let tx = fx - ix;
        let ty = fy - iy;
        let i0 = (ix as i64).rem_euclid(self.n1 as i64) as usize;
        let j0 = (iy as i64).rem_euclid(self.n2 as i64) as usize;
        let i1 = if i0 + 1 == self.n1 { 0 } else { i0 + 1 };
        let j1 = if j0 + 1 == self.n2 { 0 } else { j0 + 1 };
        let r0 = j0 * self.n1;
        let r1 = j1 * self.n1;
        let a = self.data[r0 + i0] + tx * (self.data[r0 + i1] - self.data[r0 + i0]);
        let b = self.data[r1 + i0] + tx * (self.data[r1 + i1] - self.data[r1 + i0]);
        a + ty * (b - a)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// `max - min`.
    pub fn oscillation(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Index of the first non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k % self.n1, k / self.n1))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid2 {
        Grid2 {
            n1: self.n1,
            n2: self.n2,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Grid2) -> f64 {
        assert_eq!((self.n1, self.n2), (other.n1, other.n2));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Writes the `GFLM` snapshot: magic, version, `n1`, `n2` (little-endian
    /// `u32`), then the values row-major as little-endian `f64`.
    pub fn write_gflm<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n1 as u32).to_le_bytes())?;
        w.write_all(&(self.n2 as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_gflm<R: Read>(mut r: R) -> Result<Grid2> {
        let fmt = |m: String| Error::Format {
            what: "GFLM snapshot",
            message: m,
        };
        let mut head = [0u8; 16];
        r.read_exact(&mut head)
            .map_err(|e| fmt(format!("truncated header: {e}")))?;
        if &head[..4] != MAGIC {
            return Err(fmt(format!("bad magic {:?}", &head[..4])));
        }
        let word = |k: usize| u32::from_le_bytes(head[k..k + 4].try_into().unwrap());
        let version = word(4);
        if version != VERSION {
            return Err(fmt(format!("unsupported version {version}")));
        }
        let (n1, n2) = (word(8) as usize, word(12) as usize);
        check_dims(n1, n2)?;
        let mut bytes = vec![0u8; n1 * n2 * 8];
        r.read_exact(&mut bytes)
            .map_err(|e| fmt(format!("truncated payload: {e}")))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Grid2 { n1, n2, data })
    }
}

fn check_dims(n1: usize, n2: usize) -> Result<()> {
    if n1 < MIN_NODES || n2 < MIN_NODES {
        return Err(Error::invalid(
            "grid",
            "n",
            format!("need at least {MIN_NODES} nodes per axis, got {n1}×{n2}"),
        ));
    }
    if n1 > u32::MAX as usize || n2 > u32::MAX as usize {
        return Err(Error::invalid("grid", "n", "node count exceeds u32"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_row_major() {
        let g = Grid2::from_fn(4, 5, |x| x.x + 10.0 * x.y).unwrap();
        let h1 = TAU / 4.0;
        let h2 = TAU / 5.0;
        assert_eq!(g.get(1, 2), h1 + 10.0 * 2.0 * h2);
        assert_eq!(g.as_slice()[2 * 4 + 1], g.get(1, 2));
        assert_eq!(g.get_wrapped(-1, 5), g.get(3, 0));
    }

    #[test]
    fn interpolation_reproduces_nodes_and_wraps() {
        let g = Grid2::from_fn(8, 8, |x| x.x.sin() + x.y.cos()).unwrap();
        for j in 0..8 {
            for i in 0..8 {
                let x = g.node(i, j);
                assert!((g.interpolate(x) - g.get(i, j)).abs() < 1e-14);
                assert!((g.interpolate(x + Vec2::new(TAU, -2.0 * TAU)) - g.get(i, j)).abs() < 1e-12);
            }
        }
        // midpoint of a cell is the average of its four corners
        let h = TAU / 8.0;
        let mid = g.interpolate(Vec2::new(7.5 * h, 7.5 * h));
        let avg = (g.get(7, 7) + g.get(0, 7) + g.get(7, 0) + g.get(0, 0)) / 4.0;
        assert!((mid - avg).abs() < 1e-14);
    }

    #[test]
    fn rejects_tiny_and_mismatched() {
        assert!(Grid2::zeros(3, 16).is_err());
        assert!(Grid2::from_vec(4, 4, vec![0.0; 15]).is_err());
    }

    #[test]
    fn gflm_header_layout() {
        let g = Grid2::from_fn(4, 6, |x| x.x - x.y).unwrap();
        let mut buf = Vec::new();
        g.write_gflm(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"GFLM");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 6);
        assert_eq!(buf.len(), 16 + 24 * 8);
        let first = f64::from_le_bytes(buf[16..24].try_into().unwrap());
        assert_eq!(first, g.get(0, 0));
        let second = f64::from_le_bytes(buf[24..32].try_into().unwrap());
        assert_eq!(second, g.get(1, 0));
    }

    #[test]
    fn gflm_rejects_garbage() {
        assert!(Grid2::read_gflm(&b"GFLX\x01\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        Grid2::zeros(4, 4).unwrap().write_gflm(&mut buf).unwrap();
        buf[4] = 9;
        assert!(Grid2::read_gflm(&buf[..]).is_err());
        buf[4] = 1;
        assert!(Grid2::read_gflm(&buf[..buf.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn gflm_roundtrip(n1 in 4usize..12, n2 in 4usize..12, seed in any::<u64>()) {
            let g = Grid2::from_fn(n1, n2, |x| ((x.x * 3.1 + x.y) * seed as f64 * 1e-9).sin() * 1e3).unwrap();
            let mut buf = Vec::new();
            g.write_gflm(&mut buf).unwrap();
            let back = Grid2::read_gflm(&buf[..]).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn interpolation_is_a_convex_combination(x in -20.0f64..20.0, y in -20.0f64..20.0) {
            let g = Grid2::from_fn(7, 9, |p| (p.x * 2.0).cos() * p.y.sin()).unwrap();
            let v = g.interpolate(Vec2::new(x, y));
            prop_assert!(v >= g.min() - 1e-12 && v <= g.max() + 1e-12);
        }
    }
}
