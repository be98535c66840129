use std::io::{Read, Write};

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::cz::GranularFunction;
use crate::dyadic::RootRegion;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Floating-point type usable as a grid sample.
pub trait Sample: Float + Send + Sync + std::fmt::Debug + 'static {}
impl<F: Float + Send + Sync + std::fmt::Debug + 'static> Sample for F {}

/// Samples at base-cell centers of a root region, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<F> {
    region: RootRegion,
    n: usize,
    values: Vec<F>,
}

/// First line of a grid file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub root_scale: i32,
    pub base_scale: i32,
}

impl<F: Sample> GridFunction<F> {
    pub fn new(region: RootRegion, values: Vec<F>) -> Result<Self> {
        let n = region.cells_per_axis() as usize;
        let want = n.checked_pow(region.dim as u32).ok_or_else(|| Error::OutOfRange("grid too large".into()))?;
        if values.len() != want {
            return Err(Error::Malformed(format!("expected {want} samples, got {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed("non-finite grid value".into()));
        }
        Ok(GridFunction { region, n, values })
    }

    pub fn zeros(region: RootRegion) -> Self {
        let n = region.cells_per_axis() as usize;
        GridFunction {
            region,
            n,
            values: vec![F::zero(); n.pow(region.dim as u32)],
        }
    }

    /// Sample `f` at every cell center.
    pub fn from_fn<G: Fn(&[f64]) -> f64>(region: RootRegion, f: G) -> Self {
        let mut g = Self::zeros(region);
        let mut x = vec![0.0; region.dim];
        for i in 0..g.values.len() {
            g.center_into(i, &mut x);
            g.values[i] = F::from(f(&x)).unwrap_or_else(F::zero);
        }
        g
    }

    /// Exact per cell for base-resolved functions; cells split below the base
    /// scale get their average.
    pub fn from_granular<T: Scalar>(f: &GranularFunction<T>) -> Self {
        let region = *f.region();
        let values = f
            .rasterize()
            .into_iter()
            .map(|v| F::from(v.to_f64_lossy()).unwrap_or_else(F::zero))
            .collect();
        GridFunction {
            region,
            n: region.cells_per_axis() as usize,
            values,
        }
    }

    pub fn region(&self) -> &RootRegion {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.region.dim
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn cell_side(&self) -> f64 {
        2f64.powi(self.region.base_scale)
    }

    pub fn cell_measure(&self) -> f64 {
        self.cell_side().powi(self.dim() as i32)
    }

    /// Flat index of a multi-index.
    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Multi-index of a flat index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            out[j] = flat % self.n;
            flat /= self.n;
        }
        out
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.center_into(flat, &mut x);
        x
    }

    fn center_into(&self, mut flat: usize, x: &mut [f64]) {
        let h = self.cell_side();
        for j in (0..self.dim()).rev() {
            x[j] = ((flat % self.n) as f64 + 0.5) * h;
            flat /= self.n;
        }
    }

    pub fn get(&self, idx: &[usize]) -> F {
        self.values[self.index(idx)]
    }

    pub fn map<G: Fn(F) -> F>(&self, f: G) -> Self {
        GridFunction {
            region: self.region,
            n: self.n,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: F) -> Self {
        self.map(|v| v * c)
    }

    pub fn to_f64(&self) -> GridFunction<f64> {
        GridFunction {
            region: self.region,
            n: self.n,
            values: self.values.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect(),
        }
    }

    pub fn from_f64(g: &GridFunction<f64>) -> Self {
        GridFunction {
            region: g.region,
            n: g.n,
            values: g.values.iter().map(|&v| F::from(v).unwrap_or_else(F::zero)).collect(),
        }
    }

    pub fn max_abs(&self) -> F {
        self.values.iter().fold(F::zero(), |m, v| m.max(v.abs()))
    }

    /// `∫ f` with cell-center sampling.
    pub fn integral(&self) -> f64 {
        self.values.iter().map(|v| v.to_f64().unwrap_or(0.0)).sum::<f64>() * self.cell_measure()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.to_f64().unwrap_or(0.0).powi(2)).sum::<f64>() * self.cell_measure()).sqrt()
    }

    /// Multilinear interpolation at `x` with zero extension; the flag reports
    /// whether `x` lies outside the root cube.
    pub fn interpolate(&self, x: &[f64]) -> (f64, bool) {
        let h = self.cell_side();
        let side = self.n as f64 * h;
        let outside = x.iter().any(|&c| c < 0.0 || c >= side);
        let dim = self.dim();
        let mut base = vec![0i64; dim];
        let mut t = vec![0.0; dim];
        for j in 0..dim {
            let p = x[j] / h - 0.5;
            let f = p.floor();
            base[j] = f as i64;
            t[j] = p - f;
        }
        let mut acc = 0.0;
        for corner in 0..1usize << dim {
            let mut w = 1.0;
            let mut flat = 0usize;
            let mut inside = true;
            for j in 0..dim {
                let b = (corner >> (dim - 1 - j)) & 1;
                let i = base[j] + b as i64;
                w *= if b == 1 { t[j] } else { 1.0 - t[j] };
                if i < 0 || i >= self.n as i64 {
                    inside = false;
                }
                flat = flat * self.n + i.max(0) as usize;
            }
            if inside && w != 0.0 {
                acc += w * self.values[flat].to_f64().unwrap_or(0.0);
            }
        }
        (acc, outside)
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            dim: self.dim(),
            shape: vec![self.n; self.dim()],
            root_scale: self.region.root_scale,
            base_scale: self.region.base_scale,
        }
    }

    /// JSON header line, then little-endian `f64` samples.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = serde_json::to_string(&self.header()).map_err(std::io::Error::other)?;
        w.write_all(header.as_bytes())?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_f64().unwrap_or(0.0).to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::Malformed(e.to_string()))?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Malformed("grid file has no header line".into()))?;
        let header: GridHeader =
            serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::Malformed(format!("grid header: {e}")))?;
        let region = RootRegion::new(header.dim, header.root_scale, header.base_scale)?;
        let n = region.cells_per_axis() as usize;
        if header.shape.len() != header.dim || header.shape.iter().any(|&s| s != n) {
            return Err(Error::Malformed(format!("grid shape {:?} does not match the region", header.shape)));
        }
        let payload = &bytes[nl + 1..];
        if payload.len() % 8 != 0 {
            return Err(Error::Malformed("grid payload is not a whole number of f64".into()));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| F::from(f64::from_le_bytes(c.try_into().expect("8 bytes"))).unwrap_or_else(F::nan))
            .collect();
        Self::new(region, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_file() {
        let r = RootRegion::new(2, 0, -3).unwrap();
        let g = GridFunction::<f64>::from_fn(r, |x| x[0] - 2.0 * x[1]);
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert_eq!(GridFunction::<f64>::read_from(&buf[..]).unwrap(), g);
        let g32 = GridFunction::<f32>::read_from(&buf[..]).unwrap();
        assert_eq!(g32.len(), 64);
        assert!(GridFunction::<f64>::read_from(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn interpolation_is_exact_for_linear_inside() {
        let r = RootRegion::new(2, 0, -4).unwrap();
        let g = GridFunction::<f64>::from_fn(r, |x| 3.0 * x[0] + x[1]);
        let (v, out) = g.interpolate(&[0.41, 0.537]);
        assert!(!out);
        assert!((v - (3.0 * 0.41 + 0.537)).abs() < 1e-12);
        assert!(g.interpolate(&[1.2, 0.5]).1);
    }

    #[test]
    fn layout_last_axis_fastest() {
        let r = RootRegion::new(3, 0, -2).unwrap();
        let g = GridFunction::<f64>::zeros(r);
        assert_eq!(g.index(&[1, 2, 3]), 16 + 8 + 3);
        assert_eq!(g.multi_index(27), vec![1, 2, 3]);
        assert_eq!(g.center(27), vec![0.375, 0.625, 0.875]);
    }
}
