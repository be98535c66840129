//! Spherical averages on a grid.
//!
//! For a fixed radius every cell center is moved by the same set of offsets,
//! so the multilinear interpolation weights do not depend on the cell. The
//! average is therefore a fixed sparse stencil, applied directly when small
//! and by zero-padded FFT convolution otherwise.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::grid::{GridFunction, Sample};
use crate::dyadic::RootRegion;
use crate::error::{Error, Result};

/// Smooth cap on the unit sphere: `χ(y) = (1 − |y − e|²/ρ²)³` for `|y − e| < ρ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapSpec {
    /// Unit center `e`.
    pub direction: Vec<f64>,
    /// Chordal radius `ρ`; the cap diameter is at most `2ρ`.
    pub radius: f64,
}

/// Largest admissible chordal cap radius (cap diameter `≤ 1/2`).
pub const MAX_CAP_RADIUS: f64 = 0.25;

impl CapSpec {
    pub fn new(direction: Vec<f64>, radius: f64) -> Result<Self> {
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::OutOfRange("cap direction must be nonzero".into()));
        }
        if !(radius > 0.0 && radius <= MAX_CAP_RADIUS) {
            return Err(Error::OutOfRange(format!(
                "cap radius {radius} must lie in (0, {MAX_CAP_RADIUS}] so the cap has no antipodal points"
            )));
        }
        Ok(CapSpec {
            direction: direction.iter().map(|x| x / norm).collect(),
            radius,
        })
    }

    pub fn weight(&self, y: &[f64]) -> f64 {
        let d2: f64 = y.iter().zip(&self.direction).map(|(a, b)| (a - b).powi(2)).sum();
        let s = 1.0 - d2 / (self.radius * self.radius);
        if s <= 0.0 {
            0.0
        } else {
            s * s * s
        }
    }
}

/// What to do with cells whose sphere leaves the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Zero-extend and flag the cell.
    #[default]
    Zero,
    /// Any flagged cell is an error.
    Reject,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AverageOptions {
    /// Quadrature nodes; `None` picks at least 8 per cell of circumference.
    pub quad_points: Option<usize>,
    pub cutoff: Option<CapSpec>,
    pub boundary: Boundary,
}

/// Equal-weight nodes on the unit sphere: equally spaced angles for `d = 2`,
/// a Fibonacci lattice for `d = 3`.
pub fn sphere_nodes(dim: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::OutOfRange("quadrature needs at least one node".into()));
    }
    match dim {
        2 => Ok((0..count)
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            Ok((0..count)
                .map(|j| {
                    let z = 1.0 - (2.0 * j as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * j as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect())
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Default node count for radius `r` and cell side `h`.
pub fn auto_quad_points(dim: usize, r: f64, h: f64) -> usize {
    match dim {
        2 => {
            let n = (8.0 * 2.0 * std::f64::consts::PI * r / h).ceil() as usize;
            n.max(64).div_ceil(4) * 4
        }
        _ => {
            let n = (8.0 * 4.0 * std::f64::consts::PI * (r / h).powi(2)).ceil() as usize;
            n.clamp(256, 1 << 18)
        }
    }
}

/// Prepared average operator `A_k` for one grid geometry.
pub struct AverageOperator {
    region: RootRegion,
    k: i32,
    /// Offsets (cells) and weights: `A f(i) = Σ w f(i + o)`.
    stencil: Vec<(Vec<i64>, f64)>,
    flagged: Vec<bool>,
    flagged_count: usize,
    fft: Option<FftKernel>,
}

struct FftKernel {
    shape: Vec<usize>,
    lo: Vec<i64>,
    spectrum: Vec<Complex<f64>>,
    forward: Vec<Arc<dyn rustfft::Fft<f64>>>,
    inverse: Vec<Arc<dyn rustfft::Fft<f64>>>,
}

// Stencil size times cell count above which FFT convolution is used.
const DIRECT_LIMIT: usize = 1 << 25;

impl AverageOperator {
    pub fn new(region: RootRegion, k: i32, opts: &AverageOptions) -> Result<Self> {
        let dim = region.dim;
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let h = 2f64.powi(region.base_scale);
        let r = 2f64.powi(k);
        let count = opts.quad_points.unwrap_or_else(|| auto_quad_points(dim, r, h));
        let nodes = sphere_nodes(dim, count)?;
        if let Some(cap) = &opts.cutoff {
            if cap.direction.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: cap.direction.len(),
                });
            }
        }
        // The cut average is the convolution f ∗ dσ_k, so nodes enter with a minus sign.
        let sign = if opts.cutoff.is_some() { -1.0 } else { 1.0 };
        let w0 = 1.0 / count as f64;
        let mut acc: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        let mut omin = vec![f64::INFINITY; dim];
        let mut omax = vec![f64::NEG_INFINITY; dim];
        for y in &nodes {
            let w = match &opts.cutoff {
                Some(cap) => w0 * cap.weight(y),
                None => w0,
            };
            if w == 0.0 {
                continue;
            }
            let o: Vec<f64> = y.iter().map(|c| sign * r * c / h).collect();
            for j in 0..dim {
                omin[j] = omin[j].min(o[j]);
                omax[j] = omax[j].max(o[j]);
            }
            let a: Vec<i64> = o.iter().map(|x| x.floor() as i64).collect();
            let t: Vec<f64> = o.iter().zip(&a).map(|(x, &f)| x - f as f64).collect();
            for corner in 0..1usize << dim {
                let mut wc = w;
                let mut off = a.clone();
                for j in 0..dim {
                    if (corner >> j) & 1 == 1 {
                        wc *= t[j];
                        off[j] += 1;
                    } else {
                        wc *= 1.0 - t[j];
                    }
                }
                if wc != 0.0 {
                    *acc.entry(off).or_insert(0.0) += wc;
                }
            }
        }
        let stencil: Vec<(Vec<i64>, f64)> = acc.into_iter().collect();
        let n = region.cells_per_axis() as usize;
        let total = n.pow(dim as u32);
        let mut flagged = vec![false; total];
        let mut flagged_count = 0;
        if !stencil.is_empty() {
            let mut idx = vec![0usize; dim];
            for (flat, f) in flagged.iter_mut().enumerate() {
                let mut rem = flat;
                for j in (0..dim).rev() {
                    idx[j] = rem % n;
                    rem /= n;
                }
                // sample point index coordinate is i + o; the root is [-1/2, n - 1/2) in these units
                let out = (0..dim).any(|j| {
                    let c = idx[j] as f64;
                    c + omin[j] < -0.5 || c + omax[j] >= n as f64 - 0.5
                });
                if out {
                    *f = true;
                    flagged_count += 1;
                }
            }
        }
        if opts.boundary == Boundary::Reject && flagged_count > 0 {
            return Err(Error::SphereExitsRoot { k });
        }
        let fft = if stencil.len().saturating_mul(total) > DIRECT_LIMIT {
            Some(FftKernel::new(&stencil, n, dim))
        } else {
            None
        };
        Ok(AverageOperator {
            region,
            k,
            stencil,
            flagged,
            flagged_count,
            fft,
        })
    }

    pub fn k(&self) -> i32 {
        self.k
    }

    pub fn stencil(&self) -> &[(Vec<i64>, f64)] {
        &self.stencil
    }

    /// Cells whose sphere leaves the root.
    pub fn flagged(&self) -> &[bool] {
        &self.flagged
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged_count
    }

    pub fn apply<F: Sample>(&self, f: &GridFunction<F>) -> Result<GridFunction<F>> {
        if *f.region() != self.region {
            return Err(Error::RegionMismatch);
        }
        let src: Vec<f64> = f.values().iter().map(|v| v.to_f64().unwrap_or(0.0)).collect();
        let out = match &self.fft {
            Some(k) => k.apply(&src),
            None => self.apply_direct(&src),
        };
        GridFunction::new(self.region, out.into_iter().map(|v| F::from(v).unwrap_or_else(F::zero)).collect())
    }

    fn apply_direct(&self, src: &[f64]) -> Vec<f64> {
        let dim = self.region.dim;
        let n = self.region.cells_per_axis() as usize;
        let flat_off: Vec<(Vec<i64>, i64, f64)> = self
            .stencil
            .iter()
            .map(|(o, w)| (o.clone(), o.iter().fold(0i64, |a, &x| a * n as i64 + x), *w))
            .collect();
        let mut out = vec![0.0; src.len()];
        out.par_chunks_mut(n).enumerate().for_each(|(row, chunk)| {
            let mut idx = vec![0i64; dim];
            let mut rem = row;
            for j in (0..dim - 1).rev() {
                idx[j] = (rem % n) as i64;
                rem /= n;
            }
            for (last, slot) in chunk.iter_mut().enumerate() {
                idx[dim - 1] = last as i64;
                let flat = (row * n + last) as i64;
                let mut s = 0.0;
                for (o, fo, w) in &flat_off {
                    if (0..dim).all(|j| {
                        let c = idx[j] + o[j];
                        c >= 0 && c < n as i64
                    }) {
                        s += w * src[(flat + fo) as usize];
                    }
                }
                *slot = s;
            }
        });
        out
    }
}

impl FftKernel {
    fn new(stencil: &[(Vec<i64>, f64)], n: usize, dim: usize) -> Self {
        // A f(i) = Σ_o w_o f(i + o) = Σ_m K(m) f(i − m) with K(m) = w_{−m}.
        let mut lo = vec![i64::MAX; dim];
        let mut hi = vec![i64::MIN; dim];
        for (o, _) in stencil {
            for j in 0..dim {
                lo[j] = lo[j].min(-o[j]);
                hi[j] = hi[j].max(-o[j]);
            }
        }
        let shape: Vec<usize> = (0..dim)
            .map(|j| (n + (hi[j] - lo[j]) as usize).next_power_of_two())
            .collect();
        let total: usize = shape.iter().product();
        let mut kern = vec![Complex::new(0.0, 0.0); total];
        for (o, w) in stencil {
            let flat = (0..dim).fold(0usize, |acc, j| acc * shape[j] + (-o[j] - lo[j]) as usize);
            kern[flat].re += w;
        }
        let mut planner = FftPlanner::new();
        let forward: Vec<_> = shape.iter().map(|&s| planner.plan_fft_forward(s)).collect();
        let inverse: Vec<_> = shape.iter().map(|&s| planner.plan_fft_inverse(s)).collect();
        fft_nd(&mut kern, &shape, &forward);
        FftKernel {
            shape,
            lo,
            spectrum: kern,
            forward,
            inverse,
        }
    }

    fn apply(&self, src: &[f64]) -> Vec<f64> {
        let dim = self.shape.len();
        let n = (src.len() as f64).powf(1.0 / dim as f64).round() as usize;
        let total: usize = self.shape.iter().product();
        let mut buf = vec![Complex::new(0.0, 0.0); total];
        for (flat, &v) in src.iter().enumerate() {
            let mut rem = flat;
            let mut pos = 0usize;
            let mut stride = 1usize;
            for j in (0..dim).rev() {
                pos += (rem % n) * stride;
                stride *= self.shape[j];
                rem /= n;
            }
            buf[pos].re = v;
        }
        fft_nd(&mut buf, &self.shape, &self.forward);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        fft_nd(&mut buf, &self.shape, &self.inverse);
        let scale = 1.0 / total as f64;
        let mut out = vec![0.0; src.len()];
        for (flat, o) in out.iter_mut().enumerate() {
            let mut rem = flat;
            let mut pos = 0usize;
            let mut stride = 1usize;
            for j in (0..dim).rev() {
                // result for index i sits at i − lo
                pos += ((rem % n) as i64 - self.lo[j]) as usize * stride;
                stride *= self.shape[j];
                rem /= n;
            }
            *o = buf[pos].re * scale;
        }
        out
    }
}

/// In-place multidimensional FFT, one axis at a time, last axis contiguous.
fn fft_nd(data: &mut [Complex<f64>], shape: &[usize], plans: &[Arc<dyn rustfft::Fft<f64>>]) {
    let dim = shape.len();
    let total = data.len();
    for axis in 0..dim {
        let len = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        let plan = &plans[axis];
        if stride == 1 {
            data.par_chunks_mut(len).for_each(|line| plan.process(line));
            continue;
        }
        let block = len * stride;
        data.par_chunks_mut(block).for_each(|chunk| {
            let mut line = vec![Complex::new(0.0, 0.0); len];
            for s in 0..stride {
                for (i, l) in line.iter_mut().enumerate() {
                    *l = chunk[i * stride + s];
                }
                plan.process(&mut line);
                for (i, l) in line.iter().enumerate() {
                    chunk[i * stride + s] = *l;
                }
            }
        });
        debug_assert_eq!(total % block, 0);
    }
}

/// `A_k f` on every cell.
pub fn spherical_average<F: Sample>(f: &GridFunction<F>, k: i32, opts: &AverageOptions) -> Result<GridFunction<F>> {
    AverageOperator::new(*f.region(), k, opts)?.apply(f)
}

/// `A_k f(x)` at one point by direct quadrature; also reports whether a node left the root.
pub fn spherical_average_at<F: Sample>(
    f: &GridFunction<F>,
    x: &[f64],
    k: i32,
    opts: &AverageOptions,
) -> Result<(f64, bool)> {
    let dim = f.dim();
    let r = 2f64.powi(k);
    let count = opts.quad_points.unwrap_or_else(|| auto_quad_points(dim, r, f.cell_side()));
    let nodes = sphere_nodes(dim, count)?;
    let sign = if opts.cutoff.is_some() { -1.0 } else { 1.0 };
    let mut acc = 0.0;
    let mut out = false;
    let mut p = vec![0.0; dim];
    for y in &nodes {
        let w = opts.cutoff.as_ref().map_or(1.0, |c| c.weight(y));
        if w == 0.0 {
            continue;
        }
        for j in 0..dim {
            p[j] = x[j] + sign * r * y[j];
        }
        let (v, o) = f.interpolate(&p);
        out |= o;
        acc += w * v;
    }
    if out && opts.boundary == Boundary::Reject {
        return Err(Error::SphereExitsRoot { k });
    }
    Ok((acc / count as f64, out))
}

/// Prepared operators for a range of radii.
pub struct MaximalOperator {
    k_min: i32,
    k_max: i32,
    ops: Vec<AverageOperator>,
    flagged: Vec<bool>,
}

impl MaximalOperator {
    pub fn new(region: RootRegion, k_min: i32, k_max: i32, opts: &AverageOptions) -> Result<Self> {
        if k_min > k_max {
            return Err(Error::OutOfRange(format!("empty k range [{k_min}, {k_max}]")));
        }
        if k_max > region.root_scale {
            return Err(Error::OutOfRange(format!(
                "radius 2^{k_max} exceeds the root side 2^{}",
                region.root_scale
            )));
        }
        let ops: Vec<AverageOperator> = (k_min..=k_max)
            .into_par_iter()
            .map(|k| AverageOperator::new(region, k, opts))
            .collect::<Result<_>>()?;
        let mut flagged = vec![false; ops[0].flagged.len()];
        for op in &ops {
            for (f, &o) in flagged.iter_mut().zip(&op.flagged) {
                *f |= o;
            }
        }
        Ok(MaximalOperator {
            k_min,
            k_max,
            ops,
            flagged,
        })
    }

    pub fn flagged(&self) -> &[bool] {
        &self.flagged
    }

    pub fn operators(&self) -> &[AverageOperator] {
        &self.ops
    }

    pub fn apply<F: Sample>(&self, f: &GridFunction<F>, retain: bool) -> Result<MaximalResult<F>> {
        let per: Vec<GridFunction<F>> = self.ops.iter().map(|op| op.apply(f)).collect::<Result<_>>()?;
        let mut sup = GridFunction::<F>::zeros(*f.region());
        for a in &per {
            for (s, v) in sup.values_mut().iter_mut().zip(a.values()) {
                *s = s.max(v.abs());
            }
        }
        Ok(MaximalResult {
            k_min: self.k_min,
            k_max: self.k_max,
            per_k: if retain { Some(per) } else { None },
            sup,
            flagged: self.flagged.clone(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct MaximalResult<F> {
    pub k_min: i32,
    pub k_max: i32,
    /// `A_k f` for `k = k_min..=k_max`, when retained.
    pub per_k: Option<Vec<GridFunction<F>>>,
    /// `max_k |A_k f|`.
    pub sup: GridFunction<F>,
    /// Cells where some sphere in the range left the root.
    pub flagged: Vec<bool>,
}

/// `sup_{k_min ≤ k ≤ k_max} |A_k f|`.
pub fn lacunary_maximal<F: Sample>(
    f: &GridFunction<F>,
    k_min: i32,
    k_max: i32,
    opts: &AverageOptions,
    retain: bool,
) -> Result<MaximalResult<F>> {
    MaximalOperator::new(*f.region(), k_min, k_max, opts)?.apply(f, retain)
}

/// `|{h > α}|` by cell count.
pub fn superlevel_measure<F: Sample>(h: &GridFunction<F>, alpha: f64) -> f64 {
    superlevel_measure_masked(h, alpha, None)
}

/// `|{h > α}|` over cells not excluded by `mask`.
pub fn superlevel_measure_masked<F: Sample>(h: &GridFunction<F>, alpha: f64, mask: Option<&[bool]>) -> f64 {
    let count = h
        .values()
        .iter()
        .enumerate()
        .filter(|(i, v)| mask.is_none_or(|m| !m[*i]) && v.to_f64().unwrap_or(0.0) > alpha)
        .count();
    count as f64 * h.cell_measure()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakTypeRow {
    pub alpha: f64,
    /// `|{Mf > α}|` over unflagged cells.
    pub superlevel: f64,
    /// `∫ Φ(|f|/α)`.
    pub phi_integral: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakTypeReport {
    pub rows: Vec<WeakTypeRow>,
    pub sup_ratio: f64,
    pub flagged_cells: usize,
}

/// `R(α) = |{Mf > α}| / ∫ Φ(|f|/α)` for each `α`, flagged cells excluded
/// from the numerator.
pub fn weak_type_ratio<F: Sample>(f: &GridFunction<F>, m: &MaximalResult<F>, alphas: &[f64]) -> Result<WeakTypeReport> {
    if f.values().iter().all(|v| v.is_zero()) {
        return Err(Error::OutOfRange("weak-type ratio needs a nonzero function".into()));
    }
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !(alpha > 0.0) {
            return Err(Error::OutOfRange(format!("alpha must be positive, got {alpha}")));
        }
        let superlevel = superlevel_measure_masked(&m.sup, alpha, Some(&m.flagged));
        let phi_integral: f64 = f
            .values()
            .iter()
            .map(|v| crate::cz::phi(v.to_f64().unwrap_or(0.0).abs() / alpha).unwrap_or(0.0))
            .sum::<f64>()
            * f.cell_measure();
        rows.push(WeakTypeRow {
            alpha,
            superlevel,
            phi_integral,
            ratio: superlevel / phi_integral,
        });
    }
    let sup_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(WeakTypeReport {
        rows,
        sup_ratio,
        flagged_cells: m.flagged.iter().filter(|&&b| b).count(),
    })
}

/// `‖Mf‖₂ / ‖f‖₂`.
pub fn l2_ratio<F: Sample>(f: &GridFunction<F>, m: &MaximalResult<F>) -> f64 {
    m.sup.l2_norm() / f.l2_norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region() -> RootRegion {
        RootRegion::new(2, 0, -6).unwrap()
    }

    #[test]
    fn constants_are_fixed_away_from_the_edge() {
        let f = GridFunction::<f64>::from_fn(region(), |_| 2.5);
        let op = AverageOperator::new(region(), -3, &AverageOptions::default()).unwrap();
        let a = op.apply(&f).unwrap();
        let mut checked = 0;
        for (i, v) in a.values().iter().enumerate() {
            if !op.flagged()[i] {
                assert!((v - 2.5).abs() < 1e-12);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn fft_and_direct_agree() {
        let r = region();
        let f = GridFunction::<f64>::from_fn(r, |x| (7.0 * x[0]).sin() + x[1] * x[1]);
        let op = AverageOperator::new(r, -2, &AverageOptions::default()).unwrap();
        let direct = op.apply_direct(f.values());
        let kern = FftKernel::new(op.stencil(), r.cells_per_axis() as usize, 2);
        let fft = kern.apply(f.values());
        for (a, b) in direct.iter().zip(&fft) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_functions_are_reproduced() {
        let r = region();
        let f = GridFunction::<f64>::from_fn(r, |x| 0.3 * x[0] - 1.7 * x[1]);
        let op = AverageOperator::new(r, -3, &AverageOptions::default()).unwrap();
        let a = op.apply(&f).unwrap();
        for (i, v) in a.values().iter().enumerate() {
            if !op.flagged()[i] {
                assert!((v - f.values()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cap_rejects_antipodal_sizes() {
        assert!(CapSpec::new(vec![1.0, 0.0], 0.3).is_err());
        assert!(CapSpec::new(vec![0.0, 0.0], 0.1).is_err());
        let c = CapSpec::new(vec![2.0, 0.0], 0.25).unwrap();
        assert_eq!(c.weight(&[1.0, 0.0]), 1.0);
        assert_eq!(c.weight(&[0.0, 1.0]), 0.0);
    }

    #[test]
    fn reject_boundary_errors() {
        let opts = AverageOptions {
            boundary: Boundary::Reject,
            ..Default::default()
        };
        assert!(matches!(
            AverageOperator::new(region(), -2, &opts),
            Err(Error::SphereExitsRoot { k: -2 })
        ));
    }

    #[test]
    fn superlevel_basics() {
        let r = region();
        let z = GridFunction::<f64>::zeros(r);
        assert_eq!(superlevel_measure(&z, 1.0), 0.0);
        let ind = GridFunction::<f64>::from_fn(r, |x| if x[0] < 0.25 { 1.0 } else { 0.0 });
        assert_eq!(superlevel_measure(&ind, 0.5), 0.25);
    }
}
