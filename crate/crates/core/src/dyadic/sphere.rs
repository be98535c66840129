//! Outer approximation of Minkowski sums `E + S_k` with the sphere of radius `2^k`.

use std::collections::BTreeMap;

use super::cube::{DyadicCube, RootRegion};
use super::set::{GranularSet, Node};
use crate::error::{Error, Result};
use crate::scalar::Dyadic;

/// Union of cell runs along the last axis, at a fixed cell scale. Rows are
/// keyed by the cell indices of the leading `dim - 1` axes.
#[derive(Clone, Debug, Default)]
pub struct RowCover {
    scale: i32,
    dim: usize,
    rows: BTreeMap<Vec<i64>, Vec<(i64, i64)>>,
}

impl RowCover {
    pub fn new(dim: usize, scale: i32) -> Self {
        RowCover {
            scale,
            dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn scale(&self) -> i32 {
        self.scale
    }

    /// Add the half-open run `[lo, hi)` of cells to a row.
    pub fn add(&mut self, row: &[i64], lo: i64, hi: i64) {
        if lo >= hi {
            return;
        }
        self.rows.entry(row.to_vec()).or_default().push((lo, hi));
    }

    /// Merge overlapping runs in every row.
    pub fn normalize(&mut self) {
        for runs in self.rows.values_mut() {
            runs.sort_unstable();
            let mut merged: Vec<(i64, i64)> = Vec::with_capacity(runs.len());
            for &(a, b) in runs.iter() {
                match merged.last_mut() {
                    Some(last) if a <= last.1 => last.1 = last.1.max(b),
                    _ => merged.push((a, b)),
                }
            }
            *runs = merged;
        }
    }

    pub fn extend(&mut self, other: &RowCover) {
        assert_eq!(self.scale, other.scale);
        for (row, runs) in &other.rows {
            self.rows.entry(row.clone()).or_default().extend_from_slice(runs);
        }
    }

    pub fn cell_count(&self) -> u64 {
        self.rows
            .values()
            .flat_map(|r| r.iter())
            .map(|&(a, b)| (b - a) as u64)
            .sum()
    }

    /// Measure assuming runs are normalized.
    pub fn measure(&self) -> Dyadic {
        Dyadic::new(
            num_bigint::BigInt::from(self.cell_count()),
            self.scale as i64 * self.dim as i64,
        )
    }

    /// Drop everything outside the root and report whether anything was dropped.
    pub fn clip_to_root(&mut self, region: &RootRegion) -> bool {
        let n = 1i64 << (region.root_scale - self.scale);
        let mut clipped = false;
        self.rows.retain(|row, runs| {
            if row.iter().any(|&x| x < 0 || x >= n) {
                clipped = true;
                return false;
            }
            for run in runs.iter_mut() {
                if run.0 < 0 || run.1 > n {
                    clipped = true;
                }
                run.0 = run.0.max(0);
                run.1 = run.1.min(n);
            }
            runs.retain(|r| r.0 < r.1);
            !runs.is_empty()
        });
        clipped
    }

    pub fn to_set(&self, region: RootRegion) -> GranularSet {
        let mut root = Node::Empty;
        let rc = region.root_cube();
        let mut lo = vec![0i64; self.dim];
        let mut hi = vec![0i64; self.dim];
        for (row, runs) in &self.rows {
            for j in 0..self.dim - 1 {
                lo[j] = row[j];
                hi[j] = row[j] + 1;
            }
            for &(a, b) in runs {
                lo[self.dim - 1] = a;
                hi[self.dim - 1] = b;
                root.fill_box(&rc, &lo, &hi, self.scale);
            }
        }
        GranularSet::from_node(region, root)
    }
}

/// Result of [`minkowski_sum_sphere`].
#[derive(Clone, Debug)]
pub struct SphereSum {
    pub set: GranularSet,
    /// Some approximating cells fell outside the root and were dropped.
    pub clipped: bool,
}

/// Cells at `approx_scale` whose center lies within `2^approx_scale * sqrt(d)`
/// of a point at distance exactly `2^k` from `E`. Contains `E + S_k`.
///
/// Cells outside the root are an error unless `allow_clip` is set, in which
/// case they are dropped and `clipped` is reported.
pub fn minkowski_sum_sphere(
    e: &GranularSet,
    k: i32,
    approx_scale: i32,
    allow_clip: bool,
) -> Result<SphereSum> {
    let region = *e.region();
    if approx_scale > region.root_scale {
        return Err(Error::OutOfRange(format!(
            "approximation scale {approx_scale} above the root scale"
        )));
    }
    let mut cover = sphere_sum_rows(&e.cubes(), k, approx_scale);
    let clipped = cover.clip_to_root(&region);
    if clipped && !allow_clip {
        return Err(Error::SphereExitsRoot { k });
    }
    Ok(SphereSum {
        set: cover.to_set(region),
        clipped,
    })
}

/// Row-run form of the outer approximation of `(∪ cubes) + S_k`, unclipped and normalized.
pub fn sphere_sum_rows(cubes: &[DyadicCube], k: i32, approx_scale: i32) -> RowCover {
    let mut cover = RowCover::new(cubes.first().map_or(2, |q| q.dim()), approx_scale);
    for b in cubes {
        add_cube_sphere_rows(&mut cover, b, k, approx_scale);
    }
    cover.normalize();
    cover
}

// Relative slack on float comparisons so that rounding only ever enlarges the result.
const SLACK: f64 = 1e-9;

fn add_cube_sphere_rows(cover: &mut RowCover, b: &DyadicCube, k: i32, approx_scale: i32) {
    let dim = b.dim();
    let h = 2f64.powi(approx_scale);
    let radius = 2f64.powi(k);
    let delta = h * (dim as f64).sqrt();
    let outer = (radius + delta) * (1.0 + SLACK);
    let inner = (radius - delta) * (1.0 - SLACK);
    let side = 2f64.powi(b.scale);
    let blo: Vec<f64> = b.corner.iter().map(|&i| i as f64 * side).collect();
    let bhi: Vec<f64> = blo.iter().map(|x| x + side).collect();

    // Cell index ranges of the bounding box of {dist(c, B) <= outer}.
    let range = |j: usize| -> (i64, i64) {
        let lo = ((blo[j] - outer) / h - 0.5).floor() as i64 - 1;
        let hi = ((bhi[j] + outer) / h - 0.5).ceil() as i64 + 1;
        (lo, hi + 1)
    };
    let lead: Vec<(i64, i64)> = (0..dim - 1).map(range).collect();
    let last = dim - 1;
    let center = |i: i64| (i as f64 + 0.5) * h;

    let mut row = lead.iter().map(|r| r.0).collect::<Vec<_>>();
    if lead.iter().any(|r| r.0 >= r.1) {
        return;
    }
    loop {
        let mut gap2 = 0.0;
        let mut far2 = 0.0;
        for j in 0..dim - 1 {
            let c = center(row[j]);
            let g = (blo[j] - c).max(c - bhi[j]).max(0.0);
            let f = (c - blo[j]).abs().max((c - bhi[j]).abs());
            gap2 += g * g;
            far2 += f * f;
        }
        let rem = outer * outer - gap2;
        if rem >= 0.0 {
            let w = rem.sqrt();
            let i0 = ((blo[last] - w) / h - 0.5).ceil() as i64;
            let i1 = ((bhi[last] + w) / h - 0.5).floor() as i64;
            if i0 <= i1 {
                // Exclude centers whose farthest point of B is closer than `inner`.
                let rem_in = if inner > 0.0 { inner * inner - far2 } else { -1.0 };
                if rem_in > 0.0 {
                    let w2 = rem_in.sqrt();
                    // far_last < w2  <=>  bhi - w2 < c < blo + w2
                    let e0 = ((bhi[last] - w2) / h - 0.5).floor() as i64 + 1;
                    let e1 = ((blo[last] + w2) / h - 0.5).ceil() as i64 - 1;
                    if e0 <= e1 {
                        cover.add(&row, i0, e0.min(i1 + 1).max(i0));
                        cover.add(&row, (e1 + 1).max(i0), i1 + 1);
                    } else {
                        cover.add(&row, i0, i1 + 1);
                    }
                } else {
                    cover.add(&row, i0, i1 + 1);
                }
            }
        }
        // advance the row odometer
        let mut j = dim - 1;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            row[j] += 1;
            if row[j] < lead[j].1 {
                break;
            }
            row[j] = lead[j].0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region() -> RootRegion {
        RootRegion::new(2, 1, -5).unwrap()
    }

    #[test]
    fn empty_set_gives_empty_sum() {
        let e = GranularSet::empty(region());
        let s = minkowski_sum_sphere(&e, -2, -5, false).unwrap();
        assert!(s.set.is_empty());
        assert!(!s.clipped);
    }

    #[test]
    fn contains_grid_aligned_translate() {
        let r = region();
        let q = DyadicCube::new(-5, vec![20, 31]);
        let e = GranularSet::from_cubes(r, [q].iter(), false).unwrap();
        let s = minkowski_sum_sphere(&e, -2, -5, false).unwrap();
        // translate by 1/4 = 8 cells along axis 0
        let t = DyadicCube::new(-5, vec![28, 31]);
        assert!(s.set.measure_in(&t) == t.measure());
        // the set itself is at distance 0 from E, not 1/4
        let inside = DyadicCube::new(-5, vec![20, 31]);
        assert!(s.set.measure_in(&inside).is_zero());
    }

    #[test]
    fn exits_root_is_reported() {
        let r = region();
        let e = GranularSet::from_cubes(r, [DyadicCube::new(-5, vec![0, 0])].iter(), false).unwrap();
        assert!(matches!(
            minkowski_sum_sphere(&e, -2, -5, false),
            Err(Error::SphereExitsRoot { k: -2 })
        ));
        let s = minkowski_sum_sphere(&e, -2, -5, true).unwrap();
        assert!(s.clipped);
        assert!(!s.set.is_empty());
    }
}
