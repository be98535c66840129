use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Dyadic;

/// Half-open dyadic cube `prod_j [i_j 2^s, (i_j + 1) 2^s)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub scale: i32,
    pub corner: Vec<i64>,
}

impl DyadicCube {
    pub fn new(scale: i32, corner: Vec<i64>) -> Self {
        DyadicCube { scale, corner }
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    /// Side length `2^scale`.
    pub fn side(&self) -> Dyadic {
        Dyadic::pow2(self.scale as i64)
    }

    /// Lebesgue measure `2^(scale * dim)`.
    pub fn measure(&self) -> Dyadic {
        Dyadic::pow2(self.scale as i64 * self.dim() as i64)
    }

    /// The `2^dim` children in Morton order: bit `j` of the child index selects
    /// the upper half along axis `j`.
    pub fn children(&self) -> Vec<DyadicCube> {
        (0..1usize << self.dim()).map(|c| self.child(c)).collect()
    }

    pub fn child(&self, index: usize) -> DyadicCube {
        let corner = self
            .corner
            .iter()
            .enumerate()
            .map(|(j, &i)| 2 * i + ((index >> j) & 1) as i64)
            .collect();
        DyadicCube::new(self.scale - 1, corner)
    }

    pub fn parent(&self) -> DyadicCube {
        DyadicCube::new(self.scale + 1, self.corner.iter().map(|&i| i >> 1).collect())
    }

    /// Ancestor (or self) at a coarser scale.
    pub fn ancestor(&self, scale: i32) -> DyadicCube {
        assert!(scale >= self.scale);
        let shift = (scale - self.scale) as u32;
        DyadicCube::new(scale, self.corner.iter().map(|&i| i >> shift).collect())
    }

    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.scale <= self.scale && other.ancestor(self.scale) == *self
    }

    pub fn intersects(&self, other: &DyadicCube) -> bool {
        self.contains(other) || other.contains(self)
    }

    /// Lower and upper corner in units of `2^unit_scale` (requires `unit_scale <= scale`).
    pub fn bounds_at(&self, unit_scale: i32) -> (Vec<i64>, Vec<i64>) {
        assert!(unit_scale <= self.scale);
        let f = 1i64 << (self.scale - unit_scale);
        let lo: Vec<i64> = self.corner.iter().map(|&i| i * f).collect();
        let hi = lo.iter().map(|&x| x + f).collect();
        (lo, hi)
    }

    /// Center coordinates as floats.
    pub fn center_f64(&self) -> Vec<f64> {
        let h = 2f64.powi(self.scale);
        self.corner.iter().map(|&i| (i as f64 + 0.5) * h).collect()
    }

    /// Child index of `self` inside its parent.
    pub fn child_index(&self) -> usize {
        self.corner
            .iter()
            .enumerate()
            .map(|(j, &i)| ((i & 1) as usize) << j)
            .sum()
    }

    /// Morton order: a cube precedes its descendants; otherwise cubes are
    /// ordered by the interleaved bits of their corners at the finer scale.
    pub fn morton_cmp(&self, other: &DyadicCube) -> Ordering {
        let s = self.scale.min(other.scale);
        let a = self.ancestor_free_key(s);
        let b = other.ancestor_free_key(s);
        match cmp_interleaved(&a, &b) {
            Ordering::Equal => other.scale.cmp(&self.scale),
            o => o,
        }
    }

    fn ancestor_free_key(&self, scale: i32) -> Vec<i64> {
        let shift = (self.scale - scale) as u32;
        self.corner.iter().map(|&i| i << shift).collect()
    }
}

fn cmp_interleaved(a: &[i64], b: &[i64]) -> Ordering {
    // Compare the interleaved bit strings; the highest differing bit decides, with
    // ties inside a bit level broken by the highest axis index.
    let mut best: Option<(u32, usize)> = None;
    for j in 0..a.len() {
        let x = (a[j] ^ b[j]) as u64;
        if x == 0 {
            continue;
        }
        let bit = 63 - x.leading_zeros();
        match best {
            None => best = Some((bit, j)),
            Some((bb, bj)) => {
                if bit > bb || (bit == bb && j > bj) {
                    best = Some((bit, j));
                }
            }
        }
    }
    match best {
        None => Ordering::Equal,
        Some((bit, j)) => {
            let mask = 1i64 << bit;
            if a[j] & mask != 0 {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q(s={}, i={:?})", self.scale, self.corner)
    }
}

/// The ambient grid: root cube `[0, 2^root_scale)^dim` and the finest scale
/// admitted for inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RootRegion {
    pub dim: usize,
    pub root_scale: i32,
    pub base_scale: i32,
}

impl RootRegion {
    pub fn new(dim: usize, root_scale: i32, base_scale: i32) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidRegion(format!("dimension {dim} < 2")));
        }
        if dim > 6 {
            return Err(Error::InvalidRegion(format!("dimension {dim} > 6 unsupported")));
        }
        if base_scale >= root_scale {
            return Err(Error::InvalidRegion(format!(
                "base scale {base_scale} must be below root scale {root_scale}"
            )));
        }
        if root_scale - base_scale > 40 || root_scale.abs() > 40 || base_scale.abs() > 60 {
            return Err(Error::InvalidRegion("scales out of supported range".into()));
        }
        Ok(RootRegion {
            dim,
            root_scale,
            base_scale,
        })
    }

    pub fn root_cube(&self) -> DyadicCube {
        DyadicCube::new(self.root_scale, vec![0; self.dim])
    }

    pub fn contains_cube(&self, q: &DyadicCube) -> bool {
        if q.dim() != self.dim || q.scale > self.root_scale {
            return false;
        }
        let n = 1i64 << (self.root_scale - q.scale);
        q.corner.iter().all(|&i| i >= 0 && i < n)
    }

    /// Number of base cells along one axis.
    pub fn cells_per_axis(&self) -> i64 {
        1i64 << (self.root_scale - self.base_scale)
    }

    pub fn root_measure(&self) -> Dyadic {
        Dyadic::pow2(self.root_scale as i64 * self.dim as i64)
    }

    /// All base cells in Morton order are not materialized; this iterates them
    /// in row-major order (last axis fastest).
    pub fn base_cells(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        let n = self.cells_per_axis();
        let total = (n as u128).pow(self.dim as u32) as u64;
        let dim = self.dim;
        let s = self.base_scale;
        (0..total).map(move |mut idx| {
            let mut corner = vec![0i64; dim];
            for j in (0..dim).rev() {
                corner[j] = (idx % n as u64) as i64;
                idx /= n as u64;
            }
            DyadicCube::new(s, corner)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_partition_the_cube() {
        let q = DyadicCube::new(0, vec![0, 0]);
        let ch = q.children();
        assert_eq!(ch.len(), 4);
        for c in &ch {
            assert_eq!(c.scale, -1);
            assert_eq!(c.parent(), q);
            assert!(q.contains(c));
        }
        let total: Dyadic = ch.iter().map(|c| c.measure()).sum();
        assert_eq!(total, q.measure());
        assert_eq!(DyadicCube::new(0, vec![0, 0, 0]).children().len(), 8);
    }

    #[test]
    fn children_are_morton_sorted_and_disjoint() {
        let q = DyadicCube::new(2, vec![1, 3, 0]);
        let ch = q.children();
        for w in ch.windows(2) {
            assert_eq!(w[0].morton_cmp(&w[1]), Ordering::Less);
        }
        for a in 0..ch.len() {
            for b in 0..ch.len() {
                assert_eq!(ch[a].intersects(&ch[b]), a == b);
            }
        }
    }

    #[test]
    fn morton_puts_ancestors_first() {
        let q = DyadicCube::new(0, vec![0, 0]);
        let c = q.child(3).child(0);
        assert_eq!(q.morton_cmp(&c), Ordering::Less);
        assert_eq!(c.morton_cmp(&q), Ordering::Greater);
        let other = q.child(1);
        assert_eq!(c.morton_cmp(&other), Ordering::Greater);
    }

    #[test]
    fn region_validation() {
        assert!(RootRegion::new(1, 0, -3).is_err());
        assert!(RootRegion::new(2, 0, 0).is_err());
        let r = RootRegion::new(2, 0, -3).unwrap();
        assert!(r.contains_cube(&DyadicCube::new(-3, vec![7, 7])));
        assert!(!r.contains_cube(&DyadicCube::new(-3, vec![8, 0])));
        assert!(!r.contains_cube(&DyadicCube::new(-3, vec![-1, 0])));
        assert_eq!(r.base_cells().count(), 64);
    }
}
