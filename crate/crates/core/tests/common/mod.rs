//! Brute-force oracles and instance families shared by the integration tests.
//!
//! Everything here works on base-cell rasters and explicit enumeration, never
//! on the region trees the library uses, so agreement is meaningful.

#![allow(dead_code)]

use std::collections::HashSet;

use lacunary::gen::FunctionParams;
use lacunary::scalar::{pow2, ratio};
use lacunary::{DyadicCube, GranularSet, Rational, RootRegion};
use num_traits::ToPrimitive;
use rand::Rng;

/// Base-cell occupancy, row-major with the last axis fastest.
pub struct Raster {
    pub region: RootRegion,
    pub cells: Vec<bool>,
}

impl Raster {
    pub fn of(e: &GranularSet) -> Self {
        Raster {
            region: *e.region(),
            cells: e.rasterize(),
        }
    }

    fn n(&self) -> i64 {
        self.region.cells_per_axis()
    }

    /// Flat indices of the base cells inside `q`.
    pub fn cells_of(&self, q: &DyadicCube) -> Vec<usize> {
        let base = self.region.base_scale;
        let side = 1i64 << (q.scale - base);
        let dim = self.region.dim;
        let n = self.n();
        let total = side.pow(dim as u32);
        (0..total)
            .map(|mut t| {
                let mut flat = 0i64;
                for j in 0..dim {
                    let off = t % side;
                    t /= side;
                    flat = flat * n + q.corner[j] * side + off;
                }
                flat as usize
            })
            .collect()
    }

    pub fn count_in(&self, q: &DyadicCube) -> u64 {
        self.cells_of(q).into_iter().filter(|&i| self.cells[i]).count() as u64
    }

    pub fn count(&self) -> u64 {
        self.cells.iter().filter(|&&b| b).count() as u64
    }

    fn bitset(&self, idx: impl IntoIterator<Item = usize>) -> Vec<u64> {
        let mut out = vec![0u64; self.cells.len().div_ceil(64)];
        for i in idx {
            out[i / 64] |= 1 << (i % 64);
        }
        out
    }
}

/// Every dyadic cube of the region at scales `root..=lowest`.
pub fn all_cubes(region: &RootRegion, lowest: i32) -> Vec<DyadicCube> {
    let mut out = Vec::new();
    let mut stack = vec![region.root_cube()];
    while let Some(q) = stack.pop() {
        if q.scale > lowest {
            stack.extend(q.children());
        }
        out.push(q);
    }
    out
}

/// Candidate cubes in preorder together with the end of each subtree.
struct Forest {
    cubes: Vec<DyadicCube>,
    end: Vec<usize>,
}

impl Forest {
    fn new(region: &RootRegion, keep: &HashSet<DyadicCube>) -> Self {
        let mut f = Forest {
            cubes: Vec::new(),
            end: Vec::new(),
        };
        let root = region.root_cube();
        if keep.contains(&root) {
            f.visit(&root, keep);
        }
        f
    }

    fn visit(&mut self, q: &DyadicCube, keep: &HashSet<DyadicCube>) {
        let i = self.cubes.len();
        self.cubes.push(q.clone());
        self.end.push(0);
        for c in q.children() {
            if keep.contains(&c) {
                self.visit(&c, keep);
            }
        }
        self.end[i] = self.cubes.len();
    }

    /// Calls `visit` once per antichain, with the chosen indices.
    fn antichains(&self, visit: &mut impl FnMut(&[usize])) {
        let mut chosen = Vec::new();
        self.walk(0, &mut chosen, visit);
    }

    fn walk(&self, i: usize, chosen: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if i == self.cubes.len() {
            visit(chosen);
            return;
        }
        self.walk(i + 1, chosen, visit);
        chosen.push(i);
        self.walk(self.end[i], chosen, visit);
        chosen.pop();
    }
}

/// Minimum total side length over all antichains of dyadic cubes covering `E`.
///
/// Candidates are the canonical leaves of `E` and their ancestors. Cubes that
/// miss `E` only add length, and covering a full leaf by strictly smaller
/// cubes costs at least the side of the leaf, so no other cube can help.
pub fn brute_length(e: &GranularSet) -> Rational {
    let region = *e.region();
    let mut keep = HashSet::new();
    for leaf in e.cubes() {
        let mut q = leaf;
        while keep.insert(q.clone()) && q.scale < region.root_scale {
            q = q.parent();
        }
    }
    let forest = Forest::new(&region, &keep);
    let raster = Raster::of(e);
    let target = raster.bitset(raster.cells.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i));
    let masks: Vec<Vec<u64>> = forest.cubes.iter().map(|q| raster.bitset(raster.cells_of(q))).collect();
    let sides: Vec<u64> = forest.cubes.iter().map(|q| 1u64 << (q.scale - region.base_scale)).collect();
    let mut best = if e.is_empty() { Some(0) } else { None };
    let mut cover = vec![0u64; target.len()];
    forest.antichains(&mut |chosen| {
        cover.iter_mut().for_each(|w| *w = 0);
        for &i in chosen {
            for (w, m) in cover.iter_mut().zip(&masks[i]) {
                *w |= m;
            }
        }
        if target.iter().zip(&cover).all(|(t, c)| t & !c == 0) {
            let cost: u64 = chosen.iter().map(|&i| sides[i]).sum();
            best = Some(best.map_or(cost, |b: u64| b.min(cost)));
        }
    });
    ratio(best.expect("the root covers everything") as i64, 1) * pow2(region.base_scale as i64)
}

/// `max |E ∩ Q| / l(Q)` over every dyadic cube down to the base scale and a
/// few cubes above the root.
pub fn brute_thickness(e: &GranularSet) -> Rational {
    let region = *e.region();
    let raster = Raster::of(e);
    let d = region.dim as i64;
    let cell = pow2(region.base_scale as i64 * d);
    let mut best = ratio(0, 1);
    for q in all_cubes(&region, region.base_scale) {
        let v = ratio(raster.count_in(&q) as i64, 1) * &cell / pow2(q.scale as i64);
        if v > best {
            best = v;
        }
    }
    let total = ratio(raster.count() as i64, 1) * &cell;
    for up in 1..=3 {
        let v = &total / pow2((region.root_scale + up) as i64);
        if v > best {
            best = v;
        }
    }
    best
}

/// Smallest value of `2r Σ l(Q) + |E \ ∪Q|` over every antichain of cubes
/// meeting `E` at scales `root..=lowest`, compared with `r λ(E)`. Returns
/// `(min over antichains − r λ, number of antichains)` as exact values.
pub fn brute_critical_slack(e: &GranularSet, r: &Rational, lambda: &Rational, lowest: i32) -> (Rational, u64) {
    let region = *e.region();
    let raster = Raster::of(e);
    let base = region.base_scale;
    let d = region.dim as i64;
    let keep: HashSet<DyadicCube> = all_cubes(&region, lowest)
        .into_iter()
        .filter(|q| raster.count_in(q) > 0)
        .collect();
    let forest = Forest::new(&region, &keep);
    let mass: Vec<i128> = forest.cubes.iter().map(|q| raster.count_in(q) as i128).collect();
    let sides: Vec<i128> = forest.cubes.iter().map(|q| 1i128 << (q.scale - base)).collect();
    let total = raster.count() as i128;
    // In base units: r λ ≤ 2r S + M becomes p L K ≤ 2 p S K + q M with K = 2^{-base(d-1)}.
    let p = r.numer().to_i128().expect("small numerator");
    let q = r.denom().to_i128().expect("small denominator");
    let k = 1i128 << (-(base as i64) * (d - 1));
    let l = (lambda / pow2(base as i64)).to_integer().to_i128().expect("integral length");
    let mut min_key: Option<i128> = None;
    let mut count = 0u64;
    forest.antichains(&mut |chosen| {
        count += 1;
        let s: i128 = chosen.iter().map(|&i| sides[i]).sum();
        let covered: i128 = chosen.iter().map(|&i| mass[i]).sum();
        let key = 2 * p * s * k + q * (total - covered);
        min_key = Some(min_key.map_or(key, |m| m.min(key)));
    });
    let slack = min_key.expect("the empty antichain") - p * l * k;
    let unit = pow2(base as i64 * d);
    (Rational::from_integer(slack.into()) / Rational::from_integer(q.into()) * unit, count)
}

/// Union of `1..=max_cubes` random cubes with scales in `[lo, hi]`.
pub fn random_union<R: Rng>(region: RootRegion, max_cubes: usize, lo: i32, hi: i32, rng: &mut R) -> GranularSet {
    let count = rng.gen_range(1..=max_cubes);
    let mut e = GranularSet::empty(region);
    for _ in 0..count {
        let scale = rng.gen_range(lo..=hi);
        let cells = 1i64 << (region.root_scale - scale);
        let corner = (0..region.dim).map(|_| rng.gen_range(0..cells)).collect();
        let q = GranularSet::from_cube(region, &DyadicCube::new(scale, corner)).unwrap();
        e = e.union(&q).unwrap();
    }
    e
}

/// Small background with a couple of tall spikes: the regime where `Ω` is a
/// thin neighborhood of the spikes and the measured constants are meaningful.
pub fn spiky_params() -> FunctionParams {
    FunctionParams {
        density: 0.3,
        stop_prob: 0.3,
        min_value: 1e-3,
        max_value: 1.0,
        spikes: 2,
        spike_levels: 1,
        spike_min: 1100.0,
        spike_max: 3000.0,
        ..FunctionParams::default()
    }
}
