//! Whitney decomposition of a granular open set.
//!
//! Cubes are found top-down: a dyadic cube inside `Ω` is emitted as soon as
//! `d^{-1/2} dist(Q, Ωᶜ) ≥ a l(Q)`, so every emitted cube is maximal. The
//! complement includes everything outside the root unless a [`Halo`] says
//! where `Ω` continues beyond it. Near `∂Ω` the distance
//! tends to zero, so refinement stops at a floor scale and the unresolved
//! cells are returned as `boundary_layer`.
//!
//! Emission by maximality gives `d^{-1/2} dist ≤ (2a + 2) l`; every cube is
//! still checked against `b` and a violation is an error.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};

use crate::dyadic::{DyadicCube, GranularSet, Node, RootRegion};
use crate::error::{Error, Result};
use crate::scalar::Rational;

#[derive(Clone, Debug)]
pub struct WhitneyDecomposition {
    pub omega: GranularSet,
    /// Morton-sorted, pairwise disjoint.
    pub cubes: Vec<DyadicCube>,
    /// Indices into `cubes`; doubled cubes within a family are disjoint.
    pub families: Vec<Vec<usize>>,
    pub family_of: Vec<usize>,
    pub dist_lo: Rational,
    pub dist_hi: Rational,
    /// `Ω` minus the union of `cubes`.
    pub boundary_layer: GranularSet,
    pub floor_scale: i32,
    pub halo: Option<Halo>,
}

/// `Ω` continued past the root: `set` lives in a larger region in which the
/// root is the dyadic cube `window`, and `set ∩ window` is `Ω`.
#[derive(Clone, Debug, PartialEq)]
pub struct Halo {
    pub set: GranularSet,
    pub window: DyadicCube,
}

impl Halo {
    /// A cube of the root in the coordinates of the larger region.
    pub fn outer(&self, q: &DyadicCube) -> DyadicCube {
        let shift = self.window.scale - q.scale;
        DyadicCube::new(q.scale, q.corner.iter().zip(&self.window.corner).map(|(&c, &w)| c + (w << shift)).collect())
    }

    fn distance_sq(&self, q: &DyadicCube, unit: i32) -> i128 {
        distance_sq_to_complement(&self.set, &self.outer(q), unit)
    }
}

impl WhitneyDecomposition {
    pub fn family_count(&self) -> usize {
        self.families.len()
    }

    pub fn cube_set(&self) -> GranularSet {
        GranularSet::from_cubes(*self.omega.region(), self.cubes.iter(), true).expect("cubes lie in the root")
    }
}

/// Whitney decomposition with refinement down to the base scale. Errors when
/// `Ω` is nonempty and no cube can be resolved at that scale.
pub fn whitney(omega: &GranularSet, a: &Rational, b: &Rational) -> Result<WhitneyDecomposition> {
    let w = whitney_with_floor(omega, a, b, omega.region().base_scale)?;
    if w.cubes.is_empty() && !omega.is_empty() {
        return Err(Error::WhitneyResolution {
            required_scale: required_scale(omega, a),
            floor_scale: w.floor_scale,
        });
    }
    Ok(w)
}

/// Whitney decomposition refined down to `floor_scale`; whatever cannot be
/// resolved there is left in `boundary_layer`.
pub fn whitney_with_floor(
    omega: &GranularSet,
    a: &Rational,
    b: &Rational,
    floor_scale: i32,
) -> Result<WhitneyDecomposition> {
    whitney_with_halo(omega, None, a, b, floor_scale)
}

/// As [`whitney_with_floor`], with distances taken to the complement of the
/// continued set when a halo is given.
pub fn whitney_with_halo(
    omega: &GranularSet,
    halo: Option<&Halo>,
    a: &Rational,
    b: &Rational,
    floor_scale: i32,
) -> Result<WhitneyDecomposition> {
    if !a.is_positive() || b < a {
        return Err(Error::OutOfRange(format!("Whitney constants need 0 < a <= b, got a={a}, b={b}")));
    }
    let region = *omega.region();
    let floor_scale = floor_scale.min(omega.finest_scale().unwrap_or(region.base_scale));
    if let Some(h) = halo {
        if h.window.scale != region.root_scale || h.set.region().base_scale != region.base_scale {
            return Err(Error::RegionMismatch);
        }
    }
    let ctx = Ctx {
        omega,
        halo,
        unit: floor_scale,
        dim: region.dim,
        a2: Square::of(a),
        b2: Square::of(b),
    };
    let mut cubes = Vec::new();
    let mut layer = Node::Empty;
    ctx.visit(omega.root(), &region.root_cube(), false, &mut cubes, &mut layer)?;
    let family_of = color_families(&cubes, floor_scale);
    let nfam = family_of.iter().copied().max().map_or(0, |m| m + 1);
    let mut families = vec![Vec::new(); nfam];
    for (i, &f) in family_of.iter().enumerate() {
        families[f].push(i);
    }
    Ok(WhitneyDecomposition {
        omega: omega.clone(),
        cubes,
        families,
        family_of,
        dist_lo: a.clone(),
        dist_hi: b.clone(),
        boundary_layer: GranularSet::from_node(region, layer),
        floor_scale,
        halo: halo.cloned(),
    })
}

/// Scale at which the central subcube of the largest cube of `Ω` first
/// satisfies the lower distance bound.
fn required_scale(omega: &GranularSet, a: &Rational) -> i32 {
    let top = omega.cubes().iter().map(|q| q.scale).max().unwrap_or(omega.region().base_scale);
    let af = crate::scalar::rational_to_f64(a);
    let need = 2.0 * (af * (omega.dim() as f64).sqrt() + 1.0);
    top - need.log2().ceil() as i32
}

struct Ctx<'a> {
    omega: &'a GranularSet,
    halo: Option<&'a Halo>,
    unit: i32,
    dim: usize,
    a2: Square,
    b2: Square,
}

/// `c²` held as an exact ratio of integers.
struct Square {
    num: BigInt,
    den: BigInt,
}

impl Square {
    fn of(c: &Rational) -> Self {
        Square {
            num: c.numer() * c.numer(),
            den: c.denom() * c.denom(),
        }
    }

    /// Compares `c² x` with `y`.
    fn cmp(&self, x: i128, y: i128) -> std::cmp::Ordering {
        if let (Some(n), Some(d)) = (self.num.to_i128(), self.den.to_i128()) {
            if let (Some(l), Some(r)) = (n.checked_mul(x), d.checked_mul(y)) {
                return l.cmp(&r);
            }
        }
        (&self.num * BigInt::from(x)).cmp(&(&self.den * BigInt::from(y)))
    }

    fn le(&self, x: i128, y: i128) -> bool {
        self.cmp(x, y).is_le()
    }
}

impl Ctx<'_> {
    fn visit(
        &self,
        node: &Node,
        cube: &DyadicCube,
        inside: bool,
        cubes: &mut Vec<DyadicCube>,
        layer: &mut Node,
    ) -> Result<()> {
        let inside = inside || matches!(node, Node::Full);
        if matches!(node, Node::Empty) && !inside {
            return Ok(());
        }
        if inside {
            let d2 = match self.halo {
                Some(h) => h.distance_sq(cube, self.unit),
                None => distance_sq_to_complement(self.omega, cube, self.unit),
            };
            let side = 1i128 << (cube.scale - self.unit);
            let l2d = side * side * self.dim as i128;
            // a² l² d <= D²
            if self.a2.le(l2d, d2) {
                if self.b2.cmp(l2d, d2).is_lt() {
                    return Err(Error::WhitneyUpperBound { cube: cube.clone() });
                }
                cubes.push(cube.clone());
                return Ok(());
            }
            if cube.scale <= self.unit {
                let region = *self.omega.region();
                let path = crate::dyadic::path_to(&region, cube);
                layer.insert_path(&path, self.dim);
                return Ok(());
            }
            for i in 0..1usize << self.dim {
                self.visit(&Node::Full, &cube.child(i), true, cubes, layer)?;
            }
            return Ok(());
        }
        if let Node::Split(ch) = node {
            for (i, c) in ch.iter().enumerate() {
                self.visit(c, &cube.child(i), false, cubes, layer)?;
            }
        }
        Ok(())
    }
}

/// Exact `dist(Q, ℝ^d ∖ Ω)²` in units of `2^unit` (squared), where `Q ⊆ Ω`
/// and `unit` is no coarser than every leaf of `Ω` and `Q`.
pub fn distance_sq_to_complement(omega: &GranularSet, q: &DyadicCube, unit: i32) -> i128 {
    let region = omega.region();
    let n = 1i64 << (region.root_scale - unit);
    let (qlo, qhi) = q.bounds_at(unit);
    let mut best: i128 = (0..q.dim())
        .map(|j| qlo[j].min(n - qhi[j]) as i128)
        .min()
        .map_or(0, |g| g * g);
    let root_lo = vec![0i64; q.dim()];
    search(omega.root(), &root_lo, n, &qlo, &qhi, &mut best);
    best
}

fn search(node: &Node, lo: &[i64], side: i64, qlo: &[i64], qhi: &[i64], best: &mut i128) {
    match node {
        Node::Full => {}
        Node::Empty => {
            let g = child_gap_sq(lo, side, 0, 0, qlo, qhi);
            if g < *best {
                *best = g;
            }
        }
        Node::Split(ch) => {
            let half = side / 2;
            let mut order: Vec<(i128, usize)> = (0..ch.len())
                .filter(|&i| !matches!(ch[i], Node::Full))
                .map(|i| (child_gap_sq(lo, half, i, half, qlo, qhi), i))
                .collect();
            order.sort_unstable();
            let mut clo = lo.to_vec();
            for (g, i) in order {
                if g >= *best {
                    break;
                }
                for (j, c) in clo.iter_mut().enumerate() {
                    *c = lo[j] + ((i >> j) & 1) as i64 * half;
                }
                search(&ch[i], &clo, half, qlo, qhi, best);
            }
        }
    }
}

/// Squared gap between `Q` and the box with corner `lo + step·bits(index)` and
/// the given side.
fn child_gap_sq(lo: &[i64], side: i64, index: usize, step: i64, qlo: &[i64], qhi: &[i64]) -> i128 {
    let mut s: i128 = 0;
    for j in 0..lo.len() {
        let blo = lo[j] + ((index >> j) & 1) as i64 * step;
        let g = (blo - qhi[j]).max(qlo[j] - (blo + side)).max(0) as i128;
        s += g * g;
    }
    s
}

/// Doubled cube `Q*` (same center, twice the side) in units of `2^(unit-1)`.
pub fn doubled_bounds(q: &DyadicCube, unit: i32) -> (Vec<i64>, Vec<i64>) {
    let (lo, hi) = q.bounds_at(unit);
    let side = hi[0] - lo[0];
    (
        lo.iter().map(|&x| 2 * x - side).collect(),
        hi.iter().map(|&x| 2 * x + side).collect(),
    )
}

/// Whether two half-open boxes share interior.
pub(crate) fn boxes_overlap(alo: &[i64], ahi: &[i64], blo: &[i64], bhi: &[i64]) -> bool {
    (0..alo.len()).all(|j| alo[j] < bhi[j] && blo[j] < ahi[j])
}

/// Pairs `(i, j)`, `i < j`, whose doubled cubes overlap, by a sweep along the
/// first axis.
pub fn doubled_conflicts(cubes: &[DyadicCube], unit: i32) -> Vec<(usize, usize)> {
    let Some(first) = cubes.first() else {
        return Vec::new();
    };
    let dim = first.dim();
    // lo and hi of each doubled cube, flattened
    let mut lo = Vec::with_capacity(cubes.len() * dim);
    let mut hi = Vec::with_capacity(cubes.len() * dim);
    for q in cubes {
        let (l, h) = doubled_bounds(q, unit);
        lo.extend(l);
        hi.extend(h);
    }
    let mut order: Vec<usize> = (0..cubes.len()).collect();
    order.sort_by_key(|&i| (lo[i * dim], i));
    let mut active: Vec<usize> = Vec::new();
    let mut pairs = Vec::new();
    for &i in &order {
        let x = lo[i * dim];
        active.retain(|&j| hi[j * dim] > x);
        let (il, ih) = (&lo[i * dim..(i + 1) * dim], &hi[i * dim..(i + 1) * dim]);
        for &j in &active {
            if boxes_overlap(il, ih, &lo[j * dim..(j + 1) * dim], &hi[j * dim..(j + 1) * dim]) {
                pairs.push((i.min(j), i.max(j)));
            }
        }
        active.push(i);
    }
    pairs.sort_unstable();
    pairs
}

/// Greedy coloring in index order so that conflicting cubes get different families.
fn color_families(cubes: &[DyadicCube], unit: i32) -> Vec<usize> {
    let mut adj = vec![Vec::new(); cubes.len()];
    for (i, j) in doubled_conflicts(cubes, unit) {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut color = vec![usize::MAX; cubes.len()];
    for i in 0..cubes.len() {
        let mut used: Vec<usize> = adj[i].iter().map(|&j| color[j]).filter(|&c| c != usize::MAX).collect();
        used.sort_unstable();
        used.dedup();
        let mut c = 0;
        for u in used {
            if u == c {
                c += 1;
            } else if u > c {
                break;
            }
        }
        color[i] = c;
    }
    color
}

/// One violated Whitney property.
#[derive(Clone, Debug, PartialEq)]
pub enum WhitneyViolation {
    LowerBound(DyadicCube),
    UpperBound(DyadicCube),
    Overlap(DyadicCube, DyadicCube),
    NotInOmega(DyadicCube),
    Coverage,
    FamilyOverlap(DyadicCube, DyadicCube),
}

/// Re-check every stated property from scratch.
pub fn check_whitney(w: &WhitneyDecomposition) -> Vec<WhitneyViolation> {
    let mut out = Vec::new();
    let region: RootRegion = *w.omega.region();
    let unit = w
        .cubes
        .iter()
        .map(|q| q.scale)
        .chain(std::iter::once(w.floor_scale))
        .min()
        .unwrap_or(region.base_scale)
        .min(w.omega.finest_scale().unwrap_or(region.base_scale));
    let d = BigInt::from(region.dim as i64);
    let (an, ad) = (w.dist_lo.numer(), w.dist_lo.denom());
    let (bn, bd) = (w.dist_hi.numer(), w.dist_hi.denom());
    for q in &w.cubes {
        if w.omega.measure_in(q) != q.measure() {
            out.push(WhitneyViolation::NotInOmega(q.clone()));
            continue;
        }
        let d2 = BigInt::from(match &w.halo {
            Some(h) => h.distance_sq(q, unit),
            None => distance_sq_to_complement(&w.omega, q, unit),
        });
        let side = BigInt::from(1i64 << (q.scale - unit));
        let l2d = &side * &side * &d;
        if an * an * &l2d > ad * ad * &d2 {
            out.push(WhitneyViolation::LowerBound(q.clone()));
        }
        if &d2 * bd * bd > bn * bn * &l2d {
            out.push(WhitneyViolation::UpperBound(q.clone()));
        }
    }
    for (i, j) in pairwise_intersections(&w.cubes) {
        out.push(WhitneyViolation::Overlap(w.cubes[i].clone(), w.cubes[j].clone()));
    }
    let union = GranularSet::from_cubes(region, w.cubes.iter(), true);
    match union.and_then(|u| u.union(&w.boundary_layer)) {
        Ok(u) if u == w.omega => {}
        _ => out.push(WhitneyViolation::Coverage),
    }
    for (i, j) in doubled_conflicts(&w.cubes, unit) {
        if w.family_of[i] == w.family_of[j] {
            out.push(WhitneyViolation::FamilyOverlap(w.cubes[i].clone(), w.cubes[j].clone()));
        }
    }
    out
}

fn pairwise_intersections(cubes: &[DyadicCube]) -> Vec<(usize, usize)> {
    // Dyadic cubes intersect iff one contains the other; sort so ancestors come first.
    let mut idx: Vec<usize> = (0..cubes.len()).collect();
    idx.sort_by(|&i, &j| cubes[i].morton_cmp(&cubes[j]).then(cubes[j].scale.cmp(&cubes[i].scale)));
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for &i in &idx {
        while let Some(&top) = stack.last() {
            if cubes[top].contains(&cubes[i]) {
                break;
            }
            stack.pop();
        }
        if let Some(&top) = stack.last() {
            out.push((top.min(i), top.max(i)));
        }
        stack.push(i);
    }
    out
}

/// `d^{-1/2} dist(Q, Ωᶜ) / l(Q)` in floating point, for reports.
pub fn distance_ratio(omega: &GranularSet, q: &DyadicCube, unit: i32) -> f64 {
    let d2 = distance_sq_to_complement(omega, q, unit).to_f64().unwrap_or(f64::INFINITY);
    let side = (1i64 << (q.scale - unit)) as f64;
    d2.sqrt() / side / (q.dim() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn empty_omega_has_no_cubes() {
        let r = RootRegion::new(2, 0, -4).unwrap();
        let w = whitney(&GranularSet::empty(r), &ratio(1, 1), &ratio(4, 1)).unwrap();
        assert!(w.cubes.is_empty());
        assert!(w.boundary_layer.is_empty());
        assert_eq!(w.family_count(), 0);
    }

    #[test]
    fn full_unit_square_passes_checks() {
        let r = RootRegion::new(2, 0, -8).unwrap();
        let w = whitney(&GranularSet::full(r), &ratio(1, 1), &ratio(4, 1)).unwrap();
        assert!(!w.cubes.is_empty());
        assert!(check_whitney(&w).is_empty());
        // the boundary ring of base cells cannot be resolved
        assert!(!w.boundary_layer.is_empty());
        assert!(w.boundary_layer.measure() < r.root_measure());
    }

    #[test]
    fn isolated_cell_needs_refinement() {
        let r = RootRegion::new(2, 0, -3).unwrap();
        let e = GranularSet::from_cubes(r, [DyadicCube::new(-3, vec![3, 4])].iter(), false).unwrap();
        match whitney(&e, &ratio(1, 1), &ratio(4, 1)) {
            Err(Error::WhitneyResolution { required_scale, floor_scale }) => {
                assert!(required_scale < floor_scale);
                let w = whitney_with_floor(&e, &ratio(1, 1), &ratio(4, 1), required_scale).unwrap();
                assert!(!w.cubes.is_empty());
                assert!(check_whitney(&w).is_empty());
            }
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn distance_to_outside_of_root_counts() {
        let r = RootRegion::new(2, 0, -2).unwrap();
        let full = GranularSet::full(r);
        assert_eq!(distance_sq_to_complement(&full, &DyadicCube::new(-2, vec![1, 1]), -2), 1);
        assert_eq!(distance_sq_to_complement(&full, &DyadicCube::new(-2, vec![0, 1]), -2), 0);
    }

    #[test]
    fn tight_upper_bound_is_an_error() {
        let r = RootRegion::new(2, 0, -6).unwrap();
        let res = whitney(&GranularSet::full(r), &ratio(1, 1), &ratio(1, 1));
        assert!(matches!(res, Err(Error::WhitneyUpperBound { .. })));
    }

    fn all_pairs(cubes: &[DyadicCube], unit: i32) -> Vec<(usize, usize)> {
        let b: Vec<_> = cubes.iter().map(|q| doubled_bounds(q, unit)).collect();
        let mut out = Vec::new();
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                if boxes_overlap(&b[i].0, &b[i].1, &b[j].0, &b[j].1) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn conflicts_match_all_pairs() {
        use rand::Rng;
        let mut g = crate::gen::rng(12);
        for dim in 1..=3 {
            for _ in 0..50 {
                let cubes: Vec<DyadicCube> = (0..g.gen_range(0..60))
                    .map(|_| {
                        let scale = g.gen_range(-5..=0);
                        let n = 1i64 << -scale;
                        DyadicCube::new(scale, (0..dim).map(|_| g.gen_range(0..n)).collect())
                    })
                    .collect();
                assert_eq!(doubled_conflicts(&cubes, -5), all_pairs(&cubes, -5));
            }
        }
        let r = RootRegion::new(2, 0, -7).unwrap();
        let w = whitney(&GranularSet::full(r), &ratio(1, 1), &ratio(4, 1)).unwrap();
        assert_eq!(doubled_conflicts(&w.cubes, -7), all_pairs(&w.cubes, -7));
    }
}
