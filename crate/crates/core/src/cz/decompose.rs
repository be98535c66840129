use rayon::prelude::*;

use super::function::GranularFunction;
use super::maximal::hl_maximal_dyadic;
use super::projection::{projection, PolyPiece, PolynomialBasis, StepPiece};
use super::thresholds::{kappa, phi_unchecked, scale_threshold, LogBase};
use super::whitney::{whitney_with_halo, Halo, WhitneyDecomposition};
use crate::boxes::{box_chain_with, SubsetRule};
use crate::dyadic::{DyadicCube, GranularSet, Node, RootRegion};
use crate::error::{Error, Result};
use crate::metrics::{length, thickness};
use crate::scalar::{ratio, Dyadic, Rational, Scalar};

/// Smallest level index; `|f| > 2^N0 α` is the bad part.
pub const FIRST_LEVEL: i64 = 10;

#[derive(Clone, Debug)]
pub struct CzConfig {
    pub whitney_a: Rational,
    pub whitney_b: Rational,
    /// Whitney refinement stops `whitney_refine` scales below the base scale.
    pub whitney_refine: u32,
    pub degree_cap: usize,
    pub max_chain: usize,
    pub log_base: LogBase,
    pub subset_rule: SubsetRule,
}

impl Default for CzConfig {
    fn default() -> Self {
        CzConfig {
            whitney_a: ratio(1, 1),
            whitney_b: ratio(4, 1),
            whitney_refine: 0,
            degree_cap: 2,
            max_chain: 64,
            log_base: LogBase::Natural,
            subset_rule: SubsetRule::MortonPrefix,
        }
    }
}

/// One `f^{n,ν}_q = f χ_{E^{n,ν}_q}`.
#[derive(Clone, Debug)]
pub struct Piece<T> {
    pub q: DyadicCube,
    pub q_index: usize,
    pub n: i64,
    /// 1-based position in the box chain of `E^n ∩ q`.
    pub nu: usize,
    pub support: GranularSet,
    pub measure: Dyadic,
    pub lambda: Dyadic,
    pub theta: Dyadic,
    pub k_threshold: i32,
    pub kappa: i64,
    /// `f` on the support as maximal constant cells.
    pub cells: Vec<(T, DyadicCube)>,
    /// `Π_q f^{n,ν}_q`; the bad part is `f^{n,ν}_q` minus this.
    pub projection: PolyPiece<T>,
}

impl<T: Scalar> Piece<T> {
    pub fn step(&self) -> StepPiece<T> {
        StepPiece {
            q: self.q.clone(),
            cells: self.cells.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CzDecomposition<T> {
    pub alpha: T,
    pub config: CzConfig,
    /// `{M Φ(|f|/α) > 1}` with the dyadic maximal function.
    pub omega_core: GranularSet,
    /// `∪ 3Q` over the maximal cubes `Q` of `omega_core`, clipped to the root.
    /// Outside it every cube average of `Φ(|f|/α)` is at most `1 + 6^d`.
    pub omega: GranularSet,
    pub whitney: WhitneyDecomposition,
    pub g: GranularFunction<T>,
    /// `(n, E^n)`, increasing `n`, nonempty only.
    pub level_sets: Vec<(i64, GranularSet)>,
    /// Canonical order: `q` Morton-sorted, then `n`, then `ν`.
    pub pieces: Vec<Piece<T>>,
    /// Part of `{|f| > 2^10 α}` not covered by pieces: the Whitney boundary
    /// layer and chain remainders. `f − g = Σ pieces + f χ_residual`.
    pub residual: GranularSet,
    pub omega_tilde: GranularSet,
    pub omega_tilde_clipped: bool,
    /// `∫ Φ(|f|/α)`.
    pub phi_integral: f64,
    pub basis: PolynomialBasis<T>,
}

impl<T: Scalar> CzDecomposition<T> {
    /// `|Ω̃| / ∫ Φ(|f|/α)`.
    pub fn omega_tilde_ratio(&self) -> f64 {
        if self.phi_integral == 0.0 {
            0.0
        } else {
            self.omega_tilde.measure().to_f64() / self.phi_integral
        }
    }

    /// `g + Σ f^{n,ν}_q + f χ_residual`, summed cell by cell.
    pub fn reconstruct(&self, f: &GranularFunction<T>) -> GranularFunction<T> {
        let mut out = self.g.clone();
        for p in &self.pieces {
            out.add_cells(&p.cells);
        }
        let rest: Vec<(T, DyadicCube)> = f.restrict_to(&self.residual).leaves();
        out.add_cells(&rest);
        out
    }

    /// Index of the Whitney cube of each piece, grouped.
    pub fn pieces_by_cube(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.whitney.cubes.len()];
        for (i, p) in self.pieces.iter().enumerate() {
            out[p.q_index].push(i);
        }
        out
    }
}

/// Calderón–Zygmund decomposition of `f` at height 1 for `Φ(|f|/α)`.
pub fn cz_decompose<T: Scalar>(f: &GranularFunction<T>, alpha: &T, cfg: &CzConfig) -> Result<CzDecomposition<T>> {
    if !(*alpha > T::zero()) {
        return Err(Error::OutOfRange(format!("alpha must be positive, got {alpha}")));
    }
    if !f.is_base_resolved() {
        return Err(Error::Malformed("function is not granular at the base scale".into()));
    }
    let region = *f.region();
    let basis = PolynomialBasis::<T>::new(region.dim, cfg.degree_cap)?;
    let alpha_f = alpha.to_f64_lossy();
    let phi_f = f.map(|v| phi_unchecked(v.abs().to_f64_lossy() / alpha_f));
    let phi_integral = phi_f.integral();
    let core = hl_maximal_dyadic(&phi_f).select(|v| *v > 1.0);
    let (omega, halo) = tripled(&core)?;

    let floor = region.base_scale - cfg.whitney_refine as i32;
    let whitney = whitney_with_halo(&omega, Some(&halo), &cfg.whitney_a, &cfg.whitney_b, floor)?;

    let cut = alpha.clone() * T::from_rational(&crate::scalar::pow2(FIRST_LEVEL));
    let g = f.restrict_to(&f.select(|v| v.abs() <= cut));

    let mut levels: Vec<i64> = Vec::new();
    for (v, _) in f.leaves() {
        if let Some(n) = level_of(&v.abs(), alpha) {
            if !levels.contains(&n) {
                levels.push(n);
            }
        }
    }
    levels.sort_unstable();
    let mut level_sets = Vec::with_capacity(levels.len());
    for &n in &levels {
        let lo = alpha.clone() * T::from_rational(&crate::scalar::pow2(n));
        let hi = alpha.clone() * T::from_rational(&crate::scalar::pow2(n + 1));
        let e = f.select(|v| {
            let a = v.abs();
            a > lo && a <= hi
        });
        level_sets.push((n, e.intersect(&omega)?));
    }

    let per_cube: Vec<Result<Vec<Piece<T>>>> = whitney
        .cubes
        .par_iter()
        .enumerate()
        .map(|(qi, q)| {
            let mut out = Vec::new();
            for (n, e) in &level_sets {
                let enq = e.restrict(q);
                if enq.is_empty() {
                    continue;
                }
                let chain = box_chain_with(&enq, cfg.max_chain, cfg.subset_rule)?;
                for (i, support) in chain.pieces.into_iter().enumerate() {
                    out.push(make_piece(f, q, qi, *n, i + 1, support, cfg, &basis)?);
                }
            }
            Ok(out)
        })
        .collect();
    let mut pieces = Vec::new();
    for r in per_cube {
        pieces.extend(r?);
    }

    let mut bad = Node::Empty;
    for (_, e) in &level_sets {
        bad = bad.union(e.root());
    }
    let mut covered = Node::Empty;
    for p in &pieces {
        covered = covered.union(p.support.root());
    }
    let residual = GranularSet::from_node(region, bad.difference(&covered));

    let (omega_tilde, omega_tilde_clipped) = expanded_cubes(&whitney, 10);

    Ok(CzDecomposition {
        alpha: alpha.clone(),
        config: cfg.clone(),
        omega_core: core,
        omega,
        whitney,
        g,
        level_sets,
        pieces,
        residual,
        omega_tilde,
        omega_tilde_clipped,
        phi_integral,
        basis,
    })
}

/// `n ≥ 10` with `2^n α < a ≤ 2^{n+1} α`, if any.
pub fn level_of<T: Scalar>(a: &T, alpha: &T) -> Option<i64> {
    let mut lo = alpha.clone() * T::from_rational(&crate::scalar::pow2(FIRST_LEVEL));
    if *a <= lo {
        return None;
    }
    let two = T::from_i64(2);
    let mut n = FIRST_LEVEL;
    loop {
        let hi = lo.clone() * two.clone();
        if *a <= hi {
            return Some(n);
        }
        lo = hi;
        n += 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn make_piece<T: Scalar>(
    f: &GranularFunction<T>,
    q: &DyadicCube,
    q_index: usize,
    n: i64,
    nu: usize,
    support: GranularSet,
    cfg: &CzConfig,
    basis: &PolynomialBasis<T>,
) -> Result<Piece<T>> {
    let theta = thickness(&support).value;
    let lambda = length(&support);
    let k_threshold = scale_threshold(&theta, n, q.scale, q.dim(), cfg.log_base)?;
    let cells = f.restrict_to(&support).leaves();
    let step = StepPiece {
        q: q.clone(),
        cells: cells.clone(),
    };
    let proj = projection(&step, basis, cfg.degree_cap)?;
    Ok(Piece {
        q: q.clone(),
        q_index,
        n,
        nu,
        measure: support.measure(),
        support,
        lambda,
        theta,
        k_threshold,
        kappa: kappa(n)?,
        cells,
        projection: proj,
    })
}

/// `∪ 3Q` over the canonical cubes of `core`, clipped to the root, and the
/// same union in a region four times wider with the root in its middle.
fn tripled(core: &GranularSet) -> Result<(GranularSet, Halo)> {
    let region = *core.region();
    let outer = RootRegion::new(region.dim, region.root_scale + 2, region.base_scale)?;
    let window = DyadicCube::new(region.root_scale, vec![1; region.dim]);
    let halo = Halo {
        set: GranularSet::empty(outer),
        window,
    };
    let mut inner = Node::Empty;
    let mut wide = Node::Empty;
    for q in core.cubes() {
        let lo: Vec<i64> = q.corner.iter().map(|&i| i - 1).collect();
        let hi: Vec<i64> = q.corner.iter().map(|&i| i + 2).collect();
        inner.fill_box(&region.root_cube(), &lo, &hi, q.scale);
        let o = halo.outer(&q);
        let lo: Vec<i64> = o.corner.iter().map(|&i| i - 1).collect();
        let hi: Vec<i64> = o.corner.iter().map(|&i| i + 2).collect();
        wide.fill_box(&outer.root_cube(), &lo, &hi, q.scale);
    }
    Ok((
        GranularSet::from_node(region, inner),
        Halo {
            set: GranularSet::from_node(outer, wide),
            ..halo
        },
    ))
}

/// Union of the cubes `factor·q` (same center) clipped to the root, and
/// whether anything was clipped. `factor` must be even.
pub fn expanded_cubes(w: &WhitneyDecomposition, factor: i64) -> (GranularSet, bool) {
    let region = *w.omega.region();
    let rc = region.root_cube();
    let mut root = Node::Empty;
    let mut clipped = false;
    for q in &w.cubes {
        // in units of l(q)/2 the cube is [2i, 2i+2) and its center 2i+1
        let unit = q.scale - 1;
        let lo: Vec<i64> = q.corner.iter().map(|&i| 2 * i + 1 - factor).collect();
        let hi: Vec<i64> = q.corner.iter().map(|&i| 2 * i + 1 + factor).collect();
        let top = 1i64 << (region.root_scale - unit);
        if lo.iter().any(|&x| x < 0) || hi.iter().any(|&x| x > top) {
            clipped = true;
        }
        root.fill_box(&rc, &lo, &hi, unit);
    }
    (GranularSet::from_node(region, root), clipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::RootRegion;

    fn region() -> RootRegion {
        RootRegion::new(2, 0, -5).unwrap()
    }

    #[test]
    fn small_function_is_all_good() {
        let r = region();
        let e = GranularSet::from_cube(r, &DyadicCube::new(-2, vec![1, 1])).unwrap();
        let f = GranularFunction::from_pieces(r, vec![(ratio(1000, 1), e)]).unwrap();
        let cz = cz_decompose(&f, &ratio(1, 1), &CzConfig::default()).unwrap();
        assert_eq!(cz.g, f);
        assert!(cz.pieces.is_empty());
        assert!(cz.level_sets.is_empty());
        assert_eq!(cz.reconstruct(&f), f);
    }

    #[test]
    fn boundary_level_is_eleven() {
        // |f| = 2^12 α sits in 2^11 α < |f| ≤ 2^12 α
        assert_eq!(level_of(&ratio(4096, 1), &ratio(1, 1)), Some(11));
        assert_eq!(level_of(&ratio(4097, 1), &ratio(1, 1)), Some(12));
        assert_eq!(level_of(&ratio(1024, 1), &ratio(1, 1)), None);
        assert_eq!(level_of(&ratio(1025, 1), &ratio(1, 1)), Some(10));
        let r = region();
        let qset = GranularSet::from_cube(r, &DyadicCube::new(-3, vec![2, 5])).unwrap();
        let f = GranularFunction::from_pieces(r, vec![(ratio(4096, 1), qset.clone())]).unwrap();
        let cz = cz_decompose(&f, &ratio(1, 1), &CzConfig::default()).unwrap();
        assert!(qset.is_subset(&cz.omega));
        assert_eq!(cz.level_sets.len(), 1);
        assert_eq!(cz.level_sets[0].0, 11);
        assert_eq!(cz.reconstruct(&f), f);
        assert!(cz.pieces.iter().all(|p| p.n == 11 && p.kappa == 346));
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let f = GranularFunction::<f64>::zero(region());
        assert!(cz_decompose(&f, &0.0, &CzConfig::default()).is_err());
        assert!(cz_decompose(&f, &-1.0, &CzConfig::default()).is_err());
    }
}
