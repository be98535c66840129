//! Splitting granular sets into generalized boxes.
//!
//! [`lemma_construct`] builds, inside a dyadic cube `I`, a subset `E[I]` of
//! thickness at most `2r` together with disjoint cubes `Q[I]` that account for
//! the rest. [`proposition_split`] combines it with the critical thickness to
//! split `E = F ∪ G` with `λ(F) ≤ λ(E)/2` and `G` a generalized box of
//! deviation 8; [`box_chain`] iterates the split on `F`.

use std::collections::HashMap;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::dyadic::{embed, DyadicCube, GranularSet, Node};
use crate::error::{Error, Result};
use crate::metrics::{critical_thickness, length, side_sum, thickness, CriticalThickness};
use crate::scalar::{pow2, Dyadic, Rational};

/// Which granular subset the lemma keeps when the children's union is too
/// heavy. Both rules take whole cells in a fixed order and refine the last
/// one dyadically until the measure lands in `[r l(I), 2r l(I)]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetRule {
    #[default]
    MortonPrefix,
    MortonSuffix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaOutput {
    /// `E[I]`.
    pub selected: GranularSet,
    /// `Q[I]`, disjoint cubes inside `I`.
    pub cover: Vec<DyadicCube>,
}

type RelCover = Vec<(i32, Vec<i64>)>;

struct LemmaCtx {
    two_r: Rational,
    r: Rational,
    dim: usize,
    rule: SubsetRule,
    full_memo: HashMap<i32, (Node, RelCover)>,
}

/// Run the recursive lemma construction on `E ∩ I` with parameter `r`.
pub fn lemma_construct(e: &GranularSet, i: &DyadicCube, r: &Rational) -> Result<LemmaOutput> {
    lemma_construct_with(e, i, r, SubsetRule::default())
}

pub fn lemma_construct_with(
    e: &GranularSet,
    i: &DyadicCube,
    r: &Rational,
    rule: SubsetRule,
) -> Result<LemmaOutput> {
    if !r.is_positive() {
        return Err(Error::OutOfRange(format!("lemma parameter r = {r} must be positive")));
    }
    let region = *e.region();
    if !region.contains_cube(i) {
        return Err(Error::CubeOutsideRoot { cube: i.clone() });
    }
    let mut ctx = LemmaCtx {
        two_r: r * Rational::from_integer(2.into()),
        r: r.clone(),
        dim: region.dim,
        rule,
        full_memo: HashMap::new(),
    };
    let (node, cover) = ctx.run(&e.node_at(i), i);
    let mut cover = cover;
    cover.sort_by(|a, b| a.morton_cmp(b));
    Ok(LemmaOutput {
        selected: GranularSet::from_node(region, embed(&region, i, node)),
        cover,
    })
}

impl LemmaCtx {
    fn small_enough(&self, cube: &DyadicCube) -> bool {
        // l(I) ≤ (2r)^{1/(d-1)}  <=>  l(I)^{d-1} ≤ 2r
        pow2(cube.scale as i64 * (self.dim as i64 - 1)) <= self.two_r
    }

    fn run(&mut self, node: &Node, cube: &DyadicCube) -> (Node, Vec<DyadicCube>) {
        if node.is_empty() {
            return (Node::Empty, Vec::new());
        }
        if self.small_enough(cube) {
            return (node.clone(), Vec::new());
        }
        if node.is_full() {
            return self.run_full(cube);
        }
        self.recurse(node, cube)
    }

    fn run_full(&mut self, cube: &DyadicCube) -> (Node, Vec<DyadicCube>) {
        if let Some((n, rel)) = self.full_memo.get(&cube.scale) {
            let cover = rel
                .iter()
                .map(|(s, off)| {
                    let f = 1i64 << (cube.scale - s);
                    DyadicCube::new(
                        *s,
                        cube.corner.iter().zip(off).map(|(&c, &o)| c * f + o).collect(),
                    )
                })
                .collect();
            return (n.clone(), cover);
        }
        let (n, cover) = self.recurse(&Node::Full, cube);
        let rel = cover
            .iter()
            .map(|q| {
                let f = 1i64 << (cube.scale - q.scale);
                (
                    q.scale,
                    q.corner.iter().zip(&cube.corner).map(|(&a, &c)| a - c * f).collect(),
                )
            })
            .collect();
        self.full_memo.insert(cube.scale, (n.clone(), rel));
        (n, cover)
    }

    fn recurse(&mut self, node: &Node, cube: &DyadicCube) -> (Node, Vec<DyadicCube>) {
        let children = node.expand(self.dim);
        let mut sel = Vec::with_capacity(children.len());
        let mut cover = Vec::new();
        for (i, c) in children.iter().enumerate() {
            let (n, q) = self.run(c, &cube.child(i));
            sel.push(n);
            cover.extend(q);
        }
        let union = Node::split(sel);
        let m = union.measure(cube.scale, self.dim).to_rational();
        let cap = &self.two_r * pow2(cube.scale as i64);
        if m <= cap {
            return (union, cover);
        }
        let target = &self.r * pow2(cube.scale as i64);
        let mut acc = Rational::zero();
        let picked = self.take(&union, cube.scale, &target, &mut acc);
        debug_assert!(acc >= target && acc <= &target * Rational::from_integer(2.into()));
        (picked, vec![cube.clone()])
    }

    /// Whole cells in rule order while the running measure stays below
    /// `target`; the cell that would cross it is taken if the total stays at
    /// most `2 target`, and refined otherwise.
    fn take(&self, node: &Node, scale: i32, target: &Rational, acc: &mut Rational) -> Node {
        if *acc >= *target {
            return Node::Empty;
        }
        match node {
            Node::Empty => Node::Empty,
            Node::Full => {
                let m = pow2(scale as i64 * self.dim as i64);
                let after = &*acc + &m;
                if after < *target || after <= target * Rational::from_integer(2.into()) {
                    *acc = after;
                    Node::Full
                } else {
                    self.take_children(&node.expand(self.dim), scale, target, acc)
                }
            }
            Node::Split(ch) => self.take_children(ch, scale, target, acc),
        }
    }

    fn take_children(&self, ch: &[Node], scale: i32, target: &Rational, acc: &mut Rational) -> Node {
        let mut out = vec![Node::Empty; ch.len()];
        let order: Box<dyn Iterator<Item = usize>> = match self.rule {
            SubsetRule::MortonPrefix => Box::new(0..ch.len()),
            SubsetRule::MortonSuffix => Box::new((0..ch.len()).rev()),
        };
        for i in order {
            out[i] = self.take(&ch[i], scale - 1, target, acc);
        }
        Node::split(out)
    }
}

/// Exact slacks of the two lemma guarantees: `2r − Θ(E[I])` and
/// `2|E[I]| − 2r Σ l(Q) − |(E ∩ I) \ ∪Q|`. Both are nonnegative for a valid output.
pub fn lemma_slacks(e: &GranularSet, i: &DyadicCube, r: &Rational, out: &LemmaOutput) -> (Rational, Rational) {
    let two = Rational::from_integer(2.into());
    let thick = &two * r - thickness(&out.selected).value.to_rational();
    let covered = GranularSet::from_cubes(*e.region(), out.cover.iter(), true).expect("cover in root");
    let rest = e.restrict(i).difference(&covered).expect("same region").measure().to_rational();
    let mass = &two * out.selected.measure().to_rational()
        - &two * r * side_sum(&out.cover).to_rational()
        - rest;
    (thick, mass)
}

/// Disjoint split `E = F ∪ G`.
#[derive(Clone, Debug)]
pub struct BoxSplit {
    pub f: GranularSet,
    pub g: GranularSet,
    /// Smallest dyadic cube containing `E`.
    pub q: DyadicCube,
    pub critical: CriticalThickness,
    pub lemma: LemmaOutput,
}

/// Split `E` into `F` (half the length) and a generalized box `G`.
pub fn proposition_split(e: &GranularSet) -> Result<BoxSplit> {
    proposition_split_with(e, SubsetRule::default())
}

pub fn proposition_split_with(e: &GranularSet, rule: SubsetRule) -> Result<BoxSplit> {
    let q = e.bounding_cube().ok_or(Error::EmptySet("proposition split"))?;
    let critical = critical_thickness(e)?;
    let lemma = lemma_construct_with(e, &q, &critical.theta_crit, rule)?;
    let g = critical.core.union(&lemma.selected)?;
    let f = e.difference(&g)?;
    Ok(BoxSplit {
        f,
        g,
        q,
        critical,
        lemma,
    })
}

/// Exact slacks of the split guarantees, all nonnegative for a valid split.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSlacks {
    /// `λ(E)/2 − λ(F)`.
    pub half_length: Rational,
    /// `8|G| − Θ(G) λ(E)`.
    pub box_bound: Rational,
    /// `|G| − λ(E)ϑ(E)/2`.
    pub mass_lower: Rational,
    /// `4ϑ(E) − Θ(G)`.
    pub thickness_upper: Rational,
}

pub fn split_slacks(e: &GranularSet, s: &BoxSplit) -> SplitSlacks {
    let lam = length(e).to_rational();
    let two = Rational::from_integer(2.into());
    let theta_g = thickness(&s.g).value.to_rational();
    let mg = s.g.measure().to_rational();
    let vt = &s.critical.theta_crit;
    SplitSlacks {
        half_length: &lam / &two - length(&s.f).to_rational(),
        box_bound: Rational::from_integer(8.into()) * &mg - &theta_g * &lam,
        mass_lower: &mg - &lam * vt / &two,
        thickness_upper: Rational::from_integer(4.into()) * vt - theta_g,
    }
}

/// Iterated split: `E = E^(1) ∪ ... ∪ E^(m) ∪ residual`.
#[derive(Clone, Debug)]
pub struct BoxChain {
    pub pieces: Vec<GranularSet>,
    pub residual: GranularSet,
    /// `λ` of the remainder after each split (entry `m-1` after `m` splits).
    pub residual_lengths: Vec<Dyadic>,
}

/// Apply [`proposition_split`] to the `F` part until it is empty or
/// `max_iter` pieces have been produced.
pub fn box_chain(e: &GranularSet, max_iter: usize) -> Result<BoxChain> {
    box_chain_with(e, max_iter, SubsetRule::default())
}

pub fn box_chain_with(e: &GranularSet, max_iter: usize, rule: SubsetRule) -> Result<BoxChain> {
    if max_iter == 0 {
        return Err(Error::OutOfRange("max_iter must be at least 1".into()));
    }
    let mut pieces = Vec::new();
    let mut residual_lengths = Vec::new();
    let mut rest = e.clone();
    while !rest.is_empty() && pieces.len() < max_iter {
        let split = proposition_split_with(&rest, rule)?;
        pieces.push(split.g);
        rest = split.f;
        residual_lengths.push(length(&rest));
    }
    Ok(BoxChain {
        pieces,
        residual: rest,
        residual_lengths,
    })
}

/// `λ(E) Θ(E) ≤ C |E|`.
pub fn is_generalized_box(e: &GranularSet, c: &Rational) -> bool {
    let lhs = length(e).to_rational() * thickness(e).value.to_rational();
    lhs <= c * e.measure().to_rational()
}

/// Slacks of `|P| ≤ λ(P) l(q)^{d−1} ≤ 2^{1−ν} |q|` for the `ν`-th piece (1-based)
/// of a chain started from a set inside `q`.
pub fn piece_size_slacks(piece: &GranularSet, nu: usize, q: &DyadicCube) -> (Dyadic, Dyadic) {
    let d = q.dim() as i64;
    let mid = &length(piece) * &Dyadic::pow2(q.scale as i64 * (d - 1));
    let upper = q.measure().shl(1 - nu as i64);
    (&mid - &piece.measure(), &upper - &mid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::RootRegion;
    use crate::scalar::ratio;

    fn unit2() -> RootRegion {
        RootRegion::new(2, 0, -3).unwrap()
    }

    #[test]
    fn small_cube_returns_input_verbatim() {
        let r = unit2();
        let e = GranularSet::from_cubes(r, [DyadicCube::new(-3, vec![1, 1]), DyadicCube::new(-3, vec![2, 3])].iter(), false).unwrap();
        let i = DyadicCube::new(-1, vec![0, 0]);
        // l(I) = 1/2 <= 2r with r = 1/4
        let out = lemma_construct(&e, &i, &ratio(1, 4)).unwrap();
        assert_eq!(out.selected, e.restrict(&i));
        assert!(out.cover.is_empty());
    }

    #[test]
    fn empty_intersection_gives_empty_output() {
        let r = unit2();
        let e = GranularSet::from_cubes(r, [DyadicCube::new(-3, vec![7, 7])].iter(), false).unwrap();
        let out = lemma_construct(&e, &DyadicCube::new(-1, vec![0, 0]), &ratio(1, 64)).unwrap();
        assert!(out.selected.is_empty());
        assert!(out.cover.is_empty());
    }

    #[test]
    fn lemma_rejects_bad_parameters() {
        let e = GranularSet::full(unit2());
        assert!(lemma_construct(&e, &unit2().root_cube(), &Rational::zero()).is_err());
        assert!(lemma_construct(&e, &DyadicCube::new(1, vec![0, 0]), &ratio(1, 2)).is_err());
    }

    #[test]
    fn full_cube_with_tiny_r_is_fast_and_valid() {
        let region = RootRegion::new(3, 0, -4).unwrap();
        let e = GranularSet::full(region);
        let r = ratio(1, 1 << 20);
        let i = region.root_cube();
        let out = lemma_construct(&e, &i, &r).unwrap();
        let (thick, mass) = lemma_slacks(&e, &i, &r, &out);
        assert!(!thick.is_negative());
        assert!(!mass.is_negative());
        assert_eq!(out.cover, vec![i]);
    }

    #[test]
    fn single_cube_split_is_trivial() {
        let e = GranularSet::from_cubes(unit2(), [DyadicCube::new(-2, vec![1, 2])].iter(), false).unwrap();
        let s = proposition_split(&e).unwrap();
        assert!(s.f.is_empty());
        assert_eq!(s.g, e);
        let chain = box_chain(&e, 5).unwrap();
        assert_eq!(chain.pieces.len(), 1);
        assert!(chain.residual.is_empty());
    }

    #[test]
    fn two_cube_split() {
        let e = GranularSet::from_cubes(unit2(), [DyadicCube::new(-2, vec![0, 0]), DyadicCube::new(-2, vec![2, 2])].iter(), false).unwrap();
        let s = proposition_split(&e).unwrap();
        assert!(s.f.is_empty());
        assert_eq!(s.g, e);
        let sl = split_slacks(&e, &s);
        // Θ(G) = 1/4, 8|G|/λ(E) = 2
        assert_eq!(sl.box_bound, ratio(1, 1) - ratio(1, 8));
        assert!(is_generalized_box(&e, &ratio(1, 1)));
    }

    #[test]
    fn generalized_box_on_single_cube_is_sharp() {
        let e = GranularSet::from_cubes(unit2(), [DyadicCube::new(-1, vec![1, 0])].iter(), false).unwrap();
        assert!(is_generalized_box(&e, &ratio(1, 1)));
        assert!(!is_generalized_box(&e, &ratio(999, 1000)));
    }

    #[test]
    fn zero_iterations_rejected() {
        assert!(box_chain(&GranularSet::full(unit2()), 0).is_err());
    }

    #[test]
    fn suffix_rule_is_also_valid() {
        let r = unit2();
        let cubes: Vec<_> = (0..8).map(|i| DyadicCube::new(-3, vec![i, (i * 3) % 8])).collect();
        let e = GranularSet::from_cubes(r, cubes.iter(), false).unwrap();
        for rule in [SubsetRule::MortonPrefix, SubsetRule::MortonSuffix] {
            let s = proposition_split_with(&e, rule).unwrap();
            let sl = split_slacks(&e, &s);
            assert!(!sl.half_length.is_negative());
            assert!(!sl.box_bound.is_negative());
            assert!(s.f.is_disjoint(&s.g));
            assert_eq!(s.f.union(&s.g).unwrap(), e);
        }
    }
}
