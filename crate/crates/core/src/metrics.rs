//! Exact length (dyadic one-dimensional content), thickness and critical
//! thickness of granular sets.
//!
//! All three are computed by dynamic programs over the region tree of the set.
//! Cover cubes range over dyadic cubes inside the root; a cube containing the
//! root costs at least as much as the root itself, and an overlapping cover can
//! always be thinned to an antichain without increasing its cost, so the
//! restriction loses nothing.

use num_traits::{Signed, Zero};

use crate::dyadic::{DyadicCube, GranularSet, Node};
use crate::error::{Error, Result};
use crate::scalar::{pow2, Dyadic, Rational};

/// `λ(E)`: minimal total side length of a dyadic cover.
pub fn length(e: &GranularSet) -> Dyadic {
    length_node(e.root(), e.region().root_scale)
}

fn length_node(node: &Node, scale: i32) -> Dyadic {
    match node {
        Node::Empty => Dyadic::zero(),
        Node::Full => Dyadic::pow2(scale as i64),
        Node::Split(ch) => {
            let sub: Dyadic = ch.iter().map(|c| length_node(c, scale - 1)).sum();
            let own = Dyadic::pow2(scale as i64);
            if own <= sub {
                own
            } else {
                sub
            }
        }
    }
}

/// `λ(E)` together with an optimal cover (an antichain, Morton-sorted). Ties
/// between a cube and its children prefer the single cube.
pub fn length_with_cover(e: &GranularSet) -> (Dyadic, Vec<DyadicCube>) {
    let mut cover = Vec::new();
    let v = length_cover_node(e.root(), &e.region().root_cube(), &mut cover);
    (v, cover)
}

fn length_cover_node(node: &Node, cube: &DyadicCube, out: &mut Vec<DyadicCube>) -> Dyadic {
    match node {
        Node::Empty => Dyadic::zero(),
        Node::Full => {
            out.push(cube.clone());
            cube.side()
        }
        Node::Split(ch) => {
            let mark = out.len();
            let sub: Dyadic = ch
                .iter()
                .enumerate()
                .map(|(i, c)| length_cover_node(c, &cube.child(i), out))
                .sum();
            let own = cube.side();
            if own <= sub {
                out.truncate(mark);
                out.push(cube.clone());
                own
            } else {
                sub
            }
        }
    }
}

/// `Θ(E)` with a maximizing cube.
#[derive(Clone, Debug, PartialEq)]
pub struct Thickness {
    pub value: Dyadic,
    /// `None` for the empty set.
    pub argmax: Option<DyadicCube>,
}

/// `Θ(E) = sup_Q |E ∩ Q| / l(Q)` over all dyadic cubes. Only nodes of the
/// region tree can be maximizers: a cube inside a full leaf has a ratio no
/// larger than the leaf, a cube inside an empty leaf has ratio zero, and cubes
/// strictly containing the root have a smaller ratio than the root.
///
/// Ties prefer the larger cube, then the Morton-first one.
pub fn thickness(e: &GranularSet) -> Thickness {
    let mut best: Option<(Dyadic, DyadicCube)> = None;
    thickness_node(e.root(), &e.region().root_cube(), &mut best);
    match best {
        None => Thickness {
            value: Dyadic::zero(),
            argmax: None,
        },
        Some((v, q)) => Thickness {
            value: v,
            argmax: Some(q),
        },
    }
}

fn thickness_node(node: &Node, cube: &DyadicCube, best: &mut Option<(Dyadic, DyadicCube)>) -> Dyadic {
    let dim = cube.dim();
    let m = match node {
        Node::Empty => return Dyadic::zero(),
        Node::Full => cube.measure(),
        Node::Split(ch) => {
            // Evaluate this node before its descendants so that ties keep the larger cube.
            let m = node.measure(cube.scale, dim);
            consider(best, m.shl(-(cube.scale as i64)), cube);
            for (i, c) in ch.iter().enumerate() {
                thickness_node(c, &cube.child(i), best);
            }
            return m;
        }
    };
    consider(best, m.shl(-(cube.scale as i64)), cube);
    m
}

fn consider(best: &mut Option<(Dyadic, DyadicCube)>, ratio: Dyadic, cube: &DyadicCube) {
    match best {
        Some((v, _)) if *v >= ratio => {}
        _ => *best = Some((ratio, cube.clone())),
    }
}

/// Value of the cover functional `min_Q [2r Σ l(Q) + |E \ ∪Q|]` and a
/// minimizing antichain. Ties prefer covering the node.
pub fn cover_functional(e: &GranularSet, r: &Rational) -> (Rational, Vec<DyadicCube>) {
    let two_r = r * Rational::from_integer(2.into());
    let mut cover = Vec::new();
    let v = phi_node(e.root(), &e.region().root_cube(), &two_r, &mut cover);
    (v, cover)
}

fn phi_node(node: &Node, cube: &DyadicCube, two_r: &Rational, out: &mut Vec<DyadicCube>) -> Rational {
    let take = || two_r * pow2(cube.scale as i64);
    match node {
        Node::Empty => Rational::zero(),
        Node::Full => {
            let cost = take();
            let leave = cube.measure().to_rational();
            if cost <= leave {
                out.push(cube.clone());
                cost
            } else {
                leave
            }
        }
        Node::Split(ch) => {
            let mark = out.len();
            let mut sub = Rational::zero();
            for (i, c) in ch.iter().enumerate() {
                sub += phi_node(c, &cube.child(i), two_r, out);
            }
            let cost = take();
            if cost <= sub {
                out.truncate(mark);
                out.push(cube.clone());
                cost
            } else {
                sub
            }
        }
    }
}

/// Total side length of a list of cubes.
pub fn side_sum(cubes: &[DyadicCube]) -> Dyadic {
    cubes.iter().map(DyadicCube::side).sum()
}

/// `E` minus the union of `cubes`.
pub fn uncovered(e: &GranularSet, cubes: &[DyadicCube]) -> GranularSet {
    let cover = GranularSet::from_cubes(*e.region(), cubes.iter(), true)
        .expect("cover cubes lie in the root");
    e.difference(&cover).expect("same region")
}

/// Slack of the critical-thickness inequality for one collection:
/// `2r Σ l(Q) + |E \ ∪Q| − r λ(E)`. Nonnegative for every collection iff
/// `r ≤ ϑ(E)`.
pub fn critical_slack(e: &GranularSet, cubes: &[DyadicCube], r: &Rational, lambda: &Rational) -> Rational {
    let two = Rational::from_integer(2.into());
    &two * r * side_sum(cubes).to_rational() + uncovered(e, cubes).measure().to_rational()
        - r * lambda
}

/// Critical thickness `ϑ(E)` with its witnesses.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalThickness {
    pub theta_crit: Rational,
    /// Collection attaining equality in `ϑλ = 2ϑ Σ l(Q) + |E*|`.
    pub witness_cover: Vec<DyadicCube>,
    /// `E* = E \ ∪ witness_cover`.
    pub core: GranularSet,
    pub lambda: Dyadic,
    pub iterations: usize,
    /// Dinkelbach iterates `r_0 > r_1 > ...`; the last one is `ϑ(E)`.
    pub iterates: Vec<Rational>,
}

const MAX_DINKELBACH: usize = 10_000;

/// Largest `r ≥ 0` with `r λ(E) ≤ 2r Σ l(Q) + |E \ ∪Q|` for every finite
/// dyadic collection, found by Dinkelbach iteration on the ratio
/// `|E \ ∪Q| / (λ(E) − 2Σ l(Q))_+`. Each step solves the cover functional
/// exactly; the loop stops when its minimum equals `r λ(E)`.
pub fn critical_thickness(e: &GranularSet) -> Result<CriticalThickness> {
    if e.is_empty() {
        return Err(Error::EmptySet("critical thickness"));
    }
    let lambda_d = length(e);
    let lambda = lambda_d.to_rational();
    let two = Rational::from_integer(2.into());
    let mut r = e.measure().to_rational() / &lambda;
    let mut iterates = vec![r.clone()];
    for it in 1..=MAX_DINKELBACH {
        let (phi, cover) = cover_functional(e, &r);
        let target = &r * &lambda;
        debug_assert!(phi <= target, "cover functional exceeds r·λ at an attained ratio");
        if phi == target {
            let core = uncovered(e, &cover);
            return Ok(CriticalThickness {
                theta_crit: r,
                witness_cover: cover,
                core,
                lambda: lambda_d,
                iterations: it,
                iterates,
            });
        }
        let sides = side_sum(&cover).to_rational();
        let denom = &lambda - &two * &sides;
        // phi < rλ forces a positive denominator
        debug_assert!(denom.is_positive());
        let numer = &phi - &two * &r * &sides;
        r = numer / denom;
        iterates.push(r.clone());
    }
    Err(Error::OutOfRange("Dinkelbach iteration did not terminate".into()))
}

/// `|E| / λ(E)`, an upper bound for the critical thickness.
pub fn density_ratio(e: &GranularSet) -> Option<Rational> {
    let l = length(e);
    if l.is_zero() {
        None
    } else {
        Some(e.measure().to_rational() / l.to_rational())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::RootRegion;
    use crate::scalar::ratio;

    fn unit2() -> RootRegion {
        RootRegion::new(2, 0, -3).unwrap()
    }

    fn two_cubes() -> GranularSet {
        GranularSet::from_cubes(
            unit2(),
            [DyadicCube::new(-2, vec![0, 0]), DyadicCube::new(-2, vec![2, 2])].iter(),
            false,
        )
        .unwrap()
    }

    #[test]
    fn length_of_single_cube_is_its_side() {
        let e = GranularSet::from_cubes(unit2(), [DyadicCube::new(-2, vec![1, 3])].iter(), false).unwrap();
        assert_eq!(length(&e), Dyadic::pow2(-2));
        assert_eq!(length(&GranularSet::empty(unit2())), Dyadic::zero());
    }

    #[test]
    fn two_cube_example() {
        let e = two_cubes();
        let (l, cover) = length_with_cover(&e);
        assert_eq!(l.to_rational(), ratio(1, 2));
        assert_eq!(cover.len(), 2);
        let t = thickness(&e);
        assert_eq!(t.value.to_rational(), ratio(1, 4));
        assert_eq!(t.argmax.unwrap().scale, -2);
        let c = critical_thickness(&e).unwrap();
        assert_eq!(c.theta_crit, ratio(1, 4));
        assert!(c.witness_cover.is_empty());
        assert_eq!(c.core, e);
    }

    #[test]
    fn full_root_cube() {
        let e = GranularSet::full(unit2());
        assert_eq!(length(&e), Dyadic::pow2(0));
        let t = thickness(&e);
        assert_eq!(t.value, Dyadic::pow2(0));
        assert_eq!(t.argmax, Some(unit2().root_cube()));
        let c = critical_thickness(&e).unwrap();
        assert_eq!(c.theta_crit, ratio(1, 1));
        assert!(c.witness_cover.is_empty());
        assert_eq!(c.iterations, 1);
    }

    #[test]
    fn empty_set_has_no_critical_thickness() {
        assert_eq!(
            critical_thickness(&GranularSet::empty(unit2())),
            Err(Error::EmptySet("critical thickness"))
        );
        assert_eq!(thickness(&GranularSet::empty(unit2())).value, Dyadic::zero());
    }

    #[test]
    fn critical_thickness_below_density_ratio_with_witness_equality() {
        // a full quadrant plus a scattered base cell
        let e = GranularSet::from_cubes(
            unit2(),
            [DyadicCube::new(-1, vec![0, 0]), DyadicCube::new(-3, vec![7, 7]), DyadicCube::new(-3, vec![7, 0])].iter(),
            false,
        )
        .unwrap();
        let c = critical_thickness(&e).unwrap();
        assert!(c.theta_crit <= density_ratio(&e).unwrap());
        assert!(c.theta_crit.is_positive());
        let slack = critical_slack(&e, &c.witness_cover, &c.theta_crit, &c.lambda.to_rational());
        assert!(slack.is_zero());
        for w in c.iterates.windows(2) {
            assert!(w[1] < w[0]);
        }
    }
}
