use super::function::{GranularFunction, ValueNode};
use crate::dyadic::DyadicCube;
use crate::scalar::Scalar;

/// Dyadic maximal function: at each point, the largest average of `h` over
/// a dyadic cube inside the root containing it. Averages are computed in `T`,
/// so they are exact for rational `T`.
///
/// Expects `h ≥ 0`.
pub fn hl_maximal_dyadic<T: Scalar>(h: &GranularFunction<T>) -> GranularFunction<T> {
    let region = *h.region();
    let tree = walk(h.tree(), region.root_scale, region.dim, None);
    GranularFunction::from_tree(region, tree)
}

fn walk<T: Scalar>(node: &ValueNode<T>, scale: i32, dim: usize, anc: Option<&T>) -> ValueNode<T> {
    match node {
        // every dyadic subcube of a constant leaf has the leaf value as its average
        ValueNode::Leaf(v) => ValueNode::Leaf(max_opt(v.clone(), anc)),
        ValueNode::Split(ch) => {
            let vol = T::pow2(scale as i64 * dim as i64);
            let avg = node.integral(scale, dim) / vol;
            let cur = max_opt(avg, anc);
            ValueNode::split(ch.iter().map(|c| walk(c, scale - 1, dim, Some(&cur))).collect())
        }
    }
}

fn max_opt<T: Scalar>(v: T, anc: Option<&T>) -> T {
    match anc {
        Some(a) if *a > v => a.clone(),
        _ => v,
    }
}

/// Largest average of `h` over any dyadic cube in the root containing `cell`.
pub fn dyadic_maximal_at<T: Scalar>(h: &GranularFunction<T>, cell: &DyadicCube) -> T {
    let mut best: Option<T> = None;
    let mut q = cell.clone();
    loop {
        let avg = h.integral_over(&q) / T::pow2(q.scale as i64 * h.region().dim as i64);
        best = Some(max_opt(avg, best.as_ref()));
        if q.scale >= h.region().root_scale {
            break;
        }
        q = q.parent();
    }
    best.unwrap_or_else(T::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{GranularSet, RootRegion};
    use crate::scalar::{ratio, Rational};

    #[test]
    fn constant_is_fixed() {
        let r = RootRegion::new(2, 0, -3).unwrap();
        let h = GranularFunction::constant(r, ratio(3, 2));
        assert_eq!(hl_maximal_dyadic(&h), h);
    }

    #[test]
    fn single_cell_averages() {
        // h = χ of one base cell at scale −L; at a cell whose smallest common
        // ancestor with it has scale s, M h = 2^{−2L} / 2^{2s}
        let l = 3;
        let r = RootRegion::new(2, 0, -l).unwrap();
        let c = DyadicCube::new(-l, vec![0, 0]);
        let h = GranularFunction::from_pieces(r, vec![(Rational::from_integer(1.into()), GranularSet::from_cube(r, &c).unwrap())]).unwrap();
        let m = hl_maximal_dyadic(&h);
        assert_eq!(m.value_on(&c), Some(ratio(1, 1)));
        // common ancestor at scale −2
        assert_eq!(m.value_on(&DyadicCube::new(-3, vec![1, 1])), Some(ratio(1, 4)));
        // common ancestor at scale −1
        assert_eq!(m.value_on(&DyadicCube::new(-3, vec![3, 0])), Some(ratio(1, 16)));
        // common ancestor is the root
        assert_eq!(m.value_on(&DyadicCube::new(-3, vec![7, 7])), Some(ratio(1, 64)));
        for cell in r.base_cells() {
            assert_eq!(m.value_on(&cell), Some(dyadic_maximal_at(&h, &cell)));
        }
    }
}
