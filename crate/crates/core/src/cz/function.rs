use serde::{Deserialize, Serialize};

use crate::dyadic::{CubeWire, DyadicCube, GranularSet, Node, RootRegion};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Piecewise-constant value tree over the root cube.
#[derive(Clone, Debug, PartialEq)]
pub enum ValueNode<T> {
    Leaf(T),
    Split(Box<[ValueNode<T>]>),
}

impl<T: Scalar> ValueNode<T> {
    pub(crate) fn split(children: Vec<ValueNode<T>>) -> ValueNode<T> {
        if let ValueNode::Leaf(first) = &children[0] {
            if children.iter().all(|c| matches!(c, ValueNode::Leaf(v) if v == first)) {
                return ValueNode::Leaf(first.clone());
            }
        }
        ValueNode::Split(children.into_boxed_slice())
    }

    fn expand(&self, dim: usize) -> Vec<ValueNode<T>> {
        match self {
            ValueNode::Leaf(v) => vec![ValueNode::Leaf(v.clone()); 1 << dim],
            ValueNode::Split(ch) => ch.to_vec(),
        }
    }

    /// Like [`ValueNode::expand`] but moves the children out.
    fn take_children(&mut self, dim: usize) -> Vec<ValueNode<T>> {
        match std::mem::replace(self, ValueNode::Leaf(T::zero())) {
            ValueNode::Leaf(v) => vec![ValueNode::Leaf(v); 1 << dim],
            ValueNode::Split(ch) => ch.into_vec(),
        }
    }

    /// Overwrite the values on `set` with `value`.
    fn paint(&self, set: &Node, value: &T, dim: usize) -> ValueNode<T> {
        match set {
            Node::Empty => self.clone(),
            Node::Full => ValueNode::Leaf(value.clone()),
            Node::Split(sch) => {
                let ch = self.expand(dim);
                ValueNode::split(
                    ch.iter()
                        .zip(sch.iter())
                        .map(|(c, s)| c.paint(s, value, dim))
                        .collect(),
                )
            }
        }
    }

    /// Keep values on `set`, zero elsewhere.
    fn mask(&self, set: &Node, dim: usize) -> ValueNode<T> {
        match set {
            Node::Empty => ValueNode::Leaf(T::zero()),
            Node::Full => self.clone(),
            Node::Split(sch) => {
                let ch = self.expand(dim);
                ValueNode::split(
                    ch.iter()
                        .zip(sch.iter())
                        .map(|(c, s)| c.mask(s, dim))
                        .collect(),
                )
            }
        }
    }

    fn map<U: Scalar, F: Fn(&T) -> U + Copy>(&self, f: F) -> ValueNode<U> {
        match self {
            ValueNode::Leaf(v) => ValueNode::Leaf(f(v)),
            ValueNode::Split(ch) => ValueNode::split(ch.iter().map(|c| c.map(f)).collect()),
        }
    }

    fn zip_with<F: Fn(&T, &T) -> T + Copy>(&self, other: &ValueNode<T>, dim: usize, f: F) -> ValueNode<T> {
        match (self, other) {
            (ValueNode::Leaf(a), ValueNode::Leaf(b)) => ValueNode::Leaf(f(a, b)),
            _ => {
                let a = self.expand(dim);
                let b = other.expand(dim);
                ValueNode::split(
                    a.iter()
                        .zip(b.iter())
                        .map(|(x, y)| x.zip_with(y, dim, f))
                        .collect(),
                )
            }
        }
    }

    fn select<F: Fn(&T) -> bool + Copy>(&self, pred: F) -> Node {
        match self {
            ValueNode::Leaf(v) => {
                if pred(v) {
                    Node::Full
                } else {
                    Node::Empty
                }
            }
            ValueNode::Split(ch) => Node::split(ch.iter().map(|c| c.select(pred)).collect()),
        }
    }

    /// `∫ value` over the node (of the given scale).
    pub(crate) fn integral(&self, scale: i32, dim: usize) -> T {
        match self {
            ValueNode::Leaf(v) => v.clone() * T::pow2(scale as i64 * dim as i64),
            ValueNode::Split(ch) => ch
                .iter()
                .fold(T::zero(), |acc, c| acc + c.integral(scale - 1, dim)),
        }
    }

    fn walk_leaves<F: FnMut(&DyadicCube, &T)>(&self, cube: &DyadicCube, f: &mut F) {
        match self {
            ValueNode::Leaf(v) => f(cube, v),
            ValueNode::Split(ch) => {
                for (i, c) in ch.iter().enumerate() {
                    c.walk_leaves(&cube.child(i), f);
                }
            }
        }
    }
}

/// `f = Σ c_ν χ_{E_ν}` with pairwise disjoint granular supports.
///
/// Held internally as a canonical value tree (equal-valued siblings merged),
/// so two functions compare equal iff they agree everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct GranularFunction<T> {
    region: RootRegion,
    tree: ValueNode<T>,
}

impl<T: Scalar> GranularFunction<T> {
    pub fn zero(region: RootRegion) -> Self {
        GranularFunction {
            region,
            tree: ValueNode::Leaf(T::zero()),
        }
    }

    /// Build from `(value, support)` pairs; supports must be pairwise disjoint.
    pub fn from_pieces(region: RootRegion, pieces: Vec<(T, GranularSet)>) -> Result<Self> {
        let mut seen: Vec<&GranularSet> = Vec::with_capacity(pieces.len());
        for (i, (_, s)) in pieces.iter().enumerate() {
            if *s.region() != region {
                return Err(Error::RegionMismatch);
            }
            for (j, prev) in seen.iter().enumerate() {
                if !prev.is_disjoint(s) {
                    return Err(Error::OverlappingSupports(j, i));
                }
            }
            seen.push(s);
        }
        let mut tree = ValueNode::Leaf(T::zero());
        for (v, s) in &pieces {
            tree = tree.paint(s.root(), v, region.dim);
        }
        Ok(GranularFunction { region, tree })
    }

    /// Constant `value` on the whole root cube.
    pub fn constant(region: RootRegion, value: T) -> Self {
        GranularFunction {
            region,
            tree: ValueNode::Leaf(value),
        }
    }

    pub fn region(&self) -> &RootRegion {
        &self.region
    }

    pub fn tree(&self) -> &ValueNode<T> {
        &self.tree
    }

    /// Nonzero pieces grouped by value, in order of first appearance (Morton).
    pub fn pieces(&self) -> Vec<(T, GranularSet)> {
        let mut groups: Vec<(T, Node)> = Vec::new();
        let dim = self.region.dim;
        let region = self.region;
        self.tree.walk_leaves(&region.root_cube(), &mut |q, v| {
            if v.is_zero() {
                return;
            }
            let path = crate::dyadic::path_to(&region, q);
            match groups.iter_mut().find(|(w, _)| w == v) {
                Some((_, n)) => n.insert_path(&path, dim),
                None => {
                    let mut n = Node::Empty;
                    n.insert_path(&path, dim);
                    groups.push((v.clone(), n));
                }
            }
        });
        groups
            .into_iter()
            .map(|(v, n)| (v, GranularSet::from_node(region, n)))
            .collect()
    }

    /// Maximal constant cells with nonzero value, Morton order.
    pub fn leaves(&self) -> Vec<(T, DyadicCube)> {
        let mut out = Vec::new();
        self.tree.walk_leaves(&self.region.root_cube(), &mut |q, v| {
            if !v.is_zero() {
                out.push((v.clone(), q.clone()));
            }
        });
        out
    }

    /// All leaves including zero ones.
    pub fn all_leaves(&self) -> Vec<(T, DyadicCube)> {
        let mut out = Vec::new();
        self.tree.walk_leaves(&self.region.root_cube(), &mut |q, v| out.push((v.clone(), q.clone())));
        out
    }

    pub fn support(&self) -> GranularSet {
        GranularSet::from_node(self.region, self.tree.select(|v| !v.is_zero()))
    }

    /// `{x : pred(f(x))}`.
    pub fn select<F: Fn(&T) -> bool + Copy>(&self, pred: F) -> GranularSet {
        GranularSet::from_node(self.region, self.tree.select(pred))
    }

    /// `f χ_E`.
    pub fn restrict_to(&self, e: &GranularSet) -> Self {
        GranularFunction {
            region: self.region,
            tree: self.tree.mask(e.root(), self.region.dim),
        }
    }

    /// Replace values on `e` by `value`.
    pub fn paint(&self, e: &GranularSet, value: &T) -> Self {
        GranularFunction {
            region: self.region,
            tree: self.tree.paint(e.root(), value, self.region.dim),
        }
    }

    pub fn map<U: Scalar, F: Fn(&T) -> U + Copy>(&self, f: F) -> GranularFunction<U> {
        GranularFunction {
            region: self.region,
            tree: self.tree.map(f),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.region != other.region {
            return Err(Error::RegionMismatch);
        }
        Ok(GranularFunction {
            region: self.region,
            tree: self.tree.zip_with(&other.tree, self.region.dim, |a, b| a.clone() + b.clone()),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.region != other.region {
            return Err(Error::RegionMismatch);
        }
        Ok(GranularFunction {
            region: self.region,
            tree: self.tree.zip_with(&other.tree, self.region.dim, |a, b| a.clone() - b.clone()),
        })
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    /// `∫ f`.
    pub fn integral(&self) -> T {
        self.tree.integral(self.region.root_scale, self.region.dim)
    }

    /// `∫_Q f` for a cube inside the root.
    pub fn integral_over(&self, q: &DyadicCube) -> T {
        let mut node = &self.tree;
        for &c in &crate::dyadic::path_to(&self.region, q) {
            match node {
                ValueNode::Split(ch) => node = &ch[c],
                ValueNode::Leaf(v) => {
                    return v.clone() * T::pow2(q.scale as i64 * self.region.dim as i64);
                }
            }
        }
        node.integral(q.scale, self.region.dim)
    }

    /// Value on a base cell (or any cube on which `f` is constant); `None` if
    /// `f` is not constant there.
    pub fn value_on(&self, q: &DyadicCube) -> Option<T> {
        let mut node = &self.tree;
        for &c in &crate::dyadic::path_to(&self.region, q) {
            match node {
                ValueNode::Split(ch) => node = &ch[c],
                ValueNode::Leaf(v) => return Some(v.clone()),
            }
        }
        match node {
            ValueNode::Leaf(v) => Some(v.clone()),
            ValueNode::Split(_) => None,
        }
    }

    /// Largest `|f|`.
    pub fn sup_abs(&self) -> T {
        let mut best = T::zero();
        self.tree.walk_leaves(&self.region.root_cube(), &mut |_, v| {
            let a = v.abs();
            if a > best {
                best = a;
            }
        });
        best
    }

    /// Whether every nonzero leaf is at or above the base scale.
    pub fn is_base_resolved(&self) -> bool {
        let mut ok = true;
        let base = self.region.base_scale;
        self.tree.walk_leaves(&self.region.root_cube(), &mut |q, _| {
            if q.scale < base {
                ok = false;
            }
        });
        ok
    }

    /// Values on base cells, row-major with the last axis fastest. Cells that
    /// are not constant get their average.
    pub fn rasterize(&self) -> Vec<T> {
        let n = self.region.cells_per_axis() as usize;
        let dim = self.region.dim;
        let base = self.region.base_scale;
        let mut out = vec![T::zero(); n.pow(dim as u32)];
        let cell_measure = T::pow2(base as i64 * dim as i64);
        self.tree.walk_leaves(&self.region.root_cube(), &mut |q, v| {
            if v.is_zero() {
                return;
            }
            if q.scale >= base {
                let (lo, hi) = q.bounds_at(base);
                crate::dyadic::for_each_in_box(&lo, &hi, |idx| {
                    let flat = idx.iter().fold(0usize, |acc, &x| acc * n + x as usize);
                    out[flat] = v.clone();
                });
            } else {
                let cell = q.ancestor(base);
                let flat = cell.corner.iter().fold(0usize, |acc, &x| acc * n + x as usize);
                let w = T::pow2(q.scale as i64 * dim as i64) / cell_measure.clone();
                out[flat] = out[flat].clone() + v.clone() * w;
            }
        });
        out
    }

    pub fn to_wire(&self) -> FunctionWire {
        FunctionWire {
            dim: self.region.dim,
            root_scale: self.region.root_scale,
            base_scale: self.region.base_scale,
            pieces: self
                .pieces()
                .into_iter()
                .map(|(v, s)| PieceWire {
                    value: v.to_f64_lossy(),
                    cubes: s.cubes().into_iter().map(CubeWire::from).collect(),
                })
                .collect(),
        }
    }

    pub fn from_wire(w: &FunctionWire) -> Result<Self> {
        let region = RootRegion::new(w.dim, w.root_scale, w.base_scale)?;
        let mut pieces = Vec::with_capacity(w.pieces.len());
        for p in &w.pieces {
            if !p.value.is_finite() {
                return Err(Error::Malformed("non-finite function value".into()));
            }
            let cubes: Vec<DyadicCube> = p.cubes.iter().map(CubeWire::to_cube).collect();
            let s = GranularSet::from_cubes(region, cubes.iter(), false)?;
            pieces.push((T::from_f64_lossy(p.value), s));
        }
        Self::from_pieces(region, pieces)
    }

    /// Add `v` on each listed cube.
    pub fn add_cells(&mut self, cells: &[(T, DyadicCube)]) {
        let dim = self.region.dim;
        for (v, q) in cells {
            let path = crate::dyadic::path_to(&self.region, q);
            add_on_path(&mut self.tree, &path, v, dim);
        }
    }

    /// Coarsest cubes on which the two functions differ, Morton order.
    pub fn diff_cubes(&self, other: &Self) -> Vec<DyadicCube> {
        let mut out = Vec::new();
        diff_walk(&self.tree, &other.tree, &self.region.root_cube(), &mut out);
        out
    }

    pub(crate) fn from_tree(region: RootRegion, tree: ValueNode<T>) -> Self {
        GranularFunction { region, tree }
    }
}

fn add_on_path<T: Scalar>(node: &mut ValueNode<T>, path: &[usize], v: &T, dim: usize) {
    if path.is_empty() {
        *node = add_all(node, v);
        return;
    }
    let mut ch = node.take_children(dim);
    add_on_path(&mut ch[path[0]], &path[1..], v, dim);
    *node = ValueNode::split(ch);
}

fn add_all<T: Scalar>(node: &ValueNode<T>, v: &T) -> ValueNode<T> {
    match node {
        ValueNode::Leaf(w) => ValueNode::Leaf(w.clone() + v.clone()),
        ValueNode::Split(ch) => ValueNode::split(ch.iter().map(|c| add_all(c, v)).collect()),
    }
}

fn diff_walk<T: Scalar>(a: &ValueNode<T>, b: &ValueNode<T>, cube: &DyadicCube, out: &mut Vec<DyadicCube>) {
    match (a, b) {
        (ValueNode::Leaf(x), ValueNode::Leaf(y)) => {
            if x != y {
                out.push(cube.clone());
            }
        }
        (ValueNode::Split(ca), ValueNode::Split(cb)) => {
            for i in 0..ca.len() {
                diff_walk(&ca[i], &cb[i], &cube.child(i), out);
            }
        }
        // a leaf against a split tree differs somewhere below by canonicity
        _ => out.push(cube.clone()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceWire {
    pub value: f64,
    pub cubes: Vec<CubeWire>,
}

/// JSON form of a granular function: one entry per distinct nonzero value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionWire {
    pub dim: usize,
    pub root_scale: i32,
    pub base_scale: i32,
    pub pieces: Vec<PieceWire>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};

    fn region() -> RootRegion {
        RootRegion::new(2, 0, -2).unwrap()
    }

    fn cube_set(cubes: &[DyadicCube]) -> GranularSet {
        GranularSet::from_cubes(region(), cubes.iter(), false).unwrap()
    }

    #[test]
    fn overlapping_supports_are_rejected() {
        let a = cube_set(&[DyadicCube::new(-1, vec![0, 0])]);
        let b = cube_set(&[DyadicCube::new(-2, vec![1, 1])]);
        let err = GranularFunction::<f64>::from_pieces(region(), vec![(1.0, a), (2.0, b)]);
        assert_eq!(err, Err(Error::OverlappingSupports(0, 1)));
    }

    #[test]
    fn pieces_roundtrip_and_integral() {
        let a = cube_set(&[DyadicCube::new(-1, vec![0, 0])]);
        let b = cube_set(&[DyadicCube::new(-2, vec![3, 3]), DyadicCube::new(-2, vec![2, 0])]);
        let f = GranularFunction::from_pieces(region(), vec![(ratio(3, 1), a.clone()), (ratio(-1, 2), b.clone())]).unwrap();
        let back = f.pieces();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], (ratio(3, 1), a));
        assert_eq!(back[1], (ratio(-1, 2), b));
        // 3 * 1/4 - 1/2 * 2/16
        assert_eq!(f.integral(), ratio(3, 4) - ratio(1, 16));
        assert_eq!(f.integral_over(&DyadicCube::new(-1, vec![0, 0])), ratio(3, 4));
        assert_eq!(f.value_on(&DyadicCube::new(-2, vec![3, 3])), Some(ratio(-1, 2)));
        assert_eq!(f.value_on(&DyadicCube::new(-1, vec![1, 1])), None);
    }

    #[test]
    fn add_sub_mask() {
        let a = cube_set(&[DyadicCube::new(-1, vec![1, 0])]);
        let f = GranularFunction::from_pieces(region(), vec![(2.0, a.clone())]).unwrap();
        let g = GranularFunction::constant(region(), 1.0);
        let h = f.add(&g).unwrap();
        assert_eq!(h.value_on(&DyadicCube::new(-2, vec![2, 0])), Some(3.0));
        assert_eq!(h.sub(&g).unwrap(), f);
        assert_eq!(h.restrict_to(&a), GranularFunction::constant(region(), 3.0).restrict_to(&a));
        assert_eq!(f.support(), a);
    }

    #[test]
    fn rasterize_row_major() {
        let a = cube_set(&[DyadicCube::new(-2, vec![1, 2])]);
        let f = GranularFunction::<Rational>::from_pieces(region(), vec![(ratio(5, 1), a)]).unwrap();
        let r = f.rasterize();
        assert_eq!(r[4 + 2], ratio(5, 1));
        assert_eq!(r.iter().filter(|v| !num_traits::Zero::is_zero(*v)).count(), 1);
    }
}
