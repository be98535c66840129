use serde::{Deserialize, Serialize};

use super::cube::{DyadicCube, RootRegion};
use crate::error::{Error, Result};
use crate::scalar::{Dyadic, DyadicWire};

/// Region tree node. Children are stored in Morton order (see
/// [`DyadicCube::child`]). A tree is canonical when no `Split` node has children
/// that are all `Full` or all `Empty`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Empty,
    Full,
    Split(Box<[Node]>),
}

impl Node {
    pub fn is_empty(&self) -> bool {
        matches!(self, Node::Empty)
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Node::Full)
    }

    /// Build a split node and collapse it if possible.
    pub fn split(children: Vec<Node>) -> Node {
        if children.iter().all(Node::is_empty) {
            Node::Empty
        } else if children.iter().all(Node::is_full) {
            Node::Full
        } else {
            Node::Split(children.into_boxed_slice())
        }
    }

    fn full_children(dim: usize) -> Vec<Node> {
        vec![Node::Full; 1 << dim]
    }

    fn empty_children(dim: usize) -> Vec<Node> {
        vec![Node::Empty; 1 << dim]
    }

    /// Children of this node, expanding leaves.
    pub fn expand(&self, dim: usize) -> Vec<Node> {
        match self {
            Node::Empty => Self::empty_children(dim),
            Node::Full => Self::full_children(dim),
            Node::Split(ch) => ch.to_vec(),
        }
    }

    /// Like [`Node::expand`] but moves the children out, leaving `Empty`.
    fn take_children(&mut self, dim: usize) -> Vec<Node> {
        match std::mem::replace(self, Node::Empty) {
            Node::Empty => Self::empty_children(dim),
            Node::Full => Self::full_children(dim),
            Node::Split(ch) => ch.into_vec(),
        }
    }

    /// Measure of the subtree rooted at a node of the given scale.
    pub fn measure(&self, scale: i32, dim: usize) -> Dyadic {
        match self {
            Node::Empty => Dyadic::zero(),
            Node::Full => Dyadic::pow2(scale as i64 * dim as i64),
            Node::Split(ch) => ch.iter().map(|c| c.measure(scale - 1, dim)).sum(),
        }
    }

    pub fn union(&self, other: &Node) -> Node {
        match (self, other) {
            (Node::Full, _) | (_, Node::Full) => Node::Full,
            (Node::Empty, x) | (x, Node::Empty) => x.clone(),
            (Node::Split(a), Node::Split(b)) => Node::split(
                a.iter().zip(b.iter()).map(|(x, y)| x.union(y)).collect(),
            ),
        }
    }

    pub fn intersect(&self, other: &Node) -> Node {
        match (self, other) {
            (Node::Empty, _) | (_, Node::Empty) => Node::Empty,
            (Node::Full, x) | (x, Node::Full) => x.clone(),
            (Node::Split(a), Node::Split(b)) => Node::split(
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| x.intersect(y))
                    .collect(),
            ),
        }
    }

    pub fn difference(&self, other: &Node) -> Node {
        match (self, other) {
            (Node::Empty, _) | (_, Node::Full) => Node::Empty,
            (x, Node::Empty) => x.clone(),
            (Node::Full, Node::Split(b)) => {
                Node::split(b.iter().map(|y| Node::Full.difference(y)).collect())
            }
            (Node::Split(a), Node::Split(b)) => Node::split(
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| x.difference(y))
                    .collect(),
            ),
        }
    }

    pub fn complement(&self) -> Node {
        match self {
            Node::Empty => Node::Full,
            Node::Full => Node::Empty,
            Node::Split(ch) => Node::split(ch.iter().map(Node::complement).collect()),
        }
    }

    /// Insert a descendant cube given by its path of child indices.
    pub fn insert_path(&mut self, path: &[usize], dim: usize) {
        if self.is_full() {
            return;
        }
        if path.is_empty() {
            *self = Node::Full;
            return;
        }
        let mut ch = self.take_children(dim);
        ch[path[0]].insert_path(&path[1..], dim);
        *self = Node::split(ch);
    }

    /// Canonicalize bottom-up (merges complete sibling families).
    pub fn canonical(&self) -> Node {
        match self {
            Node::Split(ch) => Node::split(ch.iter().map(Node::canonical).collect()),
            x => x.clone(),
        }
    }

    /// Depth-first traversal in Morton order, calling `f` for every node with
    /// the cube it represents. Returning `false` from `f` skips the subtree.
    pub fn walk<F: FnMut(&DyadicCube, &Node) -> bool>(&self, cube: &DyadicCube, f: &mut F) {
        if !f(cube, self) {
            return;
        }
        if let Node::Split(ch) = self {
            for (i, c) in ch.iter().enumerate() {
                c.walk(&cube.child(i), f);
            }
        }
    }

    /// Union with a box `[lo, hi)` given in units of `2^box_scale`.
    pub fn fill_box(&mut self, cube: &DyadicCube, lo: &[i64], hi: &[i64], box_scale: i32) {
        if self.is_full() {
            return;
        }
        match box_relation(cube, lo, hi, box_scale) {
            BoxRelation::Disjoint => {}
            BoxRelation::Inside => *self = Node::Full,
            BoxRelation::Partial => {
                let dim = cube.dim();
                let mut ch = self.take_children(dim);
                for (i, c) in ch.iter_mut().enumerate() {
                    c.fill_box(&cube.child(i), lo, hi, box_scale);
                }
                *self = Node::split(ch);
            }
        }
    }

    /// Number of leaves that are `Full`.
    pub fn full_leaf_count(&self) -> usize {
        match self {
            Node::Empty => 0,
            Node::Full => 1,
            Node::Split(ch) => ch.iter().map(Node::full_leaf_count).sum(),
        }
    }

    /// Finest scale of any `Full` leaf below a node at `scale`.
    pub fn finest_scale(&self, scale: i32) -> Option<i32> {
        match self {
            Node::Empty => None,
            Node::Full => Some(scale),
            Node::Split(ch) => ch.iter().filter_map(|c| c.finest_scale(scale - 1)).min(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Node::Split(ch) => 1 + ch.iter().map(Node::node_count).sum::<usize>(),
            _ => 1,
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub(crate) enum BoxRelation {
    Disjoint,
    Inside,
    Partial,
}

pub(crate) fn box_relation(cube: &DyadicCube, lo: &[i64], hi: &[i64], box_scale: i32) -> BoxRelation {
    // Express both in units of the finer of the two scales.
    let unit = cube.scale.min(box_scale);
    let cf = 1i64 << (cube.scale - unit);
    let bf = 1i64 << (box_scale - unit);
    let mut inside = true;
    for j in 0..cube.dim() {
        let (a0, a1) = (cube.corner[j] * cf, (cube.corner[j] + 1) * cf);
        let (b0, b1) = (lo[j] * bf, hi[j] * bf);
        if a1 <= b0 || b1 <= a0 {
            return BoxRelation::Disjoint;
        }
        if a0 < b0 || a1 > b1 {
            inside = false;
        }
    }
    if inside {
        BoxRelation::Inside
    } else {
        BoxRelation::Partial
    }
}

/// A finite union of dyadic cubes inside the root region, held as a canonical
/// region tree. Equality of two sets is structural equality of their trees.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GranularSet {
    region: RootRegion,
    root: Node,
}

impl GranularSet {
    pub fn empty(region: RootRegion) -> Self {
        GranularSet {
            region,
            root: Node::Empty,
        }
    }

    pub fn full(region: RootRegion) -> Self {
        GranularSet {
            region,
            root: Node::Full,
        }
    }

    /// Wrap a tree (canonicalized on the way in).
    pub fn from_node(region: RootRegion, root: Node) -> Self {
        GranularSet {
            region,
            root: root.canonical(),
        }
    }

    /// Canonical set for the union of `cubes`. Cubes finer than the base
    /// scale are rejected unless `allow_refined` is set.
    pub fn from_cubes<'a, I>(region: RootRegion, cubes: I, allow_refined: bool) -> Result<Self>
    where
        I: IntoIterator<Item = &'a DyadicCube>,
    {
        let mut root = Node::Empty;
        for q in cubes {
            if q.dim() != region.dim {
                return Err(Error::DimensionMismatch {
                    expected: region.dim,
                    got: q.dim(),
                });
            }
            if !region.contains_cube(q) {
                return Err(Error::CubeOutsideRoot { cube: q.clone() });
            }
            if q.scale < region.base_scale && !allow_refined {
                return Err(Error::BelowBaseScale {
                    cube: q.clone(),
                    base_scale: region.base_scale,
                });
            }
            root.insert_path(&path_to(&region, q), region.dim);
        }
        Ok(GranularSet { region, root })
    }

    pub fn from_cube(region: RootRegion, q: &DyadicCube) -> Result<Self> {
        Self::from_cubes(region, std::iter::once(q), true)
    }

    /// The part of the box `[lo, hi)` (units of `2^box_scale`) inside the root,
    /// and whether anything was clipped away.
    pub fn from_box(region: RootRegion, box_scale: i32, lo: &[i64], hi: &[i64]) -> (Self, bool) {
        let mut root = Node::Empty;
        root.fill_box(&region.root_cube(), lo, hi, box_scale);
        let root_hi = 1i64 << (region.root_scale - box_scale).max(0);
        let clipped = if box_scale <= region.root_scale {
            lo.iter().any(|&x| x < 0) || hi.iter().any(|&x| x > root_hi)
        } else {
            true
        };
        (GranularSet { region, root }, clipped)
    }

    pub fn region(&self) -> &RootRegion {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.region.dim
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_empty()
    }

    pub fn measure(&self) -> Dyadic {
        self.root.measure(self.region.root_scale, self.region.dim)
    }

    /// Canonical antichain of maximal cubes, Morton-sorted.
    pub fn cubes(&self) -> Vec<DyadicCube> {
        let mut out = Vec::new();
        self.root.walk(&self.region.root_cube(), &mut |q, n| {
            if n.is_full() {
                out.push(q.clone());
            }
            true
        });
        out
    }

    pub fn cube_count(&self) -> usize {
        self.root.full_leaf_count()
    }

    fn check_region(&self, other: &GranularSet) -> Result<()> {
        if self.region != other.region {
            Err(Error::RegionMismatch)
        } else {
            Ok(())
        }
    }

    pub fn union(&self, other: &GranularSet) -> Result<GranularSet> {
        self.check_region(other)?;
        Ok(GranularSet {
            region: self.region,
            root: self.root.union(&other.root),
        })
    }

    pub fn intersect(&self, other: &GranularSet) -> Result<GranularSet> {
        self.check_region(other)?;
        Ok(GranularSet {
            region: self.region,
            root: self.root.intersect(&other.root),
        })
    }

    pub fn difference(&self, other: &GranularSet) -> Result<GranularSet> {
        self.check_region(other)?;
        Ok(GranularSet {
            region: self.region,
            root: self.root.difference(&other.root),
        })
    }

    /// Root cube minus the set.
    pub fn complement(&self) -> GranularSet {
        GranularSet {
            region: self.region,
            root: self.root.complement(),
        }
    }

    pub fn is_subset(&self, other: &GranularSet) -> bool {
        self.region == other.region && self.root.difference(&other.root).is_empty()
    }

    pub fn is_disjoint(&self, other: &GranularSet) -> bool {
        self.region == other.region && self.root.intersect(&other.root).is_empty()
    }

    /// Subtree for a cube inside the root (expanded through `Full` leaves).
    pub fn node_at(&self, q: &DyadicCube) -> Node {
        let mut node = &self.root;
        for &c in &path_to(&self.region, q) {
            match node {
                Node::Split(ch) => node = &ch[c],
                other => return other.clone(),
            }
        }
        node.clone()
    }

    /// `|E ∩ Q|` for a cube inside the root.
    pub fn measure_in(&self, q: &DyadicCube) -> Dyadic {
        self.node_at(q).measure(q.scale, self.region.dim)
    }

    /// `E ∩ Q` as a set.
    pub fn restrict(&self, q: &DyadicCube) -> GranularSet {
        let sub = self.node_at(q);
        GranularSet {
            region: self.region,
            root: embed(&self.region, q, sub),
        }
    }

    /// Smallest dyadic cube containing the set (inside the root).
    pub fn bounding_cube(&self) -> Option<DyadicCube> {
        if self.is_empty() {
            return None;
        }
        let mut cube = self.region.root_cube();
        let mut node = &self.root;
        loop {
            match node {
                Node::Split(ch) => {
                    let nonempty: Vec<usize> = (0..ch.len()).filter(|&i| !ch[i].is_empty()).collect();
                    if nonempty.len() == 1 {
                        cube = cube.child(nonempty[0]);
                        node = &ch[nonempty[0]];
                    } else {
                        return Some(cube);
                    }
                }
                _ => return Some(cube),
            }
        }
    }

    /// Finest scale of any cube in the canonical form.
    pub fn finest_scale(&self) -> Option<i32> {
        self.root.finest_scale(self.region.root_scale)
    }

    /// Whether any part of the set lies in cells at or above the given scale only.
    pub fn is_base_resolved(&self) -> bool {
        self.finest_scale().is_none_or(|s| s >= self.region.base_scale)
    }

    /// Occupancy of base cells in row-major order (last axis fastest). Cubes
    /// finer than the base scale count a cell as occupied if any part of it is.
    pub fn rasterize(&self) -> Vec<bool> {
        let n = self.region.cells_per_axis();
        let dim = self.region.dim;
        let total = (n as usize).pow(dim as u32);
        let mut out = vec![false; total];
        let base = self.region.base_scale;
        self.root.walk(&self.region.root_cube(), &mut |q, node| {
            if node.is_empty() {
                return false;
            }
            if node.is_full() || q.scale == base {
                let q = if q.scale < base { q.ancestor(base) } else { q.clone() };
                let (lo, hi) = q.bounds_at(base);
                for_each_in_box(&lo, &hi, |idx| {
                    let mut flat = 0usize;
                    for &x in idx {
                        flat = flat * n as usize + x as usize;
                    }
                    out[flat] = true;
                });
                return false;
            }
            true
        });
        out
    }

    pub fn to_wire(&self) -> SetWire {
        SetWire {
            dim: self.region.dim,
            root_scale: self.region.root_scale,
            base_scale: self.region.base_scale,
            cubes: self.cubes().into_iter().map(CubeWire::from).collect(),
        }
    }

    pub fn from_wire(w: &SetWire, allow_refined: bool) -> Result<Self> {
        let region = RootRegion::new(w.dim, w.root_scale, w.base_scale)?;
        let cubes: Vec<DyadicCube> = w.cubes.iter().map(|c| c.to_cube()).collect();
        Self::from_cubes(region, cubes.iter(), allow_refined)
    }
}

/// Build a tree that is `sub` at cube `q` and empty elsewhere.
pub(crate) fn embed(region: &RootRegion, q: &DyadicCube, sub: Node) -> Node {
    let path = path_to(region, q);
    let mut node = sub;
    for &c in path.iter().rev() {
        if node.is_empty() {
            continue;
        }
        let mut ch = Node::empty_children(region.dim);
        ch[c] = node;
        node = Node::split(ch);
    }
    node
}

/// Child indices from the root down to `q`.
pub fn path_to(region: &RootRegion, q: &DyadicCube) -> Vec<usize> {
    let depth = (region.root_scale - q.scale) as usize;
    (0..depth)
        .rev()
        .map(|i| {
            q.corner
                .iter()
                .enumerate()
                .map(|(j, &x)| (((x >> i) & 1) as usize) << j)
                .sum()
        })
        .collect()
}

pub(crate) fn for_each_in_box<F: FnMut(&[i64])>(lo: &[i64], hi: &[i64], mut f: F) {
    let dim = lo.len();
    if (0..dim).any(|j| lo[j] >= hi[j]) {
        return;
    }
    let mut idx = lo.to_vec();
    loop {
        f(&idx);
        let mut j = dim;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < hi[j] {
                break;
            }
            idx[j] = lo[j];
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeWire {
    pub scale: i32,
    pub corner: Vec<i64>,
}

impl From<DyadicCube> for CubeWire {
    fn from(q: DyadicCube) -> Self {
        CubeWire {
            scale: q.scale,
            corner: q.corner,
        }
    }
}

impl CubeWire {
    pub fn to_cube(&self) -> DyadicCube {
        DyadicCube::new(self.scale, self.corner.clone())
    }
}

/// JSON form of a granular set: canonical cubes in Morton order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetWire {
    pub dim: usize,
    pub root_scale: i32,
    pub base_scale: i32,
    pub cubes: Vec<CubeWire>,
}

/// Measure in wire form.
pub fn measure_wire(e: &GranularSet) -> DyadicWire {
    e.measure().to_wire()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dyadic;

    fn unit2() -> RootRegion {
        RootRegion::new(2, 0, -4).unwrap()
    }

    #[test]
    fn complete_sibling_family_merges() {
        let root = DyadicCube::new(0, vec![0, 0]);
        let e = GranularSet::from_cubes(unit2(), root.children().iter(), false).unwrap();
        assert_eq!(e.cubes(), vec![root]);
    }

    #[test]
    fn nested_cubes_are_absorbed() {
        let big = DyadicCube::new(-1, vec![0, 0]);
        let small = DyadicCube::new(-2, vec![0, 0]);
        let e = GranularSet::from_cubes(unit2(), [big.clone(), small].iter(), false).unwrap();
        assert_eq!(e.cubes(), vec![big]);
    }

    #[test]
    fn rejects_cubes_outside_or_too_fine() {
        let r = unit2();
        let out = DyadicCube::new(-1, vec![2, 0]);
        assert!(matches!(
            GranularSet::from_cubes(r, [out].iter(), false),
            Err(Error::CubeOutsideRoot { .. })
        ));
        let fine = DyadicCube::new(-5, vec![0, 0]);
        assert!(matches!(
            GranularSet::from_cubes(r, [fine.clone()].iter(), false),
            Err(Error::BelowBaseScale { .. })
        ));
        assert!(GranularSet::from_cubes(r, [fine].iter(), true).is_ok());
    }

    #[test]
    fn set_algebra_small_example() {
        let r = unit2();
        let a = GranularSet::from_cubes(
            r,
            [DyadicCube::new(-1, vec![0, 0]), DyadicCube::new(-1, vec![1, 0])].iter(),
            false,
        )
        .unwrap();
        // [0,1) x [0,1/2) as two half cubes is exactly a
        let strip = GranularSet::from_box(r, -1, &[0, 0], &[2, 1]).0;
        assert_eq!(a, strip);
        let b = GranularSet::from_cubes(r, [DyadicCube::new(-1, vec![0, 0])].iter(), false).unwrap();
        assert_eq!(a.intersect(&b).unwrap().measure(), Dyadic::pow2(-2));
        assert!(a.difference(&a).unwrap().is_empty());
        assert_eq!(a.union(&a.complement()).unwrap(), GranularSet::full(r));
    }

    #[test]
    fn bounding_cube_and_restrict() {
        let r = unit2();
        let q = DyadicCube::new(-3, vec![1, 2]);
        let e = GranularSet::from_cubes(r, [q.clone()].iter(), false).unwrap();
        assert_eq!(e.bounding_cube(), Some(q.clone()));
        let parent = q.parent();
        assert_eq!(e.restrict(&parent), e);
        assert_eq!(e.measure_in(&parent), q.measure());
        assert!(e.restrict(&DyadicCube::new(-1, vec![1, 1])).is_empty());
    }

    #[test]
    fn rasterize_counts_cells() {
        let r = RootRegion::new(2, 0, -2).unwrap();
        let e = GranularSet::from_cubes(r, [DyadicCube::new(-1, vec![1, 0])].iter(), false).unwrap();
        let raster = e.rasterize();
        assert_eq!(raster.iter().filter(|&&b| b).count(), 4);
        // row-major, last axis fastest: cell (x=2, y=0) is index 2*4+0
        assert!(raster[8]);
        assert!(!raster[2]);
    }

    #[test]
    fn wire_roundtrip() {
        let r = unit2();
        let e = GranularSet::from_cubes(
            r,
            [DyadicCube::new(-2, vec![3, 1]), DyadicCube::new(-4, vec![0, 15])].iter(),
            false,
        )
        .unwrap();
        let w = e.to_wire();
        let json = serde_json::to_string(&w).unwrap();
        let back: SetWire = serde_json::from_str(&json).unwrap();
        assert_eq!(GranularSet::from_wire(&back, false).unwrap(), e);
    }
}
