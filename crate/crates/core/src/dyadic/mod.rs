//! Dyadic cubes and exact granular-set algebra.

mod cube;
mod set;
mod sphere;

pub use cube::{DyadicCube, RootRegion};
pub use set::{measure_wire, path_to, CubeWire, GranularSet, Node, SetWire};
pub use sphere::{minkowski_sum_sphere, sphere_sum_rows, RowCover, SphereSum};

pub(crate) use set::{embed, for_each_in_box};
