use thiserror::Error;

use crate::dyadic::DyadicCube;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("cube {cube} lies outside the root cube")]
    CubeOutsideRoot { cube: DyadicCube },
    #[error("cube {cube} is finer than the base scale {base_scale}")]
    BelowBaseScale { cube: DyadicCube, base_scale: i32 },
    #[error("operands live in different regions")]
    RegionMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation undefined on the empty set: {0}")]
    EmptySet(&'static str),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("sphere sum of radius 2^{k} exits the root region")]
    SphereExitsRoot { k: i32 },
    #[error(
        "Whitney constants infeasible: cubes would need scale {required_scale} \
         but the finest admissible scale is {floor_scale}"
    )]
    WhitneyResolution { required_scale: i32, floor_scale: i32 },
    #[error("Whitney constants infeasible: cube {cube} violates the upper distance bound")]
    WhitneyUpperBound { cube: DyadicCube },
    #[error("supports are not disjoint: {0} and {1} overlap")]
    OverlappingSupports(usize, usize),
    #[error("degree cap {requested} exceeds the basis table (max {available})")]
    DegreeCap { requested: usize, available: usize },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
