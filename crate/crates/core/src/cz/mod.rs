//! Calderón–Zygmund decomposition of granular functions, Whitney cubes,
//! level-set pieces, polynomial projections and the exceptional set.

mod constants;
mod decompose;
mod exceptional;
mod function;
mod maximal;
mod projection;
mod thresholds;
mod whitney;

pub use constants::{projection_constants, ProjectionConstants};
pub use decompose::{cz_decompose, expanded_cubes, level_of, CzConfig, CzDecomposition, Piece, FIRST_LEVEL};
pub use exceptional::{exceptional_set, ExceptionalOptions, ExceptionalSet, PieceSphereReport};
pub use function::{FunctionWire, GranularFunction, PieceWire, ValueNode};
pub use maximal::{dyadic_maximal_at, hl_maximal_dyadic};
pub use projection::{
    l1_defect, local_bounds, local_grid, moment_defect, project_poly, projection, step_avg_abs, step_local_moment,
    sup_ratio, PolyPiece, PolynomialBasis, StepPiece, MAX_DEGREE,
};
pub use thresholds::{kappa, phi, scale_threshold, LogBase};
pub use whitney::{
    check_whitney, distance_ratio, distance_sq_to_complement, doubled_bounds, doubled_conflicts, whitney,
    whitney_with_floor, whitney_with_halo, Halo, WhitneyDecomposition, WhitneyViolation,
};
