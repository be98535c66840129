//! Lacunary spherical averages and maximal functions on sampled grids,
//! superlevel measures, weak-type ratios and a kernel probe.

mod average;
mod grid;
mod probe;
mod testfn;

pub use average::{
    auto_quad_points, l2_ratio, lacunary_maximal, sphere_nodes, spherical_average, spherical_average_at,
    superlevel_measure, superlevel_measure_masked, weak_type_ratio, AverageOperator, AverageOptions, Boundary,
    CapSpec, MaximalOperator, MaximalResult, WeakTypeReport, WeakTypeRow, MAX_CAP_RADIUS,
};
pub use grid::{GridFunction, GridHeader, Sample};
pub use probe::{
    autocorrelation_at, kernel_decay_probe, polar_samples, uncut_density, KernelProbeReport, ProbeOptions,
    ProbeScale,
};
pub use testfn::TestFunction;
