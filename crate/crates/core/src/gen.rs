//! Seeded random granular sets and step functions.
//!
//! Both generators grow the region tree top-down. At every node of scale
//! above the base scale the recursion stops with probability `stop_prob`;
//! at a stopped node (and at every base cell) the node is occupied with
//! probability `density`. Each point of the root therefore lies in an
//! occupied leaf with probability `density`, so `E|E| = density · |root|`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cz::{GranularFunction, ValueNode};
use crate::dyadic::{DyadicCube, GranularSet, Node, RootRegion};
use crate::error::{Error, Result};

/// Deterministic generator for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetParams {
    pub density: f64,
    pub stop_prob: f64,
}

impl Default for SetParams {
    fn default() -> Self {
        SetParams {
            density: 0.3,
            stop_prob: 0.3,
        }
    }
}

impl SetParams {
    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.density) || !(0.0..=1.0).contains(&self.stop_prob) {
            return Err(Error::OutOfRange(format!(
                "density {} and stop probability {} must lie in [0, 1]",
                self.density, self.stop_prob
            )));
        }
        Ok(())
    }
}

pub fn random_set<R: Rng>(region: RootRegion, params: &SetParams, rng: &mut R) -> Result<GranularSet> {
    params.check()?;
    let root = grow_set(region.root_scale, region.base_scale, region.dim, params, rng);
    Ok(GranularSet::from_node(region, root))
}

fn grow_set<R: Rng>(scale: i32, base: i32, dim: usize, p: &SetParams, rng: &mut R) -> Node {
    if scale == base || rng.gen_bool(p.stop_prob) {
        return if rng.gen_bool(p.density) { Node::Full } else { Node::Empty };
    }
    Node::split((0..1usize << dim).map(|_| grow_set(scale - 1, base, dim, p, rng)).collect())
}

/// Mean and variance of `|E|` under [`random_set`].
pub fn set_measure_moments(region: &RootRegion, params: &SetParams) -> (f64, f64) {
    let children = (1u64 << region.dim) as f64;
    let rho = params.density;
    let p = params.stop_prob;
    // second moment S(m) of the measure below a node of measure m
    let mut m = 2f64.powi(region.base_scale * region.dim as i32);
    let mut s = rho * m * m;
    for _ in region.base_scale..region.root_scale {
        let cm = m;
        m *= children;
        let split = children * s + children * (children - 1.0) * (rho * cm).powi(2);
        s = p * rho * m * m + (1.0 - p) * split;
    }
    let mean = rho * m;
    (mean, s - mean * mean)
}

/// A cube of the region with uniform scale in `[base, root]` and uniform position.
pub fn random_cube<R: Rng>(region: &RootRegion, rng: &mut R) -> DyadicCube {
    let scale = rng.gen_range(region.base_scale..=region.root_scale);
    let cells = 1i64 << (region.root_scale - scale);
    let corner = (0..region.dim).map(|_| rng.gen_range(0..cells)).collect();
    DyadicCube::new(scale, corner)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FunctionParams {
    pub density: f64,
    pub stop_prob: f64,
    /// Magnitudes are log-uniform in `[min_value, max_value]`.
    pub min_value: f64,
    pub max_value: f64,
    pub signed: bool,
    /// Cubes painted over the background after it is drawn, each at a
    /// uniform scale in `[base, base + spike_levels]` and uniform position.
    pub spikes: usize,
    pub spike_levels: i32,
    /// Spike magnitudes are log-uniform in `[spike_min, spike_max]`.
    pub spike_min: f64,
    pub spike_max: f64,
}

impl Default for FunctionParams {
    fn default() -> Self {
        FunctionParams {
            density: 0.3,
            stop_prob: 0.3,
            min_value: 1.0,
            max_value: 1e4,
            signed: false,
            spikes: 0,
            spike_levels: 0,
            spike_min: 1024.0,
            spike_max: 8192.0,
        }
    }
}

pub fn random_function<R: Rng>(region: RootRegion, params: &FunctionParams, rng: &mut R) -> Result<GranularFunction<f64>> {
    SetParams {
        density: params.density,
        stop_prob: params.stop_prob,
    }
    .check()?;
    if !(params.min_value > 0.0 && params.min_value <= params.max_value && params.max_value.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "value range [{}, {}] must be positive and ordered",
            params.min_value, params.max_value
        )));
    }
    if params.spikes > 0 && !(params.spike_min > 0.0 && params.spike_min <= params.spike_max && params.spike_max.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "spike range [{}, {}] must be positive and ordered",
            params.spike_min, params.spike_max
        )));
    }
    let tree = grow_fn(region.root_scale, region.base_scale, region.dim, params, rng);
    let mut f = GranularFunction::from_tree(region, tree);
    if params.spikes > 0 {
        let top = (region.base_scale + params.spike_levels.max(0)).min(region.root_scale);
        let mut cells = Vec::with_capacity(params.spikes);
        for _ in 0..params.spikes {
            let scale = rng.gen_range(region.base_scale..=top);
            let n = 1i64 << (region.root_scale - scale);
            let corner = (0..region.dim).map(|_| rng.gen_range(0..n)).collect();
            let mag = log_uniform(params.spike_min, params.spike_max, rng);
            let sign = if params.signed && rng.gen_bool(0.5) { -1.0 } else { 1.0 };
            cells.push((sign * mag, DyadicCube::new(scale, corner)));
        }
        // later spikes win where they overlap
        for (v, c) in cells {
            let set = GranularSet::from_cube(region, &c)?;
            f = f.paint(&set, &v);
        }
    }
    Ok(f)
}

fn log_uniform<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    if hi > lo {
        rng.gen_range(lo.ln()..=hi.ln()).exp()
    } else {
        lo
    }
}

fn grow_fn<R: Rng>(scale: i32, base: i32, dim: usize, p: &FunctionParams, rng: &mut R) -> ValueNode<f64> {
    if scale == base || rng.gen_bool(p.stop_prob) {
        if !rng.gen_bool(p.density) {
            return ValueNode::Leaf(0.0);
        }
        let mag = log_uniform(p.min_value, p.max_value, rng);
        let sign = if p.signed && rng.gen_bool(0.5) { -1.0 } else { 1.0 };
        return ValueNode::Leaf(sign * mag);
    }
    ValueNode::split((0..1usize << dim).map(|_| grow_fn(scale - 1, base, dim, p, rng)).collect())
}
