use rayon::prelude::*;
use serde::Serialize;

use super::decompose::CzDecomposition;
use crate::dyadic::{sphere_sum_rows, GranularSet, RowCover};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-piece part of the exceptional set.
#[derive(Clone, Debug, Serialize)]
pub struct PieceSphereReport {
    pub piece: usize,
    pub k_min: i32,
    pub k_max: i32,
    /// Measure of `∪_k (E^{n,ν}_q + S_k)` (outer approximation).
    pub inner_measure: f64,
    /// `λ Θ 2^n ln(10+n)`.
    pub bound: f64,
    /// `inner_measure / bound`.
    pub ratio: f64,
    pub clipped: bool,
}

#[derive(Clone, Debug)]
pub struct ExceptionalSet {
    /// `Ω̃ ∪ V₁`.
    pub v: GranularSet,
    pub v1: GranularSet,
    pub pieces: Vec<PieceSphereReport>,
    /// Largest per-piece ratio.
    pub c_meas: f64,
    /// `|V| / Σ |E^{n,ν}_q| 2^n ln(10+n)`.
    pub total_ratio: f64,
    /// Some sphere sums or expanded cubes left the root and were clipped.
    pub clipped: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ExceptionalOptions {
    pub approx_scale: i32,
    /// Clip sphere sums that leave the root instead of failing.
    pub allow_clip: bool,
    /// Upper end of the `k` range is `k_threshold + k_extend`.
    pub k_extend: i32,
}

/// `V = Ω̃ ∪ ∪_{q,n,ν} ∪_{l(q) ≤ 2^k ≤ 2^{k^{n,ν}_q}} (E^{n,ν}_q + S_k)`.
pub fn exceptional_set<T: Scalar>(cz: &CzDecomposition<T>, opts: &ExceptionalOptions) -> Result<ExceptionalSet> {
    let region = *cz.omega.region();
    if opts.approx_scale > region.root_scale {
        return Err(Error::OutOfRange(format!(
            "approximation scale {} is coarser than the root",
            opts.approx_scale
        )));
    }
    let results: Vec<(PieceSphereReport, RowCover)> = cz
        .pieces
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let cubes = p.support.cubes();
            let k_min = p.q.scale;
            let k_max = p.k_threshold + opts.k_extend;
            let mut rows = RowCover::new(region.dim, opts.approx_scale);
            for k in k_min..=k_max {
                rows.extend(&sphere_sum_rows(&cubes, k, opts.approx_scale));
            }
            rows.normalize();
            let clipped = rows.clip_to_root(&region);
            let inner = rows.measure().to_f64();
            let n = p.n as f64;
            let bound = p.lambda.to_f64() * p.theta.to_f64() * 2f64.powf(n) * (10.0 + n).ln();
            (
                PieceSphereReport {
                    piece: i,
                    k_min,
                    k_max,
                    inner_measure: inner,
                    bound,
                    ratio: inner / bound,
                    clipped,
                },
                rows,
            )
        })
        .collect();
    let mut all = RowCover::new(region.dim, opts.approx_scale);
    let mut reports = Vec::with_capacity(results.len());
    let mut clipped = cz.omega_tilde_clipped;
    for (r, rows) in results {
        if r.clipped && !opts.allow_clip {
            return Err(Error::SphereExitsRoot { k: r.k_max });
        }
        clipped |= r.clipped;
        all.extend(&rows);
        reports.push(r);
    }
    all.normalize();
    let v1 = all.to_set(region);
    let v = v1.union(&cz.omega_tilde)?;
    let denom: f64 = cz
        .pieces
        .iter()
        .map(|p| {
            let n = p.n as f64;
            p.measure.to_f64() * 2f64.powf(n) * (10.0 + n).ln()
        })
        .sum();
    let total_ratio = if denom > 0.0 { v.measure().to_f64() / denom } else { 0.0 };
    let c_meas = reports
        .iter()
        .filter(|r| !r.clipped)
        .map(|r| r.ratio)
        .fold(0.0, f64::max);
    Ok(ExceptionalSet {
        v,
        v1,
        pieces: reports,
        c_meas,
        total_ratio,
        clipped,
    })
}
