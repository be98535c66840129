//! Numerical probe of the autocorrelation `dσ̃_k ∗ dσ_k` of a cut circle
//! measure in the plane.
//!
//! `dσ_k` is `χ(y) dθ(y)` pushed to the circle of radius `2^k`, and
//! `dσ̃_k` its reflection; their convolution is the law of
//! `2^k (y₂ − y₁)` weighted by `χ(y₁)χ(y₂)`. The density is estimated by
//! double quadrature in the two angles against a compactly supported `C²`
//! mollifier of width `ε = 2^k · mollifier_ratio`.

use serde::Serialize;

use super::average::CapSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ProbeOptions {
    /// Nodes per angle.
    pub quad_points: usize,
    /// `None` gives the uncut circle.
    pub cap: Option<CapSpec>,
    pub mollifier_ratio: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            quad_points: 512,
            cap: Some(CapSpec {
                direction: vec![1.0, 0.0],
                radius: 0.25,
            }),
            mollifier_ratio: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeScale {
    pub k: i32,
    /// Mollified density at each sample (samples given in units of `2^k`).
    pub values: Vec<f64>,
    /// `max 2^{k(d−1)} |x| K(x)` over samples with `|x| ≤ 2^{k+1}`.
    pub normalized_sup: f64,
    /// Largest value among samples with `|x| > 2^{k+1}`.
    pub outside_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelProbeReport {
    pub scales: Vec<ProbeScale>,
}

/// `(1 − s²)³` normalized to unit mass on the disc of radius `ε`.
fn mollifier(r2: f64, eps: f64) -> f64 {
    let s = 1.0 - r2 / (eps * eps);
    if s <= 0.0 {
        0.0
    } else {
        4.0 / (std::f64::consts::PI * eps * eps) * s * s * s
    }
}

/// Angular interval carrying the measure and the weight function on it.
fn angle_rule(cap: &Option<CapSpec>, n: usize) -> Vec<(f64, f64)> {
    let two_pi = 2.0 * std::f64::consts::PI;
    match cap {
        None => (0..n)
            .map(|j| (two_pi * (j as f64 + 0.5) / n as f64, 1.0 / n as f64))
            .collect(),
        Some(c) => {
            let theta0 = c.direction[1].atan2(c.direction[0]);
            // chord ρ subtends the half-angle 2 asin(ρ/2)
            let half = 2.0 * (c.radius / 2.0).asin();
            let step = 2.0 * half / n as f64;
            (0..n)
                .map(|j| {
                    let t = theta0 - half + step * (j as f64 + 0.5);
                    let y = [t.cos(), t.sin()];
                    (t, c.weight(&y) * step / two_pi)
                })
                .collect()
        }
    }
}

/// Mollified density of `dσ̃_k ∗ dσ_k` at `x`.
pub fn autocorrelation_at(k: i32, x: &[f64], opts: &ProbeOptions) -> f64 {
    let r = 2f64.powi(k);
    let eps = r * opts.mollifier_ratio;
    let rule = angle_rule(&opts.cap, opts.quad_points);
    let pts: Vec<([f64; 2], f64)> = rule
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|&(t, w)| ([r * t.cos(), r * t.sin()], w))
        .collect();
    let mut acc = 0.0;
    for (p1, w1) in &pts {
        for (p2, w2) in &pts {
            let dx = x[0] - (p2[0] - p1[0]);
            let dy = x[1] - (p2[1] - p1[1]);
            let m = mollifier(dx * dx + dy * dy, eps);
            if m != 0.0 {
                acc += w1 * w2 * m;
            }
        }
    }
    acc
}

/// Exact density of the uncut autocorrelation at distance `s` from the
/// origin: `1 / (π² s sqrt(4R² − s²))` for `0 < s < 2R`.
pub fn uncut_density(k: i32, s: f64) -> f64 {
    let r = 2f64.powi(k);
    if s <= 0.0 || s >= 2.0 * r {
        return 0.0;
    }
    1.0 / (std::f64::consts::PI.powi(2) * s * (4.0 * r * r - s * s).sqrt())
}

/// Probe several scales at the same samples (given in units of `2^k`).
pub fn kernel_decay_probe(k_list: &[i32], samples: &[Vec<f64>], opts: &ProbeOptions) -> Result<KernelProbeReport> {
    if let Some(c) = &opts.cap {
        CapSpec::new(c.direction.clone(), c.radius)?;
        if c.direction.len() != 2 {
            return Err(Error::UnsupportedDimension(c.direction.len()));
        }
    }
    if samples.iter().any(|s| s.len() != 2) {
        return Err(Error::UnsupportedDimension(samples.iter().map(Vec::len).find(|&l| l != 2).unwrap_or(0)));
    }
    if opts.quad_points == 0 || !(opts.mollifier_ratio > 0.0) {
        return Err(Error::OutOfRange("probe needs quadrature nodes and a positive mollifier width".into()));
    }
    let scales = k_list
        .iter()
        .map(|&k| {
            let r = 2f64.powi(k);
            let mut normalized_sup: f64 = 0.0;
            let mut outside_max: f64 = 0.0;
            let values: Vec<f64> = samples
                .iter()
                .map(|s| {
                    let x = [s[0] * r, s[1] * r];
                    let v = autocorrelation_at(k, &x, opts);
                    let norm = (x[0] * x[0] + x[1] * x[1]).sqrt();
                    if norm <= 2.0 * r {
                        normalized_sup = normalized_sup.max(r * norm * v.abs());
                    } else {
                        outside_max = outside_max.max(v.abs());
                    }
                    v
                })
                .collect();
            ProbeScale {
                k,
                values,
                normalized_sup,
                outside_max,
            }
        })
        .collect();
    Ok(KernelProbeReport { scales })
}

/// Polar sample grid in units of `2^k`: radii in `(0, r_max]`, equally spaced angles.
pub fn polar_samples(radii: usize, angles: usize, r_max: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(radii * angles);
    for i in 1..=radii {
        let rho = r_max * i as f64 / radii as f64;
        for j in 0..angles {
            let t = 2.0 * std::f64::consts::PI * j as f64 / angles as f64;
            out.push(vec![rho * t.cos(), rho * t.sin()]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollifier_has_unit_mass() {
        let eps = 0.3;
        let n = 2000;
        let h = eps / n as f64;
        let mass: f64 = (0..n)
            .map(|i| {
                let r = (i as f64 + 0.5) * h;
                mollifier(r * r, eps) * 2.0 * std::f64::consts::PI * r * h
            })
            .sum();
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn uncut_matches_closed_form_away_from_singularities() {
        let opts = ProbeOptions {
            quad_points: 1024,
            cap: None,
            mollifier_ratio: 0.02,
        };
        let v = autocorrelation_at(0, &[1.0, 0.0], &opts);
        let exact = uncut_density(0, 1.0);
        assert!((v / exact - 1.0).abs() < 0.02, "{v} vs {exact}");
    }

    #[test]
    fn far_samples_vanish() {
        let opts = ProbeOptions::default();
        assert_eq!(autocorrelation_at(0, &[2.5, 0.0], &opts), 0.0);
    }
}
