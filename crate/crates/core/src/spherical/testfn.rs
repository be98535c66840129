//! Radial test functions on a grid, centered in the root cube.

use serde::{Deserialize, Serialize};

use super::grid::GridFunction;
use crate::dyadic::RootRegion;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// `χ_{|x−c| < radius}`.
    Indicator { radius: f64 },
    /// `exp(−|x−c|²/σ²)`.
    Gaussian { sigma: f64 },
    /// `Σ_j χ_{| |x−c| − r_j | < w_j/2}` with `r_j = radius 2^{-j}`, `w_j = width r_j`.
    Annulus { radius: f64, width: f64, rings: u32 },
}

impl TestFunction {
    /// Value at distance `s` from the center.
    pub fn radial(&self, s: f64) -> f64 {
        match *self {
            TestFunction::Indicator { radius } => (s < radius) as u8 as f64,
            TestFunction::Gaussian { sigma } => (-(s * s) / (sigma * sigma)).exp(),
            TestFunction::Annulus { radius, width, rings } => (0..rings)
                .filter(|&j| {
                    let r = radius * 2f64.powi(-(j as i32));
                    (s - r).abs() < width * r / 2.0
                })
                .count() as f64,
        }
    }

    pub fn sample(&self, region: RootRegion) -> GridFunction<f64> {
        let c = 2f64.powi(region.root_scale) / 2.0;
        GridFunction::from_fn(region, |x| {
            let s = x.iter().map(|&t| (t - c) * (t - c)).sum::<f64>().sqrt();
            self.radial(s)
        })
    }

    /// The three standard shapes scaled to a root of side `2^root_scale`.
    pub fn standard_suite(root_scale: i32) -> Vec<(&'static str, TestFunction)> {
        let side = 2f64.powi(root_scale);
        vec![
            ("indicator", TestFunction::Indicator { radius: side / 16.0 }),
            ("gaussian", TestFunction::Gaussian { sigma: side / 16.0 }),
            (
                "annulus",
                TestFunction::Annulus {
                    radius: side / 8.0,
                    width: 0.25,
                    rings: 3,
                },
            ),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_rings_are_disjoint() {
        let a = TestFunction::Annulus {
            radius: 1.0,
            width: 0.25,
            rings: 3,
        };
        assert_eq!(a.radial(1.0), 1.0);
        assert_eq!(a.radial(0.5), 1.0);
        assert_eq!(a.radial(0.75), 0.0);
        assert_eq!(a.radial(0.0), 0.0);
    }

    #[test]
    fn sampled_indicator_is_centered() {
        let r = RootRegion::new(2, 0, -4).unwrap();
        let g = TestFunction::Indicator { radius: 0.1 }.sample(r);
        assert_eq!(g.get(&[7, 7]), 1.0);
        assert_eq!(g.get(&[8, 8]), 1.0);
        assert_eq!(g.get(&[0, 0]), 0.0);
    }
}
