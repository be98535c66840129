mod common;

use common::Raster;
use lacunary::cz::GranularFunction;
use lacunary::gen::{random_function, random_set, rng, set_measure_moments, FunctionParams, SetParams};
use lacunary::metrics::{critical_slack, critical_thickness, length, thickness, uncovered};
use lacunary::scalar::ratio;
use lacunary::spherical::GridFunction;
use lacunary::{GranularSet, Rational, RootRegion};
use proptest::prelude::*;

fn region2() -> RootRegion {
    RootRegion::new(2, 0, -4).unwrap()
}

fn draw(region: RootRegion, seed: u64, density: f64) -> GranularSet {
    let p = SetParams {
        density,
        stop_prob: 0.3,
    };
    random_set(region, &p, &mut rng(seed)).unwrap()
}

fn cell_count(e: &GranularSet) -> Rational {
    let r = e.region();
    e.measure().to_rational() / lacunary::scalar::pow2(r.base_scale as i64 * r.dim as i64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn set_algebra_matches_rasters(s1 in any::<u64>(), s2 in any::<u64>(), d1 in 0.0..1.0f64, d2 in 0.0..1.0f64) {
        let a = draw(region2(), s1, d1);
        let b = draw(region2(), s2, d2);
        let (ra, rb) = (a.rasterize(), b.rasterize());
        let zip = |f: fn(bool, bool) -> bool| ra.iter().zip(&rb).map(|(&x, &y)| f(x, y)).collect::<Vec<_>>();
        prop_assert_eq!(a.union(&b).unwrap().rasterize(), zip(|x, y| x || y));
        prop_assert_eq!(a.intersect(&b).unwrap().rasterize(), zip(|x, y| x && y));
        prop_assert_eq!(a.difference(&b).unwrap().rasterize(), zip(|x, y| x && !y));
        prop_assert_eq!(a.complement().rasterize(), ra.iter().map(|x| !x).collect::<Vec<_>>());
        prop_assert_eq!(a.is_disjoint(&b), ra.iter().zip(&rb).all(|(&x, &y)| !(x && y)));
        prop_assert_eq!(a.is_subset(&b), ra.iter().zip(&rb).all(|(&x, &y)| !x || y));
        prop_assert_eq!(cell_count(&a), ratio(Raster::of(&a).count() as i64, 1));
    }

    #[test]
    fn canonical_form_is_unique(s in any::<u64>(), d in 0.0..1.0f64) {
        let a = draw(region2(), s, d);
        let cubes = a.cubes();
        let rebuilt = GranularSet::from_cubes(*a.region(), cubes.iter(), false).unwrap();
        prop_assert_eq!(&rebuilt, &a);
        let wire = GranularSet::from_wire(&a.to_wire(), false).unwrap();
        prop_assert_eq!(&wire, &a);
        // no two canonical leaves could merge into their parent
        for q in &cubes {
            if q.scale < a.region().root_scale {
                prop_assert!(!a.node_at(&q.parent()).is_full());
            }
        }
    }

    #[test]
    fn length_is_monotone_and_subadditive(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = draw(region2(), s1, 0.3);
        let b = draw(region2(), s2, 0.3);
        let u = a.union(&b).unwrap();
        let (la, lb, lu) = (length(&a), length(&b), length(&u));
        prop_assert!(la <= lu && lb <= lu);
        prop_assert!(lu.to_rational() <= la.to_rational() + lb.to_rational());
        // |E| ≤ Σ l(Q)^d ≤ (Σ l(Q))^d for any cover
        let l = lu.to_rational();
        prop_assert!(u.measure().to_rational() <= &l * &l);
        prop_assert!(l <= ratio(1, 1));
    }

    #[test]
    fn thickness_is_monotone(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = draw(region2(), s1, 0.3);
        let u = a.union(&draw(region2(), s2, 0.3)).unwrap();
        let (ta, tu) = (thickness(&a), thickness(&u));
        prop_assert!(ta.value <= tu.value);
        if let Some(q) = tu.argmax {
            let v = u.measure_in(&q).to_rational() / lacunary::scalar::pow2(q.scale as i64);
            prop_assert_eq!(v, tu.value.to_rational());
        }
    }

    #[test]
    fn critical_thickness_witness_attains_equality(s in any::<u64>()) {
        let e = draw(RootRegion::new(2, 0, -3).unwrap(), s, 0.4);
        prop_assume!(!e.is_empty());
        let ct = critical_thickness(&e).unwrap();
        let lam = ct.lambda.to_rational();
        prop_assert_eq!(critical_slack(&e, &ct.witness_cover, &ct.theta_crit, &lam), ratio(0, 1));
        prop_assert_eq!(&ct.core, &uncovered(&e, &ct.witness_cover));
        // iterates decrease strictly to the fixed point
        prop_assert!(ct.iterates.windows(2).all(|w| w[0] > w[1]));
        prop_assert!(ct.theta_crit <= e.measure().to_rational() / &lam);
    }

    #[test]
    fn exact_function_integrals_add(s1 in any::<u64>(), s2 in any::<u64>()) {
        let r = RootRegion::new(2, 0, -3).unwrap();
        let exact = |f: GranularFunction<f64>| f.map(|v| Rational::from_float(*v).unwrap());
        let f = exact(random_function(r, &FunctionParams::default(), &mut rng(s1)).unwrap());
        let g = exact(random_function(r, &FunctionParams::default(), &mut rng(s2)).unwrap());
        let h = f.add(&g).unwrap();
        prop_assert_eq!(h.integral(), f.integral() + g.integral());
        prop_assert_eq!(h.sub(&g).unwrap(), f.clone());
        prop_assert_eq!(GranularFunction::from_wire(&f.to_wire()).unwrap(), f);
    }
}

#[test]
fn generators_are_deterministic() {
    let r = RootRegion::new(3, 1, -3).unwrap();
    assert_eq!(draw(r, 17, 0.3), draw(r, 17, 0.3));
    let p = FunctionParams::default();
    assert_eq!(
        random_function(r, &p, &mut rng(17)).unwrap(),
        random_function(r, &p, &mut rng(17)).unwrap()
    );
}

#[test]
fn zero_density_draws_are_empty() {
    for seed in 0..20 {
        assert!(draw(region2(), seed, 0.0).is_empty());
        assert_eq!(draw(region2(), seed, 1.0), GranularSet::full(region2()));
    }
}

#[test]
fn set_measure_matches_its_moments() {
    let r = RootRegion::new(2, 0, -5).unwrap();
    for density in [0.1, 0.3, 0.7] {
        let p = SetParams { density, stop_prob: 0.3 };
        let (mean, var) = set_measure_moments(&r, &p);
        let mut g = rng(900);
        let n = 100;
        let avg = (0..n)
            .map(|_| random_set(r, &p, &mut g).unwrap().measure().to_f64())
            .sum::<f64>()
            / n as f64;
        let sigma = (var / n as f64).sqrt();
        assert!((avg - mean).abs() <= 3.0 * sigma, "density {density}: mean {avg} vs {mean} ± {sigma}");
    }
}

#[test]
fn grid_files_round_trip() {
    let r = RootRegion::new(2, 1, -3).unwrap();
    let f = random_function(r, &FunctionParams::default(), &mut rng(3)).unwrap();
    let g = GridFunction::<f64>::from_granular(&f);
    let mut bytes = Vec::new();
    g.write_to(&mut bytes).unwrap();
    let back = GridFunction::<f64>::read_from(bytes.as_slice()).unwrap();
    assert_eq!(back.values(), g.values());
    assert_eq!(back.header(), g.header());
    let truncated = &bytes[..bytes.len() - 3];
    assert!(GridFunction::<f64>::read_from(truncated).is_err());
}
