//! Invariant suites with replayable witnesses.
//!
//! Each check produces a [`Record`]. Exact inequalities carry their slack as
//! a rational (nonnegative iff the check passes); measured constants carry a
//! float. A failing record always carries a JSON witness.

use num_traits::{Signed, Zero};
use serde::Serialize;
use serde_json::{json, Value};

use crate::boxes::{box_chain, is_generalized_box, lemma_construct, lemma_slacks, piece_size_slacks, proposition_split, split_slacks};
use crate::cz::{
    check_whitney, exceptional_set, moment_defect, project_poly, projection_constants, CzDecomposition,
    ExceptionalOptions, FunctionWire, GranularFunction,
};
use crate::dyadic::{CubeWire, DyadicCube, GranularSet};
use crate::metrics::{critical_slack, critical_thickness, density_ratio, length, length_with_cover, thickness, uncovered};
use crate::scalar::{pow2, ratio, Rational, RationalWire, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub name: String,
    /// The inequality or identity being checked.
    pub formula: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack: Option<RationalWire>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub stage: String,
    pub records: Vec<Record>,
}

impl VerificationReport {
    pub fn new(stage: &str) -> Self {
        VerificationReport {
            stage: stage.to_string(),
            records: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.status == Status::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.status == Status::Fail)
    }

    /// Nonnegative slack passes; the witness is attached only on failure.
    pub fn slack(&mut self, name: &str, formula: &str, slack: Rational, witness: impl FnOnce() -> Value) {
        let ok = !slack.is_negative();
        self.records.push(Record {
            name: name.into(),
            formula: formula.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            slack: Some(RationalWire::from(&slack)),
            measured: None,
            witness: if ok { None } else { Some(witness()) },
        });
    }

    pub fn check(&mut self, name: &str, formula: &str, ok: bool, witness: impl FnOnce() -> Value) {
        self.records.push(Record {
            name: name.into(),
            formula: formula.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            slack: None,
            measured: None,
            witness: if ok { None } else { Some(witness()) },
        });
    }

    /// A measured constant; fails only when it is not finite or exceeds `limit`.
    pub fn measured(&mut self, name: &str, formula: &str, value: f64, limit: Option<f64>, witness: impl FnOnce() -> Value) {
        let ok = value.is_finite() && limit.is_none_or(|l| value <= l);
        self.records.push(Record {
            name: name.into(),
            formula: formula.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            slack: None,
            measured: Some(value),
            witness: if ok { None } else { Some(witness()) },
        });
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.records.extend(other.records);
    }
}

fn set_json(e: &GranularSet) -> Value {
    serde_json::to_value(e.to_wire()).unwrap_or(Value::Null)
}

fn cubes_json(c: &[DyadicCube]) -> Value {
    serde_json::to_value(c.iter().cloned().map(CubeWire::from).collect::<Vec<_>>()).unwrap_or(Value::Null)
}

/// Length, thickness and critical thickness of one set.
pub fn verify_metrics(e: &GranularSet) -> VerificationReport {
    let mut rep = VerificationReport::new("metrics");
    let (lam, cover) = length_with_cover(e);
    let th = thickness(e);
    let lam_r = lam.to_rational();
    let th_r = th.value.to_rational();
    rep.slack("volume_bound", "|E| <= λ(E) Θ(E)", &lam_r * &th_r - e.measure().to_rational(), || set_json(e));
    rep.check(
        "length_cover",
        "optimal cover covers E with Σ l(Q) = λ(E)",
        uncovered(e, &cover).is_empty() && crate::metrics::side_sum(&cover) == lam,
        || json!({"set": set_json(e), "cover": cubes_json(&cover)}),
    );
    if let Some(q) = &th.argmax {
        let v = e.measure_in(q).shl(-(q.scale as i64));
        rep.check("thickness_argmax", "|E ∩ Q| / l(Q) = Θ(E) at the argmax", v == th.value, || {
            json!({"set": set_json(e), "argmax": CubeWire::from(q.clone())})
        });
    }
    if e.is_empty() {
        return rep;
    }
    match critical_thickness(e) {
        Err(err) => rep.check("critical_thickness", "ϑ(E) exists", false, || json!({"set": set_json(e), "error": err.to_string()})),
        Ok(c) => {
            let vt = &c.theta_crit;
            rep.check(
                "critical_equality",
                "ϑλ(E) = 2ϑ Σ_{Q1} l(Q) + |E*|",
                critical_slack(e, &c.witness_cover, vt, &lam_r).is_zero(),
                || json!({"set": set_json(e), "cover": cubes_json(&c.witness_cover)}),
            );
            rep.slack(
                "critical_below_density",
                "ϑ(E) <= |E| / λ(E)",
                density_ratio(e).unwrap_or_default() - vt,
                || set_json(e),
            );
            rep.check("critical_positive", "ϑ(E) > 0", vt.is_positive(), || set_json(e));
            let core_th = thickness(&c.core).value.to_rational();
            rep.slack("core_thickness", "Θ(E*) <= 2ϑ(E)", ratio(2, 1) * vt - core_th, || {
                json!({"set": set_json(e), "core": set_json(&c.core)})
            });
        }
    }
    rep
}

/// The proposition split of one set.
pub fn verify_split(e: &GranularSet) -> VerificationReport {
    let mut rep = VerificationReport::new("split");
    if e.is_empty() {
        return rep;
    }
    let s = match proposition_split(e) {
        Ok(s) => s,
        Err(err) => {
            rep.check("split", "split exists", false, || json!({"set": set_json(e), "error": err.to_string()}));
            return rep;
        }
    };
    let sl = split_slacks(e, &s);
    let w = || json!({"set": set_json(e)});
    rep.check(
        "partition",
        "E = F ∪ G, F ∩ G = ∅",
        s.f.is_disjoint(&s.g) && s.f.union(&s.g).map(|u| u == *e).unwrap_or(false),
        w,
    );
    rep.slack("half_length", "λ(F) <= λ(E)/2", sl.half_length, w);
    rep.slack("box_bound", "Θ(G) <= 8|G|/λ(E)", sl.box_bound, w);
    rep.slack("mass_lower", "|G| >= λ(E)ϑ(E)/2", sl.mass_lower, w);
    rep.slack("thickness_upper", "Θ(G) <= 4ϑ(E)", sl.thickness_upper, w);
    rep
}

/// The lemma construction for one `(E, I, r)`.
pub fn verify_lemma(e: &GranularSet, i: &DyadicCube, r: &Rational) -> VerificationReport {
    let mut rep = VerificationReport::new("lemma");
    let w = || json!({"set": set_json(e), "cube": CubeWire::from(i.clone()), "r": RationalWire::from(r)});
    let out = match lemma_construct(e, i, r) {
        Ok(o) => o,
        Err(err) => {
            rep.check("lemma", "construction exists", false, || json!({"input": w(), "error": err.to_string()}));
            return rep;
        }
    };
    let (thick, mass) = lemma_slacks(e, i, r, &out);
    rep.slack("thickness", "Θ(E[I]) <= 2r", thick, w);
    rep.slack("mass", "2|E[I]| >= 2r Σ l(Q) + |(E ∩ I) \\ ∪Q|", mass, w);
    rep.check("inside", "E[I] ⊆ E ∩ I", out.selected.is_subset(&e.restrict(i)), w);
    let disjoint = out
        .cover
        .iter()
        .enumerate()
        .all(|(a, qa)| i.contains(qa) && out.cover[a + 1..].iter().all(|qb| !qa.intersects(qb)));
    rep.check("cover_disjoint", "Q[I] disjoint cubes in I", disjoint, w);
    rep
}

/// Iterated splits of one set.
pub fn verify_chain(e: &GranularSet, max_iter: usize) -> VerificationReport {
    let mut rep = VerificationReport::new("chain");
    if e.is_empty() {
        return rep;
    }
    let c = match box_chain(e, max_iter) {
        Ok(c) => c,
        Err(err) => {
            rep.check("chain", "chain exists", false, || json!({"set": set_json(e), "error": err.to_string()}));
            return rep;
        }
    };
    let lam = length(e).to_rational();
    let q = e.bounding_cube().expect("nonempty");
    for (m, rl) in c.residual_lengths.iter().enumerate() {
        let bound = &lam * pow2(-(m as i64 + 1));
        rep.slack(&format!("decay_{}", m + 1), "λ(residual_m) <= 2^-m λ(E)", bound - rl.to_rational(), || {
            json!({"set": set_json(e), "m": m + 1})
        });
    }
    let mut union = GranularSet::empty(*e.region());
    for (k, p) in c.pieces.iter().enumerate() {
        rep.check(&format!("box_{}", k + 1), "λ(P) Θ(P) <= 8 |P|", is_generalized_box(p, &ratio(8, 1)), || {
            json!({"set": set_json(e), "piece": k + 1})
        });
        let (lo, hi) = piece_size_slacks(p, k + 1, &q);
        rep.slack(&format!("size_lower_{}", k + 1), "|P| <= λ(P) l(q)^{d-1}", lo.to_rational(), || {
            json!({"set": set_json(e), "piece": k + 1})
        });
        rep.slack(&format!("size_upper_{}", k + 1), "λ(P) l(q)^{d-1} <= 2^{1-ν} |q|", hi.to_rational(), || {
            json!({"set": set_json(e), "piece": k + 1})
        });
        rep.check(&format!("disjoint_{}", k + 1), "pieces pairwise disjoint", union.is_disjoint(p), || {
            json!({"set": set_json(e), "piece": k + 1})
        });
        union = union.union(p).expect("same region");
    }
    let all = union.union(&c.residual).expect("same region");
    rep.check("partition", "E = ∪ pieces ∪ residual", all == *e, || set_json(e));
    rep
}

/// Pairwise disjointness of the supports in a function file.
pub fn verify_function_wire(w: &FunctionWire) -> VerificationReport {
    let mut rep = VerificationReport::new("function");
    let region = match crate::dyadic::RootRegion::new(w.dim, w.root_scale, w.base_scale) {
        Ok(r) => r,
        Err(err) => {
            rep.check("region", "valid region", false, || json!({"error": err.to_string()}));
            return rep;
        }
    };
    let mut sets = Vec::with_capacity(w.pieces.len());
    for (i, p) in w.pieces.iter().enumerate() {
        let cubes: Vec<DyadicCube> = p.cubes.iter().map(CubeWire::to_cube).collect();
        match GranularSet::from_cubes(region, cubes.iter(), false) {
            Ok(s) => sets.push(s),
            Err(err) => {
                rep.check("support", "supports are granular sets in the region", false, || {
                    json!({"piece": i, "error": err.to_string()})
                });
                return rep;
            }
        }
    }
    let mut witness = None;
    'outer: for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let common = sets[i].intersect(&sets[j]).expect("same region");
            if !common.is_empty() {
                witness = Some(json!({"pieces": [i, j], "cube": CubeWire::from(common.cubes()[0].clone())}));
                break 'outer;
            }
        }
    }
    let ok = witness.is_none();
    rep.check("disjoint_supports", "E_i ∩ E_j = ∅ for i != j", ok, || witness.unwrap_or(Value::Null));
    rep
}

/// Tolerance for moment and idempotence checks.
pub const PROJECTION_TOL: f64 = 1e-10;

/// All decomposition invariants for `f` and its decomposition.
pub fn verify_cz<T: Scalar>(f: &GranularFunction<T>, cz: &CzDecomposition<T>) -> VerificationReport {
    let mut rep = VerificationReport::new("cz");
    let region = *f.region();
    let recon = cz.reconstruct(f);
    let diff = recon.diff_cubes(f);
    rep.check("reconstruction", "f = g + Σ f^{n,ν}_q + f χ_residual", diff.is_empty(), || {
        json!({"cells": cubes_json(&diff[..diff.len().min(8)])})
    });
    let viol = check_whitney(&cz.whitney);
    rep.check(
        "whitney",
        "a l(q) <= d^{-1/2} dist(q, Ωᶜ) <= b l(q); disjoint; doubles disjoint per family",
        viol.is_empty(),
        || json!({"violations": format!("{:?}", &viol[..viol.len().min(4)])}),
    );
    let cut = cz.alpha.clone() * T::from_rational(&pow2(crate::cz::FIRST_LEVEL));
    rep.check("g_bound", "|g| <= 2^10 α", cz.g.sup_abs() <= cut, || json!({"sup": cz.g.sup_abs().to_f64_lossy()}));
    let level_sum: crate::scalar::Dyadic = cz.level_sets.iter().map(|(_, e)| e.measure()).sum();
    rep.slack("levels_in_omega", "Σ_n |E^n| <= |Ω|", (cz.omega.measure() - level_sum).to_rational(), || {
        json!({"omega": set_json(&cz.omega)})
    });
    let mut union = GranularSet::empty(region);
    let mut disjoint = None;
    for (i, p) in cz.pieces.iter().enumerate() {
        if disjoint.is_none() && !union.is_disjoint(&p.support) {
            disjoint = Some(i);
        }
        union = union.union(&p.support).expect("same region");
        let (lo, hi) = piece_size_slacks(&p.support, p.nu, &p.q);
        if lo.is_negative() || hi.is_negative() {
            rep.slack(&format!("piece_size_{i}"), "|E| <= λ(E) l(q)^{d-1} <= 2^{1-ν}|q|", lo.min(hi).to_rational(), || {
                json!({"piece": i, "q": CubeWire::from(p.q.clone()), "support": set_json(&p.support)})
            });
        }
    }
    rep.check("piece_size", "|E| <= λ(E) l(q)^{d-1} <= 2^{1-ν}|q| for every piece", rep.records.iter().all(|r| !r.name.starts_with("piece_size_")), || Value::Null);
    rep.check("pieces_disjoint", "E^{n,ν}_q pairwise disjoint", disjoint.is_none(), || json!({"piece": disjoint}));

    let mut worst_moment: f64 = 0.0;
    let mut worst_idem: f64 = 0.0;
    let mut worst_at = None;
    for (i, p) in cz.pieces.iter().enumerate() {
        let step = p.step();
        let m = moment_defect(&step, &p.projection, &cz.basis, cz.basis.degree_cap());
        if m > worst_moment {
            worst_moment = m;
            worst_at = Some(i);
        }
        let pp = project_poly(&p.projection, &cz.basis);
        let scale = p.projection.coeffs.iter().map(|c| c.to_f64_lossy().abs()).fold(0.0, f64::max).max(1e-300);
        let d = pp
            .coeffs
            .iter()
            .zip(&p.projection.coeffs)
            .map(|(a, b)| (a.clone() - b.clone()).to_f64_lossy().abs() / scale)
            .fold(0.0, f64::max);
        worst_idem = worst_idem.max(d);
    }
    rep.measured("moments", "|∫ b (x−x_q)^β| <= 1e-10 ‖f^{n,ν}_q‖₁ l(q)^{|β|}", worst_moment, Some(PROJECTION_TOL), || {
        json!({"piece": worst_at})
    });
    rep.measured("idempotence", "Π_q Π_q = Π_q", worst_idem, Some(PROJECTION_TOL), || Value::Null);
    let consts = projection_constants(cz);
    rep.measured("sup_bound", "sup_q |Π_q h| <= C avg_q |h|", consts.sup_ratio, None, || Value::Null);
    rep.measured("sum_sup_bound", "Σ_{n,ν} |Π_q f^{n,ν}_q| <= C' α", consts.sum_sup_over_alpha, None, || Value::Null);
    rep.measured("bad_l1_bound", "Σ_{n,ν} ‖b^{n,ν}_q‖₁ <= C'' ∫_q |f|", consts.bad_l1_ratio, None, || Value::Null);
    rep.measured("omega_tilde_ratio", "|Ω̃| <= C ∫ Φ(|f|/α)", cz.omega_tilde_ratio(), None, || Value::Null);
    rep
}

/// The exceptional-set report as measured constants.
pub fn verify_exceptional<T: Scalar>(cz: &CzDecomposition<T>, opts: &ExceptionalOptions) -> VerificationReport {
    let mut rep = VerificationReport::new("exceptional");
    match exceptional_set(cz, opts) {
        Err(err) => rep.check("exceptional_set", "V is computable", false, || json!({"error": err.to_string()})),
        Ok(ex) => {
            rep.check("contains_expanded", "Ω̃ ⊆ V", cz.omega_tilde.is_subset(&ex.v), || Value::Null);
            rep.measured("per_piece", "|∪_k (E + S_k)| <= C λΘ 2^n ln(10+n)", ex.c_meas, None, || Value::Null);
            rep.measured("total", "|V| <= C Σ |E| 2^n ln(10+n)", ex.total_ratio, None, || Value::Null);
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::RootRegion;

    #[test]
    fn single_cube_metrics_pass_with_zero_volume_slack() {
        let r = RootRegion::new(2, 0, -4).unwrap();
        let e = GranularSet::from_cube(r, &DyadicCube::new(-2, vec![1, 3])).unwrap();
        let rep = verify_metrics(&e);
        assert!(rep.passed());
        let vb = rep.records.iter().find(|r| r.name == "volume_bound").unwrap();
        assert_eq!(vb.slack.as_ref().unwrap().to_rational().unwrap(), Rational::zero());
    }

    #[test]
    fn overlapping_pieces_fail_with_witness() {
        let w = FunctionWire {
            dim: 2,
            root_scale: 0,
            base_scale: -3,
            pieces: vec![
                crate::cz::PieceWire {
                    value: 1.0,
                    cubes: vec![CubeWire { scale: -1, corner: vec![0, 0] }],
                },
                crate::cz::PieceWire {
                    value: 2.0,
                    cubes: vec![CubeWire { scale: -3, corner: vec![1, 2] }],
                },
            ],
        };
        let rep = verify_function_wire(&w);
        assert!(!rep.passed());
        let f = rep.failures().next().unwrap();
        assert_eq!(f.witness.as_ref().unwrap()["pieces"], json!([0, 1]));
    }
}
