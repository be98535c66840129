use std::collections::BTreeMap;
use std::path::Path;

use lacunary::boxes::{box_chain, proposition_split, split_slacks};
use lacunary::cz::{cz_decompose, exceptional_set, projection_constants, CzDecomposition, FunctionWire};
use lacunary::dyadic::{CubeWire, SetWire};
use lacunary::gen::{random_cube, random_function, random_set, rng};
use lacunary::metrics::{critical_thickness, length, thickness};
use lacunary::scalar::{rational_to_f64, ratio};
use lacunary::spherical::{l2_ratio, weak_type_ratio, GridFunction, MaximalOperator, TestFunction};
use lacunary::verify::{self, Status, VerificationReport};
use lacunary::{Dyadic, Function, GranularSet, Rational};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::{CliError, GenKind, Stage};

fn dy(d: &Dyadic) -> Value {
    json!({"exact": d.to_string(), "approx": d.to_f64()})
}

fn rat(r: &Rational) -> Value {
    json!({"exact": r.to_string(), "approx": rational_to_f64(r)})
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Print the document and, with an output directory, store it as `<name>.json`.
fn emit(out: Option<&Path>, name: &str, doc: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    print!("{text}");
    if let Some(dir) = out {
        write_file(&dir.join(format!("{name}.json")), text.as_bytes())?;
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_sets(cfg: &RunConfig, input: Option<&Path>) -> Result<Vec<(String, GranularSet)>, CliError> {
    if let Some(p) = input {
        let w: SetWire = read_json(p)?;
        return Ok(vec![(p.display().to_string(), GranularSet::from_wire(&w, false)?)]);
    }
    let region = cfg.region()?;
    let mut r = rng(cfg.seed);
    (0..cfg.count)
        .map(|i| Ok((format!("seed{}#{i}", cfg.seed), random_set(region, &cfg.set, &mut r)?)))
        .collect()
}

fn load_functions(cfg: &RunConfig, input: Option<&Path>) -> Result<Vec<(String, Function)>, CliError> {
    if let Some(p) = input {
        let w: FunctionWire = read_json(p)?;
        return Ok(vec![(p.display().to_string(), Function::from_wire(&w)?)]);
    }
    let region = cfg.region()?;
    let mut r = rng(cfg.seed);
    (0..cfg.count)
        .map(|i| Ok((format!("seed{}#{i}", cfg.seed), random_function(region, &cfg.function, &mut r)?)))
        .collect()
}

fn header(cfg: &RunConfig, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("config".into(), serde_json::to_value(cfg).unwrap_or(Value::Null));
    m
}

pub fn gen(cfg: &RunConfig, kind: GenKind, out: Option<&Path>) -> Result<(), CliError> {
    let region = cfg.region()?;
    let mut r = rng(cfg.seed);
    let mut items = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let (name, bytes, measure) = match kind {
            GenKind::Set => {
                let e = random_set(region, &cfg.set, &mut r)?;
                (format!("set_{i:04}.json"), serde_json::to_vec(&e.to_wire())?, e.measure().to_f64())
            }
            GenKind::Function => {
                let f = random_function(region, &cfg.function, &mut r)?;
                let m = f.support().measure().to_f64();
                (format!("function_{i:04}.json"), serde_json::to_vec(&f.to_wire())?, m)
            }
            GenKind::Grid => {
                let f = random_function(region, &cfg.function, &mut r)?;
                let g = GridFunction::<f64>::from_granular(&f);
                let mut buf = Vec::new();
                g.write_to(&mut buf).map_err(|e| CliError::input(e.to_string()))?;
                (format!("grid_{i:04}.grid"), buf, f.support().measure().to_f64())
            }
        };
        match out {
            Some(dir) => write_file(&dir.join(&name), &bytes)?,
            None if matches!(kind, GenKind::Grid) => {
                return Err(CliError::config("grid generation needs --out".into()));
            }
            None => {}
        }
        let mut item = json!({"file": name, "measure": measure});
        if out.is_none() {
            item["data"] = serde_json::from_slice(&bytes)?;
        }
        items.push(item);
    }
    let mut doc = header(cfg, "gen");
    doc.insert("items".into(), Value::Array(items));
    emit(out, "gen", &Value::Object(doc))
}

pub fn metrics(cfg: &RunConfig, input: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let sets = load_sets(cfg, input)?;
    let rows: Vec<Value> = sets
        .par_iter()
        .map(|(label, e)| {
            let th = thickness(e);
            let mut v = json!({
                "label": label,
                "measure": dy(&e.measure()),
                "length": dy(&length(e)),
                "thickness": dy(&th.value),
                "thickness_argmax": th.argmax.map(CubeWire::from),
            });
            if let Ok(c) = critical_thickness(e) {
                v["critical_thickness"] = rat(&c.theta_crit);
                v["core_measure"] = dy(&c.core.measure());
                v["witness_cover_size"] = json!(c.witness_cover.len());
                v["iterations"] = json!(c.iterations);
            }
            v
        })
        .collect();
    let mut doc = header(cfg, "metrics");
    doc.insert("sets".into(), Value::Array(rows));
    emit(out, "metrics", &Value::Object(doc))
}

pub fn split(cfg: &RunConfig, input: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let sets = load_sets(cfg, input)?;
    let rows: Vec<Value> = sets
        .par_iter()
        .map(|(label, e)| {
            if e.is_empty() {
                return Ok(json!({"label": label, "empty": true}));
            }
            let s = proposition_split(e)?;
            let sl = split_slacks(e, &s);
            Ok(json!({
                "label": label,
                "length": dy(&length(e)),
                "length_f": dy(&length(&s.f)),
                "measure_g": dy(&s.g.measure()),
                "thickness_g": dy(&thickness(&s.g).value),
                "critical_thickness": rat(&s.critical.theta_crit),
                "slacks": {
                    "half_length": rat(&sl.half_length),
                    "box_bound": rat(&sl.box_bound),
                    "mass_lower": rat(&sl.mass_lower),
                    "thickness_upper": rat(&sl.thickness_upper),
                },
                "f": s.f.to_wire(),
                "g": s.g.to_wire(),
            }))
        })
        .collect::<Result<_, CliError>>()?;
    let mut doc = header(cfg, "split");
    doc.insert("sets".into(), Value::Array(rows));
    emit(out, "split", &Value::Object(doc))
}

pub fn chain(cfg: &RunConfig, input: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let sets = load_sets(cfg, input)?;
    let rows: Vec<Value> = sets
        .par_iter()
        .map(|(label, e)| {
            if e.is_empty() {
                return Ok(json!({"label": label, "pieces": 0, "piece_lengths": [], "residual_lengths": []}));
            }
            let c = box_chain(e, cfg.max_chain)?;
            Ok(json!({
                "label": label,
                "length": dy(&length(e)),
                "pieces": c.pieces.len(),
                "piece_lengths": c.pieces.iter().map(|p| dy(&length(p))).collect::<Vec<_>>(),
                "piece_measures": c.pieces.iter().map(|p| dy(&p.measure())).collect::<Vec<_>>(),
                "residual_lengths": c.residual_lengths.iter().map(dy).collect::<Vec<_>>(),
                "residual_measure": dy(&c.residual.measure()),
            }))
        })
        .collect::<Result<_, CliError>>()?;
    let mut doc = header(cfg, "chain");
    doc.insert("sets".into(), Value::Array(rows));
    emit(out, "chain", &Value::Object(doc))
}

fn cz_summary(label: &str, cz: &CzDecomposition<f64>) -> Value {
    let consts = projection_constants(cz);
    json!({
        "label": label,
        "alpha": cz.alpha,
        "omega_measure": dy(&cz.omega.measure()),
        "whitney_cubes": cz.whitney.cubes.len(),
        "whitney_families": cz.whitney.family_count(),
        "boundary_layer_measure": dy(&cz.whitney.boundary_layer.measure()),
        "levels": cz.level_sets.iter().map(|(n, e)| json!({"n": n, "measure": dy(&e.measure())})).collect::<Vec<_>>(),
        "pieces": cz.pieces.iter().map(|p| json!({
            "q": CubeWire::from(p.q.clone()),
            "n": p.n,
            "nu": p.nu,
            "measure": dy(&p.measure),
            "length": dy(&p.lambda),
            "thickness": dy(&p.theta),
            "k_threshold": p.k_threshold,
            "kappa": p.kappa,
        })).collect::<Vec<_>>(),
        "residual_measure": dy(&cz.residual.measure()),
        "omega_tilde_measure": dy(&cz.omega_tilde.measure()),
        "omega_tilde_clipped": cz.omega_tilde_clipped,
        "phi_integral": cz.phi_integral,
        "omega_tilde_ratio": cz.omega_tilde_ratio(),
        "constants": consts,
    })
}

pub fn cz(cfg: &RunConfig, input: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let fs = load_functions(cfg, input)?;
    let czc = cfg.cz()?;
    let alpha = cfg.alpha()?;
    let rows: Vec<Value> = fs
        .iter()
        .map(|(label, f)| Ok(cz_summary(label, &cz_decompose(f, &alpha, &czc)?)))
        .collect::<Result<_, CliError>>()?;
    let mut doc = header(cfg, "cz");
    doc.insert("functions".into(), Value::Array(rows));
    emit(out, "cz", &Value::Object(doc))
}

pub fn exceptional(cfg: &RunConfig, input: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let fs = load_functions(cfg, input)?;
    let czc = cfg.cz()?;
    let alpha = cfg.alpha()?;
    let mut rows = Vec::with_capacity(fs.len());
    for (label, f) in &fs {
        let d = cz_decompose(f, &alpha, &czc)?;
        let ex = exceptional_set(&d, &cfg.exceptional(f.region()))?;
        rows.push(json!({
            "label": label,
            "v_measure": dy(&ex.v.measure()),
            "v1_measure": dy(&ex.v1.measure()),
            "c_meas": ex.c_meas,
            "total_ratio": ex.total_ratio,
            "clipped": ex.clipped,
            "pieces": ex.pieces,
        }));
    }
    let mut doc = header(cfg, "exceptional");
    doc.insert("functions".into(), Value::Array(rows));
    emit(out, "exceptional", &Value::Object(doc))
}

pub fn maximal(cfg: &RunConfig, input: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let funcs: Vec<(String, GridFunction<f64>)> = match input {
        Some(p) => {
            let file = std::fs::File::open(p).map_err(|e| CliError::io(p, e))?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into());
            vec![(name, GridFunction::read_from(std::io::BufReader::new(file))?)]
        }
        None => {
            let region = cfg.region()?;
            match &cfg.test_function {
                Some(t) => vec![("custom".into(), t.sample(region))],
                None => TestFunction::standard_suite(region.root_scale)
                    .into_iter()
                    .map(|(n, t)| (n.to_string(), t.sample(region)))
                    .collect(),
            }
        }
    };
    let region = *funcs[0].1.region();
    let op = MaximalOperator::new(region, cfg.kmin, cfg.kmax, &cfg.average())?;
    let mut rows = Vec::with_capacity(funcs.len());
    for (name, f) in &funcs {
        let m = op.apply(f, false)?;
        let wt = weak_type_ratio(f, &m, &cfg.alpha_sweep)?;
        if let Some(dir) = out {
            let mut buf = Vec::new();
            m.sup.write_to(&mut buf).map_err(|e| CliError::input(e.to_string()))?;
            write_file(&dir.join(format!("maximal_{name}.grid")), &buf)?;
        }
        rows.push(json!({
            "name": name,
            "l2_ratio": l2_ratio(f, &m),
            "max_abs_f": f.max_abs(),
            "max_abs_mf": m.sup.max_abs(),
            "flagged_cells": wt.flagged_cells,
            "sup_ratio": wt.sup_ratio,
            "weak_type": wt.rows,
        }));
    }
    let mut doc = header(cfg, "maximal");
    doc.insert("functions".into(), Value::Array(rows));
    emit(out, "maximal", &Value::Object(doc))
}

#[derive(Serialize, Default)]
struct CheckSummary {
    name: String,
    formula: String,
    count: usize,
    failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_slack: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_measured: Option<f64>,
}

/// Lemma parameters `r = j/16`, `1 ≤ j ≤ 16`.
fn lemma_r<R: Rng>(r: &mut R) -> Rational {
    ratio(r.gen_range(1..=16), 16)
}

fn verify_functions(
    cfg: &RunConfig,
    stage: Stage,
    input: Option<&Path>,
) -> Result<Vec<(String, VerificationReport)>, CliError> {
    let czc = cfg.cz()?;
    let alpha = cfg.alpha()?;
    if stage == Stage::Function {
        let wires: Vec<(String, FunctionWire)> = match input {
            Some(p) => vec![(p.display().to_string(), read_json(p)?)],
            None => load_functions(cfg, None)?.into_iter().map(|(l, f)| (l, f.to_wire())).collect(),
        };
        return Ok(wires.iter().map(|(l, w)| (l.clone(), verify::verify_function_wire(w))).collect());
    }
    let fs = load_functions(cfg, input)?;
    fs.iter()
        .map(|(label, f)| {
            let d = cz_decompose(f, &alpha, &czc)?;
            let rep = match stage {
                Stage::Cz => verify::verify_cz(f, &d),
                _ => verify::verify_exceptional(&d, &cfg.exceptional(f.region())),
            };
            Ok((label.clone(), rep))
        })
        .collect()
}

pub fn verify(cfg: &RunConfig, stage: Stage, input: Option<&Path>, out: Option<&Path>) -> Result<bool, CliError> {
    let reports: Vec<(String, VerificationReport)> = match stage {
        Stage::Metrics | Stage::Split | Stage::Chain => {
            let sets = load_sets(cfg, input)?;
            sets.par_iter()
                .map(|(l, e)| {
                    let rep = match stage {
                        Stage::Metrics => verify::verify_metrics(e),
                        Stage::Split => verify::verify_split(e),
                        _ => verify::verify_chain(e, cfg.max_chain),
                    };
                    (l.clone(), rep)
                })
                .collect()
        }
        Stage::Lemma => {
            let sets = load_sets(cfg, input)?;
            let mut r = rng(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
            let triples: Vec<_> = sets
                .into_iter()
                .map(|(l, e)| {
                    let i = random_cube(e.region(), &mut r);
                    let rr = lemma_r(&mut r);
                    (l, e, i, rr)
                })
                .collect();
            triples
                .par_iter()
                .map(|(l, e, i, rr)| (l.clone(), verify::verify_lemma(e, i, rr)))
                .collect()
        }
        Stage::Function | Stage::Cz | Stage::Exceptional => verify_functions(cfg, stage, input)?,
    };
    let mut checks: BTreeMap<String, CheckSummary> = BTreeMap::new();
    let mut failures = Vec::new();
    for (label, rep) in &reports {
        for rec in &rep.records {
            let c = checks.entry(rec.name.clone()).or_insert_with(|| CheckSummary {
                name: rec.name.clone(),
                formula: rec.formula.clone(),
                ..Default::default()
            });
            c.count += 1;
            if let Some(s) = &rec.slack {
                c.min_slack = Some(c.min_slack.map_or(s.approx, |m| m.min(s.approx)));
            }
            if let Some(m) = rec.measured {
                c.max_measured = Some(c.max_measured.map_or(m, |x| x.max(m)));
            }
            if rec.status == Status::Fail {
                c.failures += 1;
                if failures.len() < 20 {
                    failures.push(json!({"instance": label, "record": rec}));
                }
            }
        }
    }
    let passed = reports.iter().all(|(_, r)| r.passed());
    let mut doc = header(cfg, "verify");
    doc.insert("stage".into(), serde_json::to_value(format!("{stage:?}").to_lowercase())?);
    doc.insert("instances".into(), json!(reports.len()));
    doc.insert("passed".into(), json!(passed));
    doc.insert("checks".into(), serde_json::to_value(checks.into_values().collect::<Vec<_>>())?);
    doc.insert("failures".into(), Value::Array(failures));
    emit(out, &format!("verify_{}", format!("{stage:?}").to_lowercase()), &Value::Object(doc))?;
    Ok(passed)
}
