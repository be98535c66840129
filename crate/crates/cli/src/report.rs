//! Plot data from earlier run outputs. Rows follow file-name order, then
//! document order, so the same inputs always give the same bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Serialize)]
struct RatioRow {
    source: String,
    function: String,
    alpha: f64,
    superlevel: f64,
    phi_integral: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct ChainRow {
    source: String,
    chain_length: u64,
    count: u64,
}

#[derive(Serialize)]
struct ConstantRow {
    source: String,
    subject: String,
    name: String,
    value: f64,
}

#[derive(Serialize, Default)]
struct Report {
    ratios: Vec<RatioRow>,
    chains: Vec<ChainRow>,
    constants: Vec<ConstantRow>,
}

const RATIO_HEADER: [&str; 6] = ["source", "function", "alpha", "superlevel", "phi_integral", "ratio"];
const CHAIN_HEADER: [&str; 3] = ["source", "chain_length", "count"];
const CONSTANT_HEADER: [&str; 4] = ["source", "subject", "name", "value"];

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn s(v: &Value) -> String {
    v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string())
}

fn items<'a>(doc: &'a Value, key: &str) -> impl Iterator<Item = &'a Value> {
    doc.get(key).and_then(Value::as_array).into_iter().flatten()
}

fn collect(source: &str, doc: &Value, rep: &mut Report) {
    let constant = |rep: &mut Report, subject: String, name: &str, value: f64| {
        rep.constants.push(ConstantRow {
            source: source.to_string(),
            subject,
            name: name.to_string(),
            value,
        })
    };
    match doc.get("command").and_then(Value::as_str) {
        Some("maximal") => {
            for func in items(doc, "functions") {
                let name = s(&func["name"]);
                for row in items(func, "weak_type") {
                    rep.ratios.push(RatioRow {
                        source: source.to_string(),
                        function: name.clone(),
                        alpha: f(&row["alpha"]),
                        superlevel: f(&row["superlevel"]),
                        phi_integral: f(&row["phi_integral"]),
                        ratio: f(&row["ratio"]),
                    });
                }
                constant(rep, name.clone(), "l2_ratio", f(&func["l2_ratio"]));
                constant(rep, name, "weak_type_sup_ratio", f(&func["sup_ratio"]));
            }
        }
        Some("chain") => {
            let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
            for set in items(doc, "sets") {
                *hist.entry(set["pieces"].as_u64().unwrap_or(0)).or_default() += 1;
            }
            for (chain_length, count) in hist {
                rep.chains.push(ChainRow {
                    source: source.to_string(),
                    chain_length,
                    count,
                });
            }
        }
        Some("cz") => {
            for func in items(doc, "functions") {
                let label = s(&func["label"]);
                let c = &func["constants"];
                for key in ["sup_ratio", "sum_sup_over_alpha", "bad_l1_ratio"] {
                    constant(rep, label.clone(), key, f(&c[key]));
                }
                constant(rep, label, "omega_tilde_ratio", f(&func["omega_tilde_ratio"]));
            }
        }
        Some("exceptional") => {
            for func in items(doc, "functions") {
                let label = s(&func["label"]);
                constant(rep, label.clone(), "c_meas", f(&func["c_meas"]));
                constant(rep, label, "total_ratio", f(&func["total_ratio"]));
            }
        }
        Some("verify") => {
            let stage = s(&doc["stage"]);
            for check in items(doc, "checks") {
                if let Some(m) = check.get("max_measured") {
                    constant(rep, stage.clone(), &s(&check["name"]), f(m));
                }
            }
        }
        _ => {}
    }
}

fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn report(input: &Path, out: &Path) -> Result<(), CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(|e| CliError::io(input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut rep = Report::default();
    for p in &files {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        // data files (sets, functions) are not run outputs
        let Ok(doc) = serde_json::from_str::<Value>(&text) else {
            continue;
        };
        let source = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        collect(&source, &doc, &mut rep);
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_csv(&out.join("report_ratios.csv"), &RATIO_HEADER, &rep.ratios)?;
    write_csv(&out.join("report_chains.csv"), &CHAIN_HEADER, &rep.chains)?;
    write_csv(&out.join("report_constants.csv"), &CONSTANT_HEADER, &rep.constants)?;
    let mut text = serde_json::to_string_pretty(&rep)?;
    text.push('\n');
    let path = out.join("report.json");
    std::fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
    print!("{text}");
    Ok(())
}
