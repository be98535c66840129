use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lacunary(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lacunary"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

fn error_of(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    json(&out.stderr)["error"].clone()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn outputs_do_not_depend_on_runs_or_threads() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let d = dir.path().to_str().unwrap();
        for args in [
            vec!["gen", "--kind", "set", "--count", "4", "--base-scale", "-4"],
            vec!["metrics", "--count", "6", "--base-scale", "-4"],
            vec!["cz", "--count", "3", "--base-scale", "-5", "--dim", "2", "--root-scale", "1"],
        ] {
            let mut full = args.clone();
            full.extend(["--seed", "11", "--threads", threads, "--out", d]);
            assert!(lacunary(&full).status.success(), "{args:?}");
        }
    }
    assert_eq!(files(a.path()), files(b.path()));
    let once = lacunary(&["metrics", "--count", "6", "--seed", "4"]).stdout;
    assert_eq!(once, lacunary(&["metrics", "--count", "6", "--seed", "4"]).stdout);
}

#[test]
fn errors_are_json_with_exit_code_two() {
    assert_eq!(error_of(&lacunary(&["metrics", "--no-such-flag"]))["kind"], "usage");
    assert_eq!(error_of(&lacunary(&["metrics", "--input", "/nonexistent/set.json"]))["kind"], "io");
    assert_eq!(error_of(&lacunary(&["cz", "--whitney-a", "x"]))["kind"], "config");
    assert_eq!(error_of(&lacunary(&["metrics", "--base-scale", "3"]))["kind"], "domain");
}

#[test]
fn single_cube_sits_on_the_density_bound() {
    let dir = tempfile::tempdir().unwrap();
    let set = write(
        dir.path(),
        "cube.json",
        r#"{"dim":2,"root_scale":0,"base_scale":-3,"cubes":[{"scale":-2,"corner":[1,1]}]}"#,
    );
    let out = lacunary(&["verify", "--stage", "metrics", "--input", &set]);
    assert!(out.status.success());
    let doc = json(&out.stdout);
    assert_eq!(doc["passed"], true);
    let check = doc["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "critical_below_density")
        .unwrap();
    assert_eq!(check["min_slack"], 0.0);

    let m = json(&lacunary(&["metrics", "--input", &set]).stdout);
    let row = &m["sets"][0];
    assert_eq!(row["length"], m["sets"][0]["thickness"]);
}

#[test]
fn overlapping_function_pieces_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "f.json",
        r#"{"dim":2,"root_scale":0,"base_scale":-2,"pieces":[
            {"value":1.0,"cubes":[{"scale":-1,"corner":[0,0]}]},
            {"value":2.0,"cubes":[{"scale":-2,"corner":[1,1]}]}]}"#,
    );
    let err = error_of(&lacunary(&["cz", "--input", &f]));
    assert_eq!(err["kind"], "domain");
    assert!(err["message"].as_str().unwrap().contains("0 and 1 overlap"), "{err}");
}

#[test]
fn verify_suites_pass_on_generated_instances() {
    for stage in ["metrics", "split", "lemma", "chain"] {
        let out = lacunary(&["verify", "--stage", stage, "--count", "5", "--base-scale", "-4", "--seed", "2"]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stdout));
    }
    for stage in ["function", "cz"] {
        let out = lacunary(&[
            "verify", "--stage", stage, "--count", "3", "--root-scale", "1", "--base-scale", "-5", "--seed", "2",
        ]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

fn csv_lines(dir: &Path, name: &str) -> Vec<String> {
    std::fs::read_to_string(dir.join(name)).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn empty_report_has_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    assert!(lacunary(&["report", "--input", dir.path().to_str().unwrap()]).status.success());
    assert_eq!(csv_lines(dir.path(), "report_ratios.csv"), ["source,function,alpha,superlevel,phi_integral,ratio"]);
    assert_eq!(csv_lines(dir.path(), "report_chains.csv"), ["source,chain_length,count"]);
    assert_eq!(csv_lines(dir.path(), "report_constants.csv"), ["source,subject,name,value"]);
}

#[test]
fn report_tabulates_every_threshold_and_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let run = lacunary(&[
        "maximal", "--base-scale", "-5", "--kmin", "-3", "--kmax", "-2", "--alpha-sweep", "0.01,0.1,1", "--out", d,
    ]);
    assert!(run.status.success());
    let functions = json(&run.stdout)["functions"].as_array().unwrap().len();
    assert!(functions > 0);
    assert!(lacunary(&["chain", "--count", "4", "--base-scale", "-4", "--out", d]).status.success());

    let report = |out: &Path| {
        assert!(lacunary(&["report", "--input", d, "--out", out.to_str().unwrap()]).status.success());
        files(out)
    };
    let (r1, r2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = report(r1.path());
    assert_eq!(first, report(r2.path()));
    assert_eq!(csv_lines(r1.path(), "report_ratios.csv").len(), 1 + 3 * functions);
    let chains = csv_lines(r1.path(), "report_chains.csv");
    let counted: u64 = chains[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(counted, 4);
}
