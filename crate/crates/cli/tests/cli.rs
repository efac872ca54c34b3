use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn odeco_tt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odeco-tt"))
        .args(args)
        .env("ODECO_TT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn schema_errors(def: &str, value: &Value) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas/odeco-tt.schema.json");
    let mut schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let obj = schema.as_object_mut().unwrap();
    obj.remove("anyOf");
    obj.insert("$ref".into(), Value::String(format!("#/$defs/{def}")));
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect::<Vec<_>>()
        .join("; ")
}

fn assert_schema(def: &str, value: &Value) {
    let errs = schema_errors(def, value);
    assert!(errs.is_empty(), "{def}: {errs}");
}

#[test]
fn sample_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = odeco_tt(&["sample", "--n", "2,3", "--seeds", "1..3", "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 12);
    for name in &names {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name:?} differs");
    }
    let model: Value = serde_json::from_slice(&std::fs::read(a.path().join("model_n2_seed1.json")).unwrap()).unwrap();
    assert_schema("modelFile", &model);
    let m2: Value = serde_json::from_slice(&std::fs::read(a.path().join("model_n2_seed2.json")).unwrap()).unwrap();
    assert_ne!(model, m2);
}

#[test]
fn sampled_tensors_pass_vanish_check() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(odeco_tt(&["sample", "--n", "3", "--seeds", "4", "--out", d]).status.success());
    let tensor = dir.path().join("tensor_n3_seed4.json");
    let out = odeco_tt(&["vanish-check", "--input", tensor.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let reports = stdout_json(&out);
    assert_eq!(reports.as_array().unwrap().len(), 3);
    for r in reports.as_array().unwrap() {
        assert_schema("residualReport", r);
    }
    let model = dir.path().join("model_n3_seed4.json");
    assert_eq!(odeco_tt(&["vanish-check", "--model", model.to_str().unwrap()]).status.code(), Some(0));

    let h = odeco_tt(&["h-eval", "--input", tensor.to_str().unwrap()]);
    assert!(h.status.success());
    let h = stdout_json(&h);
    assert_schema("hEvaluation", &h);
    assert!(h["normalized"].as_f64().unwrap() < 1e-8);
}

#[test]
fn report_documents_validate_and_set_exit_codes() {
    let runs: [&[&str]; 5] = [
        &["vanish-check", "--n", "2,3", "--seeds", "5"],
        &["certify", "--n", "2,3", "--seeds", "3"],
        &["ideal-test", "--n", "2"],
        &["dimension", "--mode", "param", "--n", "2,3", "--seeds", "3"],
        &["parity-study", "--n", "2", "--seeds", "5"],
    ];
    for args in runs {
        let out = odeco_tt(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let doc = stdout_json(&out);
        assert_schema("reportDocument", &doc);
        assert_eq!(doc["summary"]["failed"], 0);
    }

    // Random tensors are expected not to vanish, so the suite passes.
    assert_eq!(odeco_tt(&["vanish-check", "--source", "random", "--n", "2", "--seeds", "3"]).status.code(), Some(0));
    // A tolerance far below rounding error makes the vanish suite fail.
    let loose = odeco_tt(&["vanish-check", "--n", "2", "--seeds", "2", "--tol-q", "1e-40"]);
    assert_eq!(loose.status.code(), Some(1));
}

#[test]
fn invalid_input_exits_incomplete() {
    assert_eq!(odeco_tt(&["vanish-check", "--n", "1"]).status.code(), Some(64));
    assert_eq!(odeco_tt(&["h-eval", "--input", "/nonexistent/t.json"]).status.code(), Some(64));
    assert_eq!(odeco_tt(&["bogus"]).status.code(), Some(64));
    assert_eq!(odeco_tt(&["--help"]).status.code(), Some(0));
}

#[test]
fn csv_output_has_one_row_per_metric() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let out = odeco_tt(&["vanish-check", "--n", "2", "--seeds", "2", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("suite,kind,n,seed,metric,value,pass"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.starts_with("vanish,vanish,2,") && r.split(',').count() == 7));
}

#[test]
fn emit_equations_and_matrix_dump() {
    let dir = tempfile::tempdir().unwrap();
    let eq = dir.path().join("q.json");
    assert!(odeco_tt(&["emit-equations", "--family", "Q", "--n", "2", "--out", eq.to_str().unwrap()]).status.success());
    let sys: Value = serde_json::from_slice(&std::fs::read(&eq).unwrap()).unwrap();
    assert_schema("equationSystem", &sys);
    assert_eq!(sys["generators"].as_array().unwrap().len(), 12);

    let m = dir.path().join("m.txt");
    let out = odeco_tt(&["ideal-test", "--n", "2", "--gens", "Q", "--dump-matrix", m.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(m).unwrap();
    let header: Vec<u64> = text.lines().next().unwrap()[2..].split(' ').map(|x| x.parse().unwrap()).collect();
    assert_eq!(header[2], 2_147_483_647);
    assert_eq!(text.lines().count() as u64 - 1, text.lines().skip(1).filter(|l| l.split(' ').count() == 3).count() as u64);
    let verdict = &stdout_json(&out)["items"][0]["result"];
    assert_eq!(verdict["verdict"], "non-member");
}

#[test]
fn general_certificate_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(odeco_tt(&["sample", "--n", "2", "--seeds", "1", "--out", d]).status.success());
    let tensor = dir.path().join("tensor_n2_seed1.json");
    let out = odeco_tt(&["certify", "--input", tensor.to_str().unwrap(), "--general"]);
    assert_schema("certificate", &stdout_json(&out));
    let pass = stdout_json(&out)["pass"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if pass { 0 } else { 2 }));
}
