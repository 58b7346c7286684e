use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use lamina_cli::run_command;
use serde_json::{json, Value};

fn run(args: &[&str]) -> lamina_cli::Outcome {
    run_command(std::iter::once("lamina").chain(args.iter().copied()))
}

fn write_json(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn error_of(out: &lamina_cli::Outcome) -> Value {
    let v: Value = serde_json::from_str(&out.stderr).unwrap();
    v["error"].clone()
}

fn full_solid_3d(n: usize) -> Value {
    json!({
        "dimension": 3,
        "resolution": [n, n, n],
        "indicator": vec![1; n * n * n],
        "material": {"lame": [1.0, 1.0]},
        "full_solid_override": true,
    })
}

/// The 4x8 slab with a centered hole cut from both faces.
fn notched() -> Value {
    let mut ind = Vec::new();
    for i in 0..4 {
        for k in 0..8 {
            let (x, z) = ((i as f64 + 0.5) / 4.0, -1.0 + (k as f64 + 0.5) / 4.0);
            let hole = x > 0.25 && x < 0.75 && z.abs() > 0.25;
            ind.push(u8::from(z.abs() < 0.5 && !hole));
        }
    }
    json!({"dimension": 2, "resolution": [4, 8], "indicator": ind, "material": {"lame": [1.0, 1.0]}})
}

fn micro_config(k: usize) -> Value {
    json!({
        "epsilon_inverse": k,
        "layer_cell": notched(),
        "H": 1.0, "L": 1.0, "nz": 2,
        "dt": 0.05, "T": 0.15,
        "layer_load": "t * sin(pi * x)",
    })
}

/// Files below `dir` other than manifests.
fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.to_string_lossy().ends_with(".manifest.json") {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn validate_accepts_full_solid_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solid.json");
    write_json(&path, &full_solid_3d(4));
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let report: Value = serde_json::from_str(&out.stdout).unwrap();
    assert!(report["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("S±")));
}

#[test]
fn cell_then_tensors_gives_the_closed_form_membrane_stiffness() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solid.json");
    write_json(&path, &full_solid_3d(4));
    let cell = dir.path().join("cell");
    let out = run(&["--jobs", "2", "cell", path.to_str().unwrap(), "-o", cell.to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let out = run(&["tensors", cell.to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let t: Value = serde_json::from_slice(&fs::read(cell.join("tensors.json")).unwrap()).unwrap();
    let a = t["a_star"][0][0][0][0].as_f64().unwrap();
    assert!((a - 8.0 / 3.0).abs() < 1e-8, "{a}");
    assert!((t["a_star"][0][0][1][1].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-8);
    assert!(cell.join("cell.manifest.json").exists() && cell.join("tensors.manifest.json").exists());
    let audit: Value = serde_json::from_slice(&fs::read(cell.join("audit.json")).unwrap()).unwrap();
    assert_eq!(audit["passed"], json!(true));
}

#[test]
fn pipeline_from_cell_to_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_json(&d.join("layer.json"), &notched());
    let cell = d.join("cell");
    assert_eq!(run(&["cell", d.join("layer.json").to_str().unwrap(), "-o", cell.to_str().unwrap()]).code, 0);
    assert_eq!(run(&["tensors", cell.to_str().unwrap()]).code, 0);

    for k in [2, 4] {
        write_json(&d.join(format!("micro{k}.json")), &micro_config(k));
        let out = run(&["micro", d.join(format!("micro{k}.json")).to_str().unwrap()]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        assert!(d.join(format!("micro{k}.micro/apriori.csv")).exists());
    }
    // plate load |Z^f| q with |Z^f| = 20/32 * 2 of the reference cell
    write_json(
        &d.join("macro.json"),
        &json!({
            "H": 1.0, "L": 1.0, "nx": 8, "nz": 2, "n_plate": 16,
            "dt": 0.05, "T": 0.15,
            "tensors_file": "cell/tensors.json",
            "coefficients": "volume_consistent",
            "g": "(t * sin(pi * x)) * 1.25",
        }),
    );
    let out = run(&["macro", d.join("macro.json").to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stderr);

    let macro_dir = d.join("macro.macro");
    let one = run(&[
        "compare",
        macro_dir.to_str().unwrap(),
        d.join("micro2.micro").to_str().unwrap(),
        "-o",
        d.join("cmp1").to_str().unwrap(),
    ]);
    assert_eq!(one.code, 0, "{}", one.stderr);
    assert!(one.stdout.to_lowercase().contains("slope"), "{}", one.stdout);
    assert!(!one.stdout.starts_with("slope"));

    let two = run(&[
        "compare",
        macro_dir.to_str().unwrap(),
        d.join("micro2.micro").to_str().unwrap(),
        d.join("micro4.micro").to_str().unwrap(),
        "--cell",
        cell.to_str().unwrap(),
        "-o",
        d.join("cmp2").to_str().unwrap(),
    ]);
    assert_eq!(two.code, 0, "{}", two.stderr);
    let csv = fs::read_to_string(d.join("cmp2/compare.csv")).unwrap();
    assert!(csv.starts_with("section,epsilon,quantity,kind,value,reference\r\n"));
    assert!(csv.contains("\r\nslope,"));
}

#[test]
fn single_epsilon_comparison_reports_a_notice() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_json(&d.join("m.json"), &micro_config(2));
    assert_eq!(run(&["micro", d.join("m.json").to_str().unwrap()]).code, 0);
    write_json(
        &d.join("a.json"),
        &json!({
            "H": 1.0, "L": 1.0, "nx": 8, "nz": 2, "n_plate": 16, "dt": 0.05, "T": 0.15,
            "tensors": {"a": 2.0, "b": 0.0, "c": 0.06, "solid_volume": 0.75},
            "coefficients": "volume_consistent",
            "g": "(t * sin(pi * x)) * 1.25",
        }),
    );
    assert_eq!(run(&["macro", d.join("a.json").to_str().unwrap()]).code, 0);
    let out = run(&["compare", d.join("a.macro").to_str().unwrap(), d.join("m.micro").to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let table: Value = serde_json::from_slice(&fs::read(d.join("a.macro/compare/compare.json")).unwrap()).unwrap();
    assert!(table["notice"].is_string());
    assert!(table["slopes"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |name: &str| d.join(name).to_str().unwrap().to_string();

    let out = run(&["frobnicate"]);
    assert_eq!((out.code, error_of(&out)["kind"].clone()), (1, json!("usage")));
    assert_eq!(run(&["cell", "x.json"]).code, 1);
    assert_eq!(run(&["generate"]).code, 1);
    assert_eq!(run(&["--jobs", "0", "validate", "x.json"]).code, 1);

    let out = run(&["validate", &p("missing.json")]);
    assert_eq!((out.code, error_of(&out)["kind"].clone()), (2, json!("io")));

    fs::write(d.join("bad.json"), "{ not json").unwrap();
    let out = run(&["validate", &p("bad.json")]);
    assert_eq!((out.code, error_of(&out)["kind"].clone()), (3, json!("parse")));

    let mut m = micro_config(2);
    m["layer_load"] = json!("sin(");
    write_json(&d.join("expr.json"), &m);
    let out = run(&["micro", &p("expr.json")]);
    assert_eq!((out.code, error_of(&out)["kind"].clone()), (3, json!("expression")));

    // two solid islands that do not span the period
    let mut cell = notched();
    let ind: Vec<u8> = (0..32).map(|v| u8::from(v / 8 == 1 && (3..5).contains(&(v % 8)))).collect();
    cell["indicator"] = json!(ind);
    write_json(&d.join("islands.json"), &cell);
    let out = run(&["validate", &p("islands.json")]);
    assert_eq!((out.code, error_of(&out)["kind"].clone()), (4, json!("geometry")));

    let mut m = micro_config(2);
    m["v0_plus"] = json!(["sin(pi * x)", 0.0]);
    write_json(&d.join("trace.json"), &m);
    let out = run(&["micro", &p("trace.json")]);
    assert_eq!((out.code, error_of(&out)["kind"].clone()), (5, json!("initial_data")));

    write_json(
        &d.join("weak.json"),
        &json!({
            "H": 1.0, "L": 1.0, "nx": 4, "nz": 2, "n_plate": 8, "dt": 0.1, "T": 0.1,
            "tensors": {"a": 1.0, "b": 2.0, "c": 1.0, "solid_volume": 1.0},
        }),
    );
    let out = run(&["macro", &p("weak.json")]);
    assert_eq!((out.code, error_of(&out)["kind"].clone()), (6, json!("audit")));
}

#[test]
fn binary_exit_status_and_streams() {
    let exe = env!("CARGO_BIN_EXE_lamina");
    let out = Command::new(exe).args(["validate", "/nonexistent/cell.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], json!(2));
    let out = Command::new(exe).arg("--version").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("lamina "));
}

#[test]
fn generate_writes_a_valid_layer() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["--seed", "7", "generate", "--dimension", "3", "--resolution", "6,6,6", "-o", d]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let path = out.stdout.trim().to_string();
    assert_eq!(run(&["validate", &path]).code, 0);
    let again = run(&["--seed", "7", "generate", "--dimension", "3", "--resolution", "6,6,6", "-o", d]);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn reruns_produce_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        write_json(&d.join("layer.json"), &notched());
        write_json(&d.join("m.json"), &micro_config(2));
        let cell = d.join("cell");
        assert_eq!(run(&["cell", d.join("layer.json").to_str().unwrap(), "-o", cell.to_str().unwrap()]).code, 0);
        assert_eq!(run(&["tensors", cell.to_str().unwrap()]).code, 0);
        assert_eq!(run(&["micro", d.join("m.json").to_str().unwrap()]).code, 0);
    }
    let (fa, fb) = (data_files(a.path()), data_files(b.path()));
    assert!(fa.keys().any(|k| k.ends_with(".csv")) && fa.keys().any(|k| k.ends_with("tensors.json")));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs between runs");
    }
}
