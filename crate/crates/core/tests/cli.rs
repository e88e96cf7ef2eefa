use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

use viriallab::cli::{EXIT_BLOWUP, EXIT_FAIL, EXIT_OK, EXIT_USAGE, OUT_ENV};
use viriallab::Scenario;

fn viriallab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viriallab")).env(OUT_ENV, out).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

/// Small free-line scenario; cheap enough for debug builds.
fn small_scenario(name: &str, lambda: f64, t_end: f64) -> Value {
    json!({
        "name": name,
        "model": {"kind": "free"},
        "initial_data": {"type": "scaled_soliton", "lambda": lambda, "omega": 1.0},
        "grid": {"type": "line", "half_width": 16.0, "n": 512, "stagger": false},
        "solver": {"dt_init": 1e-3, "dt_max": 1e-3, "phase_tol": 0.05, "t_end": t_end,
                   "grad_blowup_factor": 10.0, "amp_cap": 1e6, "dt_min": 1e-12},
        "analysis": {"r": 8.0, "snapshot_dt": 0.05}
    })
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

#[test]
fn bundled_scenarios_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let s = Scenario::load(&path).unwrap();
        assert_eq!(Scenario::from_json(&s.to_json().unwrap()).unwrap(), s, "{}", path.display());
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), s.name);
        n += 1;
    }
    assert_eq!(n, 10);
}

#[test]
fn simulate_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let ok = write(tmp.path(), "ok.json", &small_scenario("ok", 1.0, 0.2));
    let o = viriallab(tmp.path(), &["simulate", ok.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["scenario.json", "summary.json", "series.csv", "snapshots/0000.csv"] {
        assert!(tmp.path().join("ok").join(f).exists(), "{f}");
    }

    let mut blow = small_scenario("blow", 1.3, 2.0);
    blow["grid"]["n"] = json!(2048);
    blow["solver"]["dt_init"] = json!(2e-4);
    blow["solver"]["dt_max"] = json!(2e-4);
    let blow = write(tmp.path(), "blow.json", &blow);
    assert_eq!(code(&viriallab(tmp.path(), &["simulate", blow.to_str().unwrap()])), EXIT_BLOWUP);

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ \"name\": ").unwrap();
    assert_eq!(code(&viriallab(tmp.path(), &["simulate", bad.to_str().unwrap()])), EXIT_USAGE);
    assert_eq!(code(&viriallab(tmp.path(), &["simulate", "/nonexistent/x.json"])), EXIT_USAGE);
    assert_eq!(code(&viriallab(tmp.path(), &["frobnicate"])), EXIT_USAGE);
}

#[test]
fn weight_check_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let report = tmp.path().join("report.json");
    let o = viriallab(tmp.path(), &["weight-check", "--out", report.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK);
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["all_passed"], json!(true));

    assert_eq!(code(&viriallab(tmp.path(), &["weight-check", "--samples", "100"])), EXIT_USAGE);

    let mut profile = serde_json::to_value(viriallab::weight::WeightProfile::standard()).unwrap();
    profile["z2"] = json!(10.0);
    let p = write(tmp.path(), "profile.json", &profile);
    assert_eq!(code(&viriallab(tmp.path(), &["weight-check", "--profile", p.to_str().unwrap()])), EXIT_FAIL);
}

#[test]
fn virial_report_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let s = write(tmp.path(), "smooth.json", &small_scenario("smooth", 0.9, 0.5));
    assert_eq!(code(&viriallab(tmp.path(), &["simulate", s.to_str().unwrap()])), EXIT_OK);
    let dir = tmp.path().join("smooth");
    let dir = dir.to_str().unwrap();

    let o = viriallab(tmp.path(), &["virial-report", dir]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("smooth/virial_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["r"], json!(8.0));
    assert_eq!(summary["inequality_violations"], json!(0));
    assert!(tmp.path().join("smooth/virial_report.csv").exists());

    assert_eq!(code(&viriallab(tmp.path(), &["virial-report", dir, "--R", "-1"])), EXIT_USAGE);
    assert_eq!(code(&viriallab(tmp.path(), &["virial-report", dir, "--tol", "0"])), EXIT_USAGE);

    std::fs::remove_dir_all(tmp.path().join("smooth/snapshots")).unwrap();
    assert_eq!(code(&viriallab(tmp.path(), &["virial-report", dir])), EXIT_USAGE);
    assert_eq!(code(&viriallab(tmp.path(), &["virial-report", tmp.path().join("none").to_str().unwrap()])), EXIT_USAGE);
}

#[test]
fn blowup_scan_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let base = write(tmp.path(), "base.json", &small_scenario("base", 1.0, 0.3));
    let base = base.to_str().unwrap();
    assert_eq!(code(&viriallab(tmp.path(), &["blowup-scan", "--steps", "1", "--scenario", base])), EXIT_USAGE);
    let args = |out: &str| {
        vec!["blowup-scan", "--lambda-min", "0.8", "--lambda-max", "1.0", "--steps", "3", "--scenario", base, "--out", out]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
    };
    let mut tables = Vec::new();
    for out in ["a", "b"] {
        let out = tmp.path().join(out);
        let a = args(out.to_str().unwrap());
        let o = viriallab(tmp.path(), &a.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
        tables.push(std::fs::read_to_string(out.join("scan.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
    let lines: Vec<&str> = tables[0].lines().collect();
    assert_eq!(lines[0], "lambda,energy,verdict,t_detect");
    assert_eq!(lines.len(), 4);
}

#[test]
fn ground_state_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("gs");
    let o = viriallab(tmp.path(), &["ground-state", "--n", "512", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("profile.csv").exists());
    assert_eq!(code(&viriallab(tmp.path(), &["ground-state", "--tol", "0"])), EXIT_USAGE);
    assert_eq!(code(&viriallab(tmp.path(), &["ground-state", "--omega", "-1"])), EXIT_USAGE);
    // no bound state: γ ≥ 2√ω
    let o = viriallab(tmp.path(), &["ground-state", "--model", "delta", "--gamma", "5", "--n", "512"]);
    assert_eq!(code(&o), EXIT_FAIL);
}

#[test]
fn bundled_blowup_scenario_reports_blowup() {
    let tmp = TempDir::new().unwrap();
    let o = viriallab(tmp.path(), &["simulate", bundled("free_blowup").to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_BLOWUP, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("free_blowup/summary.json")).unwrap()).unwrap();
    assert!(summary["verdict"]["t_detect"].as_f64().unwrap() < 1.0);
}

#[test]
fn bundled_scenarios_use_schema_tags() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/scenario.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(root).unwrap()).unwrap();
    let tags = |def: &str, key: &str| -> Vec<String> {
        schema["definitions"][def]["oneOf"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v["properties"][key]["const"].as_str().unwrap().to_string())
            .collect()
    };
    let required: Vec<&str> = schema["required"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for name in ["free_soliton", "inverse_power_gaussian", "delta_blowup", "graph_delta_blowup"] {
        let s: Value = serde_json::from_str(&std::fs::read_to_string(bundled(name)).unwrap()).unwrap();
        for key in &required {
            assert!(s.get(key).is_some(), "{name}: {key}");
        }
        assert!(tags("model", "kind").contains(&s["model"]["kind"].as_str().unwrap().to_string()));
        assert!(tags("initial_data", "type").contains(&s["initial_data"]["type"].as_str().unwrap().to_string()));
        assert!(tags("grid", "type").contains(&s["grid"]["type"].as_str().unwrap().to_string()));
        if let Some(v) = s["model"].get("vertex") {
            assert!(tags("vertex", "type").contains(&v["type"].as_str().unwrap().to_string()));
        }
    }
}
