//! End-to-end tests of the `qergo` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn qergo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qergo"))
        .args(args)
        .env_remove("QERGO_JOBS")
        .output()
        .expect("spawn qergo")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_to(cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let out = out.display().to_string();
    let mut args = vec!["run", "--config", cfg, "--out", &out];
    args.extend_from_slice(extra);
    qergo(&args)
}

const SMALL_CAT: &str = r#"{
  "name": "small",
  "family": { "kind": "cat_map", "sizes": [8, 9, 16, 17], "observables": [{ "name": "cos_q" }] },
  "diagnostics": [
    { "kind": "variance", "e_fractions": [0.5, 1.0] },
    { "kind": "extraction", "root_variance_multiple": 3.0 },
    { "kind": "iterated_limit", "t_multiples": [1, 10], "e_fractions": [1.0] },
    { "kind": "spectral_measure" },
    { "kind": "schwartz", "t_multiples": [1, 5], "e_fractions": [1.0] }
  ],
  "windows": [[8, 9], [16, 17]]
}"#;

#[test]
fn identity_system_runs_and_writes_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run_to(&config("identity.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["file"] == "report.json"));
    for f in files {
        let bytes = std::fs::read(out.join(f["file"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(f["sha256"].as_str().unwrap(), format!("{:x}", Sha256::digest(&bytes)));
    }
    let cfg_bytes = std::fs::read(config("identity.json")).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap(), format!("{:x}", Sha256::digest(&cfg_bytes)));

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let size = &report["sweep"]["per_size"][0];
    // U = I: one block, ⟨A⟩ = A, defect = Tr((A − 5/2)²)/4
    assert_eq!(size["blocks"], 1);
    let row = &size["observables"][0]["variance"][0];
    assert!((row["qe_defect"].as_f64().unwrap() - 1.25).abs() < 1e-12);
    assert_eq!(size["gns"]["within_tolerance"], true);
    assert_eq!(size["gns"]["summary"]["vacuum_rank"], 16);
}

#[test]
fn every_csv_row_carries_tolerances() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL_CAT);
    let out = tmp.path().join("out");
    let o = run_to(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut seen = 0;
    for entry in std::fs::read_dir(&out).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "csv") {
            let mut r = csv::Reader::from_path(&p).unwrap();
            let headers = r.headers().unwrap().clone();
            let col = headers.iter().position(|h| h == "tol_herm").unwrap_or_else(|| panic!("{p:?} lacks tol_herm"));
            for rec in r.records() {
                let rec = rec.unwrap();
                assert_eq!(rec.len(), headers.len());
                assert_eq!(rec[col].parse::<f64>().unwrap(), 1e-10);
            }
            seen += 1;
        }
    }
    assert!(seen >= 8, "only {seen} CSV files");
}

#[test]
fn reruns_are_byte_identical_for_any_job_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL_CAT);
    let dirs: Vec<PathBuf> = (0..3).map(|i| tmp.path().join(format!("o{i}"))).collect();
    for (d, jobs) in dirs.iter().zip(["1", "1", "3"]) {
        let o = run_to(&cfg, d, &["--jobs", jobs]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for name in ["report.json", "manifest.json", "variance.csv", "windows.csv"] {
        let a = std::fs::read(dirs[0].join(name)).unwrap();
        assert_eq!(a, std::fs::read(dirs[1].join(name)).unwrap(), "{name} differs between reruns");
        assert_eq!(a, std::fs::read(dirs[2].join(name)).unwrap(), "{name} differs with --jobs 3");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "g.json",
        r#"{"family": {"kind": "gue", "sizes": [16, 32], "observables": [{"name": "sign_split"}]},
            "seed": 1, "diagnostics": [{"kind": "variance"}]}"#,
    );
    let read = |d: &str, extra: &[&str]| {
        let out = tmp.path().join(d);
        let o = run_to(&cfg, &out, extra);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(out.join("variance.csv")).unwrap()
    };
    let base = read("a", &[]);
    assert_eq!(base, read("b", &["--seed", "1"]));
    assert_ne!(base, read("c", &["--seed", "2"]));
}

#[test]
fn schema_errors_exit_2_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            "grid.json",
            "{\n  \"family\": {\"kind\": \"shear\", \"sizes\": [8]},\n  \"diagnostics\": [\n    {\"kind\": \"variance\",\n     \"e_grid\": [2.0, 1.0]}\n  ]\n}",
            "line 5",
            "e_grid",
        ),
        (
            "unknown.json",
            "{\n  \"family\": {\"kind\": \"shear\", \"sizes\": [8]},\n  \"diagnostics\": [{\"kind\": \"variance\"}],\n  \"colour\": 1\n}",
            "line 4",
            "colour",
        ),
        (
            "both.json",
            r#"{"family": {"kind": "shear", "sizes": [8]}, "system": {"dim": 1, "action": {"kind": "z", "matrix": [[[1, 0]]]}}, "diagnostics": [{"kind": "variance"}]}"#,
            "line 1",
            "exactly one of family, system",
        ),
        (
            "alias.json",
            "{\n  \"family\": {\"kind\": \"cat_map\", \"sizes\": [4, 8],\n    \"observables\": [{\"name\": \"cos2_q\"}]},\n  \"diagnostics\": [{\"kind\": \"variance\"}]\n}",
            "line 3",
            "aliases",
        ),
        (
            "sizes.json",
            "{\n  \"family\": {\"kind\": \"shear\",\n    \"sizes\": [16, 8]},\n  \"diagnostics\": [{\"kind\": \"variance\"}]\n}",
            "line 3",
            "strictly increasing",
        ),
    ];
    for (name, text, line, needle) in cases {
        let cfg = write(tmp.path(), name, text);
        for sub in ["run", "validate"] {
            let o = if sub == "run" {
                run_to(&cfg, &tmp.path().join("never"), &[])
            } else {
                qergo(&["validate", "--config", &cfg])
            };
            assert_eq!(o.status.code(), Some(2), "{name} ({sub})");
            let err = stderr(&o);
            assert!(err.contains(line) && err.contains(needle), "{name} ({sub}): {err}");
        }
    }
    assert!(!tmp.path().join("never").exists());
    let o = run_to(&config("shear.json"), &tmp.path().join("x"), &["--tol-scale", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qergo(&["validate", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_and_names_the_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "g.json",
        r#"{"family": {"kind": "gue", "sizes": [32], "observables": [{"name": "sign_split"}]},
            "seed": 1, "diagnostics": [{"kind": "variance"}]}"#,
    );
    let out = tmp.path().join("out");
    let o = run_to(&cfg, &out, &["--tol-scale", "1e-9"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not orthonormal"), "{}", stderr(&o));
    // the failing run still leaves a report behind
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["failed_sizes"], 1);
}

#[test]
fn shipped_configs_validate() {
    for c in ["identity.json", "cat_map.json", "shear.json", "gue.json"] {
        let o = qergo(&["validate", "--config", &config(c)]);
        assert_eq!(o.status.code(), Some(0), "{c}: {}", stderr(&o));
    }
}

#[test]
fn list_fixtures_is_stable() {
    let a = qergo(&["list-fixtures"]);
    let b = qergo(&["list-fixtures"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    for kind in ["cat_map", "shear", "gue", "single_system"] {
        assert!(text.contains(kind));
    }
    let j1 = qergo(&["list-fixtures", "--json"]);
    assert_eq!(j1.stdout, qergo(&["list-fixtures", "--json"]).stdout);
    let v: serde_json::Value = serde_json::from_slice(&j1.stdout).unwrap();
    assert_eq!(v["kinds"].as_array().unwrap().len(), 4);
    for s in v["symbols"].as_array().unwrap() {
        let c00: f64 = s["fourier"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|r| r[0] == 0.0 && r[1] == 0.0)
            .map(|r| r[2].as_f64().unwrap())
            .sum();
        assert_eq!(s["classical_average"][0].as_f64().unwrap(), c00, "{}", s["name"]);
    }
}

#[test]
fn jobs_env_var_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL_CAT);
    let out = tmp.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_qergo"))
        .args(["run", "--config", &cfg, "--out", &out.display().to_string()])
        .env("QERGO_JOBS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_qergo"))
        .args(["run", "--config", &cfg, "--out", &out.display().to_string()])
        .env("QERGO_JOBS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
