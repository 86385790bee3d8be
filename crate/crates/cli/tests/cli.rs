use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gibbslab"));
    for var in ["GIBBSLAB_CONFIG", "GIBBSLAB_THREADS", "GIBBSLAB_OUT_DIR", "GIBBSLAB_SEED"] {
        c.env_remove(var);
    }
    c
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

/// Runs a subcommand and returns the exit code and the output directory.
fn run(cmd: &str, config: &Path, extra: &[&str]) -> (i32, TempDir) {
    let out = TempDir::new().unwrap();
    let status = bin()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out.path())
        .args(extra)
        .output()
        .unwrap()
        .status;
    (status.code().unwrap(), out)
}

fn read_json(dir: &TempDir, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap()
}

fn read(dir: &TempDir, name: &str) -> String {
    std::fs::read_to_string(dir.path().join(name)).unwrap()
}

fn assert_clean_csv(text: &str) {
    for field in text.lines().skip(1).flat_map(|l| l.split(',')) {
        assert!(!field.to_ascii_lowercase().contains("nan"), "NaN in {text}");
    }
}

const ISING_1D: &str = r#""model": {"variant": "potential",
    "potential": {"dim": 1, "terms": [{"support": [[0], [1]], "table": [-0.5, 0.5, 0.5, -0.5]}]},
    "alphabet": {"labels": ["-1", "+1"], "reference": [0.5, 0.5]}}"#;

#[test]
fn diam_of_unit_q_random_cluster_is_zero() {
    let (code, out) = run("diam", &bundled("diam_rc_q1.json"), &[]);
    assert_eq!(code, 0);
    let d = read_json(&out, "diam.json");
    assert_eq!(d["diam"], 0.0);
    assert_eq!(d["bound"], 0.0);
    let m = read_json(&out, "manifest.json");
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["invariants"][0]["pass"], true);
}

#[test]
fn sfe_of_free_potential_is_zero() {
    let (code, out) = run("sfe", &bundled("sfe_free.json"), &[]);
    assert_eq!(code, 0);
    let csv = read(&out, "sfe.csv");
    assert_clean_csv(&csv);
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn bundled_configs_pass() {
    for (cmd, file, artifact) in [
        ("diam", "diam_griffiths.json", "diam.csv"),
        ("sfe", "sfe_ising_chain.json", "sfe_alt.csv"),
        ("kernel", "kernel_ising.json", "kernel.csv"),
        ("consistency", "consistency_loop.json", "consistency.csv"),
        ("superadd", "superadd_rc.json", "superadd.csv"),
        ("finite-energy", "finite_energy_rc.json", "finite_energy.json"),
        ("dlr", "dlr_ising.json", "dlr.csv"),
        ("sample", "sample_griffiths.json", "occupancy.csv"),
    ] {
        let (code, out) = run(cmd, &bundled(file), &[]);
        assert_eq!(code, 0, "{cmd} {file}");
        let text = read(&out, artifact);
        if artifact.ends_with(".csv") {
            assert_clean_csv(&text);
        }
        let m = read_json(&out, "manifest.json");
        assert_eq!(m["command"], cmd);
        assert!(m["config_hash"].as_str().unwrap().len() == 64);
    }
}

#[test]
fn kernel_binary_matches_csv() {
    let (code, out) = run("kernel", &bundled("kernel_ising.json"), &[]);
    assert_eq!(code, 0);
    let bytes = std::fs::read(out.path().join("kernel.bin")).unwrap();
    let probs: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let csv = read(&out, "kernel.csv");
    let weights: Vec<f64> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(probs.len(), 16);
    for (a, b) in probs.iter().zip(&weights) {
        assert_eq!(a, b);
    }
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn outputs_do_not_depend_on_threads() {
    for (cmd, file, artifacts) in [
        ("consistency", "consistency_loop.json", vec!["consistency.csv"]),
        ("sfe", "sfe_ising_chain.json", vec!["sfe.csv", "sfe_alt.csv"]),
        ("sample", "sample_griffiths.json", vec!["samples.jsonl", "occupancy.csv"]),
        ("superadd", "superadd_rc.json", vec!["superadd.csv"]),
    ] {
        let (c1, one) = run(cmd, &bundled(file), &["--threads", "1"]);
        let (c3, three) = run(cmd, &bundled(file), &["--threads", "3"]);
        assert_eq!((c1, c3), (0, 0));
        for a in artifacts {
            assert_eq!(read(&one, a), read(&three, a), "{cmd}: {a}");
        }
        assert_eq!(read_json(&one, "manifest.json")["config_hash"], read_json(&three, "manifest.json")["config_hash"]);
    }
}

#[test]
fn env_vars_mirror_flags() {
    let out = TempDir::new().unwrap();
    let status = bin()
        .arg("sample")
        .env("GIBBSLAB_CONFIG", bundled("sample_griffiths.json"))
        .env("GIBBSLAB_OUT_DIR", out.path())
        .env("GIBBSLAB_THREADS", "2")
        .env("GIBBSLAB_SEED", "99")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let m = read_json(&out, "manifest.json");
    assert_eq!(m["seed"], 99);
    assert_eq!(m["threads"], 2);
    let (_, flagged) = run("sample", &bundled("sample_griffiths.json"), &["--seed", "99"]);
    assert_eq!(read(&out, "samples.jsonl"), read(&flagged, "samples.jsonl"));
    let (_, default) = run("sample", &bundled("sample_griffiths.json"), &[]);
    assert_ne!(read(&out, "samples.jsonl"), read(&default, "samples.jsonl"));
}

#[test]
fn config_hash_ignores_formatting() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    std::fs::write(&a, r#"{"model": {"variant": "random_cluster", "p": 0.5, "q": 1.0}, "window": {"box": 0}}"#).unwrap();
    std::fs::write(&b, "{\n  \"window\": { \"box\": 0 },\n  \"model\": { \"q\": 1.0, \"p\": 0.5, \"variant\": \"random_cluster\" }\n}\n")
        .unwrap();
    let (_, x) = run("diam", &a, &[]);
    let (_, y) = run("diam", &b, &[]);
    let (_, z) = run("diam", &a, &["--seed", "5"]);
    let h = |d: &TempDir| read_json(d, "manifest.json")["config_hash"].clone();
    assert_eq!(h(&x), h(&y));
    assert_ne!(h(&x), h(&z));
}

#[test]
fn unknown_keys_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, r#"{"model": {"variant": "griffiths", "p": 0.5, "beta": 0.5, "gamma": 1}, "window": {"box": 0}}"#);
    let (code, out) = run("diam", &cfg, &[]);
    assert_eq!(code, 2);
    assert_eq!(read_json(&out, "failure.json")["kind"], "config");
    assert_eq!(read_json(&out, "manifest.json")["exit_code"], 2);

    let cfg = write_config(&dir, r#"{"window": {"box": 0}, "extra": true}"#);
    assert_eq!(run("diam", &cfg, &[]).0, 2);
}

#[test]
fn missing_and_invalid_values_exit_2() {
    let dir = TempDir::new().unwrap();
    for text in [
        r#"{"window": {"box": 0}}"#,
        r#"{"model": {"variant": "random_cluster", "p": 1.5, "q": 2.0}, "window": {"box": 0}}"#,
        r#"{"model": {"variant": "random_cluster", "p": 0.5, "q": 2.0}, "window": {"rect": {"lo": [0], "hi": [1]}}}"#,
        r#"{"model": {"variant": "griffiths", "p": 0.5, "beta": 0.5}, "window": {"box": 0}, "tail": {"fixed": 7}}"#,
        r#"{"model": {"variant": "random_cluster", "p": 0.5, "q": 2.0}, "window": {"box": 0}, "tolerances": {"dlr": -1}}"#,
        "not json",
    ] {
        let cfg = write_config(&dir, text);
        assert_eq!(run("diam", &cfg, &[]).0, 2, "{text}");
    }
    let missing = dir.path().join("absent.json");
    assert_eq!(run("diam", &missing, &[]).0, 2);
}

#[test]
fn capacity_and_ambiguity_exit_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, r#"{"model": {"variant": "random_cluster", "p": 0.5, "q": 2.0}, "window": {"box": 4}}"#);
    let (code, out) = run("diam", &cfg, &[]);
    assert_eq!(code, 3);
    assert_eq!(read_json(&out, "failure.json")["kind"], "capacity");

    let cfg = write_config(
        &dir,
        r#"{"model": {"variant": "griffiths", "p": 0.5, "beta": 0.5}, "window": {"box": 0}, "frame": {"box": 0}, "tail": "unknown"}"#,
    );
    let (code, out) = run("diam", &cfg, &[]);
    assert_eq!(code, 3);
    assert_eq!(read_json(&out, "failure.json")["kind"], "ambiguity");
}

#[test]
fn non_gibbs_field_fails_dlr_with_record() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!(r#"{{{ISING_1D}, "field": {{"kind": "product", "probs": [0.5, 0.5]}}, "window": {{"box": 0}}}}"#));
    let (code, out) = run("dlr", &cfg, &[]);
    assert_eq!(code, 4);
    let f = read_json(&out, "failure.json");
    assert_eq!(f["kind"], "invariant");
    assert_eq!(f["invariants"][0]["name"], "DLR residual");
    assert!(f["invariants"][0]["measured"].as_f64().unwrap() > 0.1);
    assert_eq!(read_json(&out, "manifest.json")["invariants"][0]["pass"], false);
}

#[test]
fn point_mass_fails_finite_energy() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!(r#"{{{ISING_1D}, "field": {{"kind": "point_mass", "state": 1}}, "window": {{"box": 0}}}}"#));
    let (code, out) = run("finite-energy", &cfg, &[]);
    assert_eq!(code, 4);
    assert_eq!(read_json(&out, "finite_energy.json")["pass"], false);
}

#[test]
fn infinite_values_use_the_inf_token() {
    // a hard-core pair term makes the boundary diameter and its bound infinite
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"model": {"variant": "potential",
              "potential": {"dim": 1, "terms": [{"support": [[0], [1]], "table": [0.0, 0.0, 0.0, "inf"]}]},
              "alphabet": {"labels": ["0", "1"], "reference": [0.5, 0.5]}},
            "window": {"box": 0}}"#,
    );
    let (code, out) = run("diam", &cfg, &[]);
    assert_eq!(code, 0);
    let csv = read(&out, "diam.csv");
    assert_clean_csv(&csv);
    assert!(csv.lines().nth(1).unwrap().split(',').any(|f| f == "inf"), "{csv}");
}

#[test]
fn verify_all_on_bundled_matrix() {
    let (code, out) = run("verify-all", &bundled("verify_all.json"), &[]);
    let csv = read(&out, "verify.csv");
    assert_eq!(code, 0, "{csv}");
    assert_eq!(csv.lines().count(), 13);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(2) == Some("true")));
    let m = read_json(&out, "manifest.json");
    assert_eq!(m["invariants"].as_array().unwrap().len(), 12);
}
