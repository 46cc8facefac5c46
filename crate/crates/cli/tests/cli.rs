use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fas"))
        .args(args)
        .env("FAS_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny_config(dir: &Path, energy: &str) -> String {
    let cfg = format!(
        r#"{{
  "grid": {{"n_points": 16}},
  "arch": {{"n_layers": 1, "n_modes": 4, "width": 8, "embed_dim": 8, "channels": 2}},
  "train": {{"epochs": 1, "grad_steps": 2, "rollouts": 8, "batch_size": 8, "n_sde_steps": 10, "buffer_capacity": 64}},
  "energy": {energy}
}}"#
    );
    let p = dir.join("cfg.json");
    fs::write(&p, cfg).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn missing_config_names_the_path() {
    let o = fas(&["train", "-c", "/no/such/cfg.json", "-o", "/tmp/unused"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/cfg.json"), "{}", stderr(&o));
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, r#"{"train": {"epochz": 3}}"#).unwrap();
    let o = fas(&["train", "-c", p.to_str().unwrap(), "-o", dir.path().join("run").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn train_sample_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), r#"{"kind": "quadratic", "b": [1.0, 2.0]}"#);
    let run = dir.path().join("run");
    let o = fas(&["train", "-c", &cfg, "-o", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["config.json", "train_log.jsonl", "checkpoint.bin"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let log = fs::read_to_string(run.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
    let entry: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert!(entry["loss"].as_f64().unwrap().is_finite());

    let samples = dir.path().join("samples");
    let ck = run.join("checkpoint.bin");
    let o = fas(&["sample", "-k", ck.to_str().unwrap(), "-n", "5", "-r", "2", "-o", samples.to_str().unwrap(), "--format", "fasp"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let files: Vec<_> = fs::read_dir(samples.join("paths")).unwrap().collect();
    assert_eq!(files.len(), 5);
    assert_eq!(read_json(&samples.join("metrics.json"))["n_paths"], 5);
    assert_eq!(read_json(&samples.join("config.json"))["grid"]["n_points"], 32);

    let report = dir.path().join("eval").join("metrics.json");
    let o = fas(&["eval", "-i", samples.join("paths").to_str().unwrap(), "-o", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = read_json(&report);
    assert_eq!(rep["n_paths"], 5);
    assert!(rep["thp"].as_f64().unwrap() >= 0.0);
}

#[test]
fn muller_brown_eval_writes_landscape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), r#"{"kind": "muller_brown_tpd"}"#);
    let run = dir.path().join("run");
    let o = fas(&["train", "-c", &cfg, "-o", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let samples = dir.path().join("samples");
    let o = fas(&["sample", "-k", run.join("checkpoint.bin").to_str().unwrap(), "-n", "3", "-o", samples.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sm = read_json(&samples.join("metrics.json"));
    assert!(sm["ets_mean"].as_f64().is_some());

    let mut c: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    c["eval"] = serde_json::json!({"nx": 7, "ny": 5});
    let cfg2 = dir.path().join("cfg2.json");
    fs::write(&cfg2, c.to_string()).unwrap();
    let out = dir.path().join("eval").join("m.json");
    let land = dir.path().join("eval").join("land.csv");
    let o = fas(&[
        "eval",
        "-i",
        samples.join("paths").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "-c",
        cfg2.to_str().unwrap(),
        "--landscape",
        land.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = fs::read_to_string(&land).unwrap();
    assert_eq!(rows.lines().next(), Some("x,y,v"));
    assert_eq!(rows.lines().count(), 1 + 7 * 5);
    let overlay = fs::read_to_string(dir.path().join("eval").join("overlay.csv")).unwrap();
    assert_eq!(overlay.lines().count(), 1 + 3 * 18);
    let rep = read_json(&out);
    assert!(rep["ets_mean"].as_f64().is_some() && rep["llk_mean"].as_f64().is_some());
}

#[test]
fn eval_of_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = fas(&["eval", "-i", dir.path().to_str().unwrap(), "-o", dir.path().join("m.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no trajectory files"), "{}", stderr(&o));
}

#[test]
fn init_path_writes_interpolated_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("init.csv");
    let o = fas(&[
        "init-path", "--A", "0,0,0,1,0,0", "--B", "0,0,0,0,1,0", "--idpp-steps", "20", "-k", "9", "-o", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("step,t,u_index,channel,value"));
    assert_eq!(text.lines().count(), 1 + 11 * 6);
    // endpoints are kept exactly
    assert!(text.lines().any(|l| l == "0,0e0,0,3,1e0"));
    assert!(text.lines().any(|l| l == "0,0e0,10,4,1e0"));

    let o = fas(&["init-path", "--A", "0,0", "--B", "1,2,3", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
