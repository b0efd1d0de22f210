use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn pearson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pearson")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let o = pearson(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn simulate(dir: &Path, model: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["simulate", "--model", model, "--out", s(dir)];
    args.extend_from_slice(extra);
    ok(&args);
    dir.join("path.csv")
}

#[test]
fn simulate_row_counts_and_sidecar() {
    let tmp = TempDir::new().unwrap();
    let wf = simulate(&tmp.path().join("wf"), "wf", &[]);
    let text = fs::read_to_string(&wf).unwrap();
    assert_eq!(text.lines().count(), 102);
    assert!(text.starts_with("t,x1,x2,x3\n"));
    let side = json(&tmp.path().join("wf/path.json"));
    assert_eq!(side["schema"], 1);
    assert_eq!(side["N"], 100);
    assert!((side["h"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!(side["config"].is_object() && side["params"].is_object());

    let sk = simulate(&tmp.path().join("sk"), "sk", &[]);
    assert_eq!(fs::read_to_string(&sk).unwrap().lines().count(), 50002);
}

#[test]
fn simulate_is_byte_identical_per_seed() {
    let tmp = TempDir::new().unwrap();
    let a = simulate(&tmp.path().join("a"), "ou", &["--seed", "5"]);
    let b = simulate(&tmp.path().join("b"), "ou", &["--seed", "5"]);
    let c = simulate(&tmp.path().join("c"), "ou", &["--seed", "6"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn dotted_overrides_and_config_file() {
    let tmp = TempDir::new().unwrap();
    let p = simulate(&tmp.path().join("a"), "ou", &["--simulate.n_steps=1000", "--simulate.factor", "10"]);
    assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 102);
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"simulate": {"n_steps": 200, "factor": 2}}"#).unwrap();
    let p = simulate(&tmp.path().join("b"), "ou", &["--config", s(&cfg)]);
    assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 102);
    let p = simulate(&tmp.path().join("c"), "ou", &["--config", s(&cfg), "--simulate.n_steps=40"]);
    assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 22);
}

#[test]
fn ou_fit_recovers_lambda_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(&tmp.path().join("sim"), "ou", &["--seed", "3"]);
    let fit = |dir: &str| {
        let out = tmp.path().join(dir);
        let trace = out.join("trace.csv");
        fs::create_dir_all(&out).unwrap();
        ok(&["fit", "--data", s(&data), "--model", "ou", "--estimator", "ss", "--out", s(&out), "--trace", s(&trace)]);
        assert!(fs::read_to_string(&trace).unwrap().starts_with("phase,iteration,objective,grad_norm\n"));
        json(&out.join("fit.json"))
    };
    let mut a = fit("f1");
    let mut b = fit("f2");
    assert_eq!(a["schema"], 1);
    assert_eq!(a["status"], "ok");
    assert_eq!(a["fit"]["converged"], true);
    let lambda = a["estimates"]["lambda"].as_f64().unwrap();
    let sd = (2.0 * 1.0 / 50.0f64).sqrt();
    assert!((lambda - 1.0).abs() < 3.0 * sd, "{lambda}");
    assert!(a["nll"].is_number());
    a["fit"].as_object_mut().unwrap().remove("wall_clock");
    b["fit"].as_object_mut().unwrap().remove("wall_clock");
    a["config"].as_object_mut().unwrap().remove("data");
    b["config"].as_object_mut().unwrap().remove("data");
    assert_eq!(a, b);
}

#[test]
fn coarse_sk_ll_fit_fails_with_status() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(&tmp.path().join("sim"), "sk", &["--simulate.factor=2000"]);
    let out = tmp.path().join("fit");
    let o = pearson(&["fit", "--data", s(&data), "--model", "sk", "--estimator", "ll", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    let rep = json(&out.join("fit.json"));
    assert_ne!(rep["status"], "ok");
    assert_eq!(rep["fit"]["converged"], false);
    assert!(rep["fit"]["failure_reason"].is_string());
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(pearson(&["simulate", "--model", "nope"]).status.code(), Some(2));
    assert_eq!(pearson(&["frobnicate"]).status.code(), Some(2));
    let missing = tmp.path().join("missing.csv");
    assert_eq!(pearson(&["fit", "--data", s(&missing), "--model", "ou"]).status.code(), Some(4));
    let data = simulate(&tmp.path().join("sim"), "ou", &["--simulate.n_steps=100"]);
    let o = pearson(&["fit", "--data", s(&data), "--model", "wf", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "[1, 2]").unwrap();
    assert_eq!(pearson(&["simulate", "--config", s(&bad), "--out", s(tmp.path())]).status.code(), Some(2));
    let ragged = tmp.path().join("ragged.csv");
    fs::write(&ragged, "t,x1\n0,1\n0.1,2\n0.3,3\n").unwrap();
    assert_eq!(pearson(&["fit", "--data", s(&ragged), "--model", "ou"]).status.code(), Some(2));
    assert_eq!(pearson(&["--help"]).status.code(), Some(0));
}

#[test]
fn icecore_on_synthetic_series() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(&tmp.path().join("sim"), "sk", &["--simulate.factor=100"]);
    let series = tmp.path().join("series.csv");
    let text: String = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .map(|l| {
            let mut f = l.split(',');
            format!("{},{}\n", f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    fs::write(&series, text).unwrap();
    let out = tmp.path().join("ice");
    ok(&["icecore", "--data", s(&series), "--model", "m1", "--out", s(&out)]);
    let rep = json(&out.join("icecore.json"));
    assert_eq!(rep["schema"], 1);
    let fit = &rep["fits"][0];
    for k in ["b", "d", "alpha", "beta"] {
        assert_eq!(fit["estimates"][k].as_f64(), Some(0.0), "{k}");
    }
    assert!(fit["nll"].is_number());
    assert_eq!(pearson(&["icecore", "--data", s(&data), "--out", s(&out)]).status.code(), Some(2));
}

#[test]
fn bench_and_study_outputs() {
    let tmp = TempDir::new().unwrap();
    let common = [
        "--model",
        "sk",
        "--study.replications=1",
        "--study.T=10",
        "--study.sd_path.T=10",
        "--study.h-values=0.01,0.02",
        r#"--study.estimators=["ss","em"]"#,
    ];
    let out = tmp.path().join("bench");
    let mut args = vec!["bench", "--out", s(&out)];
    args.extend_from_slice(&common);
    ok(&args);
    let text = fs::read_to_string(out.join("bench.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "estimator,h,median_wall_clock,n_retained");
    assert_eq!(lines.len(), 5);

    let out = tmp.path().join("study");
    let mut args = vec!["study", "--out", s(&out), "--workers", "2"];
    args.extend_from_slice(&common);
    ok(&args);
    let rep = json(&out.join("study.json"));
    assert_eq!(rep["schema"], 1);
    assert_eq!(rep["config"]["replications"], 1);
    assert_eq!(rep["config"]["workers"], 2);
    assert_eq!(rep["rows"].as_array().unwrap().len(), 4);
    let csv = fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 8);
}
