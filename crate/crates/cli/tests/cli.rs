use std::path::Path;
use std::process::Command;

fn pushlab(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_pushlab")).args(args).output().expect("spawn pushlab");
    assert!(out.status.success(), "pushlab {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_from_data_to_plots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data.jsonl");
    let ckpt = d.join("model.ckpt");

    pushlab(&["gen-data", "--episodes", "12", "--pushes", "20", "--seed", "3", "--out", s(&data)]);
    let first = std::fs::read(&data).unwrap();
    pushlab(&["gen-data", "--episodes", "12", "--pushes", "20", "--seed", "3", "--out", s(&data)]);
    assert_eq!(first, std::fs::read(&data).unwrap(), "datasets are reproducible");

    pushlab(&["train", "--data", s(&data), "--epochs", "1", "--hidden", "8", "--out", s(&ckpt)]);
    let eval: serde_json::Value = serde_json::from_str(&pushlab(&["eval-model", "--checkpoint", s(&ckpt), "--data", s(&data)])).unwrap();
    assert!(eval["position"]["mean"].as_f64().unwrap().is_finite());

    let task = d.join("task.json");
    std::fs::write(&task, r#"{"kind":"posing","target":[0.1,0.0,0.0],"w_theta":{"kind":"constant","weight":0.025},"thresholds":{"position":0.01,"orientation":null}}"#).unwrap();
    let trace = d.join("trace.jsonl");
    pushlab(&[
        "run-episode",
        "--checkpoint",
        s(&ckpt),
        "--task",
        s(&task),
        "--mode",
        "improved",
        "--max-steps",
        "3",
        "--trace-out",
        s(&trace),
    ]);
    let lines = std::fs::read_to_string(&trace).unwrap().lines().count();
    assert!((2..=4).contains(&lines), "header plus at most 3 steps, got {lines} lines");

    let config = d.join("master.json");
    let mut suite = serde_json::to_value(pushlab::bench::ExperimentSuite::short(pushlab::ctrl::Mode::Improved)).unwrap();
    suite["cases_per_category"] = 1.into();
    suite["repeats"] = 1.into();
    suite["max_steps"] = 4.into();
    std::fs::write(&config, serde_json::json!({ "checkpoint": ckpt, "suite": suite }).to_string()).unwrap();
    let out = d.join("suite");
    pushlab(&["run-suite", "--config", s(&config), "--out-dir", s(&out)]);
    let report = out.join("short-improved.json");
    assert!(out.join("short-improved.csv").exists() && out.join("short-improved.timings.csv").exists());

    let cmp = pushlab(&["compare", "--basic", s(&report), "--improved", s(&report)]);
    assert!(!cmp.is_empty());

    let plots = d.join("plots");
    pushlab(&["plot", "--report", s(&report), "--out-dir", s(&plots)]);
    let svgs = std::fs::read_dir(&plots).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg")).count();
    assert!(svgs >= 2);
}
