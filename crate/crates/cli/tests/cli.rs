use std::path::Path;
use std::process::{Command, Output};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splinepath"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SPLINEPATH_OUT")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn no_arguments_prints_usage_and_exits_one() {
    let o = Command::new(env!("CARGO_BIN_EXE_splinepath")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let o = Command::new(env!("CARGO_BIN_EXE_splinepath")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["gen", "plan", "train", "eval", "bench", "render", "verify", "gradcheck"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn config_on_a_config_free_command_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", "--config", "x.json", "--trials", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_config_file_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["plan", "--config", "/nonexistent/opt.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/opt.json"));
}

#[test]
fn gen_is_reproducible_and_feeds_plan() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(d.path(), &["gen", "--seed", "4", "--count", "3"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let pa = std::fs::read(a.path().join("problems.json")).unwrap();
    assert_eq!(pa, std::fs::read(b.path().join("problems.json")).unwrap());
    assert_eq!(read_json(&a.path().join("problems.json")).as_array().unwrap().len(), 3);

    let problems = a.path().join("problems.json");
    let o = run(a.path(), &["plan", "--problems", problems.to_str().unwrap(), "--index", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let plan = read_json(&a.path().join("plan.json"));
    assert!(plan["result"]["success"].is_boolean());
    let o = run(a.path(), &["plan", "--problems", problems.to_str().unwrap(), "--index", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_directory_defaults_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_splinepath"))
        .args(["gen", "--count", "1"])
        .env("SPLINEPATH_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("problems.json").exists());
}

#[test]
fn verify_reports_zero_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["verify", "--seed", "0", "--instances", "2", "--trials", "1000", "--resolution", "61"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("verify.json"));
    assert_eq!(r["total"]["trials"], 2000);
    for k in ["mp_violations", "np_violations", "gp_violations"] {
        assert_eq!(r["total"][k], 0, "{k}");
    }
}

#[test]
fn gradcheck_passes_at_small_scale() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["gradcheck", "--configurations", "3", "--initializations", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("gradcheck.json"));
    assert!(r["path_max_rel_error"].as_f64().unwrap() < 1e-4);
}

#[test]
fn render_writes_svg_and_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["render", "--seed", "1", "--resolution", "21", "--heatmap", "exact"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(dir.path().join("render.svg")).unwrap();
    assert!(svg.starts_with("<?xml"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches("<image").count(), 1);
    assert!(std::fs::read(dir.path().join("heatmap.pgm")).unwrap().starts_with(b"P5\n21 21\n"));
}

#[test]
fn bench_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    std::fs::write(
        &cfg,
        r#"{"problems": 2, "methods": ["ours-direct", "chomp-uncalibrated"], "chomp_resolution": 21,
            "optimizer": {"restarts": 2, "candidates": 16, "max_iterations": 100}}"#,
    )
    .unwrap();
    let o = run(dir.path(), &["bench", "--config", cfg.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,problem_id,success,length,length_ratio,wall_ms,seed"));
    assert_eq!(lines.count(), 4);
    let r = read_json(&dir.path().join("report.json"));
    assert_eq!(r["seed"], 3);
}

#[test]
fn bench_with_empty_methods_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    std::fs::write(&cfg, r#"{"methods": []}"#).unwrap();
    let o = run(dir.path(), &["bench", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no benchmark methods"));
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("train.json");
    std::fs::write(
        &cfg,
        r#"{"steps": 5, "batch_size": 2,
            "net": {"max_obstacles": 2, "dim": 2, "anchors": 1, "degree": 2, "input_layers": 1, "input_width": 8,
                    "highway_layers": 1, "highway_width": 8, "head_layers": 2, "head_width": 8}}"#,
    )
    .unwrap();
    let o = run(dir.path(), &["train", "--config", cfg.to_str().unwrap(), "--held-out", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["checkpoint.json", "trace.csv", "train_report.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let o = run(dir.path(), &["eval", "--count", "3", "--refine-steps", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("eval.json"));
    assert_eq!(r["metrics"]["problems"], 3);
    assert_eq!(r["refinement"]["broken"], 0);
}
