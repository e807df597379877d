use std::path::Path;

use lper::cli::run_with_env;
use serde_json::Value;

fn run(args: &[&str], env: &[(&str, &str)]) -> i32 {
    let argv = std::iter::once("lper").chain(args.iter().copied());
    let env: Vec<(String, String)> = env.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    run_with_env(argv, env)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_and_help_codes() {
    assert_eq!(run(&[], &[]), 64);
    assert_eq!(run(&["frobnicate"], &[]), 64);
    assert_eq!(run(&["eigs", "--grid", "many"], &[]), 64);
    assert_eq!(run(&["--help"], &[]), 0);
}

#[test]
fn validation_errors_exit_two() {
    assert_eq!(run(&["eigs", "--epsilon", "3.5"], &[]), 2);
    assert_eq!(run(&["kernel", "--grid", "63"], &[]), 2);
    assert_eq!(run(&["eigs", "--profile", "cosine"], &[]), 2);
    assert_eq!(run(&["eigs"], &[("LPER_EPSILON", "zero")]), 2);
}

#[test]
fn missing_config_file_is_a_solver_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.conf");
    assert_eq!(run(&["eigs", "--config", missing.to_str().unwrap()], &[]), 1);
}

#[test]
fn eigs_reports_zero_and_symmetric_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eigs.json");
    assert_eq!(run(&["eigs", "--lmax", "12", "--out", out.to_str().unwrap()], &[]), 0);
    let v = read_json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "eigs");
    let eigs: Vec<f64> = v["result"]["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(eigs.contains(&0.0));
    assert_eq!(eigs.len() % 2, 1);
    for e in &eigs {
        assert!(eigs.iter().any(|f| (e + f).abs() < 1e-8));
    }
}

#[test]
fn precedence_file_env_flag() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# test\ngrid=128\nseed=5\nlevels=3\n").unwrap();
    let out = dir.path().join("v.json");
    let args = ["validate", "--config", conf.to_str().unwrap(), "--out", out.to_str().unwrap()];

    assert_eq!(run(&args, &[]), 0);
    let c = &read_json(&out)["config"];
    assert_eq!((c["grid"].as_u64(), c["seed"].as_u64(), c["levels"].as_u64()), (Some(128), Some(5), Some(3)));

    assert_eq!(run(&args, &[("LPER_GRID", "256"), ("LPER_SEED", "9")]), 0);
    let c = &read_json(&out)["config"];
    assert_eq!((c["grid"].as_u64(), c["seed"].as_u64()), (Some(256), Some(9)));

    let mut with_flag = args.to_vec();
    with_flag.extend(["--grid", "1024"]);
    assert_eq!(run(&with_flag, &[("LPER_GRID", "256")]), 0);
    let c = &read_json(&out)["config"];
    assert_eq!((c["grid"].as_u64(), c["levels"].as_u64()), (Some(1024), Some(3)));
}

#[test]
fn bad_config_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "grid=128\nnot a pair\n").unwrap();
    assert_eq!(run(&["validate", "--config", conf.to_str().unwrap()], &[]), 2);
}

#[test]
fn resolve_writes_periodic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    assert_eq!(run(&["resolve", "--grid", "128", "--seed", "4", "--out", out.to_str().unwrap()], &[]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,re_u,im_u,re_f,im_f");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 129);
    let (first, last) = (&rows[0], &rows[128]);
    assert!((first[1] - last[1]).abs() < 1e-10 && (first[2] - last[2]).abs() < 1e-10);
}

#[test]
fn trace_log_ratio_increases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("logp.csv");
    assert_eq!(run(&["trace", "--kind", "logp", "--samples", "64", "--out", out.to_str().unwrap()], &[]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,log_p,log_p_over_f");
    let ell: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(ell.len(), 63);
    assert!(ell.windows(2).all(|w| w[1] > w[0]));
}
