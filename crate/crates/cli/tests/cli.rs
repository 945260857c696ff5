use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_relayfresh");

const SMALL: &str = "\
mode = \"optimize\"
cycles = 20000
seed = 3

[system]
files = 4
cache_budget = 4.0
route_budgets = [3.0, 2.0]
lambdas = [2.0, 1.0, 0.5, 0.25]
";

fn relayfresh(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn optimize_writes_all_panels() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = relayfresh(&[
        "optimize",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    for name in [
        "totals.csv",
        "allocation.csv",
        "freshness.csv",
        "summary.json",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let freshness = fs::read_to_string(out.join("freshness.csv")).unwrap();
    assert_eq!(
        freshness.lines().next().unwrap(),
        "file,f_ub,f_so,f_sim,f_sim_std_err"
    );
    assert_eq!(freshness.lines().count(), 5);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("F_ub") && stdout.contains("F_so"));
}

#[test]
fn structured_format_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = relayfresh(&[
        "optimize",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--format",
        "structured",
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(out.join("report.json").is_file());
    assert!(out.join("summary.json").is_file());
    assert!(!out.join("allocation.csv").exists());
}

#[test]
fn simulate_is_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let runs: Vec<_> = [&[][..], &["--sequential"][..]]
        .iter()
        .enumerate()
        .map(|(i, extra)| {
            let out = dir.path().join(format!("run{i}"));
            let mut args = vec![
                "simulate",
                "--config",
                &config,
                "--out",
                out.to_str().unwrap(),
                "--cycles",
                "5000",
            ];
            args.extend_from_slice(extra);
            let res = relayfresh(&args);
            assert!(res.status.success(), "{}", stderr(&res));
            out
        })
        .collect();
    for name in [
        "totals.csv",
        "allocation.csv",
        "freshness.csv",
        "summary.json",
    ] {
        assert_eq!(
            fs::read(runs[0].join(name)).unwrap(),
            fs::read(runs[1].join(name)).unwrap(),
            "{name}"
        );
    }
    let summary = fs::read_to_string(runs[0].join("summary.json")).unwrap();
    assert!(summary.contains("\"cycles_per_file\": 5000"), "{summary}");
}

#[test]
fn malformed_config_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &SMALL.replace("lambdas = [2.0, 1.0, 0.5, 0.25]", "lambdas = [2.0]"),
    );
    let res = relayfresh(&[
        "optimize",
        "--config",
        &config,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(stderr(&res).contains("lambdas"), "{}", stderr(&res));
}

#[test]
fn missing_config_exits_with_parse_code() {
    let res = relayfresh(&["optimize", "--config", "/nonexistent/config.toml"]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn infeasible_allocation_exits_with_constraint_code() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        "[system]\nfiles = 2\ncache_budget = 1.0\nroute_budgets = [1.0]\nlambdas = [1.0, 2.0]\n\n\
                [allocation]\nuser = [[0.9, 0.9]]\ncache = [[0.5, 0.5]]\n";
    let config = write_config(dir.path(), text);
    let res = relayfresh(&[
        "eval",
        "--config",
        &config,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(4));
    assert!(stderr(&res).contains("route 1"), "{}", stderr(&res));
}

#[test]
fn eval_scores_a_feasible_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        "[system]\nfiles = 2\ncache_budget = 1.0\nroute_budgets = [1.0]\nlambdas = [1.0, 2.0]\n\n\
                [allocation]\nuser = [[0.5, 0.5]]\ncache = [[0.5, 0.5]]\n";
    let config = write_config(dir.path(), text);
    let out = dir.path().join("out");
    let res = relayfresh(&["eval", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert!(out.join("summary.json").is_file());
}

#[test]
fn usage_errors_are_distinct() {
    let res = relayfresh(&["optimize", "--format", "yaml"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn reproduce_paper_runs_without_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("paper");
    let res = relayfresh(&[
        "reproduce-paper",
        "--out",
        out.to_str().unwrap(),
        "--cycles",
        "10000",
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let totals = fs::read_to_string(out.join("totals.csv")).unwrap();
    assert_eq!(totals.lines().count(), 31);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("split  = ["), "{stdout}");
}
