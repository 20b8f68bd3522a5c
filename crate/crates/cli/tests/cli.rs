//! End-to-end CLI checks: the synth → calibrate → simulate → train →
//! evaluate → water-balance flow through the installed binary, plus exit
//! codes and the machine-readable error channel.

use std::path::Path;
use std::process::{Command, Output};

fn hydroflux(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydroflux"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = hydroflux(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn full_pipeline_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    run_ok(
        dir,
        &[
            "synth", "--months", "180", "--seed", "7", "--noise", "3", "--out-dir", "synth",
        ],
    );
    assert!(dir.join("synth/forcing.csv").exists());
    assert!(dir.join("synth/truth.json").exists());
    assert!(dir.join("synth/config.toml").exists());

    run_ok(
        dir,
        &[
            "calibrate",
            "--forcing",
            "synth/forcing.csv",
            "--warmup",
            "1976:1978",
            "--train",
            "1979:1986",
            "--test",
            "1987:1990",
            "--case",
            "q+et",
            "--swarm",
            "12",
            "--iters",
            "15",
            "--seed",
            "3",
            "--out-dir",
            "calib",
        ],
    );
    let best = std::fs::read_to_string(dir.join("calib/best_params.json")).unwrap();
    let best: serde_json::Value = serde_json::from_str(&best).unwrap();
    assert_eq!(best["format_version"], 1);
    assert!(best["params"]["a"].as_f64().unwrap() > 0.0);

    run_ok(
        dir,
        &[
            "simulate",
            "--forcing",
            "synth/forcing.csv",
            "--params",
            "calib/best_params.json",
            "--warmup-months",
            "36",
            "--out-dir",
            "sim",
        ],
    );
    let trace = std::fs::read_to_string(dir.join("sim/trace.csv")).unwrap();
    assert!(trace.starts_with("date,W,Y,ET,SM,DR,GR,GW,GD,Q"));
    assert_eq!(trace.lines().count(), 181);

    run_ok(
        dir,
        &[
            "train-ml",
            "--forcing",
            "synth/forcing.csv",
            "--train",
            "1979:1986",
            "--test",
            "1987:1990",
            "--model",
            "lasso",
            "--inputs",
            "p,et",
            "--hyper",
            "lambda=0.05",
            "--seed",
            "5",
            "--out-dir",
            "ml",
        ],
    );
    assert!(dir.join("ml/model.json").exists());

    run_ok(
        dir,
        &[
            "train-piml",
            "--forcing",
            "synth/forcing.csv",
            "--train",
            "1979:1986",
            "--test",
            "1987:1990",
            "--et-model",
            "svr",
            "--q-model",
            "gpr",
            "--seed",
            "5",
            "--out-dir",
            "piml",
        ],
    );
    // GPR layer carries 90% bounds
    let header = std::fs::read_to_string(dir.join("piml/predictions_q.csv")).unwrap();
    assert!(header.starts_with("date,observed,predicted,lower,upper"));
    // predictions cover every test month (the lag comes from the last
    // training month)
    assert_eq!(header.lines().count(), 49);

    let table = run_ok(
        dir,
        &[
            "evaluate",
            "--predictions",
            "piml/predictions_q.csv",
            "--variable",
            "q",
            "--out-dir",
            "eval",
        ],
    );
    assert!(table.contains("variable"));
    assert!(dir.join("eval/report.json").exists());

    let wb = run_ok(
        dir,
        &[
            "water-balance",
            "--observations",
            "synth/forcing.csv",
            "--pred",
            "piml=piml/predictions_et.csv,piml/predictions_q.csv",
            "--period",
            "1987-01:1990-12",
            "--dsm",
            "-0.045",
            "--dgw",
            "-0.155",
            "--out-dir",
            "wb",
        ],
    );
    assert!(wb.contains("observed"));
    assert!(wb.contains("piml"));
    let csv = std::fs::read_to_string(dir.join("wb/water_balance.csv")).unwrap();
    assert!(csv.starts_with("model,p_mm,et_mm,q_mm,et_plus_q_mm,pct_deviation"));
}

#[test]
fn plot_data_covers_only_scored_months() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_ok(dir, &["synth", "--months", "120", "--seed", "2", "--out-dir", "s"]);
    run_ok(
        dir,
        &[
            "train-ml",
            "--forcing",
            "s/forcing.csv",
            "--train",
            "1979:1983",
            "--test",
            "1984:1985",
            "--model",
            "ridge",
            "--out-dir",
            "ml",
        ],
    );
    let plot = std::fs::read_to_string(dir.join("ml/plot_data.csv")).unwrap();
    let mut lines = plot.lines();
    assert_eq!(lines.next().unwrap(), "date,variable,series,value_mm");
    // 24 test months × (observed + modeled)
    assert_eq!(plot.lines().count() - 1, 48);
    assert!(plot.lines().skip(1).all(|l| {
        let date = l.split(',').next().unwrap();
        ("1984-01"..="1985-12").contains(&date)
    }));
}

#[test]
fn daily_input_is_aggregated() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // two full months of daily records
    let mut csv = String::from("date,p_mm,tmax_c,tmin_c\n");
    for d in 1..=31 {
        csv.push_str(&format!("2001-01-{d:02},2.0,30.0,20.0\n"));
    }
    for d in 1..=28 {
        csv.push_str(&format!("2001-02-{d:02},1.0,31.0,21.0\n"));
    }
    std::fs::write(dir.join("daily.csv"), csv).unwrap();
    run_ok(
        dir,
        &[
            "simulate",
            "--daily",
            "daily.csv",
            "--latitude",
            "22.92",
            "--a",
            "0.95",
            "--b",
            "350",
            "--out-dir",
            "out",
        ],
    );
    let trace = std::fs::read_to_string(dir.join("out/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3); // header + 2 months
}

#[test]
fn computational_errors_are_json_with_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hydroflux(
        tmp.path(),
        &["simulate", "--forcing", "missing.csv", "--out-dir", "x"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("stderr is one JSON object");
    assert_eq!(err["format_version"], 1);
    assert!(err["error"]["kind"].is_string());
    assert!(err["error"]["message"].is_string());
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hydroflux(tmp.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    let out = hydroflux(tmp.path(), &["train-ml", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = Command::new(env!("CARGO_BIN_EXE_hydroflux"))
        .current_dir(dir)
        .env("HYDROFLUX_SEED", "77")
        .args(["synth", "--months", "60", "--out-dir", "a"])
        .output()
        .unwrap();
    assert!(out.status.success());
    run_ok(dir, &["synth", "--months", "60", "--seed", "77", "--out-dir", "b"]);
    assert_eq!(
        std::fs::read(dir.join("a/forcing.csv")).unwrap(),
        std::fs::read(dir.join("b/forcing.csv")).unwrap()
    );
    let cfg = std::fs::read_to_string(dir.join("a/config.toml")).unwrap();
    assert!(cfg.contains("seed = 77"));
}
