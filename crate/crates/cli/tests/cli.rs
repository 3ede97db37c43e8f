use std::path::Path;
use std::process::{Command, Output};

fn thrustwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thrustwalk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Default config with duration and thrust replaced, written into `dir`.
fn write_config(dir: &Path, duration_s: f64, thrust_n: f64) -> String {
    let out = thrustwalk(&["init-config"]);
    assert!(out.status.success());
    let text = stdout(&out)
        .lines()
        .map(|l| {
            if l.trim_start().starts_with("sim_duration_s") {
                format!("sim_duration_s = {duration_s}")
            } else if l.trim_start().starts_with("thrust_n") {
                format!("thrust_n = {thrust_n}")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn init_config_writes_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    assert!(thrustwalk(&["init-config", "--out", path(&file)])
        .status
        .success());
    let cfg = thrustwalk::config::ScenarioConfig::load(&file).unwrap();
    assert_eq!(cfg, thrustwalk::config::ScenarioConfig::default());
    let again = thrustwalk(&["init-config", "--out", path(&file)]);
    assert_eq!(again.status.code(), Some(1));
    assert!(
        thrustwalk(&["init-config", "--out", path(&file), "--force"])
            .status
            .success()
    );
}

#[test]
fn simulate_writes_trace_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = thrustwalk(&["init-config", "--out", path(&dir.path().join("c.toml"))]);
    assert!(cfg.status.success());
    let out_dir = dir.path().join("run");
    let out = thrustwalk(&[
        "simulate",
        "--config",
        path(&dir.path().join("c.toml")),
        "--out",
        path(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 1001);
    assert_eq!(
        lines[0].split(',').collect::<Vec<_>>(),
        thrustwalk::sim::TRACE_COLUMNS
    );

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["exit_code"], 0);
    assert!(out_dir.join("config.toml").exists());

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 1);
    assert_eq!(summary["rows"][0]["status"], "ok");
}

#[test]
fn thrust_at_weight_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1.0, 4.5 * 9.81);
    let out = thrustwalk(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        path(&dir.path().join("run")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("buoyancy"), "{}", stderr(&out));
}

#[test]
fn no_qp_marks_every_tick_disabled() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1.0, 0.0);
    let run = dir.path().join("run");
    let out = thrustwalk(&["simulate", "--config", &cfg, "--out", path(&run), "--no-qp"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let records =
        thrustwalk::sim::read_trace_csv(std::fs::File::open(run.join("trace.csv")).unwrap())
            .unwrap();
    assert_eq!(records.len(), 100);
    assert!(records
        .iter()
        .all(|r| r.qp_status == thrustwalk::sim::TickStatus::Disabled && r.u_x_mps == 0.0));
}

#[test]
fn single_value_sweep_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 2.0, 5.0);
    let sim = dir.path().join("sim");
    let sweep = dir.path().join("sweep");
    assert!(
        thrustwalk(&["simulate", "--config", &cfg, "--out", path(&sim)])
            .status
            .success()
    );
    let out = thrustwalk(&[
        "sweep-thrust",
        "--config",
        &cfg,
        "--thrusts",
        "5",
        "--out",
        path(&sweep),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        std::fs::read(sim.join("trace.csv")).unwrap(),
        std::fs::read(sweep.join("trace_000.csv")).unwrap()
    );
}

#[test]
fn sweep_rows_are_ordered_and_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1.0, 0.0);
    let run = dir.path().join("sweep");
    let out = thrustwalk(&[
        "--jobs",
        "2",
        "sweep-thrust",
        "--config",
        &cfg,
        "--thrusts",
        "mg/2,0,mg/4",
        "--out",
        path(&run),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    let rows = summary["rows"].as_array().unwrap();
    let thrusts: Vec<f64> = rows
        .iter()
        .map(|r| r["thrust_n"].as_f64().unwrap())
        .collect();
    assert_eq!(thrusts, vec![0.0, 4.5 * 9.81 / 4.0, 4.5 * 9.81 / 2.0]);
    assert_eq!(summary["gain_factor_increasing"], true);
    assert_eq!(summary["omega_decreasing"], true);
    for i in 0..3 {
        assert!(run.join(format!("trace_{i:03}.csv")).exists());
    }
}

#[test]
fn sweep_with_an_invalid_thrust_still_writes_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1.0, 0.0);
    let run = dir.path().join("sweep");
    let out = thrustwalk(&[
        "sweep-thrust",
        "--config",
        &cfg,
        "--thrusts",
        "0,mg",
        "--out",
        path(&run),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"][0]["status"], "ok");
    assert_eq!(summary["rows"][1]["status"], "invalid");
    assert!(run.join("trace_000.csv").exists());
    assert!(run.join("manifest.json").exists());
}

#[test]
fn solve_qp_clips_a_one_dimensional_problem() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.txt");
    // min u^2 - 2u subject to u <= 0.5.
    std::fs::write(&file, "[P] 1 1\n1\n[c] 1\n-2\n[A] 1 1\n1\n[b] 1\n0.5\n").unwrap();
    let out = thrustwalk(&["solve-qp", path(&file)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("status: Optimal"), "{text}");
    assert!(text.lines().any(|l| l.trim() == "u*: 0.5"), "{text}");
}

#[test]
fn solve_qp_reports_infeasibility_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.txt");
    std::fs::write(
        &file,
        "[P] 1 1\n1\n[c] 1\n0\n[A] 2 1\n1\n-1\n[b] 2\n-1\n0\n",
    )
    .unwrap();
    let out = thrustwalk(&["solve-qp", path(&file)]);
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
}

#[test]
fn solve_qp_parse_error_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.txt");
    std::fs::write(&file, "[P] 1 1\n1\n[c] 1\nabc\n").unwrap();
    let out = thrustwalk(&["solve-qp", path(&file)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
}

#[test]
fn solve_qp_random_problem_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = thrustwalk(&["--seed", "7", "solve-qp"]);
    let b = thrustwalk(&["--seed", "7", "solve-qp"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    let run = dir.path().join("qp");
    assert!(
        thrustwalk(&["--seed", "7", "solve-qp", "--out", path(&run)])
            .status
            .success()
    );
    for f in ["problem.txt", "solution.json", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(thrustwalk(&["simulate"]).status.code(), Some(1));
    assert_eq!(thrustwalk(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(thrustwalk(&["--help"]).status.code(), Some(0));
}
