//! `thrustwalk` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.

mod random_qp;
mod thrusts;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use thrustwalk::config::{default_config_text, ConfigError, ScenarioConfig};
use thrustwalk::qp::{self, QpError, QpSettings, QpStatus};
use thrustwalk::sim::{self, SimError, SETTLING_BAND_M};

#[derive(Parser, Debug)]
#[command(
    name = "thrustwalk",
    version,
    about = "Thruster-assisted capture-point trotting: simulation, thrust sweeps and QP debugging"
)]
struct Cli {
    /// Worker threads for sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Seed for anything randomized (only `solve-qp` without a problem file).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one closed-loop scenario and write its trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Plain capture-point stepping without the QP.
        #[arg(long)]
        no_qp: bool,
    },
    /// Repeat the scenario for several thrust levels.
    SweepThrust {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated thrusts in N; `mg`, `mg/4`, `0.3*mg` are accepted.
        #[arg(long)]
        thrusts: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_qp: bool,
    },
    /// Solve a QP given in the matrix text format.
    SolveQp {
        /// Problem file. Without one, a random feasible problem is generated from --seed.
        problem: Option<PathBuf>,
        /// Output directory for the solution, problem copy and manifest.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = QpSettings::default().tol)]
        tol: f64,
        #[arg(long, default_value_t = QpSettings::default().max_iter)]
        max_iter: usize,
    },
    /// Write the commented default config.
    InitConfig {
        /// Destination file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace an existing file.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Config(ConfigError),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, text)
}

fn create_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    dir.canonicalize().map_err(|e| io_err(dir, e))
}

/// Written as `manifest.json` next to every output.
#[derive(Serialize)]
struct RunManifest {
    subcommand: &'static str,
    tool_version: &'static str,
    /// The command line as invoked.
    argv: Vec<String>,
    /// Re-runs the same computation against the archived inputs in this directory.
    rerun: Vec<String>,
    config_path: Option<String>,
    /// Copy of the input (config or problem file) stored next to the outputs.
    archived_input: Option<String>,
    outputs: Vec<String>,
    options: Value,
    exit_code: u8,
    message: Option<String>,
    wall_clock_s: f64,
}

impl RunManifest {
    fn new(subcommand: &'static str) -> Self {
        Self {
            subcommand,
            tool_version: env!("CARGO_PKG_VERSION"),
            argv: std::env::args().collect(),
            rerun: Vec::new(),
            config_path: None,
            archived_input: None,
            outputs: Vec::new(),
            options: Value::Null,
            exit_code: 0,
            message: None,
            wall_clock_s: 0.0,
        }
    }

    fn finish(
        mut self,
        dir: &Path,
        started: Instant,
        result: &Result<(), CliError>,
    ) -> Result<(), CliError> {
        self.wall_clock_s = started.elapsed().as_secs_f64();
        if let Err(e) = result {
            self.exit_code = e.exit_code();
            self.message = Some(e.to_string());
        }
        write_json(&dir.join("manifest.json"), &self)
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn load_config(path: &Path) -> Result<(String, ScenarioConfig), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let cfg = ScenarioConfig::from_toml_str(&text).map_err(CliError::Config)?;
    Ok((text, cfg))
}

/// Shared by `simulate` (one thrust, the config's own) and `sweep-thrust`.
fn run_scenarios(
    cfg: &ScenarioConfig,
    thrusts: &[f64],
    jobs: usize,
    dir: &Path,
    single: bool,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let (summary, runs) = sim::thrust_sweep(&cfg.params, thrusts, &cfg.gait, &cfg.controller, jobs)
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;

    let mut rows = Vec::new();
    let mut first_error: Option<CliError> = None;
    for (i, (row, run)) in summary.rows.iter().zip(&runs).enumerate() {
        let mut entry = serde_json::to_value(row).expect("serializable");
        let stem = if single {
            String::new()
        } else {
            format!("_{i:03}")
        };
        match run {
            Some(Ok(trace)) => {
                let name = format!("trace{stem}.csv");
                let path = dir.join(&name);
                let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
                sim::write_trace_csv(std::io::BufWriter::new(file), &trace.records)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                entry["trace_file"] = json!(name);
                manifest.outputs.push(name);
            }
            Some(Err(e)) => {
                if let SimError::QpFailure { problem, .. } = e {
                    let name = format!("qp_failure{stem}.txt");
                    write_file(&dir.join(&name), problem)?;
                    entry["failed_problem_file"] = json!(name);
                    manifest.outputs.push(name);
                }
                let err = if e.is_numerical() {
                    CliError::Numerical(format!("thrust {} N: {e}", row.thrust_n))
                } else {
                    CliError::Usage(format!("thrust {} N: {e}", row.thrust_n))
                };
                first_error = merge_error(first_error, err);
            }
            None => {
                let message = row.error.as_deref().unwrap_or("rejected");
                let err = CliError::Usage(format!("thrust {} N: {message}", row.thrust_n));
                first_error = merge_error(first_error, err);
            }
        }
        rows.push(entry);
    }

    let summary_json = json!({
        "rows": rows,
        "gain_factor_increasing": summary.gain_factor_increasing,
        "omega_decreasing": summary.omega_decreasing,
        "settling_band_m": SETTLING_BAND_M,
        "use_qp": cfg.controller.use_qp,
    });
    write_json(&dir.join("summary.json"), &summary_json)?;
    manifest.outputs.push("summary.json".into());

    for row in &summary.rows {
        match &row.error {
            None => eprintln!("thrust {:>10.4} N: ok", row.thrust_n),
            Some(e) => eprintln!("thrust {:>10.4} N: {} ({e})", row.thrust_n, row.status),
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Numerical failures dominate: they are what scripts most need to see.
fn merge_error(current: Option<CliError>, new: CliError) -> Option<CliError> {
    match current {
        Some(c) if c.exit_code() >= new.exit_code() => Some(c),
        _ => Some(new),
    }
}

struct ScenarioArgs<'a> {
    subcommand: &'static str,
    config: &'a Path,
    out: &'a Path,
    no_qp: bool,
    thrusts: Option<&'a str>,
    jobs: usize,
    seed: u64,
}

fn cmd_scenario(args: ScenarioArgs<'_>) -> Result<(), CliError> {
    let started = Instant::now();
    // A broken config leaves no output directory behind.
    let (text, mut cfg) = load_config(args.config)?;
    if args.no_qp {
        cfg.controller.use_qp = false;
    }
    let thrusts = match args.thrusts {
        Some(list) => {
            thrusts::parse_thrust_list(list, cfg.params.weight_n()).map_err(CliError::Usage)?
        }
        None => vec![cfg.params.thrust_n()],
    };

    let dir = create_dir(args.out)?;
    let archived = dir.join("config.toml");
    write_file(&archived, &text)?;

    let mut manifest = RunManifest::new(args.subcommand);
    manifest.config_path = Some(path_str(args.config));
    manifest.archived_input = Some("config.toml".into());
    manifest.rerun = vec![
        "thrustwalk".into(),
        args.subcommand.into(),
        "--config".into(),
        path_str(&archived),
        "--out".into(),
        path_str(&dir),
    ];
    if let Some(list) = args.thrusts {
        manifest.rerun.extend(["--thrusts".into(), list.into()]);
    }
    if args.no_qp {
        manifest.rerun.push("--no-qp".into());
    }
    manifest.rerun.extend([
        "--jobs".into(),
        args.jobs.to_string(),
        "--seed".into(),
        args.seed.to_string(),
    ]);
    manifest.options = json!({
        "no_qp": args.no_qp,
        "thrusts_n": thrusts,
        "jobs": args.jobs,
        "seed": args.seed,
    });

    let result = run_scenarios(
        &cfg,
        &thrusts,
        args.jobs,
        &dir,
        args.thrusts.is_none(),
        &mut manifest,
    );
    manifest.finish(&dir, started, &result)?;
    if result.is_ok() {
        println!("wrote {}", dir.display());
    }
    result
}

fn fmt_num(v: f64) -> String {
    // Short, but stable enough to compare in scripts.
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn fmt_vec(v: &nalgebra::DVector<f64>) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ")
}

fn cmd_solve_qp(
    problem: Option<&Path>,
    out: Option<&Path>,
    settings: QpSettings,
    seed: u64,
) -> Result<(), CliError> {
    let started = Instant::now();
    let (text, source) = match problem {
        Some(path) => (
            fs::read_to_string(path).map_err(|e| io_err(path, e))?,
            path_str(path),
        ),
        None => (
            qp::write_problem(&random_qp::random_feasible_problem(seed)),
            format!("random (seed {seed})"),
        ),
    };
    let prob = qp::parse_problem(&text).map_err(|e| CliError::Usage(format!("{source}: {e}")))?;
    let result = qp::solve_with(&prob, &settings);

    let outcome = match &result {
        Ok(sol) => {
            println!("status: {}", sol.status.as_str());
            println!("iterations: {}", sol.iterations);
            println!("objective: {}", fmt_num(sol.objective));
            println!("u*: {}", fmt_vec(&sol.u_star));
            println!("lambda: {}", fmt_vec(&sol.lambda));
            println!(
                "kkt: stationarity {:.3e}, primal {:.3e}, complementarity {:.3e}",
                sol.kkt.stationarity + 0.0,
                sol.kkt.primal_feasibility + 0.0,
                sol.kkt.complementarity + 0.0
            );
            match sol.status {
                QpStatus::Optimal => Ok(()),
                other => Err(CliError::Numerical(format!(
                    "solver status {}",
                    other.as_str()
                ))),
            }
        }
        Err(QpError::NotPositiveDefinite) => Err(CliError::Numerical(
            QpError::NotPositiveDefinite.to_string(),
        )),
        Err(e) => Err(CliError::Usage(format!("{source}: {e}"))),
    };

    if let Some(out) = out {
        let dir = create_dir(out)?;
        write_file(&dir.join("problem.txt"), &text)?;
        let mut manifest = RunManifest::new("solve-qp");
        manifest.archived_input = Some("problem.txt".into());
        manifest.outputs.push("problem.txt".into());
        manifest.rerun = vec![
            "thrustwalk".into(),
            "solve-qp".into(),
            path_str(&dir.join("problem.txt")),
            "--out".into(),
            path_str(&dir),
            "--tol".into(),
            format!("{:e}", settings.tol),
            "--max-iter".into(),
            settings.max_iter.to_string(),
        ];
        manifest.options = json!({
            "source": source,
            "tol": settings.tol,
            "max_iter": settings.max_iter,
            "seed": seed,
        });
        if let Ok(sol) = &result {
            write_json(
                &dir.join("solution.json"),
                &json!({
                    "status": sol.status.as_str(),
                    "iterations": sol.iterations,
                    "objective": sol.objective,
                    "u_star": sol.u_star.as_slice(),
                    "lambda": sol.lambda.as_slice(),
                    "kkt": sol.kkt,
                }),
            )?;
            manifest.outputs.push("solution.json".into());
        }
        manifest.finish(&dir, started, &outcome)?;
    }
    outcome
}

fn cmd_init_config(out: Option<&Path>, force: bool) -> Result<(), CliError> {
    let text = default_config_text();
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            if path.exists() && !force {
                return Err(CliError::Usage(format!(
                    "{} exists; pass --force to overwrite",
                    path.display()
                )));
            }
            write_file(path, text)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate { config, out, no_qp } => cmd_scenario(ScenarioArgs {
            subcommand: "simulate",
            config,
            out,
            no_qp: *no_qp,
            thrusts: None,
            jobs: cli.jobs,
            seed: cli.seed,
        }),
        Command::SweepThrust {
            config,
            thrusts,
            out,
            no_qp,
        } => cmd_scenario(ScenarioArgs {
            subcommand: "sweep-thrust",
            config,
            out,
            no_qp: *no_qp,
            thrusts: Some(thrusts),
            jobs: cli.jobs,
            seed: cli.seed,
        }),
        Command::SolveQp {
            problem,
            out,
            tol,
            max_iter,
        } => {
            if !(tol.is_finite() && *tol > 0.0) || *max_iter == 0 {
                return Err(CliError::Usage(
                    "--tol and --max-iter must be positive".into(),
                ));
            }
            let settings = QpSettings {
                tol: *tol,
                max_iter: *max_iter,
                ..QpSettings::default()
            };
            cmd_solve_qp(problem.as_deref(), out.as_deref(), settings, cli.seed)
        }
        Command::InitConfig { out, force } => cmd_init_config(out.as_deref(), *force),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
