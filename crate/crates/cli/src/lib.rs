//! Config-driven batch front end: validates a run configuration, dispatches
//! the task and writes `<out-dir>/<task>.csv` and `<out-dir>/<task>.json`.

pub mod config;
pub mod report;
pub mod tasks;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;

use config::{default_times, validate_config_for, RunConfig, Task, Tolerances};
use report::{ExitStatus, RunReport, TaskOutput};

pub const OUT_DIR_ENV: &str = "GEOMFLUX_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "geomflux", version, about = "Geometric phases, quantum geometric tensors and correlation checks")]
pub struct Cli {
    /// phase, tensor, correlation, theorem, susceptibility, classical or verify-all
    #[arg(value_parser = parse_task)]
    pub task: Task,
    /// JSON run configuration (optional for verify-all)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; defaults to $GEOMFLUX_OUT_DIR, then the current directory
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; never changes numeric output
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the config seed
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_task(s: &str) -> Result<Task, String> {
    Task::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Task::ALL.iter().map(|t| t.name()).collect();
        format!("unknown task \"{s}\"; expected one of {}", names.join(", "))
    })
}

/// Config for `verify-all` when no file is given.
pub fn verify_all_config(seed: u64) -> RunConfig {
    RunConfig {
        task: Task::VerifyAll,
        family: None,
        level: 0,
        path: None,
        points: Vec::new(),
        reference_point: None,
        times: default_times(),
        s_values: vec![0.2, 0.1, 0.05],
        z_values: vec![0.1, 0.05, 0.02, 0.01],
        seed,
        classical: None,
        tolerances: Tolerances::default(),
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn configure_threads(threads: Option<usize>) -> Result<(), String> {
    let Some(k) = threads else { return Ok(()) };
    if k == 0 {
        return Err("--threads must be at least 1".into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| e.to_string())?;
    Ok(())
}

/// Writes both report files; the CSV goes first so partial tables survive
/// a failure writing the summary.
pub fn write_outputs(dir: &Path, config: &RunConfig, output: &TaskOutput) -> std::io::Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{}.csv", config.task));
    let json = dir.join(format!("{}.json", config.task));
    fs::write(&csv, output.table.to_csv())?;
    fs::write(&json, RunReport::new(config, output).to_json())?;
    Ok((csv, json))
}

/// Runs the command line and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitStatus::InvalidConfig.code();
    }
    let mut config = match &cli.config {
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return ExitStatus::InvalidConfig.code();
                }
            };
            match validate_config_for(&text, Some(cli.task)) {
                Ok(c) => c,
                Err(e) => {
                    eprint!("{e}");
                    return ExitStatus::InvalidConfig.code();
                }
            }
        }
        None if cli.task == Task::VerifyAll => verify_all_config(0),
        None => {
            eprintln!("error: the {} task needs --config <file>", cli.task);
            return ExitStatus::InvalidConfig.code();
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    let output = tasks::run(&config);
    let dir = out_dir(cli);
    let (csv, json) = match write_outputs(&dir, &config, &output) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot write outputs to {}: {e}", dir.display());
            return ExitStatus::Io.code();
        }
    };

    if config.task == Task::VerifyAll {
        print!("{}", verify::render(&output.results, &output));
    } else {
        for check in output.checks.iter().filter(|c| !c.passed) {
            eprintln!("check failed: {} = {:e} (tolerance {:e})", check.name, check.value, check.tolerance);
        }
        for f in &output.failures {
            eprintln!("error: {} [{}] {}", f.context, f.code, f.message);
        }
    }
    let status = output.status();
    println!(
        "{}: {} ({} checks, {} failures) -> {}, {}",
        config.task,
        match status {
            ExitStatus::Pass => "pass",
            ExitStatus::CheckFailed => "check failed",
            _ => "error",
        },
        output.checks.len(),
        output.failures.len(),
        csv.display(),
        json.display()
    );
    status.code()
}

pub fn main_entry() -> i32 {
    execute(&Cli::parse())
}
