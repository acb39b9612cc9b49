//! `smectic run | converge | check`.
//!
//! Exit status: 0 success, 1 failed checks or other errors, 2 configuration
//! errors, 3 divergence. Errors are reported as one line on stderr, starting
//! with `config:<field>` for configuration problems.
//!
//! `SMECTIC_OUTPUT_DIR` overrides the configured output directory (flags win
//! over it), `SMECTIC_THREADS` sizes the worker pool.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::check::run_battery;
use crate::config::{grid_warning, load, to_toml, CheckFileConfig, ConvergeConfig, RunConfig};
use crate::error::{Error, Result};
use crate::harness::convergence_study;
use crate::io::{write_snapshot, Diagnostics};
use crate::stepper::{SimState, Stepper};

pub const OUTPUT_DIR_VAR: &str = "SMECTIC_OUTPUT_DIR";
pub const THREADS_VAR: &str = "SMECTIC_THREADS";
pub const EFFECTIVE_CONFIG: &str = "config.toml";

#[derive(Debug, Parser)]
#[command(name = "smectic", version, about = "Smectic-A Q-tensor / density gradient flow solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation, writing diagnostics and snapshots.
    Run(CommandArgs),
    /// Temporal convergence study against a fine-step benchmark.
    Converge(CommandArgs),
    /// Seeded invariant battery; one PASS/FAIL line per invariant.
    Check(CommandArgs),
}

#[derive(Debug, clap::Args)]
pub struct CommandArgs {
    /// TOML config file; defaults apply when omitted.
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. `--set model.kappa1=4` (repeatable).
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (run and converge).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Param { .. } => 2,
        Error::Divergence { .. } => 3,
        _ => 1,
    }
}

fn toml_string(s: &Path) -> String {
    toml::Value::String(s.to_string_lossy().into_owned()).to_string()
}

/// Environment first, then `--set`, then `--out`.
fn overrides(args: &CommandArgs, with_output: bool) -> Vec<String> {
    let mut out = Vec::new();
    if with_output {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_VAR).filter(|d| !d.is_empty()) {
            out.push(format!("output.dir={}", toml_string(Path::new(&dir))));
        }
    }
    out.extend(args.set.iter().cloned());
    if let (true, Some(dir)) = (with_output, &args.out) {
        out.push(format!("output.dir={}", toml_string(dir)));
    }
    out
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::config(format!("env.{THREADS_VAR}"), format!("expected a positive integer, got {raw:?}")))?;
    // A pool may already exist when called twice in one process; keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::config("output.dir", format!("{}: {e}", dir.display())))
}

fn snapshot_stem(step: usize) -> String {
    format!("snap_{step:06}")
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub steps: usize,
    pub final_state: SimState,
    pub initial_energy: f64,
    pub snapshots: Vec<PathBuf>,
}

pub fn cmd_run(args: &CommandArgs) -> Result<RunSummary> {
    let cfg: RunConfig = load(args.config.as_deref(), &overrides(args, true))?;
    if let Some(w) = grid_warning(&cfg.grid) {
        eprintln!("{w}");
    }
    let p = cfg.model;
    let grid = cfg.grid.build(p.dim)?;
    let n = cfg.time.steps()?;
    let tau = cfg.time.tau;
    let dir = &cfg.output.dir;
    prepare_dir(dir)?;
    fs::write(dir.join(EFFECTIVE_CONFIG), to_toml(&cfg)?)?;

    let state0 = cfg.initial_state()?;
    let initial_energy = state0.modified_energy();
    let mut snapshots = vec![write_snapshot(dir, &snapshot_stem(state0.step()), &state0, cfg.seed)?];
    if n == 0 {
        return Ok(RunSummary { steps: 0, final_state: state0, initial_energy, snapshots });
    }

    let stepper = Stepper::new(grid, p, cfg.scheme.method)?;
    let mut diag = Diagnostics::new(BufWriter::new(File::create(dir.join(&cfg.output.diagnostics))?))?;
    diag.initial(&state0, tau)?;
    let every = cfg.output.snapshot_every;
    let result = stepper.run(state0, tau, n, |s, r| {
        diag.row(r)?;
        if every > 0 && r.step % every == 0 {
            snapshots.push(write_snapshot(dir, &snapshot_stem(s.step()), s, cfg.seed)?);
        }
        Ok(())
    });
    diag.flush()?;
    let last = result?;
    if every == 0 || last.step() % every != 0 {
        snapshots.push(write_snapshot(dir, &snapshot_stem(last.step()), &last, cfg.seed)?);
    }
    Ok(RunSummary { steps: n, final_state: last, initial_energy, snapshots })
}

pub fn cmd_converge(args: &CommandArgs) -> Result<String> {
    let cfg: ConvergeConfig = load(args.config.as_deref(), &overrides(args, true))?;
    if let Some(w) = grid_warning(&cfg.grid) {
        eprintln!("{w}");
    }
    let study = cfg.study()?;
    let dir = &cfg.output.dir;
    prepare_dir(dir)?;
    fs::write(dir.join(EFFECTIVE_CONFIG), to_toml(&cfg)?)?;
    let table = convergence_study(&study)?;
    fs::write(dir.join(&cfg.output.table), table.to_csv())?;
    let text = table.to_text();
    fs::write(dir.join(&cfg.output.text), &text)?;
    Ok(text)
}

/// The report text and whether every invariant passed.
pub fn cmd_check(args: &CommandArgs) -> Result<(String, bool)> {
    let cfg: CheckFileConfig = load(args.config.as_deref(), &overrides(args, false))?;
    let grid = cfg.grid.build(cfg.model.dim)?;
    let outcomes = run_battery(&cfg.sizes, cfg.seed, &cfg.model, grid)?;
    let mut report = format!("seed {}\n", cfg.seed);
    for o in &outcomes {
        report.push_str(&format!("{o}\n"));
    }
    Ok((report, outcomes.iter().all(|o| o.passed)))
}

fn dispatch(cli: &Cli) -> Result<u8> {
    configure_threads()?;
    match &cli.command {
        Command::Run(a) => {
            let s = cmd_run(a)?;
            println!(
                "run: {} steps to t = {:.6}, modified energy {:.10e} -> {:.10e}, max|Q|_F = {:.6}, max|u| = {:.6}",
                s.steps,
                s.final_state.t(),
                s.initial_energy,
                s.final_state.modified_energy(),
                s.final_state.max_abs_q(),
                s.final_state.u().max_abs()
            );
            Ok(0)
        }
        Command::Converge(a) => {
            print!("{}", cmd_converge(a)?);
            Ok(0)
        }
        Command::Check(a) => {
            let (report, ok) = cmd_check(a)?;
            print!("{report}");
            Ok(if ok { 0 } else { 1 })
        }
    }
}

/// Parses the process arguments and runs; returns the exit status.
pub fn main() -> u8 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}
