//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dualguard_core::optimizer::{hminus_index, two_stage_design, SearchMode};

use crate::analysis::summarize;
use crate::config::{bundled_names, load_config, GainSource, ScenarioConfig};
use crate::engine::{design_loop, run_designed, EngineError};
use crate::repro::{run_repro, System};
use crate::verify::verify_scenario;

/// Environment variable overriding the scenario seed.
pub const SEED_ENV: &str = "DUALGUARD_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "dualguard",
    version,
    about = "Dual fault/attack detection workbench for networked control loops"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and print its decision summary.
    Simulate {
        /// Scenario file or bundled scenario name.
        scenario: String,
        /// Write the per-step trace as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Search for a state-feedback gain that maximizes attack sensitivity.
    Optimize {
        scenario: String,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Seed of the stochastic search.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the Bezout identity, kernel stealthiness, the rank property and χ² calibration.
    Verify { scenario: String },
    /// Run the reproduction suite of one example system.
    Repro {
        #[arg(value_enum)]
        system: SystemArg,
        /// Output directory for traces and summary.
        #[arg(long, default_value = "repro_out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the bundled scenarios.
    List,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Grid,
    Stochastic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SystemArg {
    Uav,
    Rlc,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .with_context(|| format!("{SEED_ENV}=`{v}` is not an unsigned integer")),
        Err(_) => Ok(None),
    }
}

/// Flag, then environment, then the scenario's own seed.
fn pick_seed(flag: Option<u64>) -> Result<Option<u64>> {
    Ok(match flag {
        Some(s) => Some(s),
        None => env_seed()?,
    })
}

fn load(scenario: &str, seed: Option<u64>) -> Result<ScenarioConfig> {
    let config = load_config(scenario)?;
    Ok(match pick_seed(seed)? {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn simulate(out: &mut dyn Write, scenario: &str, trace_path: Option<PathBuf>, seed: Option<u64>) -> Result<bool> {
    let config = load(scenario, seed)?;
    let design = design_loop(&config)?;
    let trace = match run_designed(&config, &design, config.seed) {
        Ok(t) => t,
        Err(EngineError::Diverged { step, norm, partial }) => {
            if let Some(path) = &trace_path {
                partial.export_csv(path)?;
                writeln!(out, "partial trace written to {}", path.display())?;
            }
            anyhow::bail!("state diverged at step {step} (|x| = {norm:e})");
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &trace_path {
        trace.export_csv(path)?;
    }
    let s = summarize(&trace, config.burn_in, config.onset(), config.persistence);
    writeln!(out, "scenario   {}", config.name)?;
    writeln!(out, "seed       {}", config.seed)?;
    writeln!(out, "steps      {}", s.steps)?;
    writeln!(
        out,
        "thresholds J_th = {:.4}, J_th_u = {:.4}",
        trace.records[0].j_th, trace.records[0].j_th_u
    )?;
    writeln!(
        out,
        "label      {} (modal from k = {})",
        s.label.map_or("-".to_string(), |l| l.to_string()),
        s.window_start
    )?;
    writeln!(out, "mean J     {:.4} after onset", s.mean_j)?;
    writeln!(out, "mean J_u   {:.4} after onset", s.mean_ju)?;
    writeln!(
        out,
        "alarms     {:.2}% (J), {:.2}% (J_u) between burn-in and onset",
        100.0 * s.pre_rate_j,
        100.0 * s.pre_rate_ju
    )?;
    if let Some(path) = &trace_path {
        writeln!(out, "trace      {}", path.display())?;
    }
    Ok(true)
}

fn optimize(out: &mut dyn Write, scenario: &str, mode: Option<ModeArg>, seed: Option<u64>) -> Result<bool> {
    let config = load_config(scenario)?;
    let mut search = config.optimizer.clone();
    if let Some(m) = mode {
        search.mode = match m {
            ModeArg::Grid => SearchMode::GridFeasibility,
            ModeArg::Stochastic => SearchMode::Stochastic,
        };
    }
    if let Some(s) = pick_seed(seed)? {
        search.seed = s;
    }
    let design = two_stage_design(&config.plant, &config.noise, &search)?;
    let res = &design.search;
    writeln!(out, "mode        {:?}", res.mode)?;
    writeln!(out, "evaluations {}", res.evaluations)?;
    if !matches!(config.controller.gain, GainSource::Optimized) {
        let f0 = crate::engine::resolve_gain(&config, &design.l)?;
        let g0 = hminus_index(&config.plant, &design.l, &f0, search.s)?;
        writeln!(out, "baseline    H- = {g0:.6}  F = {}", fmt_matrix(&f0))?;
    }
    match &res.f_star {
        Some(f) => {
            let g = hminus_index(&config.plant, &design.l, f, search.s)?;
            writeln!(
                out,
                "optimized   H- = {g:.6} (certified {:.4})  F = {}",
                res.gamma_star,
                fmt_matrix(f)
            )?;
            writeln!(out, "residual    L_opt = {}", fmt_matrix(&design.unified.l_opt))?;
            Ok(true)
        }
        None => {
            writeln!(out, "no stabilizing gain met the lowest γ in the search bounds")?;
            Ok(false)
        }
    }
}

fn fmt_matrix(m: &nalgebra::DMatrix<f64>) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| r.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[{}]", rows.join("; "))
}

fn verify(out: &mut dyn Write, scenario: &str) -> Result<bool> {
    let config = load(scenario, None)?;
    let checks = verify_scenario(&config)?;
    for c in &checks {
        writeln!(
            out,
            "{} {:<24} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn repro(out: &mut dyn Write, system: SystemArg, dir: PathBuf, seed: Option<u64>) -> Result<bool> {
    let system = match system {
        SystemArg::Uav => System::Uav,
        SystemArg::Rlc => System::Rlc,
    };
    let report = run_repro(system, &dir, pick_seed(seed)?)?;
    write!(out, "{report}")?;
    writeln!(out, "traces in {}", dir.display())?;
    Ok(report.all_labels_match())
}

/// Parses `args` (program name first) and runs the command; returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            scenario,
            out: path,
            seed,
        } => simulate(out, &scenario, path, seed),
        Command::Optimize { scenario, mode, seed } => optimize(out, &scenario, mode, seed),
        Command::Verify { scenario } => verify(out, &scenario),
        Command::Repro { system, out: dir, seed } => repro(out, system, dir, seed),
        Command::List => bundled_names()
            .into_iter()
            .try_for_each(|n| writeln!(out, "{n}"))
            .map(|_| true)
            .map_err(Into::into),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    ExitCode::from(code)
}
