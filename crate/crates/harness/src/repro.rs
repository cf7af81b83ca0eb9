//! Reproduction suites for the UAV and RLC examples.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use dualguard_core::detectors::DecisionLabel;
use dualguard_core::optimizer::hminus_index;
use nalgebra::{dmatrix, DMatrix};
use thiserror::Error;

use crate::analysis::summarize;
use crate::config::{load_config, ConfigError, ScenarioConfig};
use crate::engine::{design_loop, design_loop_with_gain, run_batch_designed, run_designed, EngineError};
use crate::trace::TraceError;

/// Seeds averaged in the gain comparison.
pub const COMPARISON_SEEDS: u64 = 50;

#[derive(Debug, Error)]
pub enum ReproError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    Uav,
    Rlc,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::Uav => "uav",
            System::Rlc => "rlc",
        }
    }

    /// Bundled scenarios of the suite with the label each should produce.
    pub fn scenarios(self) -> &'static [(&'static str, DecisionLabel)] {
        match self {
            System::Uav => &[
                ("uav_nominal", DecisionLabel::Normal),
                ("uav_fault", DecisionLabel::FaultOnly),
                ("uav_covert", DecisionLabel::AttackOnly),
                ("uav_fault_covert", DecisionLabel::FaultAndAttack),
            ],
            System::Rlc => &[
                ("rlc_nominal", DecisionLabel::Normal),
                ("rlc_covert", DecisionLabel::AttackOnly),
            ],
        }
    }

    /// Covert scenario used for the gain comparison.
    pub fn covert_scenario(self) -> &'static str {
        match self {
            System::Uav => "uav_covert",
            System::Rlc => "rlc_covert",
        }
    }

    /// Published gains in the `A + BF` convention, baseline first.
    /// `None` stands for the scenario's own gain (LQR for the UAV).
    pub fn gains(self) -> Vec<(&'static str, Option<DMatrix<f64>>)> {
        match self {
            System::Uav => vec![
                ("lqr", None),
                ("gamma", Some(uav_gamma_gain())),
                ("ga", Some(uav_ga_gain())),
            ],
            System::Rlc => vec![
                ("initial", Some(rlc_initial_gain())),
                ("ga", Some(rlc_ga_gain())),
                ("gamma", Some(rlc_gamma_gain())),
            ],
        }
    }
}

pub fn uav_ga_gain() -> DMatrix<f64> {
    dmatrix![9.9998, 0.4408; 9.9996, 3.7394]
}

pub fn uav_gamma_gain() -> DMatrix<f64> {
    dmatrix![-0.1080, 0.1050; 0.2889, 0.0223] * 1e-6
}

/// The published LQR gain, negated into the `A + BF` convention.
pub fn uav_lqr_gain() -> DMatrix<f64> {
    -dmatrix![0.2550, -0.3856; 0.0513, -0.0760]
}

pub fn rlc_initial_gain() -> DMatrix<f64> {
    -dmatrix![0.8533, -0.1980]
}

pub fn rlc_ga_gain() -> DMatrix<f64> {
    dmatrix![-10.0, -10.0]
}

pub fn rlc_gamma_gain() -> DMatrix<f64> {
    dmatrix![-0.5511, -10.0]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub scenario: String,
    pub expected: DecisionLabel,
    pub label: Option<DecisionLabel>,
    pub mean_j: f64,
    pub mean_ju: f64,
    pub trace: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub gain: &'static str,
    pub f: DMatrix<f64>,
    pub hminus: f64,
    /// Post-onset mean of `J_u` under the covert attack, averaged over seeds.
    pub mean_ju: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproReport {
    pub system: System,
    pub seed: u64,
    pub scenarios: Vec<ScenarioRow>,
    pub gains: Vec<GainRow>,
}

impl ReproReport {
    pub fn all_labels_match(&self) -> bool {
        self.scenarios.iter().all(|r| r.label == Some(r.expected))
    }
}

fn label_str(l: Option<DecisionLabel>) -> &'static str {
    l.map_or("-", DecisionLabel::as_str)
}

impl fmt::Display for ReproReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} suite, seed {}", self.system.name(), self.seed)?;
        writeln!(
            f,
            "{:<20} {:<15} {:<15} {:>10} {:>10}",
            "scenario", "expected", "label", "mean J", "mean J_u"
        )?;
        for r in &self.scenarios {
            writeln!(
                f,
                "{:<20} {:<15} {:<15} {:>10.3} {:>10.3}",
                r.scenario,
                r.expected.as_str(),
                label_str(r.label),
                r.mean_j,
                r.mean_ju
            )?;
        }
        writeln!(f)?;
        writeln!(f, "{:<10} {:>10} {:>14}   F", "gain", "H- index", "covert J_u")?;
        for g in &self.gains {
            let entries: Vec<String> =
                g.f.row_iter()
                    .map(|r| r.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>().join(" "))
                    .collect();
            writeln!(
                f,
                "{:<10} {:>10.4} {:>14.3}   [{}]",
                g.gain,
                g.hminus,
                g.mean_ju,
                entries.join("; ")
            )?;
        }
        Ok(())
    }
}

/// Post-onset mean of `J_u` under the scenario's attack with gain `f`,
/// averaged over seeds `seed..seed + count`.
pub fn mean_post_onset_ju(
    config: &ScenarioConfig,
    f: &DMatrix<f64>,
    seed: u64,
    count: u64,
) -> Result<f64, EngineError> {
    let design = design_loop_with_gain(config, f.clone())?;
    let seeds: Vec<u64> = (seed..seed + count).collect();
    let traces = run_batch_designed(config, &design, &seeds)?;
    let total: f64 = traces
        .iter()
        .map(|t| summarize(t, config.burn_in, config.onset(), config.persistence).mean_ju)
        .sum();
    Ok(total / count as f64)
}

/// Runs the suite, writing one trace per scenario and `summary.csv` into `out_dir`.
pub fn run_repro(system: System, out_dir: &Path, seed: Option<u64>) -> Result<ReproReport, ReproError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ReproError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut scenarios = Vec::new();
    let mut used_seed = 0;
    for &(name, expected) in system.scenarios() {
        let mut config = load_config(name)?;
        if let Some(s) = seed {
            config = config.with_seed(s);
        }
        used_seed = config.seed;
        let design = design_loop(&config)?;
        let trace = run_designed(&config, &design, config.seed)?;
        let path = out_dir.join(format!("{name}.csv"));
        trace.export_csv(&path)?;
        let s = summarize(&trace, config.burn_in, config.onset(), config.persistence);
        scenarios.push(ScenarioRow {
            scenario: name.to_string(),
            expected,
            label: s.label,
            mean_j: s.mean_j,
            mean_ju: s.mean_ju,
            trace: path,
        });
    }

    let mut covert = load_config(system.covert_scenario())?;
    if let Some(s) = seed {
        covert = covert.with_seed(s);
    }
    let mut gains = Vec::new();
    for (gain, f) in system.gains() {
        let f = match f {
            Some(f) => f,
            None => design_loop(&covert)?.params.f,
        };
        let l = design_loop_with_gain(&covert, f.clone())?.params.l;
        gains.push(GainRow {
            gain,
            hminus: hminus_index(&covert.plant, &l, &f, covert.optimizer.s).map_err(EngineError::from)?,
            mean_ju: mean_post_onset_ju(&covert, &f, covert.seed, COMPARISON_SEEDS)?,
            f,
        });
    }

    let report = ReproReport {
        system,
        seed: used_seed,
        scenarios,
        gains,
    };
    let path = out_dir.join("summary.csv");
    write_summary(&report, &path).map_err(|source| ReproError::Io { path, source })?;
    Ok(report)
}

fn write_summary(report: &ReproReport, path: &Path) -> std::io::Result<()> {
    let mut out = File::create(path)?;
    writeln!(out, "scenario,expected,label,mean_J,mean_J_u")?;
    for r in &report.scenarios {
        writeln!(
            out,
            "{},{},{},{:.16e},{:.16e}",
            r.scenario,
            r.expected,
            label_str(r.label),
            r.mean_j,
            r.mean_ju
        )?;
    }
    Ok(())
}
