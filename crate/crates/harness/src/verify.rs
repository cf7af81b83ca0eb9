//! Structural and statistical checks of a scenario's loop design.

use dualguard_core::adversary::{AttackKind, AttackSpec, FaultKind, FaultSpec, ZeroDynamicsMode};
use dualguard_core::detectors::chi2_cdf;
use dualguard_core::linalg::min_singular_value;
use dualguard_core::synthesis::{kernel_operator, plant_coprime, verify_bezout};
use nalgebra::{Complex, DMatrix, DVector};

use crate::config::ScenarioConfig;
use crate::engine::{design_loop, run_designed, EngineError, LoopDesign};
use crate::trace::SimulationTrace;

pub const BEZOUT_TOL: f64 = 1e-8;
pub const COVERT_TOL: f64 = 1e-8;
pub const ZERO_DYNAMICS_TOL: f64 = 1e-6;
pub const TWIN_FAULT_TOL: f64 = 1e-8;
pub const RANK_TOL: f64 = 1e-8;
/// Post-burn-in samples of the calibration run.
pub const CALIBRATION_STEPS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Empirical residual statistics of a nominal noisy run.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub samples: usize,
    /// `‖cov(r) − Σ_r‖_F / ‖Σ_r‖_F`.
    pub cov_error_r: f64,
    pub cov_error_ru: f64,
    pub rate_j: f64,
    pub rate_ju: f64,
    /// Kolmogorov–Smirnov distance of `J` to `χ²(p)` and of `J_u` to `χ²(m)`.
    pub ks_j: f64,
    pub ks_ju: f64,
}

fn relative_cov_error(samples: &[&DVector<f64>], reference: &DMatrix<f64>) -> f64 {
    let dim = reference.nrows();
    let count = samples.len() as f64;
    let mean = samples.iter().fold(DVector::zeros(dim), |acc, v| acc + *v) / count;
    let cov = samples.iter().fold(DMatrix::zeros(dim, dim), |acc, v| {
        acc + (*v - &mean) * (*v - &mean).transpose()
    }) / (count - 1.0);
    (cov - reference).norm() / reference.norm()
}

/// One-sample Kolmogorov–Smirnov distance to `χ²(dof)`.
pub fn ks_distance(values: &[f64], dof: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = chi2_cdf(dof, x);
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max)
}

/// The scenario without attack and fault, noisy, for `burn_in + steps` steps.
pub fn nominal_variant(config: &ScenarioConfig, steps: u64) -> ScenarioConfig {
    let mut c = config.clone();
    c.attack = None;
    c.fault = None;
    c.noiseless = false;
    c.horizon = c.burn_in + steps;
    c
}

pub fn calibrate(config: &ScenarioConfig, design: &LoopDesign, steps: u64) -> Result<Calibration, EngineError> {
    let nominal = nominal_variant(config, steps);
    let trace = run_designed(&nominal, design, nominal.seed)?;
    let post: Vec<_> = trace.records.iter().filter(|r| r.k >= config.burn_in).collect();
    let count = post.len() as f64;
    let r: Vec<_> = post.iter().map(|s| &s.r).collect();
    let r_u: Vec<_> = post.iter().map(|s| &s.r_u).collect();
    let j: Vec<f64> = post.iter().map(|s| s.j).collect();
    let j_u: Vec<f64> = post.iter().map(|s| s.j_u).collect();
    Ok(Calibration {
        samples: post.len(),
        cov_error_r: relative_cov_error(&r, &design.kalman.sigma_r),
        cov_error_ru: relative_cov_error(&r_u, &design.twin.sigma_ru),
        rate_j: post.iter().filter(|s| s.j > s.j_th).count() as f64 / count,
        rate_ju: post.iter().filter(|s| s.j_u > s.j_th_u).count() as f64 / count,
        ks_j: ks_distance(&j, trace.p),
        ks_ju: ks_distance(&j_u, trace.m),
    })
}

/// Largest deviation of `field` between two traces of equal length.
pub fn max_deviation(
    a: &SimulationTrace,
    b: &SimulationTrace,
    field: fn(&crate::trace::StepRecord) -> &DVector<f64>,
) -> f64 {
    a.records
        .iter()
        .zip(&b.records)
        .map(|(x, y)| (field(x) - field(y)).amax())
        .fold(0.0, f64::max)
}

/// Noiseless copy of the scenario with the given anomalies.
pub fn noiseless_variant(
    config: &ScenarioConfig,
    attack: Option<AttackSpec>,
    fault: Option<FaultSpec>,
) -> ScenarioConfig {
    let mut c = config.clone();
    c.noiseless = true;
    c.attack = attack;
    c.fault = fault;
    c
}

fn anomaly_onset(config: &ScenarioConfig) -> u64 {
    config.onset().min(config.horizon / 2)
}

/// Noiseless covert attack (the scenario's own `a_u` when it is covert, else 0.5 per channel).
pub fn covert_for(config: &ScenarioConfig) -> AttackSpec {
    match &config.attack {
        Some(a) if a.kind == AttackKind::Covert => a.clone(),
        _ => AttackSpec::covert(anomaly_onset(config), DVector::from_element(config.plant.inputs(), 0.5)),
    }
}

/// The scenario's zero-dynamics attack, or a steered one at `z0 = 1.01` for plants with more inputs than outputs.
pub fn zero_dynamics_for(config: &ScenarioConfig) -> Option<AttackSpec> {
    match &config.attack {
        Some(a) if matches!(a.kind, AttackKind::ZeroDynamics { .. }) => Some(a.clone()),
        _ if config.plant.inputs() > config.plant.outputs() => Some(AttackSpec::zero_dynamics(
            anomaly_onset(config),
            Complex::new(1.01, 0.0),
            0.5,
            ZeroDynamicsMode::Steered,
        )),
        _ => None,
    }
}

pub fn plant_fault_for(config: &ScenarioConfig) -> FaultSpec {
    match &config.fault {
        Some(f) => f.clone(),
        None => FaultSpec::new(
            FaultKind::Plant,
            anomaly_onset(config),
            DVector::from_element(config.plant.states(), 0.5),
        ),
    }
}

/// Bezout identity, kernel stealthiness of covert and zero-dynamics attacks,
/// twin transparency to faults, the closed-loop rank property and χ²
/// calibration.
pub fn verify_scenario(config: &ScenarioConfig) -> Result<Vec<Check>, EngineError> {
    let design = design_loop(config)?;
    let plant = &config.plant;
    let n = plant.states();
    let mut checks = Vec::new();

    let factors = plant_coprime(plant, &design.params)?;
    let bezout = verify_bezout(&factors, 4 * n)?;
    checks.push(Check::new(
        "bezout",
        bezout <= BEZOUT_TOL,
        format!("residual {bezout:.3e} over {} samples (limit {BEZOUT_TOL:e})", 4 * n),
    ));

    let nominal = noiseless_variant(config, None, None);
    let base = run_designed(&nominal, &design, 0)?;
    let covert = noiseless_variant(config, Some(covert_for(config)), None);
    let dev = max_deviation(&base, &run_designed(&covert, &design, 0)?, |r| &r.r);
    checks.push(Check::new(
        "kernel_covert",
        dev <= COVERT_TOL,
        format!("max residual deviation {dev:.3e} (limit {COVERT_TOL:e})"),
    ));

    match zero_dynamics_for(config) {
        Some(attack) => {
            let zd = noiseless_variant(config, Some(attack), None);
            let dev = max_deviation(&base, &run_designed(&zd, &design, 0)?, |r| &r.r);
            checks.push(Check::new(
                "kernel_zero_dynamics",
                dev <= ZERO_DYNAMICS_TOL,
                format!("max residual deviation {dev:.3e} (limit {ZERO_DYNAMICS_TOL:e})"),
            ));
        }
        None => checks.push(Check::new(
            "kernel_zero_dynamics",
            true,
            "skipped: square or tall plant without a configured zero-dynamics attack".into(),
        )),
    }

    let faulty = noiseless_variant(config, None, Some(plant_fault_for(config)));
    let trace = run_designed(&faulty, &design, 0)?;
    let worst = trace.records.iter().map(|r| r.r_u.amax()).fold(0.0, f64::max);
    checks.push(Check::new(
        "twin_fault_transparency",
        worst <= TWIN_FAULT_TOL,
        format!("max |r_u| {worst:.3e} under the fault (limit {TWIN_FAULT_TOL:e})"),
    ));

    let s = config.optimizer.s;
    let sigma = min_singular_value(&kernel_operator(plant, &design.params.f, &design.params.l, s)?);
    checks.push(Check::new(
        "closed_loop_rank",
        sigma > RANK_TOL,
        format!("smallest singular value {sigma:.4e} at horizon {s} (limit {RANK_TOL:e})"),
    ));

    let cal = calibrate(config, &design, CALIBRATION_STEPS)?;
    let band = |rate: f64| (0.5 * config.alpha..=1.5 * config.alpha).contains(&rate);
    checks.push(Check::new(
        "chi2_calibration",
        cal.cov_error_r <= 0.05 && band(cal.rate_j) && band(cal.rate_ju),
        format!(
            "cov(r) error {:.2}%, exceedance J {:.2}%, J_u {:.2}% over {} samples",
            100.0 * cal.cov_error_r,
            100.0 * cal.rate_j,
            100.0 * cal.rate_ju,
            cal.samples
        ),
    ));
    Ok(checks)
}
