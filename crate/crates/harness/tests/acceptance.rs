//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dualguard::analysis::summarize;
use dualguard::config::{load_config, ScenarioConfig};
use dualguard::engine::{design_loop, run_batch_designed, run_designed};
use dualguard::repro::{
    mean_post_onset_ju, rlc_ga_gain, rlc_gamma_gain, rlc_initial_gain, run_repro, uav_ga_gain, uav_gamma_gain,
    uav_lqr_gain, System, COMPARISON_SEEDS,
};
use dualguard::verify::{calibrate, covert_for, max_deviation, noiseless_variant, CALIBRATION_STEPS};
use dualguard_core::adversary::{AttackSpec, FaultKind, FaultSpec};
use dualguard_core::detectors::DecisionLabel;
use dualguard_core::linalg::{hcat, min_singular_value, sqrt_psd};
use dualguard_core::optimizer::hminus_index;
use dualguard_core::synthesis::{
    kernel_operator, plant_coprime, solve_kalman, unified_solution, verify_bezout, CoprimeFactors,
};
use dualguard_core::StateSpaceModel;
use nalgebra::{DMatrix, DVector};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn uav(name: &str) -> ScenarioConfig {
    load_config(name).expect("bundled scenario")
}

fn bezout() -> Outcome {
    let config = uav("uav_nominal");
    let design = design_loop(&config)?;
    let factors = plant_coprime(&config.plant, &design.params)?;
    let horizon = 4 * config.plant.states();
    let residual = verify_bezout(&factors, horizon)?;

    let slots: [fn(&mut CoprimeFactors) -> &mut StateSpaceModel; 8] = [
        |f| &mut f.m_hat,
        |f| &mut f.n_hat,
        |f| &mut f.m,
        |f| &mut f.n,
        |f| &mut f.x_hat,
        |f| &mut f.y_hat,
        |f| &mut f.x,
        |f| &mut f.y,
    ];
    let mut weakest = f64::INFINITY;
    let mut trials = 0;
    for slot in slots {
        let mut probe = factors.clone();
        let sys = slot(&mut probe).clone();
        let mats = [sys.a(), sys.b(), sys.c(), sys.d()];
        for which in 0..4 {
            for i in 0..mats[which].nrows() {
                for j in 0..mats[which].ncols() {
                    let mut m = mats.map(Clone::clone);
                    m[which][(i, j)] += 0.1;
                    let [a, b, c, d] = m;
                    let mut corrupted = factors.clone();
                    *slot(&mut corrupted) = StateSpaceModel::new(a, b, c, d)?;
                    weakest = weakest.min(verify_bezout(&corrupted, horizon)?);
                    trials += 1;
                }
            }
        }
    }
    Ok((
        residual <= 1e-8 && weakest > 1e-3,
        format!("residual {residual:.2e}; weakest of {trials} single-entry corruptions {weakest:.2e}"),
    ))
}

fn calibration() -> Outcome {
    let config = uav("uav_nominal");
    let design = design_loop(&config)?;
    let cal = calibrate(&config, &design, CALIBRATION_STEPS)?;
    let band = |r: f64| (0.005..=0.015).contains(&r);
    Ok((
        cal.samples as u64 == CALIBRATION_STEPS && cal.cov_error_r <= 0.05 && band(cal.rate_j) && band(cal.rate_ju),
        format!(
            "{} samples; cov(r) error {:.2}%; exceedance J {:.2}%, J_u {:.2}%; KS {:.4} / {:.4}",
            cal.samples,
            100.0 * cal.cov_error_r,
            100.0 * cal.rate_j,
            100.0 * cal.rate_ju,
            cal.ks_j,
            cal.ks_ju
        ),
    ))
}

fn with_horizon(mut config: ScenarioConfig, horizon: u64) -> ScenarioConfig {
    config.horizon = horizon;
    config
}

/// Largest deviation of `r` from the attack-free noiseless run.
fn residual_deviation(config: &ScenarioConfig, attack: AttackSpec) -> Result<f64, Box<dyn std::error::Error>> {
    let design = design_loop(config)?;
    let base = run_designed(&noiseless_variant(config, None, None), &design, 0)?;
    let attacked = run_designed(&noiseless_variant(config, Some(attack), None), &design, 0)?;
    Ok(max_deviation(&base, &attacked, |r| &r.r))
}

fn stealthiness() -> Outcome {
    let covert = with_horizon(uav("uav_covert"), 500);
    let dev_c = residual_deviation(&covert, covert_for(&covert))?;
    let zd = with_horizon(uav("uav_zero_dynamics"), 500);
    let dev_z = residual_deviation(&zd, zd.attack.clone().expect("zero-dynamics attack"))?;
    Ok((
        dev_c <= 1e-8 && dev_z <= 1e-6,
        format!("500 steps; covert {dev_c:.2e} (limit 1e-8); zero-dynamics {dev_z:.2e} (limit 1e-6)"),
    ))
}

fn discrimination() -> Outcome {
    let cells = [
        ("uav_nominal", DecisionLabel::Normal),
        ("uav_fault", DecisionLabel::FaultOnly),
        ("uav_covert", DecisionLabel::AttackOnly),
        ("uav_fault_covert", DecisionLabel::FaultAndAttack),
        ("uav_replay", DecisionLabel::AttackOnly),
        ("uav_replay_fault", DecisionLabel::AttackOnly),
    ];
    let seeds: Vec<u64> = (1..=50).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, expected) in cells {
        let config = uav(name);
        let design = design_loop(&config)?;
        let hits = run_batch_designed(&config, &design, &seeds)?
            .iter()
            .filter(|t| summarize(t, config.burn_in, config.onset(), config.persistence).label == Some(expected))
            .count();
        ok &= hits * 100 >= 95 * seeds.len();
        parts.push(format!("{name} {hits}/{}", seeds.len()));
    }
    Ok((ok, parts.join(", ")))
}

fn dichotomy() -> Outcome {
    let base = uav("uav_nominal");
    let onset = 200;
    let faults = [
        FaultSpec::new(FaultKind::Plant, onset, DVector::from_element(2, 0.5)),
        FaultSpec::new(FaultKind::Actuator, onset, DVector::from_element(2, 0.5)),
        FaultSpec::new(FaultKind::Sensor, onset, DVector::from_element(1, 0.5)),
    ];
    let a_u = DVector::from_element(2, 0.5);
    let attacks = [
        (AttackSpec::covert(onset, a_u.clone()), true),
        (uav("uav_zero_dynamics").attack.expect("zero-dynamics attack"), true),
        (AttackSpec::replay(onset, a_u, 200), false),
    ];
    let mut worst_ru: f64 = 0.0;
    let mut worst_r: f64 = 0.0;
    for x0 in [DVector::zeros(2), DVector::from_vec(vec![0.5, -0.3])] {
        let mut config = base.clone();
        config.initial_state = x0.clone();
        let design = design_loop(&config)?;
        for fault in &faults {
            let trace = run_designed(&noiseless_variant(&config, None, Some(fault.clone())), &design, 0)?;
            worst_ru = trace.records.iter().map(|r| r.r_u.amax()).fold(worst_ru, f64::max);
        }
        let nominal = run_designed(&noiseless_variant(&config, None, None), &design, 0)?;
        for (attack, transient_ok) in &attacks {
            // replay repeats recorded samples, so it only matches a stationary nominal run
            if !transient_ok && x0.amax() > 0.0 {
                continue;
            }
            let trace = run_designed(&noiseless_variant(&config, Some(attack.clone()), None), &design, 0)?;
            worst_r = worst_r.max(max_deviation(&nominal, &trace, |r| &r.r));
        }
    }
    Ok((
        worst_ru <= 1e-8 && worst_r <= 1e-8,
        format!("faults: max |r_u| {worst_ru:.2e}; attacks: max |r - r_nominal| {worst_r:.2e} (limit 1e-8)"),
    ))
}

fn rank() -> Outcome {
    let config = uav("uav_nominal");
    let design = design_loop(&config)?;
    let mut parts = Vec::new();
    let mut ok = true;
    for s in [10, 20] {
        let sigma = min_singular_value(&kernel_operator(&config.plant, &design.params.f, &design.params.l, s)?);
        ok &= sigma > 1e-8;
        parts.push(format!("s = {s}: sigma_min {sigma:.4}"));
    }
    Ok((ok, parts.join("; ")))
}

fn ordering() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, baseline, optimized) in [
        (
            "uav_covert",
            uav_lqr_gain(),
            vec![("ga", uav_ga_gain()), ("gamma", uav_gamma_gain())],
        ),
        (
            "rlc_covert",
            rlc_initial_gain(),
            vec![("gamma", rlc_gamma_gain()), ("ga", rlc_ga_gain())],
        ),
    ] {
        let config = load_config(name)?;
        let l = design_loop(&config)?.params.l;
        for s in [10, 20] {
            let g0 = hminus_index(&config.plant, &l, &baseline, s)?;
            let (label, f) = &optimized[0];
            let g1 = hminus_index(&config.plant, &l, f, s)?;
            ok &= g1 > g0;
            parts.push(format!("{name} s={s} H- {g0:.3} < {label} {g1:.3}"));
        }
        let j0 = mean_post_onset_ju(&config, &baseline, config.seed, COMPARISON_SEEDS)?;
        for (label, f) in &optimized {
            let j = mean_post_onset_ju(&config, f, config.seed, COMPARISON_SEEDS)?;
            ok &= j > j0;
            parts.push(format!("{name} mean J_u {j0:.1} < {label} {j:.1}"));
        }
    }
    Ok((ok, parts.join("; ")))
}

fn unified() -> Outcome {
    let config = uav("uav_nominal");
    let (plant, noise) = (&config.plant, &config.noise);
    let (n, p) = (plant.states(), plant.outputs());
    let e_d = hcat(&sqrt_psd(noise.sigma_omega()), &DMatrix::zeros(n, p));
    let f_d = hcat(&DMatrix::zeros(p, n), &sqrt_psd(noise.sigma_eta()));
    let sol = unified_solution(plant, &DMatrix::identity(n, n), &DMatrix::zeros(p, n), &e_d, &f_d)?;
    let kalman = solve_kalman(plant, noise)?;
    let gap = (&sol.l_opt - &kalman.l).amax();
    Ok((gap <= 1e-6, format!("max |L_opt - L| {gap:.2e} (limit 1e-6)")))
}

fn files(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        out.push((
            path.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&path)?,
        ));
    }
    out.sort();
    Ok(out)
}

fn determinism() -> Outcome {
    let first = tempfile::tempdir()?;
    let second = tempfile::tempdir()?;
    run_repro(System::Uav, first.path(), None)?;
    run_repro(System::Uav, second.path(), None)?;
    let (a, b) = (files(first.path())?, files(second.path())?);
    let traces = a.iter().filter(|(n, _)| n != "summary.csv").count();
    Ok((
        a == b && traces == 4,
        format!("{} files ({traces} traces) compared byte for byte", a.len()),
    ))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "Bezout identity",
            budget: Some(Duration::from_secs(1)),
            run: bezout,
        },
        Criterion {
            id: 2,
            name: "Kalman calibration",
            budget: Some(Duration::from_secs(5)),
            run: calibration,
        },
        Criterion {
            id: 3,
            name: "kernel stealthiness",
            budget: None,
            run: stealthiness,
        },
        Criterion {
            id: 4,
            name: "discrimination matrix",
            budget: Some(Duration::from_secs(60)),
            run: discrimination,
        },
        Criterion {
            id: 5,
            name: "dual-residual dichotomy",
            budget: None,
            run: dichotomy,
        },
        Criterion {
            id: 6,
            name: "no closed-loop stealthy attack",
            budget: None,
            run: rank,
        },
        Criterion {
            id: 7,
            name: "optimization ordering",
            budget: Some(Duration::from_secs(120)),
            run: ordering,
        },
        Criterion {
            id: 8,
            name: "unified solution vs Kalman",
            budget: None,
            run: unified,
        },
        Criterion {
            id: 9,
            name: "repro determinism",
            budget: None,
            run: determinism,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = c.budget.is_none_or(|b| elapsed <= b);
        let (passed, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = c
            .budget
            .map_or(String::new(), |b| format!(", budget {:.0} s", b.as_secs_f64()));
        println!(
            "{} criterion {}: {} | {} | {:.2} s{}",
            if passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64(),
            budget
        );
        failed += usize::from(!passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
