//! Closed-loop simulation with both detectors and the adversary.
//!
//! One step, in order:
//!
//! 1. state offset of a state-injection attack, if any
//! 2. measurement `y₀ = C x + f_y` on the plant side, `y = y₀ + η`
//! 3. adversary on the output channel: `y → y_a`
//! 4. controller: residual `r = y_a − C x̂`, input `u`, fault detector `J`
//! 5. transmission `u + η_u` and adversary on the input channel: `→ u_a`
//! 6. plant-side twin on `(u_a, y₀, v̄)`: `J_u`
//! 7. plant update `x' = A x + B (u_a + f_u) + ω + f_p`

use dualguard_core::adversary::{Attacker, FaultKind};
use dualguard_core::detectors::{discriminate, FaultDetector, PersistenceFilter, TwinDesign, TwinDetector};
use dualguard_core::optimizer::optimize_gain;
use dualguard_core::synthesis::{
    lqr_gain, plant_coprime, solve_loop_kalman, youla_controller, ControllerParams, KalmanSolution,
};
use dualguard_core::{NoiseChannel, NoiseGenerator, NoiseSpec, StateSpaceModel};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ControllerForm, GainSource, ScenarioConfig};
use crate::trace::{SimulationTrace, StepRecord};

/// State norm treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] dualguard_core::Error),
    #[error("gain search found no stabilizing gain in the configured bounds")]
    Infeasible,
    #[error("state diverged at step {step} (|x| = {norm:e})")]
    Diverged {
        step: u64,
        norm: f64,
        /// Records up to and including the diverging step.
        partial: Box<SimulationTrace>,
    },
}

/// Everything a run needs that does not depend on the noise seed.
#[derive(Debug, Clone)]
pub struct LoopDesign {
    pub params: ControllerParams,
    pub kalman: KalmanSolution,
    pub twin: TwinDesign,
    /// Controller from `y` to `u` when simulating the Youla form.
    pub youla: Option<StateSpaceModel>,
}

impl LoopDesign {
    pub fn f(&self) -> &DMatrix<f64> {
        &self.params.f
    }
}

/// State-feedback gain for the scenario's gain source, given the observer gain.
pub fn resolve_gain(config: &ScenarioConfig, l: &DMatrix<f64>) -> Result<DMatrix<f64>, EngineError> {
    let plant = &config.plant;
    Ok(match &config.controller.gain {
        GainSource::Explicit(f) => f.clone(),
        GainSource::Lqr { q, r } => lqr_gain(plant.a(), plant.b(), q, r)?,
        GainSource::Optimized => optimize_gain(plant, l, &config.optimizer)?
            .f_star
            .ok_or(EngineError::Infeasible)?,
    })
}

pub fn design_loop(config: &ScenarioConfig) -> Result<LoopDesign, EngineError> {
    let kalman = solve_loop_kalman(&config.plant, &config.noise)?;
    let f = resolve_gain(config, &kalman.l)?;
    design_with_gain(config, f, kalman)
}

/// [`design_loop`] with the state-feedback gain replaced by `f`.
pub fn design_loop_with_gain(config: &ScenarioConfig, f: DMatrix<f64>) -> Result<LoopDesign, EngineError> {
    let kalman = solve_loop_kalman(&config.plant, &config.noise)?;
    design_with_gain(config, f, kalman)
}

fn design_with_gain(
    config: &ScenarioConfig,
    f: DMatrix<f64>,
    kalman: KalmanSolution,
) -> Result<LoopDesign, EngineError> {
    let mut params = ControllerParams::observer(f, kalman.l.clone()).with_q(config.controller.q.clone());
    params.feedforward = config.controller.feedforward.clone();
    params.validate(&config.plant)?;
    let twin = TwinDesign::new(&config.plant, &params, &config.noise)?;
    let youla = match config.controller.form {
        ControllerForm::Observer => None,
        ControllerForm::Youla => {
            let factors = plant_coprime(&config.plant, &params)?;
            Some(youla_controller(&factors, &StateSpaceModel::static_gain(-&params.q))?)
        }
    };
    Ok(LoopDesign {
        params,
        kalman,
        twin,
        youla,
    })
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<SimulationTrace, EngineError> {
    let design = design_loop(config)?;
    run_designed(config, &design, config.seed)
}

/// Runs `config` with a precomputed design and the given noise seed.
pub fn run_designed(config: &ScenarioConfig, design: &LoopDesign, seed: u64) -> Result<SimulationTrace, EngineError> {
    let plant = &config.plant;
    let (n, m, p) = (plant.states(), plant.inputs(), plant.outputs());
    let params = &design.params;
    let noise_spec = if config.noiseless {
        NoiseSpec::noiseless(n, p, m)
    } else {
        config.noise.clone().with_seed(seed)
    };
    let mut noise = NoiseGenerator::new(&noise_spec);
    let mut detector = FaultDetector::new(plant, &params.l, &design.kalman.sigma_r, config.alpha)?;
    let mut twin = TwinDetector::new(&design.twin, config.alpha)?;
    let mut attacker = config
        .attack
        .as_ref()
        .map(|a| Attacker::new(a, plant, &params.l))
        .transpose()?;
    let mut youla_state = design.youla.as_ref().map(|k| DVector::zeros(k.states()));
    let (mut persist_j, mut persist_ju) = (
        PersistenceFilter::new(config.persistence),
        PersistenceFilter::new(config.persistence),
    );
    let bias = |k: u64, channel: FaultKind| config.fault.as_ref().and_then(|f| f.bias_at(k, channel));
    let no_input = DVector::zeros(m);

    let mut trace = SimulationTrace::new(n, m, p);
    trace.records.reserve(config.horizon as usize);
    let mut x = config.initial_state.clone();
    for k in 0..config.horizon {
        if let Some(offset) = attacker.as_ref().and_then(|a| a.state_offset(k)) {
            x += offset;
        }
        let w = noise.draw(NoiseChannel::Process);
        let eta = noise.draw(NoiseChannel::Measurement);
        let eta_u = noise.draw(NoiseChannel::Control);

        let mut y0 = plant.c() * &x;
        if let Some(b) = bias(k, FaultKind::Sensor) {
            y0 += b;
        }
        let y = &y0 + eta;
        let y_a = match attacker.as_mut() {
            Some(a) => a.tamper_output(k, &y)?,
            None => y.clone(),
        };

        let v_bar = params.feedforward.at(k, m);
        let r0 = detector.innovation(&y_a, &no_input);
        let u = match (&design.youla, youla_state.as_mut()) {
            (Some(kc), Some(xk)) => {
                let u = kc.c() * &*xk + kc.d() * &y_a;
                *xk = kc.a() * &*xk + kc.b() * &y_a;
                u
            }
            _ => &params.f * detector.xhat() + &params.q * &r0 + &v_bar,
        };
        detector.advance(&u, &r0);
        let r = detector.filter(r0);
        let j = detector.statistic(&r);

        let u_tx = &u + eta_u;
        let u_a = match attacker.as_ref() {
            Some(a) => a.tamper_input(k, &u_tx),
            None => u_tx,
        };
        let (r_u, j_u) = twin.step(&u_a, &y0, &v_bar)?;

        let mut u_plant = u_a.clone();
        if let Some(b) = bias(k, FaultKind::Actuator) {
            u_plant += b;
        }
        let mut x_next = plant.a() * &x + plant.b() * &u_plant + w;
        if let Some(b) = bias(k, FaultKind::Plant) {
            x_next += b;
        }

        let live = k >= config.burn_in;
        let raw_j = live && j > detector.threshold();
        let raw_ju = live && j_u > twin.threshold();
        let flag_j = persist_j.push(raw_j);
        let flag_ju = persist_ju.push(raw_ju);
        trace.records.push(StepRecord {
            k,
            x: x.clone(),
            u,
            u_a,
            y,
            y_a,
            r,
            r_u,
            j,
            j_u,
            j_th: detector.threshold(),
            j_th_u: twin.threshold(),
            raw_j,
            raw_ju,
            flag_j,
            flag_ju,
            label: discriminate(flag_j, flag_ju),
        });
        if let Some(a) = attacker.as_mut() {
            a.end_step(k);
        }

        let norm = x_next.norm();
        if norm.is_nan() || norm > DIVERGENCE_LIMIT {
            return Err(EngineError::Diverged {
                step: k,
                norm,
                partial: Box::new(trace),
            });
        }
        x = x_next;
    }
    Ok(trace)
}

/// Runs one scenario for each seed in parallel, sharing a single design.
pub fn run_batch(config: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<SimulationTrace>, EngineError> {
    let design = design_loop(config)?;
    run_batch_designed(config, &design, seeds)
}

pub fn run_batch_designed(
    config: &ScenarioConfig,
    design: &LoopDesign,
    seeds: &[u64],
) -> Result<Vec<SimulationTrace>, EngineError> {
    seeds.par_iter().map(|&s| run_designed(config, design, s)).collect()
}
