//! Kernel attacks (covert, replay, zero-dynamics) and additive faults.
//!
//! An [`Attacker`] is a deterministic state machine driven by the simulation
//! loop: it sees the true output `y(k)` and returns the received `y_a(k)`,
//! then sees the transmitted input and returns the applied `u_a(k)`.

use std::collections::VecDeque;

use log::warn;
use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{shape, Error, Result};
use crate::lti::{zero_direction, CMatrix, CVector, StateSpaceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroDynamicsMode {
    /// `a_u(k) = scale·Re(g z0^{k−k_a})` from rest; the output deviation is a
    /// transient governed by the plant dynamics.
    Exponential,
    /// A short output-nulling input prefix drives the plant onto the zero
    /// direction state, then the exponential input keeps it there.
    #[default]
    Steered,
    /// The exponential input plus an injected state offset `scale·Re(x0)` at `k_a`.
    StateInjection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackKind {
    /// `a_y = −G_u a_u` from a shadow simulation of the plant.
    Covert,
    /// Replays the last `record_window` outputs before onset.
    Replay { record_window: usize },
    ZeroDynamics {
        z0: Complex<f64>,
        scale: f64,
        mode: ZeroDynamicsMode,
    },
    /// Constant biases on both channels.
    CustomAdditive { a_y: DVector<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// First attacked step `k_a`.
    pub onset: u64,
    /// Constant input injection `a_u` (unused for zero-dynamics attacks).
    pub a_u: DVector<f64>,
}

impl AttackSpec {
    pub fn covert(onset: u64, a_u: DVector<f64>) -> Self {
        Self {
            kind: AttackKind::Covert,
            onset,
            a_u,
        }
    }

    pub fn replay(onset: u64, a_u: DVector<f64>, record_window: usize) -> Self {
        Self {
            kind: AttackKind::Replay { record_window },
            onset,
            a_u,
        }
    }

    pub fn zero_dynamics(onset: u64, z0: Complex<f64>, scale: f64, mode: ZeroDynamicsMode) -> Self {
        Self {
            kind: AttackKind::ZeroDynamics { z0, scale, mode },
            onset,
            a_u: DVector::zeros(0),
        }
    }

    pub fn validate(&self, plant: &StateSpaceModel) -> Result<()> {
        let (m, p) = (plant.inputs(), plant.outputs());
        if !matches!(self.kind, AttackKind::ZeroDynamics { .. }) && self.a_u.len() != m {
            return Err(Error::dim("attack input injection a_u", m, self.a_u.len()));
        }
        match &self.kind {
            AttackKind::Replay { record_window } => {
                if *record_window == 0 {
                    return Err(Error::InvalidArgument("replay record window must be at least 1".into()));
                }
                if *record_window as u64 > self.onset {
                    return Err(Error::InvalidArgument(format!(
                        "replay record window {record_window} exceeds the {} samples available before onset",
                        self.onset
                    )));
                }
            }
            AttackKind::CustomAdditive { a_y } if a_y.len() != p => {
                return Err(Error::dim("attack output injection a_y", p, a_y.len()));
            }
            _ => {}
        }
        Ok(())
    }
}

/// `a_y = −G_u a_u` for an input injection sequence starting from rest.
pub fn covert_output_stream(plant: &StateSpaceModel, a_u: &[DVector<f64>]) -> Vec<DVector<f64>> {
    plant.simulate(a_u).into_iter().map(|y| -y).collect()
}

/// Shadow plant generating the covert output correction.
#[derive(Debug, Clone)]
pub struct CovertAttack {
    plant: StateSpaceModel,
    x_s: DVector<f64>,
}

impl CovertAttack {
    pub fn new(plant: &StateSpaceModel) -> Self {
        Self {
            plant: plant.clone(),
            x_s: DVector::zeros(plant.states()),
        }
    }

    /// `a_y(k) = −(C x_s(k) + D a_u(k))`.
    pub fn output_injection(&self, a_u: &DVector<f64>) -> DVector<f64> {
        -(self.plant.c() * &self.x_s + self.plant.d() * a_u)
    }

    pub fn advance(&mut self, a_u: &DVector<f64>) {
        self.x_s = self.plant.a() * &self.x_s + self.plant.b() * a_u;
    }
}

/// Ring buffer of pre-attack outputs.
#[derive(Debug, Clone)]
pub struct ReplayAttack {
    buffer: VecDeque<DVector<f64>>,
    window: usize,
    onset: u64,
    warned: bool,
}

impl ReplayAttack {
    pub fn new(window: usize, onset: u64) -> Self {
        Self {
            buffer: VecDeque::with_capacity(window),
            window,
            onset,
            warned: false,
        }
    }

    pub fn record(&mut self, y: &DVector<f64>) {
        if self.buffer.len() == self.window {
            self.buffer.pop_front();
        }
        self.buffer.push_back(y.clone());
    }

    /// `y_a(k) = recorded(k − k_a)`, repeating the buffer once it is exhausted.
    pub fn replay(&mut self, k: u64) -> Result<DVector<f64>> {
        if self.buffer.is_empty() {
            return Err(Error::InvalidArgument(
                "replay attack started with an empty record buffer".into(),
            ));
        }
        let offset = k.saturating_sub(self.onset) as usize;
        if offset >= self.buffer.len() && !self.warned {
            warn!(
                "replay attack outlived its {}-sample record at step {k}; repeating the buffer",
                self.buffer.len()
            );
            self.warned = true;
        }
        Ok(self.buffer[offset % self.buffer.len()].clone())
    }

    pub fn recorded(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.buffer.iter()
    }
}

/// `y_a(k)` for a replay that started at `onset` from the `recorded` window.
pub fn replay_attack(recorded: &[DVector<f64>], onset: u64, k: u64) -> Result<DVector<f64>> {
    let offset = k
        .checked_sub(onset)
        .ok_or_else(|| Error::InvalidArgument(format!("replay queried at step {k} before onset {onset}")))?;
    recorded.get(offset as usize).cloned().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "replay horizon {} exceeds the {}-sample record",
            offset + 1,
            recorded.len()
        ))
    })
}

/// Input-only attack along a transmission-zero direction of `N̂`.
#[derive(Debug, Clone)]
pub struct ZeroDynamicsAttack {
    pub z0: Complex<f64>,
    /// Unit input direction with `N̂(z0) g = 0`.
    pub g: CVector,
    /// State direction with `A x0 + B g = z0 x0`, `C x0 + D g = 0`.
    pub x0: CVector,
    pub scale: f64,
    pub onset: u64,
    pub mode: ZeroDynamicsMode,
    prefix: Vec<DVector<f64>>,
}

impl ZeroDynamicsAttack {
    pub fn new(
        plant: &StateSpaceModel,
        l: &DMatrix<f64>,
        z0: Complex<f64>,
        scale: f64,
        onset: u64,
        mode: ZeroDynamicsMode,
    ) -> Result<Self> {
        if l.shape() != (plant.states(), plant.outputs()) {
            return Err(Error::dim(
                "observer gain L",
                format!("{}x{}", plant.states(), plant.outputs()),
                shape(l),
            ));
        }
        let a_l = plant.a() - l * plant.c();
        let b_l = plant.b() - l * plant.d();
        let n_hat = StateSpaceModel::new(a_l.clone(), b_l.clone(), plant.c().clone(), plant.d().clone())?;
        let g = zero_direction(&n_hat, z0)?.ok_or_else(|| {
            Error::NoNullDirection(format!(
                "N̂(z0) has full column rank at z0 = {z0}; a {}x{} transfer matrix without a transmission zero there admits no zero-dynamics input",
                plant.outputs(),
                plant.inputs()
            ))
        })?;
        let n = plant.states();
        let resolvent = CMatrix::identity(n, n) * z0 - a_l.map(|v| Complex::new(v, 0.0));
        let rhs = b_l.map(|v| Complex::new(v, 0.0)) * &g;
        let x0 = if n == 0 {
            CVector::zeros(0)
        } else {
            resolvent.lu().solve(&rhs).ok_or(Error::Pole { z: z0 })?
        };
        let mut attack = Self {
            z0,
            g,
            x0,
            scale,
            onset,
            mode,
            prefix: Vec::new(),
        };
        if mode == ZeroDynamicsMode::Steered && scale != 0.0 {
            match attack.steering_prefix(plant) {
                Some(prefix) => attack.prefix = prefix,
                None => {
                    warn!("no output-nulling steering prefix exists; falling back to the exponential input");
                    attack.mode = ZeroDynamicsMode::Exponential;
                }
            }
        }
        Ok(attack)
    }

    /// Shortest input sequence from rest with zero output that ends at `scale·Re(x0)`.
    fn steering_prefix(&self, plant: &StateSpaceModel) -> Option<Vec<DVector<f64>>> {
        let (n, m, p) = (plant.states(), plant.inputs(), plant.outputs());
        let target = self.x0.map(|c| c.re) * self.scale;
        let tol = 1e-10 * self.scale.abs().max(1.0) * target.norm().max(1.0);
        let (a, b, c, d) = (plant.a(), plant.b(), plant.c(), plant.d());
        for h in 1..=(2 * n + 2) {
            let rows = h * p + n;
            let cols = h * m;
            let mut op = DMatrix::zeros(rows, cols);
            // a_i reaches y_j through D (i = j) or C A^{j−i−1} B (i < j), and x_h through A^{h−1−i} B
            let mut powers = vec![b.clone()];
            for _ in 1..h {
                let next = a * powers.last().expect("nonempty");
                powers.push(next);
            }
            for j in 0..h {
                op.view_mut((j * p, j * m), (p, m)).copy_from(d);
                for i in 0..j {
                    op.view_mut((j * p, i * m), (p, m)).copy_from(&(c * &powers[j - i - 1]));
                }
            }
            for i in 0..h {
                op.view_mut((h * p, i * m), (n, m)).copy_from(&powers[h - 1 - i]);
            }
            let mut rhs = DVector::zeros(rows);
            rhs.rows_mut(h * p, n).copy_from(&target);
            let sol = op.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
            if (&op * &sol - &rhs).norm() <= tol {
                return Some((0..h).map(|i| sol.rows(i * m, m).into_owned()).collect());
            }
        }
        None
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix.len()
    }

    pub fn a_u(&self, k: u64) -> DVector<f64> {
        let m = self.g.len();
        if k < self.onset || self.scale == 0.0 {
            return DVector::zeros(m);
        }
        let j = (k - self.onset) as usize;
        if let Some(step) = self.prefix.get(j) {
            return step.clone();
        }
        let t = (j - self.prefix.len()) as i32;
        let factor = self.z0.powi(t) * self.scale;
        self.g.map(|gi| (gi * factor).re)
    }

    /// State offset injected at onset in [`ZeroDynamicsMode::StateInjection`].
    pub fn state_offset(&self, k: u64) -> Option<DVector<f64>> {
        (self.mode == ZeroDynamicsMode::StateInjection && k == self.onset && self.scale != 0.0)
            .then(|| self.x0.map(|c| c.re) * self.scale)
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Covert(CovertAttack),
    Replay(ReplayAttack),
    ZeroDynamics(ZeroDynamicsAttack),
    Custom(DVector<f64>),
}

/// Runtime attack generator for one simulation.
#[derive(Debug, Clone)]
pub struct Attacker {
    spec: AttackSpec,
    engine: Engine,
    m: usize,
}

impl Attacker {
    /// `l` is the controller's observer gain, used to factor `N̂` for zero-dynamics attacks.
    pub fn new(spec: &AttackSpec, plant: &StateSpaceModel, l: &DMatrix<f64>) -> Result<Self> {
        spec.validate(plant)?;
        let engine = match &spec.kind {
            AttackKind::Covert => Engine::Covert(CovertAttack::new(plant)),
            AttackKind::Replay { record_window } => Engine::Replay(ReplayAttack::new(*record_window, spec.onset)),
            AttackKind::ZeroDynamics { z0, scale, mode } => {
                Engine::ZeroDynamics(ZeroDynamicsAttack::new(plant, l, *z0, *scale, spec.onset, *mode)?)
            }
            AttackKind::CustomAdditive { a_y } => Engine::Custom(a_y.clone()),
        };
        Ok(Self {
            spec: spec.clone(),
            engine,
            m: plant.inputs(),
        })
    }

    pub fn spec(&self) -> &AttackSpec {
        &self.spec
    }

    pub fn active(&self, k: u64) -> bool {
        k >= self.spec.onset
    }

    /// Input injection `a_u(k)`.
    pub fn a_u(&self, k: u64) -> DVector<f64> {
        if !self.active(k) {
            return DVector::zeros(self.m);
        }
        match &self.engine {
            Engine::ZeroDynamics(z) => z.a_u(k),
            _ => self.spec.a_u.clone(),
        }
    }

    /// Received output `y_a(k)` for the true output `y(k)`.
    pub fn tamper_output(&mut self, k: u64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let a_u = self.a_u(k);
        let active = self.active(k);
        match &mut self.engine {
            Engine::Covert(c) if active => Ok(y + c.output_injection(&a_u)),
            Engine::Replay(r) => {
                if active {
                    r.replay(k)
                } else {
                    r.record(y);
                    Ok(y.clone())
                }
            }
            Engine::Custom(a_y) if active => Ok(y + &*a_y),
            _ => Ok(y.clone()),
        }
    }

    /// Applied input `u_a(k) = u(k) + a_u(k)`.
    pub fn tamper_input(&self, k: u64, u: &DVector<f64>) -> DVector<f64> {
        u + self.a_u(k)
    }

    pub fn state_offset(&self, k: u64) -> Option<DVector<f64>> {
        match &self.engine {
            Engine::ZeroDynamics(z) => z.state_offset(k),
            _ => None,
        }
    }

    /// Closes step `k`.
    pub fn end_step(&mut self, k: u64) {
        let a_u = self.a_u(k);
        if let Engine::Covert(c) = &mut self.engine {
            if k >= self.spec.onset {
                c.advance(&a_u);
            }
        }
    }

    pub fn zero_dynamics(&self) -> Option<&ZeroDynamicsAttack> {
        match &self.engine {
            Engine::ZeroDynamics(z) => Some(z),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    /// `f_u`, added to the input entering the plant.
    Actuator,
    /// `f_y`, added to the measured output.
    Sensor,
    /// `f_p`, added to the state update.
    Plant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultSpec {
    pub kind: FaultKind,
    /// `None` never activates.
    pub onset: Option<u64>,
    pub bias: DVector<f64>,
}

impl FaultSpec {
    pub fn new(kind: FaultKind, onset: u64, bias: DVector<f64>) -> Self {
        Self {
            kind,
            onset: Some(onset),
            bias,
        }
    }

    pub fn validate(&self, plant: &StateSpaceModel) -> Result<()> {
        let want = match self.kind {
            FaultKind::Actuator => plant.inputs(),
            FaultKind::Sensor => plant.outputs(),
            FaultKind::Plant => plant.states(),
        };
        if self.bias.len() != want {
            return Err(Error::dim(format!("{:?} fault bias", self.kind), want, self.bias.len()));
        }
        Ok(())
    }

    pub fn active(&self, k: u64) -> bool {
        self.onset.is_some_and(|o| k >= o)
    }

    /// The bias acting on `channel` at step `k`, if any.
    pub fn bias_at(&self, k: u64, channel: FaultKind) -> Option<&DVector<f64>> {
        (self.kind == channel && self.active(k)).then_some(&self.bias)
    }
}

/// Signals of one loop step that faults can corrupt.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultTargets {
    pub u_plant: DVector<f64>,
    pub y: DVector<f64>,
    pub x_next: DVector<f64>,
}

pub fn inject_fault(spec: &FaultSpec, k: u64, signals: &mut FaultTargets) {
    if let Some(b) = spec.bias_at(k, FaultKind::Actuator) {
        signals.u_plant += b;
    }
    if let Some(b) = spec.bias_at(k, FaultKind::Sensor) {
        signals.y += b;
    }
    if let Some(b) = spec.bias_at(k, FaultKind::Plant) {
        signals.x_next += b;
    }
}
