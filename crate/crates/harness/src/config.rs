//! Scenario files: a TOML document with top-level run settings and the
//! sections `[plant]`, `[noise]`, `[controller]`, `[optimizer]`, `[attack]`
//! and `[fault]`. Matrices are row-major nested arrays; a bare number in a
//! covariance or weight slot means that multiple of the identity, and a bare
//! number in a vector slot is repeated on every channel.

use std::path::{Path, PathBuf};

use dualguard_core::adversary::{AttackKind, AttackSpec, FaultKind, FaultSpec, ZeroDynamicsMode};
use dualguard_core::optimizer::{SearchConfig, SearchMode};
use dualguard_core::synthesis::Feedforward;
use dualguard_core::{NoiseSpec, StateSpaceModel};
use nalgebra::{Complex, DMatrix, DVector};
use serde::Deserialize;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

const BUNDLED: &[(&str, &str)] = &[
    ("uav_nominal", include_str!("../scenarios/uav_nominal.toml")),
    ("uav_fault", include_str!("../scenarios/uav_fault.toml")),
    ("uav_covert", include_str!("../scenarios/uav_covert.toml")),
    ("uav_fault_covert", include_str!("../scenarios/uav_fault_covert.toml")),
    ("uav_replay", include_str!("../scenarios/uav_replay.toml")),
    ("uav_replay_fault", include_str!("../scenarios/uav_replay_fault.toml")),
    ("uav_zero_dynamics", include_str!("../scenarios/uav_zero_dynamics.toml")),
    ("rlc_nominal", include_str!("../scenarios/rlc_nominal.toml")),
    ("rlc_covert", include_str!("../scenarios/rlc_covert.toml")),
];

const REQUIRED: &[&str] = &[
    "schema_version",
    "horizon",
    "plant",
    "plant.a",
    "plant.b",
    "plant.c",
    "noise",
    "noise.sigma_omega",
    "noise.sigma_eta",
    "noise.sigma_eta_u",
    "controller",
    "controller.source",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: missing required keys: {}", keys.join(", "))]
    Missing { origin: String, keys: Vec<String> },
    #[error("{origin}: {field}: {message}")]
    Invalid {
        origin: String,
        field: String,
        message: String,
    },
    #[error("unknown scenario `{0}`; bundled scenarios are {list}", list = bundled_names().join(", "))]
    UnknownScenario(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum MatrixSpec {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum VectorSpec {
    Scalar(f64),
    Entries(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema_version: u32,
    name: Option<String>,
    horizon: i64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_persistence")]
    persistence: usize,
    #[serde(default = "default_burn_in")]
    burn_in: u64,
    #[serde(default = "default_sample_time")]
    sample_time: f64,
    #[serde(default = "default_optimizer_horizon")]
    optimizer_horizon: usize,
    #[serde(default)]
    noiseless: bool,
    initial_state: Option<VectorSpec>,
    plant: RawPlant,
    noise: RawNoise,
    controller: RawController,
    optimizer: Option<RawOptimizer>,
    attack: Option<RawAttack>,
    fault: Option<RawFault>,
}

fn default_alpha() -> f64 {
    0.01
}
fn default_persistence() -> usize {
    5
}
fn default_burn_in() -> u64 {
    100
}
fn default_sample_time() -> f64 {
    0.1
}
fn default_optimizer_horizon() -> usize {
    10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    a: MatrixSpec,
    b: MatrixSpec,
    c: MatrixSpec,
    d: Option<MatrixSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    sigma_omega: MatrixSpec,
    sigma_eta: MatrixSpec,
    sigma_eta_u: MatrixSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawSource {
    Explicit,
    Lqr,
    Optimized,
}

/// Realization of the controller used in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerForm {
    /// `u = F x̂ + Q r + v̄` with the observer state.
    #[default]
    Observer,
    /// `u = K y` with `K` from the Youla parameterization.
    Youla,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    source: RawSource,
    f: Option<MatrixSpec>,
    q: Option<MatrixSpec>,
    state_weight: Option<MatrixSpec>,
    input_weight: Option<MatrixSpec>,
    #[serde(default)]
    form: ControllerForm,
    feedforward: Option<Vec<VectorSpec>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawMode {
    Grid,
    Stochastic,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    mode: Option<RawMode>,
    bound: Option<f64>,
    df: Option<f64>,
    gamma_min: Option<f64>,
    gamma_max: Option<f64>,
    dgamma: Option<f64>,
    population: Option<usize>,
    generations: Option<usize>,
    mutation_scale: Option<f64>,
    mutation_rate: Option<f64>,
    random_candidates: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawAttackKind {
    Covert,
    Replay,
    ZeroDynamics,
    Additive,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawZeroMode {
    Exponential,
    Steered,
    StateInjection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttack {
    kind: RawAttackKind,
    onset: u64,
    a_u: Option<VectorSpec>,
    record_window: Option<usize>,
    z0: Option<[f64; 2]>,
    scale: Option<f64>,
    mode: Option<RawZeroMode>,
    a_y: Option<VectorSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawFaultKind {
    Actuator,
    Sensor,
    Plant,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFault {
    kind: RawFaultKind,
    onset: u64,
    bias: VectorSpec,
}

/// Where the state-feedback gain comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GainSource {
    Explicit(DMatrix<f64>),
    /// LQR with state and input weights.
    Lqr {
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    },
    /// Searched with the scenario's optimizer settings.
    Optimized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub gain: GainSource,
    /// Residual feedback `Q`.
    pub q: DMatrix<f64>,
    pub form: ControllerForm,
    pub feedforward: Feedforward,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: StateSpaceModel,
    /// Design covariances; also the simulated noise unless `noiseless`.
    pub noise: NoiseSpec,
    pub noiseless: bool,
    pub controller: ControllerConfig,
    pub optimizer: SearchConfig,
    pub attack: Option<AttackSpec>,
    pub fault: Option<FaultSpec>,
    pub horizon: u64,
    pub alpha: f64,
    pub persistence: usize,
    pub burn_in: u64,
    /// Metadata only.
    pub sample_time: f64,
    pub initial_state: DVector<f64>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.noise = self.noise.with_seed(seed);
        self
    }

    /// First step of the anomaly, or the end of burn-in when there is none.
    pub fn onset(&self) -> u64 {
        let attack = self.attack.as_ref().map(|a| a.onset);
        let fault = self.fault.as_ref().and_then(|f| f.onset);
        match (attack, fault) {
            (Some(a), Some(f)) => a.min(f),
            (Some(a), None) => a,
            (None, Some(f)) => f,
            (None, None) => self.burn_in,
        }
    }
}

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Loads a scenario from a file path, or a bundled scenario by name.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    if !path.exists() {
        if let Some(src) = path.to_str().and_then(bundled_source) {
            return parse_config(src, path.to_str().unwrap_or_default());
        }
        if path.extension().is_none() && path.components().count() == 1 {
            return Err(ConfigError::UnknownScenario(path.display().to_string()));
        }
    }
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    let mut config = parse_config(&text, &path.display().to_string())?;
    if config.name.is_empty() {
        config.name = stem.to_string();
    }
    Ok(config)
}

/// Parses scenario text; `origin` labels error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<ScenarioConfig, ConfigError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, origin, &e))?;
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|key| {
            let mut parts = key.split('.');
            let head = parts.next().expect("nonempty key");
            match (table.get(head), parts.next()) {
                (None, _) => true,
                (Some(toml::Value::Table(t)), Some(sub)) => !t.contains_key(sub),
                _ => false,
            }
        })
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::Missing {
            origin: origin.into(),
            keys: missing,
        });
    }
    let raw: RawScenario = toml::from_str(text).map_err(|e| parse_error(text, origin, &e))?;
    build(raw, origin)
}

fn parse_error(text: &str, origin: &str, err: &toml::de::Error) -> ConfigError {
    let (line, column) = err
        .span()
        .map(|span| {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line, column)
        })
        .unwrap_or((1, 1));
    ConfigError::Parse {
        origin: origin.into(),
        line,
        column,
        message: err.message().trim().to_string(),
    }
}

struct Builder<'a> {
    origin: &'a str,
}

impl Builder<'_> {
    fn invalid(&self, field: &str, message: impl ToString) -> ConfigError {
        ConfigError::Invalid {
            origin: self.origin.into(),
            field: field.into(),
            message: message.to_string(),
        }
    }

    fn matrix(&self, field: &str, spec: &MatrixSpec, identity_dim: Option<usize>) -> Result<DMatrix<f64>, ConfigError> {
        match spec {
            MatrixSpec::Scalar(s) => match identity_dim {
                Some(n) => Ok(DMatrix::identity(n, n) * *s),
                None => Err(self.invalid(field, "expected a matrix (nested array of rows)")),
            },
            MatrixSpec::Rows(rows) => {
                let cols = rows.first().map_or(0, Vec::len);
                if rows.is_empty() || cols == 0 {
                    return Err(self.invalid(field, "matrix must have at least one row and one column"));
                }
                if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
                    return Err(self.invalid(field, format!("row {i} has {} entries, expected {cols}", r.len())));
                }
                if rows.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(self.invalid(field, "entries must be finite"));
                }
                Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
            }
        }
    }

    fn sized_matrix(
        &self,
        field: &str,
        spec: &MatrixSpec,
        rows: usize,
        cols: usize,
    ) -> Result<DMatrix<f64>, ConfigError> {
        let m = self.matrix(field, spec, (rows == cols).then_some(rows))?;
        if m.shape() != (rows, cols) {
            return Err(self.invalid(
                field,
                format!("expected {rows}x{cols}, got {}x{}", m.nrows(), m.ncols()),
            ));
        }
        Ok(m)
    }

    fn vector(&self, field: &str, spec: &VectorSpec, len: usize) -> Result<DVector<f64>, ConfigError> {
        let v = match spec {
            VectorSpec::Scalar(s) => DVector::from_element(len, *s),
            VectorSpec::Entries(e) => DVector::from_vec(e.clone()),
        };
        if v.len() != len {
            return Err(self.invalid(field, format!("expected {len} entries, got {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(self.invalid(field, "entries must be finite"));
        }
        Ok(v)
    }

    fn core<T>(&self, field: &str, r: dualguard_core::Result<T>) -> Result<T, ConfigError> {
        r.map_err(|e| self.invalid(field, e))
    }
}

fn build(raw: RawScenario, origin: &str) -> Result<ScenarioConfig, ConfigError> {
    let b = Builder { origin };
    if raw.schema_version != SCHEMA_VERSION {
        return Err(b.invalid(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", raw.schema_version),
        ));
    }
    if raw.horizon <= 0 {
        return Err(b.invalid("horizon", format!("must be a positive step count, got {}", raw.horizon)));
    }
    let horizon = raw.horizon as u64;
    if !(raw.alpha > 0.0 && raw.alpha < 1.0) {
        return Err(b.invalid("alpha", "false-alarm rate must lie in (0, 1)"));
    }
    if raw.persistence == 0 {
        return Err(b.invalid("persistence", "window must be at least 1"));
    }
    if raw.optimizer_horizon == 0 {
        return Err(b.invalid("optimizer_horizon", "must be at least 1"));
    }
    if raw.sample_time.is_nan() || raw.sample_time <= 0.0 {
        return Err(b.invalid("sample_time", "must be positive"));
    }

    let a = b.matrix("plant.a", &raw.plant.a, None)?;
    let n = a.nrows();
    if a.ncols() != n {
        return Err(b.invalid("plant.a", format!("must be square, got {}x{}", n, a.ncols())));
    }
    let bm = b.matrix("plant.b", &raw.plant.b, None)?;
    let c = b.matrix("plant.c", &raw.plant.c, None)?;
    if bm.nrows() != n {
        return Err(b.invalid("plant.b", format!("expected {n} rows, got {}", bm.nrows())));
    }
    if c.ncols() != n {
        return Err(b.invalid("plant.c", format!("expected {n} columns, got {}", c.ncols())));
    }
    let (m, p) = (bm.ncols(), c.nrows());
    let d = match &raw.plant.d {
        Some(spec) => b.sized_matrix("plant.d", spec, p, m)?,
        None => DMatrix::zeros(p, m),
    };
    if d.iter().any(|&v| v != 0.0) {
        return Err(b.invalid(
            "plant.d",
            "the closed-loop engine supports strictly proper plants only (D = 0)",
        ));
    }
    let plant = b.core("plant", StateSpaceModel::new(a, bm, c, d))?;

    let noise = NoiseSpec::new(
        b.sized_matrix("noise.sigma_omega", &raw.noise.sigma_omega, n, n)?,
        b.sized_matrix("noise.sigma_eta", &raw.noise.sigma_eta, p, p)?,
        b.sized_matrix("noise.sigma_eta_u", &raw.noise.sigma_eta_u, m, m)?,
        raw.seed,
    );
    let noise = b.core("noise", noise)?;

    let ctl = &raw.controller;
    let gain = match ctl.source {
        RawSource::Explicit => {
            let f = ctl
                .f
                .as_ref()
                .ok_or_else(|| b.invalid("controller.f", "required when source = \"explicit\""))?;
            GainSource::Explicit(b.sized_matrix("controller.f", f, m, n)?)
        }
        RawSource::Lqr => GainSource::Lqr {
            q: match &ctl.state_weight {
                Some(s) => b.sized_matrix("controller.state_weight", s, n, n)?,
                None => DMatrix::identity(n, n),
            },
            r: match &ctl.input_weight {
                Some(s) => b.sized_matrix("controller.input_weight", s, m, m)?,
                None => DMatrix::identity(m, m),
            },
        },
        RawSource::Optimized => GainSource::Optimized,
    };
    if ctl.source != RawSource::Explicit && ctl.f.is_some() {
        return Err(b.invalid("controller.f", "only used when source = \"explicit\""));
    }
    if ctl.source != RawSource::Lqr && (ctl.state_weight.is_some() || ctl.input_weight.is_some()) {
        return Err(b.invalid(
            "controller",
            "state_weight and input_weight only apply to source = \"lqr\"",
        ));
    }
    let q = match &ctl.q {
        Some(s) => b.sized_matrix("controller.q", s, m, p)?,
        None => DMatrix::zeros(m, p),
    };
    let feedforward = match &ctl.feedforward {
        None => Feedforward::Zero,
        Some(seq) => Feedforward::Periodic(
            seq.iter()
                .enumerate()
                .map(|(i, v)| b.vector(&format!("controller.feedforward[{i}]"), v, m))
                .collect::<Result<_, _>>()?,
        ),
    };
    if ctl.form == ControllerForm::Youla && !feedforward.is_zero() {
        return Err(b.invalid(
            "controller.feedforward",
            "the Youla form does not take a feedforward signal",
        ));
    }
    let controller = ControllerConfig {
        gain,
        q,
        form: ctl.form,
        feedforward,
    };

    let optimizer = build_optimizer(&b, raw.optimizer.as_ref(), m, n, raw.optimizer_horizon)?;
    let attack = raw.attack.as_ref().map(|a| build_attack(&b, a, m, p)).transpose()?;
    if let Some(a) = &attack {
        b.core("attack", a.validate(&plant))?;
    }
    let fault = raw
        .fault
        .as_ref()
        .map(|f| {
            let (kind, len) = match f.kind {
                RawFaultKind::Actuator => (FaultKind::Actuator, m),
                RawFaultKind::Sensor => (FaultKind::Sensor, p),
                RawFaultKind::Plant => (FaultKind::Plant, n),
            };
            Ok::<_, ConfigError>(FaultSpec::new(kind, f.onset, b.vector("fault.bias", &f.bias, len)?))
        })
        .transpose()?;
    for (field, onset) in [
        ("attack.onset", attack.as_ref().map(|a| a.onset)),
        ("fault.onset", fault.as_ref().and_then(|f| f.onset)),
    ] {
        if let Some(o) = onset {
            if o >= horizon {
                return Err(b.invalid(field, format!("onset {o} is not before the horizon {horizon}")));
            }
        }
    }
    let initial_state = match &raw.initial_state {
        Some(v) => b.vector("initial_state", v, n)?,
        None => DVector::zeros(n),
    };

    Ok(ScenarioConfig {
        name: raw.name.unwrap_or_default(),
        plant,
        noise,
        noiseless: raw.noiseless,
        controller,
        optimizer,
        attack,
        fault,
        horizon,
        alpha: raw.alpha,
        persistence: raw.persistence,
        burn_in: raw.burn_in,
        sample_time: raw.sample_time,
        initial_state,
        seed: raw.seed,
    })
}

fn build_optimizer(
    b: &Builder<'_>,
    raw: Option<&RawOptimizer>,
    m: usize,
    n: usize,
    s: usize,
) -> Result<SearchConfig, ConfigError> {
    let bound = raw.and_then(|r| r.bound).unwrap_or(10.0);
    if bound.is_nan() || bound <= 0.0 {
        return Err(b.invalid("optimizer.bound", "must be positive"));
    }
    let mut c = SearchConfig::uniform(m, n, -bound, bound);
    c.s = s;
    if let Some(r) = raw {
        if let Some(mode) = r.mode {
            c.mode = match mode {
                RawMode::Grid => SearchMode::GridFeasibility,
                RawMode::Stochastic => SearchMode::Stochastic,
            };
        }
        c.df = r.df.unwrap_or(c.df);
        c.gamma_min = r.gamma_min.unwrap_or(c.gamma_min);
        c.gamma_max = r.gamma_max.unwrap_or(c.gamma_max);
        c.dgamma = r.dgamma.unwrap_or(c.dgamma);
        c.population = r.population.unwrap_or(c.population);
        c.generations = r.generations.unwrap_or(c.generations);
        c.mutation_scale = r.mutation_scale.unwrap_or(c.mutation_scale);
        c.mutation_rate = r.mutation_rate.unwrap_or(c.mutation_rate);
        c.random_candidates = r.random_candidates.unwrap_or(c.random_candidates);
        c.seed = r.seed.unwrap_or(c.seed);
    }
    if c.df.is_nan() || c.df <= 0.0 {
        return Err(b.invalid("optimizer.df", "grid step must be positive"));
    }
    if (c.dgamma.is_nan() || c.dgamma <= 0.0) || c.gamma_min < 0.0 || c.gamma_max < c.gamma_min {
        return Err(b.invalid(
            "optimizer",
            "gamma grid needs 0 <= gamma_min <= gamma_max and dgamma > 0",
        ));
    }
    if c.population < 2 {
        return Err(b.invalid("optimizer.population", "must be at least 2"));
    }
    Ok(c)
}

fn build_attack(b: &Builder<'_>, raw: &RawAttack, m: usize, p: usize) -> Result<AttackSpec, ConfigError> {
    let a_u = || match &raw.a_u {
        Some(v) => b.vector("attack.a_u", v, m),
        None => Err(b.invalid("attack.a_u", "required for this attack kind")),
    };
    let unused = |field: &str, present: bool| {
        if present {
            Err(b.invalid(&format!("attack.{field}"), "not used by this attack kind"))
        } else {
            Ok(())
        }
    };
    let zd_fields = raw.z0.is_some() || raw.scale.is_some() || raw.mode.is_some();
    match raw.kind {
        RawAttackKind::Covert => {
            unused("record_window", raw.record_window.is_some())?;
            unused("z0/scale/mode", zd_fields)?;
            unused("a_y", raw.a_y.is_some())?;
            Ok(AttackSpec::covert(raw.onset, a_u()?))
        }
        RawAttackKind::Replay => {
            unused("z0/scale/mode", zd_fields)?;
            unused("a_y", raw.a_y.is_some())?;
            let window = raw.record_window.unwrap_or(raw.onset as usize);
            Ok(AttackSpec::replay(raw.onset, a_u()?, window))
        }
        RawAttackKind::ZeroDynamics => {
            unused("a_u", raw.a_u.is_some())?;
            unused("record_window", raw.record_window.is_some())?;
            unused("a_y", raw.a_y.is_some())?;
            let [re, im] = raw
                .z0
                .ok_or_else(|| b.invalid("attack.z0", "required as [re, im] for zero-dynamics attacks"))?;
            let mode = match raw.mode.unwrap_or(RawZeroMode::Steered) {
                RawZeroMode::Exponential => ZeroDynamicsMode::Exponential,
                RawZeroMode::Steered => ZeroDynamicsMode::Steered,
                RawZeroMode::StateInjection => ZeroDynamicsMode::StateInjection,
            };
            Ok(AttackSpec::zero_dynamics(
                raw.onset,
                Complex::new(re, im),
                raw.scale.unwrap_or(1.0),
                mode,
            ))
        }
        RawAttackKind::Additive => {
            unused("record_window", raw.record_window.is_some())?;
            unused("z0/scale/mode", zd_fields)?;
            let a_y = match &raw.a_y {
                Some(v) => b.vector("attack.a_y", v, p)?,
                None => return Err(b.invalid("attack.a_y", "required for additive attacks")),
            };
            Ok(AttackSpec {
                kind: AttackKind::CustomAdditive { a_y },
                onset: raw.onset,
                a_u: a_u()?,
            })
        }
    }
}
