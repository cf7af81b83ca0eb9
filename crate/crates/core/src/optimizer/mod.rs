//! Detection-oriented gain design: maximize the H₋ index of `[Y −X]` over stabilizing `F`.

mod compensation;
mod grid;
mod stochastic;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{shape, Error, Result};
use crate::linalg::min_singular_value;
use crate::lti::{spectral_radius, StateSpaceModel};
use crate::noise::NoiseSpec;
use crate::synthesis::horizon::finite_horizon_xy;
use crate::synthesis::kalman::{solve_loop_kalman, stochastic_disturbance, unified_solution, UnifiedSolution};

pub use compensation::{closed_loop_response, controller_for, equivalent_q_compensation, ResidualFeedback};
pub use grid::grid_feasibility_search;
pub use stochastic::stochastic_search;

/// Margin for the positive-definiteness test `λ_min(M) > PD_TOL`.
pub const PD_TOL: f64 = 1e-10;

/// Smallest singular value of `[Y_sn, −X_sn]` at horizon `s`.
pub fn hminus_index(plant: &StateSpaceModel, l: &DMatrix<f64>, f: &DMatrix<f64>, s: usize) -> Result<f64> {
    let fh = finite_horizon_xy(plant, f, l, s)?;
    Ok(min_singular_value(&fh.stacked()))
}

/// `λ_min(G Gᵀ)` for the stacked `G = [Y_sn, −X_sn]`; equals the squared H₋ index.
pub(crate) fn gram_min_eigenvalue(
    plant: &StateSpaceModel,
    l: &DMatrix<f64>,
    f: &DMatrix<f64>,
    s: usize,
) -> Result<f64> {
    let g = finite_horizon_xy(plant, f, l, s)?.stacked();
    let gram = &g * g.transpose();
    Ok(SymmetricEigen::new(gram).eigenvalues.min())
}

pub(crate) fn stabilizes(plant: &StateSpaceModel, f: &DMatrix<f64>) -> bool {
    spectral_radius(&(plant.a() + plant.b() * f)).is_ok_and(|r| r < 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    GridFeasibility,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub f_min: DMatrix<f64>,
    pub f_max: DMatrix<f64>,
    pub df: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub dgamma: f64,
    /// Finite horizon `s`.
    pub s: usize,
    pub mode: SearchMode,
    pub population: usize,
    pub generations: usize,
    pub mutation_scale: f64,
    /// Probability that a gene receives Gaussian mutation.
    pub mutation_rate: f64,
    pub tournament: usize,
    pub elitism: usize,
    /// Candidates sampled when the exhaustive grid is not used.
    pub random_candidates: usize,
    /// Largest `m·n` searched exhaustively.
    pub exhaustive_max_entries: usize,
    /// Gains placed in the initial population.
    pub seed_candidates: Vec<DMatrix<f64>>,
    pub seed: u64,
}

impl SearchConfig {
    /// Bounds `[lo, hi]` on every entry of an `m×n` gain, other settings at defaults.
    pub fn uniform(m: usize, n: usize, lo: f64, hi: f64) -> Self {
        Self {
            f_min: DMatrix::from_element(m, n, lo),
            f_max: DMatrix::from_element(m, n, hi),
            df: 0.5,
            gamma_min: 0.0,
            gamma_max: 5.0,
            dgamma: 0.01,
            s: 10,
            mode: SearchMode::GridFeasibility,
            population: 40,
            generations: 100,
            mutation_scale: 0.5,
            mutation_rate: 0.3,
            tournament: 3,
            elitism: 1,
            random_candidates: 20_000,
            exhaustive_max_entries: 4,
            seed_candidates: Vec::new(),
            seed: 0,
        }
    }

    pub fn validate(&self, plant: &StateSpaceModel) -> Result<()> {
        let (m, n) = (plant.inputs(), plant.states());
        for (name, b) in [("F_min", &self.f_min), ("F_max", &self.f_max)] {
            if b.shape() != (m, n) {
                return Err(Error::dim(format!("search bound {name}"), format!("{m}x{n}"), shape(b)));
            }
        }
        if self
            .f_min
            .iter()
            .zip(self.f_max.iter())
            .any(|(lo, hi)| lo.is_nan() || hi.is_nan() || lo >= hi)
        {
            return Err(Error::InvalidArgument(
                "search bounds need F_min < F_max entrywise".into(),
            ));
        }
        if self.df.is_nan() || self.df <= 0.0 {
            return Err(Error::InvalidArgument("grid step dF must be positive".into()));
        }
        if (self.dgamma.is_nan() || self.dgamma <= 0.0) || self.gamma_max < self.gamma_min || self.gamma_min < 0.0 {
            return Err(Error::InvalidArgument(
                "gamma grid needs 0 <= gamma_min <= gamma_max and dgamma > 0".into(),
            ));
        }
        if self.s == 0 {
            return Err(Error::InvalidArgument("finite horizon s must be at least 1".into()));
        }
        if self.mode == SearchMode::Stochastic && (self.population < 2 || self.tournament == 0) {
            return Err(Error::InvalidArgument(
                "stochastic search needs population >= 2 and tournament >= 1".into(),
            ));
        }
        if let Some(c) = self.seed_candidates.iter().find(|c| c.shape() != (m, n)) {
            return Err(Error::dim("seed candidate", format!("{m}x{n}"), shape(c)));
        }
        Ok(())
    }

    /// Candidate γ values from `gamma_max` down to `gamma_min`.
    pub fn gamma_grid(&self) -> Vec<f64> {
        let count = ((self.gamma_max - self.gamma_min) / self.dgamma + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.gamma_max - i as f64 * self.dgamma).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub f_star: Option<DMatrix<f64>>,
    pub gamma_star: f64,
    pub evaluations: usize,
    pub mode: SearchMode,
    pub feasible: bool,
    /// Best index after each generation (stochastic mode only).
    pub history: Vec<f64>,
}

impl OptimizationResult {
    fn infeasible(mode: SearchMode, evaluations: usize) -> Self {
        Self {
            f_star: None,
            gamma_star: 0.0,
            evaluations,
            mode,
            feasible: false,
            history: Vec::new(),
        }
    }
}

/// Runs the search selected by `config.mode`.
pub fn optimize_gain(plant: &StateSpaceModel, l: &DMatrix<f64>, config: &SearchConfig) -> Result<OptimizationResult> {
    match config.mode {
        SearchMode::GridFeasibility => grid_feasibility_search(plant, l, config),
        SearchMode::Stochastic => stochastic_search(plant, l, config),
    }
}

/// Output of [`two_stage_design`].
#[derive(Debug, Clone)]
pub struct TwoStageDesign {
    /// Observer gain, kept at its Kalman design throughout.
    pub l: DMatrix<f64>,
    pub search: OptimizationResult,
    /// Residual generator recomputed for the optimized loop.
    pub unified: UnifiedSolution,
}

/// Stage one maximizes the H₋ index over `F` with the loop Kalman gain `L`
/// fixed; stage two recomputes the unified residual generator for the loop
/// noise, with plant faults (`E_f = I`, `F_f = 0`) as the fault channel.
pub fn two_stage_design(plant: &StateSpaceModel, noise: &NoiseSpec, config: &SearchConfig) -> Result<TwoStageDesign> {
    let kalman = solve_loop_kalman(plant, noise)?;
    let search = optimize_gain(plant, &kalman.l, config)?;
    let (e_d, f_d) = stochastic_disturbance(plant, noise);
    let n = plant.states();
    let e_f = DMatrix::identity(n, n);
    let f_f = DMatrix::zeros(plant.outputs(), n);
    let unified = unified_solution(plant, &e_f, &f_f, &e_d, &f_d)?;
    Ok(TwoStageDesign {
        l: kalman.l,
        search,
        unified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    pub(crate) fn rlc() -> StateSpaceModel {
        StateSpaceModel::strictly_proper(
            dmatrix![1.0, -0.1; 0.1, 0.9],
            dmatrix![0.1; 0.0],
            DMatrix::identity(2, 2),
        )
        .unwrap()
    }

    #[test]
    fn zero_gain_has_unit_index() {
        let sys = rlc();
        let l = dmatrix![0.5, -0.05; 0.05, 0.4];
        assert_relative_eq!(
            hminus_index(&sys, &l, &DMatrix::zeros(1, 2), 10).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let f = dmatrix![-0.4, 0.2];
        let s = hminus_index(&sys, &l, &f, 6).unwrap();
        assert_relative_eq!(gram_min_eigenvalue(&sys, &l, &f, 6).unwrap(), s * s, epsilon = 1e-10);
    }

    #[test]
    fn gamma_grid_descends_inclusively() {
        let mut c = SearchConfig::uniform(1, 2, -1.0, 1.0);
        c.gamma_min = 0.5;
        c.gamma_max = 1.0;
        c.dgamma = 0.25;
        assert_eq!(c.gamma_grid(), vec![1.0, 0.75, 0.5]);
    }

    #[test]
    fn config_validation() {
        let sys = rlc();
        let mut c = SearchConfig::uniform(1, 2, -1.0, 1.0);
        assert!(c.validate(&sys).is_ok());
        c.df = 0.0;
        assert!(c.validate(&sys).is_err());
        let c = SearchConfig::uniform(2, 2, -1.0, 1.0);
        assert!(c.validate(&sys).is_err());
    }
}
