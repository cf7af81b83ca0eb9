//! Observer, controller and factorization synthesis.

pub mod coprime;
pub mod horizon;
pub mod kalman;

pub use coprime::{
    controller_coprime, controller_realization, plant_coprime, verify_bezout, youla_controller, ControllerFactors,
    ControllerParams, CoprimeFactors, Feedforward,
};
pub use horizon::{finite_horizon_xy, kernel_operator, FiniteHorizonMatrices};
pub use kalman::{
    lqr_gain, riccati_fixed_point, solve_kalman, solve_loop_kalman, stochastic_disturbance, unified_solution,
    KalmanSolution, UnifiedSolution,
};
