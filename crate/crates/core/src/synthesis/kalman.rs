//! Kalman gain, LQR gain and the unified residual generator.

use nalgebra::DMatrix;

use crate::error::{shape, Error, Result};
use crate::linalg::{check_psd, hcat, inv_sqrt_pd, inverse, sqrt_psd, symmetrize};
use crate::lti::{spectral_radius, StateSpaceModel};
use crate::noise::NoiseSpec;

/// Stopping tolerance on `‖P_{k+1} − P_k‖_F`.
pub const RICCATI_TOL: f64 = 1e-10;
/// Iteration cap for the fixed-point recursion.
pub const RICCATI_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanSolution {
    /// Predictor gain, `n×p`.
    pub l: DMatrix<f64>,
    /// Steady-state prediction error covariance.
    pub p: DMatrix<f64>,
    /// Innovation covariance `C P Cᵀ + R`.
    pub sigma_r: DMatrix<f64>,
}

/// Fixed point of
///
/// ```text
/// K = (A P Cᵀ + S) Σ⁻¹,  Σ = C P Cᵀ + R
/// P ← A P Aᵀ + W − K Σ Kᵀ
/// ```
///
/// iterated from `P = 0`.
pub fn riccati_fixed_point(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    w: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: Option<&DMatrix<f64>>,
) -> Result<KalmanSolution> {
    let n = a.nrows();
    let p_out = c.nrows();
    if a.ncols() != n || c.ncols() != n {
        return Err(Error::dim("Riccati state matrices", format!("{n}x{n}"), shape(a)));
    }
    if w.shape() != (n, n) {
        return Err(Error::dim("Riccati state weight", format!("{n}x{n}"), shape(w)));
    }
    if r.shape() != (p_out, p_out) {
        return Err(Error::dim(
            "Riccati output weight",
            format!("{p_out}x{p_out}"),
            shape(r),
        ));
    }
    let zero_cross = DMatrix::zeros(n, p_out);
    let s = s.unwrap_or(&zero_cross);
    if s.shape() != (n, p_out) {
        return Err(Error::dim("Riccati cross term", format!("{n}x{p_out}"), shape(s)));
    }

    let ct = c.transpose();
    let at = a.transpose();
    let gain = |p: &DMatrix<f64>| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let sigma = symmetrize(&(c * p * &ct + r));
        let k = (a * p * &ct + s) * inverse(&sigma, "innovation covariance")?;
        Ok((k, sigma))
    };

    let mut p = DMatrix::zeros(n, n);
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;
    while iterations < RICCATI_MAX_ITER {
        iterations += 1;
        let (k, sigma) = gain(&p)?;
        let next = symmetrize(&(a * &p * &at + w - &k * &sigma * k.transpose()));
        last_step = (&next - &p).norm();
        p = next;
        if !last_step.is_finite() {
            break;
        }
        if last_step <= RICCATI_TOL {
            let (l, sigma_r) = gain(&p)?;
            return Ok(KalmanSolution { l, p, sigma_r });
        }
    }
    Err(Error::NoConvergence {
        iterations,
        last_step,
        last_iterate: Box::new(p),
    })
}

/// Steady-state Kalman predictor for `(A, C)` with `Σ_ω` and `Σ_η` from `noise`.
pub fn solve_kalman(plant: &StateSpaceModel, noise: &NoiseSpec) -> Result<KalmanSolution> {
    check_noise_dims(plant, noise)?;
    let sol = riccati_fixed_point(plant.a(), plant.c(), noise.sigma_omega(), noise.sigma_eta(), None)?;
    check_observer(plant, &sol.l)?;
    Ok(sol)
}

/// Kalman predictor for the loop where the control noise `η_u` also drives the plant.
///
/// The disturbance is `d = (ω, η, η_u)` with the distribution matrices of
/// [`stochastic_disturbance`]; the gain is the unified solution for that `d`.
/// For `D = 0` this is the Kalman filter with process covariance `Σ_ω + B Σ_ηu Bᵀ`.
pub fn solve_loop_kalman(plant: &StateSpaceModel, noise: &NoiseSpec) -> Result<KalmanSolution> {
    check_noise_dims(plant, noise)?;
    let (e_d, f_d) = stochastic_disturbance(plant, noise);
    let w = &e_d * e_d.transpose();
    let r = &f_d * f_d.transpose();
    let s = &e_d * f_d.transpose();
    let sol = riccati_fixed_point(plant.a(), plant.c(), &w, &r, Some(&s))?;
    check_observer(plant, &sol.l)?;
    Ok(sol)
}

fn check_noise_dims(plant: &StateSpaceModel, noise: &NoiseSpec) -> Result<()> {
    let (n, m, p) = (plant.states(), plant.inputs(), plant.outputs());
    if noise.sigma_omega().nrows() != n {
        return Err(Error::dim("process noise covariance", n, noise.sigma_omega().nrows()));
    }
    if noise.sigma_eta().nrows() != p {
        return Err(Error::dim("measurement noise covariance", p, noise.sigma_eta().nrows()));
    }
    if noise.sigma_eta_u().nrows() != m {
        return Err(Error::dim("control noise covariance", m, noise.sigma_eta_u().nrows()));
    }
    Ok(())
}

fn check_observer(plant: &StateSpaceModel, l: &DMatrix<f64>) -> Result<()> {
    let radius = spectral_radius(&(plant.a() - l * plant.c()))?;
    if radius >= 1.0 {
        return Err(Error::NotSchur {
            what: "A - LC".into(),
            radius,
        });
    }
    Ok(())
}

/// `(E_d, F_d)` for the disturbance `d = (ω, η, η_u)`:
/// `E_d = [Σ_ω^{1/2}, 0, B Σ_ηu^{1/2}]`, `F_d = [0, Σ_η^{1/2}, D Σ_ηu^{1/2}]`.
pub fn stochastic_disturbance(plant: &StateSpaceModel, noise: &NoiseSpec) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, p) = (plant.states(), plant.outputs());
    let sw = sqrt_psd(noise.sigma_omega());
    let se = sqrt_psd(noise.sigma_eta());
    let su = sqrt_psd(noise.sigma_eta_u());
    let e_d = hcat(&hcat(&sw, &DMatrix::zeros(n, p)), &(plant.b() * &su));
    let f_d = hcat(&hcat(&DMatrix::zeros(p, n), &se), &(plant.d() * &su));
    (e_d, f_d)
}

/// State-feedback gain `F` minimizing `Σ xᵀ Q x + uᵀ R u` for `x' = Ax + Bu`,
/// in the closed-loop convention `A + BF`.
///
/// Solved as the Kalman problem of the dual pair `(Aᵀ, Bᵀ)`.
pub fn lqr_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_psd(q, "LQR state weight")?;
    check_psd(r, "LQR input weight")?;
    let dual = riccati_fixed_point(&a.transpose(), &b.transpose(), q, r, None)?;
    let f = -dual.l.transpose();
    let radius = spectral_radius(&(a + b * &f))?;
    if radius >= 1.0 {
        return Err(Error::NotSchur {
            what: "A + BF for the LQR gain".into(),
            radius,
        });
    }
    Ok(f)
}

/// Jointly optimal observer gain and post-filter for faults against disturbances.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedSolution {
    pub l_opt: DMatrix<f64>,
    pub v_opt: DMatrix<f64>,
    pub x_ric: DMatrix<f64>,
    pub e_f: DMatrix<f64>,
    pub f_f: DMatrix<f64>,
    pub e_d: DMatrix<f64>,
    pub f_d: DMatrix<f64>,
}

/// `L_opt = (A X Cᵀ + E_d F_dᵀ) V²`, `V = (C X Cᵀ + F_d F_dᵀ)^{-1/2}` with `X`
/// the stabilizing solution of
/// `A X Aᵀ − X + E_d E_dᵀ − L_opt (C X Cᵀ + F_d F_dᵀ) L_optᵀ = 0`.
pub fn unified_solution(
    plant: &StateSpaceModel,
    e_f: &DMatrix<f64>,
    f_f: &DMatrix<f64>,
    e_d: &DMatrix<f64>,
    f_d: &DMatrix<f64>,
) -> Result<UnifiedSolution> {
    let (n, p) = (plant.states(), plant.outputs());
    if e_d.nrows() != n || f_d.nrows() != p || e_d.ncols() != f_d.ncols() {
        return Err(Error::dim(
            "disturbance distribution (E_d, F_d)",
            format!("{n}xk and {p}xk"),
            format!("{} and {}", shape(e_d), shape(f_d)),
        ));
    }
    if e_f.nrows() != n || f_f.nrows() != p || e_f.ncols() != f_f.ncols() {
        return Err(Error::dim(
            "fault distribution (E_f, F_f)",
            format!("{n}xk and {p}xk"),
            format!("{} and {}", shape(e_f), shape(f_f)),
        ));
    }
    let w = e_d * e_d.transpose();
    let r = f_d * f_d.transpose();
    let s = e_d * f_d.transpose();
    let sol = riccati_fixed_point(plant.a(), plant.c(), &w, &r, Some(&s))?;
    let v_opt = inv_sqrt_pd(&sol.sigma_r, "C X Cᵀ + F_d F_dᵀ")?;
    Ok(UnifiedSolution {
        l_opt: sol.l,
        v_opt,
        x_ric: sol.p,
        e_f: e_f.clone(),
        f_f: f_f.clone(),
        e_d: e_d.clone(),
        f_d: f_d.clone(),
    })
}

impl UnifiedSolution {
    /// `V N̂_f`: the fault-to-residual system.
    pub fn fault_transfer(&self, plant: &StateSpaceModel) -> Result<StateSpaceModel> {
        self.residual_system(plant, &self.e_f, &self.f_f)
    }

    /// `V N̂_d`: the disturbance-to-residual system.
    pub fn disturbance_transfer(&self, plant: &StateSpaceModel) -> Result<StateSpaceModel> {
        self.residual_system(plant, &self.e_d, &self.f_d)
    }

    fn residual_system(&self, plant: &StateSpaceModel, e: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<StateSpaceModel> {
        StateSpaceModel::new(
            plant.a() - &self.l_opt * plant.c(),
            e - &self.l_opt * f,
            &self.v_opt * plant.c(),
            &self.v_opt * f,
        )
    }

    /// Frobenius norm of the Riccati residual at `X`.
    pub fn riccati_residual(&self, plant: &StateSpaceModel) -> f64 {
        let (a, c) = (plant.a(), plant.c());
        let inn = c * &self.x_ric * c.transpose() + &self.f_d * self.f_d.transpose();
        let lhs = a * &self.x_ric * a.transpose() - &self.x_ric + &self.e_d * self.e_d.transpose()
            - &self.l_opt * inn * self.l_opt.transpose();
        lhs.norm()
    }
}
