//! Plant-side controller twin and χ² attack detector.
//!
//! The twin replays the controller `x̂' = Ā x̂ + B̄₁ y + B̄₂ v̄`, `u = C̄ x̂ + D̄₁ y + D̄₂ v̄`
//! on the plant side, fed with the locally measured output `y₀`, and
//! compares its prediction `û` with the received input.

use nalgebra::{DMatrix, DVector};

use crate::detectors::chi2::chi2_threshold;
use crate::detectors::fault::{chi2_statistic, ResidualFilter};
use crate::error::{Error, Result};
use crate::linalg::{inverse_pd, solve_stein, symmetrize};
use crate::lti::{spectral_radius, StateSpaceModel};
use crate::noise::NoiseSpec;
use crate::synthesis::coprime::{controller_coprime, controller_realization, ControllerFactors, ControllerParams};
use crate::synthesis::kalman::{lqr_gain, riccati_fixed_point};

/// Gains and covariances of the controller twin.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinDesign {
    /// Controller realization with input `[y; v̄]` and output `u`.
    pub controller: StateSpaceModel,
    pub l_u: DMatrix<f64>,
    /// Steady-state covariance of `ε = x̂ − x̂_u`.
    pub p_u: DMatrix<f64>,
    pub sigma_ru: DMatrix<f64>,
    /// `B̄₁ Σ_η B̄₁ᵀ`.
    pub sigma_omega_bar: DMatrix<f64>,
    /// `D̄₁ Σ_η D̄₁ᵀ + Σ_ηu`.
    pub sigma_eta_bar: DMatrix<f64>,
    outputs: usize,
}

impl TwinDesign {
    /// `L_u` is the Kalman gain of `(Ā, C̄)` for `Σ_ω̄`, `Σ_η̄` (their
    /// correlation through `η` is left out of the gain). `P_u` and `Σ_ru` are
    /// the exact stationary covariances for that gain:
    ///
    /// ```text
    /// P_u = (Ā − L_u C̄) P_u (Ā − L_u C̄)ᵀ + (B̄₁ − L_u D̄₁) Σ_η (B̄₁ − L_u D̄₁)ᵀ + L_u Σ_ηu L_uᵀ
    /// Σ_ru = C̄ P_u C̄ᵀ + Σ_η̄
    /// ```
    pub fn new(plant: &StateSpaceModel, params: &ControllerParams, noise: &NoiseSpec) -> Result<Self> {
        let controller = controller_realization(plant, params)?;
        let p = plant.outputs();
        let (sigma_omega_bar, sigma_eta_bar) = twin_noise(&controller, noise, p);
        let kalman = riccati_fixed_point(controller.a(), controller.c(), &sigma_omega_bar, &sigma_eta_bar, None)?;
        Self::with_gain(controller, kalman.l, noise, p)
    }

    /// Same as [`TwinDesign::new`] with a caller-chosen twin gain.
    pub fn with_gain(controller: StateSpaceModel, l_u: DMatrix<f64>, noise: &NoiseSpec, p: usize) -> Result<Self> {
        let (sigma_omega_bar, sigma_eta_bar) = twin_noise(&controller, noise, p);
        let b1 = controller.b().columns(0, p).into_owned();
        let d1 = controller.d().columns(0, p).into_owned();
        let (se, su) = (noise.sigma_eta(), noise.sigma_eta_u());
        let a_c = controller.a() - &l_u * controller.c();
        let g = &b1 - &l_u * &d1;
        let w = &g * se * g.transpose() + &l_u * su * l_u.transpose();
        let p_u = solve_stein(&a_c, &symmetrize(&w))?;
        let sigma_ru = symmetrize(&(controller.c() * &p_u * controller.c().transpose() + &sigma_eta_bar));
        Ok(Self {
            controller,
            l_u,
            p_u,
            sigma_ru,
            sigma_omega_bar,
            sigma_eta_bar,
            outputs: p,
        })
    }

    /// Coprime factors of the controller with this twin gain; `F_u = 0`
    /// when `Ā` is Schur, otherwise a stabilizing LQR gain.
    pub fn factors(&self) -> Result<ControllerFactors> {
        let c = &self.controller;
        let f_u = if spectral_radius(c.a())? < 1.0 {
            DMatrix::zeros(c.inputs(), c.states())
        } else {
            lqr_gain(
                c.a(),
                c.b(),
                &DMatrix::identity(c.states(), c.states()),
                &DMatrix::identity(c.inputs(), c.inputs()),
            )?
        };
        controller_coprime(c, &f_u, &self.l_u)
    }

    pub fn plant_outputs(&self) -> usize {
        self.outputs
    }
}

fn twin_noise(controller: &StateSpaceModel, noise: &NoiseSpec, p: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let b1 = controller.b().columns(0, p);
    let d1 = controller.d().columns(0, p);
    let se = noise.sigma_eta();
    (
        symmetrize(&(b1 * se * b1.transpose())),
        symmetrize(&(d1 * se * d1.transpose() + noise.sigma_eta_u())),
    )
}

/// Twin state and χ² statistic of the plant-side detector.
#[derive(Debug, Clone)]
pub struct TwinDetector {
    controller: StateSpaceModel,
    l_u: DMatrix<f64>,
    xhat_u: DVector<f64>,
    sigma_ru: DMatrix<f64>,
    sigma_ru_inv: DMatrix<f64>,
    j_th_u: f64,
    p: usize,
    post_filter: Option<ResidualFilter>,
}

impl TwinDetector {
    pub fn new(design: &TwinDesign, alpha: f64) -> Result<Self> {
        let c = &design.controller;
        Ok(Self {
            controller: c.clone(),
            l_u: design.l_u.clone(),
            xhat_u: DVector::zeros(c.states()),
            sigma_ru: design.sigma_ru.clone(),
            sigma_ru_inv: inverse_pd(&design.sigma_ru, "twin residual covariance")?,
            j_th_u: chi2_threshold(c.outputs(), alpha)?,
            p: design.plant_outputs(),
            post_filter: None,
        })
    }

    pub fn with_post_filter(mut self, filter: StateSpaceModel, sigma_ru: &DMatrix<f64>) -> Result<Self> {
        if filter.inputs() != self.controller.outputs() {
            return Err(Error::dim(
                "twin residual post-filter",
                self.controller.outputs(),
                filter.inputs(),
            ));
        }
        self.post_filter = Some(ResidualFilter::new(filter)?);
        self.sigma_ru_inv = inverse_pd(sigma_ru, "filtered twin residual covariance")?;
        self.sigma_ru = sigma_ru.clone();
        Ok(self)
    }

    pub fn threshold(&self) -> f64 {
        self.j_th_u
    }
    pub fn sigma_ru(&self) -> &DMatrix<f64> {
        &self.sigma_ru
    }
    pub fn xhat_u(&self) -> &DVector<f64> {
        &self.xhat_u
    }

    /// `r_u = u_received − û` and `J_u`, then one twin step.
    pub fn step(
        &mut self,
        u_received: &DVector<f64>,
        y_local: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<(DVector<f64>, f64)> {
        let c = &self.controller;
        if y_local.len() != self.p || v.len() + self.p != c.inputs() || u_received.len() != c.outputs() {
            return Err(Error::dim(
                "twin inputs (u, y0, v)",
                format!("({}, {}, {})", c.outputs(), self.p, c.inputs() - self.p),
                format!("({}, {}, {})", u_received.len(), y_local.len(), v.len()),
            ));
        }
        let ybar = DVector::from_iterator(c.inputs(), y_local.iter().chain(v.iter()).copied());
        let u_hat = c.c() * &self.xhat_u + c.d() * &ybar;
        let r0 = u_received - u_hat;
        self.xhat_u = c.a() * &self.xhat_u + c.b() * &ybar + &self.l_u * &r0;
        let r = match &mut self.post_filter {
            Some(f) => f.apply(&r0),
            None => r0,
        };
        let j = chi2_statistic(&r, &self.sigma_ru_inv);
        Ok((r, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn setup() -> (StateSpaceModel, ControllerParams, NoiseSpec) {
        let sys = StateSpaceModel::strictly_proper(
            dmatrix![0.9, 0.2; -0.1, 0.7],
            dmatrix![1.0, 0.0; 0.5, 1.0],
            dmatrix![1.0, 0.0],
        )
        .unwrap();
        let params = ControllerParams::observer(dmatrix![-0.3, -0.1; 0.0, -0.2], dmatrix![0.5; 0.1]);
        let noise = NoiseSpec::new(
            DMatrix::identity(2, 2) * 0.001,
            dmatrix![0.01],
            DMatrix::identity(2, 2) * 0.01,
            0,
        )
        .unwrap();
        (sys, params, noise)
    }

    #[test]
    fn twin_replicates_noiseless_controller() {
        let (sys, params, noise) = setup();
        let design = TwinDesign::new(&sys, &params, &noise).unwrap();
        let mut twin = TwinDetector::new(&design, 0.01).unwrap();
        let ctrl = &design.controller;
        let mut x = dvector![1.0, -0.5];
        let mut xc = DVector::zeros(2);
        for _ in 0..100 {
            let y = sys.c() * &x;
            let ybar = DVector::from_iterator(3, y.iter().copied().chain([0.0, 0.0]));
            let u = ctrl.c() * &xc + ctrl.d() * &ybar;
            let (r, _) = twin.step(&u, &y, &DVector::zeros(2)).unwrap();
            assert!(r.amax() < 1e-12);
            xc = ctrl.a() * &xc + ctrl.b() * &ybar;
            x = sys.a() * &x + sys.b() * &u;
        }
    }

    #[test]
    fn covariance_is_lyapunov_fixed_point_and_stable() {
        let (sys, params, noise) = setup();
        let d = TwinDesign::new(&sys, &params, &noise).unwrap();
        let a_c = d.controller.a() - &d.l_u * d.controller.c();
        assert!(spectral_radius(&a_c).unwrap() < 1.0);
        let b1 = d.controller.b().columns(0, 1).into_owned();
        let d1 = d.controller.d().columns(0, 1).into_owned();
        let g = &b1 - &d.l_u * &d1;
        let rhs = &a_c * &d.p_u * a_c.transpose()
            + &g * noise.sigma_eta() * g.transpose()
            + &d.l_u * noise.sigma_eta_u() * d.l_u.transpose();
        assert!((rhs - &d.p_u).norm() < 1e-10);
        let cf = d.factors().unwrap();
        assert_eq!(cf.l_u, d.l_u);
    }
}
