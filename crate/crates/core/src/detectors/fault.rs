//! Controller-side observer residual and χ² fault detector.

use nalgebra::{DMatrix, DVector};

use crate::detectors::chi2::chi2_threshold;
use crate::error::{shape, Error, Result};
use crate::linalg::{check_psd, inverse_pd};
use crate::lti::StateSpaceModel;

/// Stateful residual post-filter `r = R(z) r₀`.
#[derive(Debug, Clone)]
pub struct ResidualFilter {
    model: StateSpaceModel,
    state: DVector<f64>,
}

impl ResidualFilter {
    pub fn new(model: StateSpaceModel) -> Result<Self> {
        if model.inputs() != model.outputs() {
            return Err(Error::dim(
                "residual post-filter",
                "square transfer matrix",
                format!("{}x{}", model.outputs(), model.inputs()),
            ));
        }
        let state = DVector::zeros(model.states());
        Ok(Self { model, state })
    }

    pub fn apply(&mut self, r0: &DVector<f64>) -> DVector<f64> {
        let out = self.model.c() * &self.state + self.model.d() * r0;
        self.state = self.model.a() * &self.state + self.model.b() * r0;
        out
    }
}

/// χ² statistic `rᵀ Σ⁻¹ r`.
pub fn chi2_statistic(r: &DVector<f64>, sigma_inv: &DMatrix<f64>) -> f64 {
    (r.transpose() * sigma_inv * r)[(0, 0)].max(0.0)
}

/// Observer `x̂' = A x̂ + B u + L r` with residual `r = y − C x̂ − D u`.
#[derive(Debug, Clone)]
pub struct FaultDetector {
    plant: StateSpaceModel,
    l: DMatrix<f64>,
    xhat: DVector<f64>,
    sigma_r: DMatrix<f64>,
    sigma_r_inv: DMatrix<f64>,
    j_th: f64,
    post_filter: Option<ResidualFilter>,
}

impl FaultDetector {
    pub fn new(plant: &StateSpaceModel, l: &DMatrix<f64>, sigma_r: &DMatrix<f64>, alpha: f64) -> Result<Self> {
        let (n, p) = (plant.states(), plant.outputs());
        if l.shape() != (n, p) {
            return Err(Error::dim("observer gain L", format!("{n}x{p}"), shape(l)));
        }
        if sigma_r.shape() != (p, p) {
            return Err(Error::dim("residual covariance", format!("{p}x{p}"), shape(sigma_r)));
        }
        check_psd(sigma_r, "residual covariance")?;
        Ok(Self {
            plant: plant.clone(),
            l: l.clone(),
            xhat: DVector::zeros(n),
            sigma_r: sigma_r.clone(),
            sigma_r_inv: inverse_pd(sigma_r, "residual covariance")?,
            j_th: chi2_threshold(p, alpha)?,
            post_filter: None,
        })
    }

    /// Filters the raw residual through `R(z)`; `sigma_r` must then be the
    /// covariance of the filtered residual.
    pub fn with_post_filter(mut self, filter: StateSpaceModel, sigma_r: &DMatrix<f64>) -> Result<Self> {
        if filter.inputs() != self.plant.outputs() {
            return Err(Error::dim(
                "residual post-filter",
                self.plant.outputs(),
                filter.inputs(),
            ));
        }
        self.post_filter = Some(ResidualFilter::new(filter)?);
        self.sigma_r_inv = inverse_pd(sigma_r, "filtered residual covariance")?;
        self.sigma_r = sigma_r.clone();
        Ok(self)
    }

    pub fn xhat(&self) -> &DVector<f64> {
        &self.xhat
    }
    pub fn sigma_r(&self) -> &DMatrix<f64> {
        &self.sigma_r
    }
    pub fn threshold(&self) -> f64 {
        self.j_th
    }

    /// Raw residual `y − C x̂ − D u` at the current estimate.
    pub fn innovation(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        y - self.plant.c() * &self.xhat - self.plant.d() * u
    }

    pub fn statistic(&self, r: &DVector<f64>) -> f64 {
        chi2_statistic(r, &self.sigma_r_inv)
    }

    /// Advances the observer with the applied input and the raw residual.
    pub fn advance(&mut self, u: &DVector<f64>, r0: &DVector<f64>) {
        self.xhat = self.plant.a() * &self.xhat + self.plant.b() * u + &self.l * r0;
    }

    /// Residual and statistic for `(y, u)`, then one observer step.
    pub fn step(&mut self, y: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, f64) {
        let r0 = self.innovation(y, u);
        self.advance(u, &r0);
        let r = match &mut self.post_filter {
            Some(f) => f.apply(&r0),
            None => r0,
        };
        let j = self.statistic(&r);
        (r, j)
    }

    /// Post-filtered residual for a raw residual already consumed by [`Self::advance`].
    pub fn filter(&mut self, r0: DVector<f64>) -> DVector<f64> {
        match &mut self.post_filter {
            Some(f) => f.apply(&r0),
            None => r0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn unit_covariance_statistic_is_squared_norm() {
        let r = dvector![1.0, 1.0, 1.0];
        assert_eq!(chi2_statistic(&r, &DMatrix::identity(3, 3)), 3.0);
    }

    #[test]
    fn exact_model_gives_zero_residual() {
        let sys =
            StateSpaceModel::strictly_proper(dmatrix![0.9, 0.2; -0.1, 0.7], dmatrix![1.0; 0.5], dmatrix![1.0, 0.0])
                .unwrap();
        let mut det = FaultDetector::new(&sys, &dmatrix![0.5; 0.1], &dmatrix![1.0], 0.01).unwrap();
        let mut x = DVector::zeros(2);
        for k in 0..50 {
            let u = dvector![(k as f64 * 0.3).sin()];
            let y = sys.c() * &x;
            let (r, j) = det.step(&y, &u);
            assert!(r.amax() < 1e-14 && j < 1e-20);
            x = sys.a() * x + sys.b() * u;
        }
    }

    #[test]
    fn rejects_mismatched_gain() {
        let sys = StateSpaceModel::strictly_proper(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0]).unwrap();
        assert!(FaultDetector::new(&sys, &dmatrix![0.1, 0.2], &dmatrix![1.0], 0.01).is_err());
        assert!(FaultDetector::new(&sys, &dmatrix![0.1], &dmatrix![0.0], 0.01).is_err());
    }
}
