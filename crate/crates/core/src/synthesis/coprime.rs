//! Coprime factorizations of the plant and of the controller, the Bezout
//! identity and the Youla parameterization.
//!
//! Conventions: the closed loop uses `A + BF` and `A − LC`, and the
//! observer-based controller is `u = F x̂ + Q r + v̄`. The Youla parameter in
//! [`youla_controller`] follows `K = −(X − Q N̂)⁻¹(Y + Q M̂)`; a static residual
//! feedback gain `Q` of the observer-based controller corresponds to the
//! Youla parameter `−Q`.

use nalgebra::{DMatrix, DVector};

use crate::error::{shape, Error, Result};
use crate::linalg::{hcat, inverse};
use crate::lti::{spectral_radius, StateSpaceModel};

/// Known feedforward component `v̄` of the control law.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Feedforward {
    #[default]
    Zero,
    /// Repeats the listed vectors with period `len`.
    Periodic(Vec<DVector<f64>>),
}

impl Feedforward {
    pub fn at(&self, k: u64, m: usize) -> DVector<f64> {
        match self {
            Feedforward::Zero => DVector::zeros(m),
            Feedforward::Periodic(seq) if seq.is_empty() => DVector::zeros(m),
            Feedforward::Periodic(seq) => seq[(k % seq.len() as u64) as usize].clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Feedforward::Zero => true,
            Feedforward::Periodic(seq) => seq.iter().all(|v| v.iter().all(|&x| x == 0.0)),
        }
    }
}

/// Gains of the observer-based controller `u = F x̂ + Q r + v̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    pub f: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub feedforward: Feedforward,
}

impl ControllerParams {
    /// Gains with `Q = 0` and no feedforward.
    pub fn observer(f: DMatrix<f64>, l: DMatrix<f64>) -> Self {
        let q = DMatrix::zeros(f.nrows(), l.ncols());
        Self {
            f,
            l,
            q,
            feedforward: Feedforward::Zero,
        }
    }

    pub fn with_q(mut self, q: DMatrix<f64>) -> Self {
        self.q = q;
        self
    }

    /// Checks dimensions against `plant` and that `A + BF`, `A − LC` are Schur.
    pub fn validate(&self, plant: &StateSpaceModel) -> Result<()> {
        let (n, m, p) = (plant.states(), plant.inputs(), plant.outputs());
        if self.f.shape() != (m, n) {
            return Err(Error::dim("state-feedback gain F", format!("{m}x{n}"), shape(&self.f)));
        }
        if self.l.shape() != (n, p) {
            return Err(Error::dim("observer gain L", format!("{n}x{p}"), shape(&self.l)));
        }
        if self.q.shape() != (m, p) {
            return Err(Error::dim("residual feedback Q", format!("{m}x{p}"), shape(&self.q)));
        }
        if let Feedforward::Periodic(seq) = &self.feedforward {
            if let Some(v) = seq.iter().find(|v| v.len() != m) {
                return Err(Error::dim("feedforward pattern", m, v.len()));
            }
        }
        schur(&(plant.a() + plant.b() * &self.f), "A + BF")?;
        schur(&(plant.a() - &self.l * plant.c()), "A - LC")?;
        Ok(())
    }
}

pub(crate) fn schur(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let radius = spectral_radius(m)?;
    if radius >= 1.0 {
        return Err(Error::NotSchur {
            what: what.into(),
            radius,
        });
    }
    Ok(())
}

/// The eight factors of the plant's left and right coprime factorizations.
#[derive(Debug, Clone, PartialEq)]
pub struct CoprimeFactors {
    pub m_hat: StateSpaceModel,
    pub n_hat: StateSpaceModel,
    pub m: StateSpaceModel,
    pub n: StateSpaceModel,
    pub x_hat: StateSpaceModel,
    pub y_hat: StateSpaceModel,
    pub x: StateSpaceModel,
    pub y: StateSpaceModel,
}

/// Realizations
///
/// ```text
/// M̂ = (A−LC, −L, C, I)        N̂ = (A−LC, B−LD, C, D)
/// M = (A+BF, B, F, I)          N = (A+BF, B, C+DF, D)
/// X̂ = (A+BF, L, C+DF, I)       Ŷ = (A+BF, −L, F, 0)
/// X = (A−LC, −(B−LD), F, I)    Y = (A−LC, −L, F, 0)
/// ```
pub fn plant_coprime(plant: &StateSpaceModel, params: &ControllerParams) -> Result<CoprimeFactors> {
    params.validate(plant)?;
    let (a, b, c, d) = (plant.a(), plant.b(), plant.c(), plant.d());
    let (f, l) = (&params.f, &params.l);
    let (m, p) = (plant.inputs(), plant.outputs());
    let a_l = a - l * c;
    let b_l = b - l * d;
    let a_f = a + b * f;
    let c_f = c + d * f;
    let ip = DMatrix::identity(p, p);
    let im = DMatrix::identity(m, m);
    let ss = StateSpaceModel::new;
    Ok(CoprimeFactors {
        m_hat: ss(a_l.clone(), -l, c.clone(), ip.clone())?,
        n_hat: ss(a_l.clone(), b_l.clone(), c.clone(), d.clone())?,
        m: ss(a_f.clone(), b.clone(), f.clone(), im.clone())?,
        n: ss(a_f.clone(), b.clone(), c_f.clone(), d.clone())?,
        x_hat: ss(a_f.clone(), l.clone(), c_f, ip)?,
        y_hat: ss(a_f, -l, f.clone(), DMatrix::zeros(m, p))?,
        x: ss(a_l.clone(), -b_l, f.clone(), im)?,
        y: ss(a_l, -l, f.clone(), DMatrix::zeros(m, p))?,
    })
}

impl CoprimeFactors {
    /// `[X Y; −N̂ M̂]`.
    pub fn left_bezout(&self) -> Result<StateSpaceModel> {
        StateSpaceModel::block(&self.x, &self.y, &self.n_hat.scaled(-1.0), &self.m_hat)
    }

    /// `[M −Ŷ; N X̂]`.
    pub fn right_bezout(&self) -> Result<StateSpaceModel> {
        StateSpaceModel::block(&self.m, &self.y_hat.scaled(-1.0), &self.n, &self.x_hat)
    }
}

/// Largest absolute entry of the impulse response of
/// `[X Y; −N̂ M̂][M −Ŷ; N X̂] − I` over `horizon` samples.
pub fn verify_bezout(factors: &CoprimeFactors, horizon: usize) -> Result<f64> {
    let product = factors.right_bezout()?.series(&factors.left_bezout()?)?;
    if product.inputs() != product.outputs() {
        return Err(Error::dim(
            "Bezout product",
            "square transfer matrix",
            format!("{}x{}", product.outputs(), product.inputs()),
        ));
    }
    let k = product.inputs();
    let mut worst = 0.0f64;
    for (i, h) in product.markov_parameters(horizon.max(1)).into_iter().enumerate() {
        let dev = if i == 0 { h - DMatrix::identity(k, k) } else { h };
        worst = worst.max(dev.amax());
    }
    Ok(worst)
}

/// `K = −(X − Q N̂)⁻¹ (Y + Q M̂)` for a stable Youla parameter `Q` (`m×p`).
pub fn youla_controller(factors: &CoprimeFactors, q: &StateSpaceModel) -> Result<StateSpaceModel> {
    let (m, p) = (factors.x.outputs(), factors.y.inputs());
    if q.outputs() != m || q.inputs() != p {
        return Err(Error::dim(
            "Youla parameter",
            format!("{m}x{p}"),
            format!("{}x{}", q.outputs(), q.inputs()),
        ));
    }
    if !q.is_stable() {
        return Err(Error::NotSchur {
            what: "Youla parameter".into(),
            radius: spectral_radius(q.a())?,
        });
    }
    let left = factors.x.difference(&factors.n_hat.series(q)?)?;
    let right = factors.y.parallel(&factors.m_hat.series(q)?)?;
    inverse(left.d(), "feedthrough of X - Q N̂")?;
    Ok(right.series(&left.inverse()?)?.scaled(-1.0))
}

/// The observer-based controller as a system from `[y; v̄]` to `u`.
///
/// With `W = (I + QD)⁻¹`:
///
/// ```text
/// Ā = A−LC + (B−LD) W (F−QC)     B̄ = [L + (B−LD) W Q,  (B−LD) W]
/// C̄ = W (F−QC)                   D̄ = [W Q,  W]
/// ```
///
/// which for `D = 0` is `Ā = A + BF − BQC − LC`, `B̄ = [L + BQ, B]`,
/// `C̄ = F − QC`, `D̄ = [Q, I]`.
pub fn controller_realization(plant: &StateSpaceModel, params: &ControllerParams) -> Result<StateSpaceModel> {
    params.validate(plant)?;
    let (a, b, c, d) = (plant.a(), plant.b(), plant.c(), plant.d());
    let (f, l, q) = (&params.f, &params.l, &params.q);
    let m = plant.inputs();
    let w = inverse(&(DMatrix::identity(m, m) + q * d), "I + QD")?;
    let a_l = a - l * c;
    let b_l = b - l * d;
    let c_bar = &w * (f - q * c);
    let a_bar = &a_l + &b_l * &c_bar;
    let b1 = l + &b_l * &w * q;
    let b2 = &b_l * &w;
    let d1 = &w * q;
    StateSpaceModel::new(a_bar, hcat(&b1, &b2), c_bar, hcat(&d1, &w))
}

/// Coprime factors of the controller seen as a plant with input `[y; v̄]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerFactors {
    pub m_hat_y: StateSpaceModel,
    pub n_hat_y: StateSpaceModel,
    pub m_y: StateSpaceModel,
    pub n_y: StateSpaceModel,
    pub f_u: DMatrix<f64>,
    pub l_u: DMatrix<f64>,
}

/// Realizations
///
/// ```text
/// M̂_y = (Ā−L_uC̄, −L_u, C̄, I)    N̂_y = (Ā−L_uC̄, B̄−L_uD̄, C̄, D̄)
/// M_y = (Ā+B̄F_u, B̄, F_u, I)      N_y = (Ā+B̄F_u, B̄, C̄+D̄F_u, D̄)
/// ```
pub fn controller_coprime(
    controller: &StateSpaceModel,
    f_u: &DMatrix<f64>,
    l_u: &DMatrix<f64>,
) -> Result<ControllerFactors> {
    let (nc, ins, outs) = (controller.states(), controller.inputs(), controller.outputs());
    if f_u.shape() != (ins, nc) {
        return Err(Error::dim(
            "controller feedback gain F_u",
            format!("{ins}x{nc}"),
            shape(f_u),
        ));
    }
    if l_u.shape() != (nc, outs) {
        return Err(Error::dim("twin gain L_u", format!("{nc}x{outs}"), shape(l_u)));
    }
    let (a, b, c, d) = (controller.a(), controller.b(), controller.c(), controller.d());
    let a_l = a - l_u * c;
    let a_f = a + b * f_u;
    schur(&a_l, "controller A - L_u C")?;
    schur(&a_f, "controller A + B F_u")?;
    let ss = StateSpaceModel::new;
    Ok(ControllerFactors {
        m_hat_y: ss(a_l.clone(), -l_u, c.clone(), DMatrix::identity(outs, outs))?,
        n_hat_y: ss(a_l, b - l_u * d, c.clone(), d.clone())?,
        m_y: ss(a_f.clone(), b.clone(), f_u.clone(), DMatrix::identity(ins, ins))?,
        n_y: ss(a_f, b.clone(), c + d * f_u, d.clone())?,
        f_u: f_u.clone(),
        l_u: l_u.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::CMatrix;
    use nalgebra::{dmatrix, Complex};

    fn plant() -> StateSpaceModel {
        StateSpaceModel::strictly_proper(
            dmatrix![0.9, 0.2; -0.1, 0.7],
            dmatrix![1.0, 0.0; 0.5, 1.0],
            dmatrix![1.0, 0.0],
        )
        .unwrap()
    }

    fn params() -> ControllerParams {
        ControllerParams::observer(dmatrix![-0.3, -0.1; 0.0, -0.2], dmatrix![0.5; 0.1])
    }

    #[test]
    fn zero_feedback_collapses_factors() {
        let sys = plant();
        let p = ControllerParams::observer(DMatrix::zeros(2, 2), DMatrix::zeros(2, 1));
        let f = plant_coprime(&sys, &p).unwrap();
        let z = Complex::new(0.2, 1.3);
        assert!((f.x.evaluate(z).unwrap() - CMatrix::identity(2, 2)).norm() < 1e-15);
        assert!(f.y.evaluate(z).unwrap().norm() < 1e-15);
        assert!((f.m.evaluate(z).unwrap() - CMatrix::identity(2, 2)).norm() < 1e-15);
        assert!((f.n.evaluate(z).unwrap() - sys.evaluate(z).unwrap()).norm() < 1e-15);
        assert!(verify_bezout(&f, 8).unwrap() <= 1e-12);
        assert_eq!(f.n_hat.d(), &DMatrix::zeros(1, 2));
    }

    #[test]
    fn bezout_holds_and_detects_corruption() {
        let sys = plant();
        let f = plant_coprime(&sys, &params()).unwrap();
        assert!(verify_bezout(&f, 8).unwrap() <= 1e-12);
        let mut bad = f.clone();
        let mut c = bad.y.c().clone();
        c[(0, 0)] += 0.1;
        bad.y = StateSpaceModel::new(bad.y.a().clone(), bad.y.b().clone(), c, bad.y.d().clone()).unwrap();
        assert!(verify_bezout(&bad, 8).unwrap() > 1e-3);
    }

    #[test]
    fn youla_with_zero_parameter_is_the_observer_controller() {
        let sys = plant();
        let p = params();
        let f = plant_coprime(&sys, &p).unwrap();
        let k = youla_controller(&f, &StateSpaceModel::zero_gain(2, 1)).unwrap();
        // observer controller: x̂' = (A - LC + BF) x̂ + L y, u = F x̂
        let obs = StateSpaceModel::new(
            sys.a() - &p.l * sys.c() + sys.b() * &p.f,
            p.l.clone(),
            p.f.clone(),
            DMatrix::zeros(2, 1),
        )
        .unwrap();
        for t in 0..20 {
            let theta = 0.3 * t as f64 + 0.1;
            let z = Complex::from_polar(1.05, theta);
            assert!((k.evaluate(z).unwrap() - obs.evaluate(z).unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn static_residual_feedback_matches_negated_youla_parameter() {
        let sys = plant();
        let q = dmatrix![0.4; -0.2];
        let p = params().with_q(q.clone());
        let ctrl = controller_realization(&sys, &p).unwrap();
        let f = plant_coprime(&sys, &p).unwrap();
        let k = youla_controller(&f, &StateSpaceModel::static_gain(-q)).unwrap();
        let z = Complex::new(1.1, 0.4);
        let from_y = ctrl.evaluate(z).unwrap().columns(0, 1).into_owned();
        assert!((k.evaluate(z).unwrap() - from_y).norm() < 1e-10);
    }

    #[test]
    fn controller_realization_matches_printed_form_for_strictly_proper_plant() {
        let sys = plant();
        let q = dmatrix![0.4; -0.2];
        let p = params().with_q(q.clone());
        let ctrl = controller_realization(&sys, &p).unwrap();
        let (a, b, c) = (sys.a(), sys.b(), sys.c());
        let a_bar = a + b * &p.f - b * &q * c - &p.l * c;
        assert!((ctrl.a() - a_bar).amax() < 1e-15);
        assert!((ctrl.b() - hcat(&(&p.l + b * &q), b)).amax() < 1e-15);
        assert!((ctrl.c() - (&p.f - &q * c)).amax() < 1e-15);
        assert_eq!(ctrl.d(), &hcat(&q, &DMatrix::identity(2, 2)));
    }

    #[test]
    fn controller_factor_shapes() {
        let sys = plant();
        let ctrl = controller_realization(&sys, &params()).unwrap();
        let f_u = DMatrix::zeros(3, 2);
        let l_u = DMatrix::zeros(2, 2);
        let cf = controller_coprime(&ctrl, &f_u, &l_u).unwrap();
        assert_eq!((cf.n_hat_y.outputs(), cf.n_hat_y.inputs()), (2, 3));
        assert_eq!(cf.m_hat_y.a(), ctrl.a());
        assert_eq!(cf.m_hat_y.d(), &DMatrix::identity(2, 2));
        assert_eq!(cf.m_hat_y.b(), &DMatrix::zeros(2, 2));
    }

    #[test]
    fn rejects_destabilizing_gains() {
        let sys = plant();
        let p = ControllerParams::observer(dmatrix![5.0, 0.0; 0.0, 5.0], dmatrix![0.5; 0.1]);
        assert!(matches!(plant_coprime(&sys, &p), Err(Error::NotSchur { .. })));
    }
}
