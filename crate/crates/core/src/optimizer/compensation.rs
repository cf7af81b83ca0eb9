//! Residual-feedback adjustment that keeps the loop unchanged when `F` changes.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::lti::{CMatrix, StateSpaceModel};
use crate::synthesis::coprime::{plant_coprime, youla_controller, ControllerParams};

/// Residual feedback of the observer-based controller.
#[derive(Debug, Clone, PartialEq)]
pub enum ResidualFeedback {
    /// Gain `Q` in `u = F x̂ + Q r`.
    Static(DMatrix<f64>),
    /// Youla parameter `Q(z)` in `K = −(X − Q N̂)⁻¹(Y + Q M̂)`.
    Dynamic(StateSpaceModel),
}

impl ResidualFeedback {
    /// The equivalent Youla parameter.
    pub fn youla(&self) -> StateSpaceModel {
        match self {
            ResidualFeedback::Static(q) => StateSpaceModel::static_gain(-q),
            ResidualFeedback::Dynamic(q) => q.clone(),
        }
    }
}

/// Controller transfer `K` (from `y` to `u`) for gains `F`, `L` and residual feedback `q`.
pub fn controller_for(
    plant: &StateSpaceModel,
    l: &DMatrix<f64>,
    f: &DMatrix<f64>,
    q: &ResidualFeedback,
) -> Result<StateSpaceModel> {
    let factors = plant_coprime(plant, &ControllerParams::observer(f.clone(), l.clone()))?;
    youla_controller(&factors, &q.youla())
}

/// Closed-loop map from the reference `v` in `u = K y + v` to `[u; y]` at `z`.
pub fn closed_loop_response(plant: &StateSpaceModel, controller: &StateSpaceModel, z: Complex<f64>) -> Result<CMatrix> {
    let g = plant.evaluate(z)?;
    let k = controller.evaluate(z)?;
    let m = plant.inputs();
    let s = (CMatrix::identity(m, m) - &k * &g)
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("I - K G at z = {z}")))?;
    let y = &g * &s;
    let mut out = CMatrix::zeros(m + plant.outputs(), m);
    out.rows_mut(0, m).copy_from(&s);
    out.rows_mut(m, plant.outputs()).copy_from(&y);
    Ok(out)
}

/// Residual feedback for `F_new` that realizes the same controller as `(F_old, q_old)`.
///
/// With old factors `(M_o, N_o, X̂_o, Ŷ_o)`, new factors `(X_n, Y_n)` and both
/// in Youla form,
///
/// ```text
/// Q_new = X_n Ŷ_o − Y_n X̂_o + (X_n M_o + Y_n N_o) Q_old
/// ```
///
/// The result is reported as a static gain whenever its impulse response
/// beyond the feedthrough vanishes.
pub fn equivalent_q_compensation(
    plant: &StateSpaceModel,
    l: &DMatrix<f64>,
    f_old: &DMatrix<f64>,
    q_old: &ResidualFeedback,
    f_new: &DMatrix<f64>,
) -> Result<ResidualFeedback> {
    let old = plant_coprime(plant, &ControllerParams::observer(f_old.clone(), l.clone()))?;
    let new = plant_coprime(plant, &ControllerParams::observer(f_new.clone(), l.clone()))?;
    let q0 = q_old.youla();
    let term1 = old.y_hat.series(&new.x)?;
    let term2 = old.x_hat.series(&new.y)?;
    let map = old.m.series(&new.x)?.parallel(&old.n.series(&new.y)?)?;
    let q_new = term1.difference(&term2)?.parallel(&q0.series(&map)?)?;

    let scale = q_new.d().amax().max(1.0);
    let dynamic_part = q_new
        .markov_parameters(q_new.states() + 1)
        .iter()
        .skip(1)
        .map(|h| h.amax())
        .fold(0.0, f64::max);
    if dynamic_part <= 1e-9 * scale {
        Ok(ResidualFeedback::Static(-q_new.d()))
    } else {
        Ok(ResidualFeedback::Dynamic(q_new))
    }
}
