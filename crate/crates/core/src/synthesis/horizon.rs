//! Finite-horizon block matrices of the attack-to-residual channel `[Y −X]`.

use nalgebra::DMatrix;

use crate::error::{shape, Error, Result};
use crate::linalg::{hcat, vcat};
use crate::lti::StateSpaceModel;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHorizonMatrices {
    pub s: usize,
    /// `[−H_x̂ H_x̂u, H_u]`, `(s·m)×(n·m + s·m)`.
    pub x_sn: DMatrix<f64>,
    /// `[−H_x̂ H_x̂y, H_y]`, `(s·m)×(n·p + s·p)`.
    pub y_sn: DMatrix<f64>,
    pub a_l: DMatrix<f64>,
    pub b_l: DMatrix<f64>,
    /// `[F; F A_L; …; F A_L^{s−1}]`.
    pub h_xhat: DMatrix<f64>,
    pub h_u: DMatrix<f64>,
    pub h_y: DMatrix<f64>,
    /// `[A_L^{n−1} B_L, …, B_L]`.
    pub h_xhat_u: DMatrix<f64>,
    /// `[A_L^{n−1} L, …, L]`.
    pub h_xhat_y: DMatrix<f64>,
}

impl FiniteHorizonMatrices {
    /// `[Y_sn, −X_sn]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        hcat(&self.y_sn, &(-&self.x_sn))
    }
}

/// Observability-style stack `[G; G A; …; G A^{s−1}]`.
pub fn extended_observability(g: &DMatrix<f64>, a: &DMatrix<f64>, s: usize) -> DMatrix<f64> {
    let rows = g.nrows();
    let mut out = DMatrix::zeros(rows * s, a.ncols());
    let mut g_ak = g.clone();
    for i in 0..s {
        out.view_mut((i * rows, 0), g_ak.shape()).copy_from(&g_ak);
        g_ak = &g_ak * a;
    }
    out
}

/// Past-input reachability block `[A^{n−1} G, …, A G, G]`.
pub fn reachability_window(a: &DMatrix<f64>, g: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let cols = g.ncols();
    let mut out = DMatrix::zeros(a.nrows(), cols * n);
    let mut ak_g = g.clone();
    for j in (0..n).rev() {
        out.view_mut((0, j * cols), ak_g.shape()).copy_from(&ak_g);
        ak_g = a * &ak_g;
    }
    out
}

/// Lower block-triangular Toeplitz matrix with `diag` on the diagonal and
/// `out · a^{i−j−1} · inp` in block `(i, j)` below it.
pub fn block_toeplitz(
    diag: &DMatrix<f64>,
    out: &DMatrix<f64>,
    a: &DMatrix<f64>,
    inp: &DMatrix<f64>,
    s: usize,
) -> DMatrix<f64> {
    let (r, c) = diag.shape();
    let mut t = DMatrix::zeros(r * s, c * s);
    let mut markov = Vec::with_capacity(s);
    let mut ak_inp = inp.clone();
    for _ in 1..s {
        markov.push(out * &ak_inp);
        ak_inp = a * ak_inp;
    }
    for i in 0..s {
        t.view_mut((i * r, i * c), (r, c)).copy_from(diag);
        for j in 0..i {
            t.view_mut((i * r, j * c), (r, c)).copy_from(&markov[i - j - 1]);
        }
    }
    t
}

/// Assembles `X_sn`, `Y_sn` for horizon `s ≥ 1` from `A_L = A − LC`, `B_L = B − LD`.
pub fn finite_horizon_xy(
    plant: &StateSpaceModel,
    f: &DMatrix<f64>,
    l: &DMatrix<f64>,
    s: usize,
) -> Result<FiniteHorizonMatrices> {
    let (n, m, p) = (plant.states(), plant.inputs(), plant.outputs());
    if s == 0 {
        return Err(Error::InvalidArgument("finite horizon s must be at least 1".into()));
    }
    if f.shape() != (m, n) {
        return Err(Error::dim("state-feedback gain F", format!("{m}x{n}"), shape(f)));
    }
    if l.shape() != (n, p) {
        return Err(Error::dim("observer gain L", format!("{n}x{p}"), shape(l)));
    }
    let a_l = plant.a() - l * plant.c();
    let b_l = plant.b() - l * plant.d();
    let h_xhat = extended_observability(f, &a_l, s);
    let h_u = block_toeplitz(&DMatrix::identity(m, m), &(-f), &a_l, &b_l, s);
    let h_y = block_toeplitz(&DMatrix::zeros(m, p), &(-f), &a_l, l, s);
    let h_xhat_u = reachability_window(&a_l, &b_l, n);
    let h_xhat_y = reachability_window(&a_l, l, n);
    let x_sn = hcat(&(-(&h_xhat * &h_xhat_u)), &h_u);
    let y_sn = hcat(&(-(&h_xhat * &h_xhat_y)), &h_y);
    Ok(FiniteHorizonMatrices {
        s,
        x_sn,
        y_sn,
        a_l,
        b_l,
        h_xhat,
        h_u,
        h_y,
        h_xhat_u,
        h_xhat_y,
    })
}

/// Horizon-`s` operator of `[N̂ M̂; −X Y]` acting on `(a_u, a_y)` injected from rest.
///
/// Its columns are the stacked input windows `[a_u(0..s); a_y(0..s)]`; the rows
/// are the plant residual over `s` samples followed by the controller residual.
/// The operator is square, `s(m+p)`, and it is nonsingular exactly when no
/// nonzero additive attack keeps both residuals at zero over the window.
pub fn kernel_operator(plant: &StateSpaceModel, f: &DMatrix<f64>, l: &DMatrix<f64>, s: usize) -> Result<DMatrix<f64>> {
    let fh = finite_horizon_xy(plant, f, l, s)?;
    let (m, p) = (plant.inputs(), plant.outputs());
    let c = plant.c();
    let n_hat = block_toeplitz(plant.d(), c, &fh.a_l, &fh.b_l, s);
    let m_hat = block_toeplitz(&DMatrix::identity(p, p), c, &fh.a_l, &(-l), s);
    let top = hcat(&n_hat, &m_hat);
    let bottom = hcat(&(-&fh.h_u), &fh.h_y);
    debug_assert_eq!(top.ncols(), s * (m + p));
    Ok(vcat(&top, &bottom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::coprime::{plant_coprime, ControllerParams};
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn plant() -> StateSpaceModel {
        StateSpaceModel::strictly_proper(
            dmatrix![0.9, 0.2; -0.1, 0.7],
            dmatrix![1.0, 0.0; 0.5, 1.0],
            dmatrix![1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn zero_gain_collapses_blocks() {
        let sys = plant();
        let fh = finite_horizon_xy(&sys, &DMatrix::zeros(2, 2), &dmatrix![0.5; 0.1], 4).unwrap();
        assert_eq!(fh.x_sn.shape(), (8, 4 + 8));
        assert_eq!(fh.y_sn.shape(), (8, 2 + 4));
        assert_eq!(fh.x_sn.columns(0, 4), DMatrix::zeros(8, 4));
        assert_eq!(fh.x_sn.columns(4, 8), DMatrix::identity(8, 8));
        assert_eq!(fh.y_sn, DMatrix::zeros(8, 6));
    }

    #[test]
    fn scalar_single_step_by_hand() {
        let sys = StateSpaceModel::strictly_proper(dmatrix![0.8], dmatrix![2.0], dmatrix![1.0]).unwrap();
        let (f, l) = (dmatrix![-0.3], dmatrix![0.4]);
        let fh = finite_horizon_xy(&sys, &f, &l, 1).unwrap();
        // n = 1: H_x̂u = B_L = 2, X = [−F·B_L, 1]
        assert_relative_eq!(fh.x_sn, dmatrix![0.6, 1.0], epsilon = 1e-15);
        assert_relative_eq!(fh.y_sn, dmatrix![0.3 * 0.4, 0.0], epsilon = 1e-15);
    }

    #[test]
    fn toeplitz_blocks_are_markov_parameters() {
        let sys = plant();
        let params = ControllerParams::observer(dmatrix![-0.3, -0.1; 0.0, -0.2], dmatrix![0.5; 0.1]);
        let s = 6;
        let fh = finite_horizon_xy(&sys, &params.f, &params.l, s).unwrap();
        let cf = plant_coprime(&sys, &params).unwrap();
        let hx = cf.x.markov_parameters(s);
        let hy = cf.y.markov_parameters(s);
        let n = 2;
        for i in 0..s {
            for j in 0..=i {
                let xb = fh.x_sn.view((i * 2, n * 2 + j * 2), (2, 2));
                let yb = fh.y_sn.view((i * 2, n + j), (2, 1));
                assert!((xb - &hx[i - j]).amax() < 1e-10);
                assert!((yb - &hy[i - j]).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn kernel_operator_is_square_and_nonsingular() {
        let sys = plant();
        let k = kernel_operator(&sys, &dmatrix![-0.3, -0.1; 0.0, -0.2], &dmatrix![0.5; 0.1], 5).unwrap();
        assert_eq!(k.shape(), (15, 15));
        assert!(crate::linalg::min_singular_value(&k) > 1e-8);
    }
}
