//! Frozen reference values for the UAV model and structural identities of its loop.

use approx::assert_relative_eq;
use dualguard_core::linalg::{hcat, min_singular_value, sqrt_psd};
use dualguard_core::synthesis::{
    kernel_operator, lqr_gain, plant_coprime, solve_kalman, solve_loop_kalman, unified_solution, verify_bezout,
    ControllerParams, CoprimeFactors,
};
use dualguard_core::{spectral_radius, NoiseSpec, StateSpaceModel};
use nalgebra::{dmatrix, Complex, DMatrix};

fn uav() -> StateSpaceModel {
    StateSpaceModel::strictly_proper(
        dmatrix![0.8825, 0.0987; -0.8458, 0.9122],
        dmatrix![-0.0194, -0.0036; -1.9290, -0.3808],
        dmatrix![1.0, 0.0],
    )
    .unwrap()
}

fn noise() -> NoiseSpec {
    NoiseSpec::new(
        DMatrix::identity(2, 2) * 0.001,
        dmatrix![0.01],
        DMatrix::identity(2, 2) * 0.01,
        0,
    )
    .unwrap()
}

fn lqr() -> DMatrix<f64> {
    lqr_gain(uav().a(), uav().b(), &DMatrix::identity(2, 2), &DMatrix::identity(2, 2)).unwrap()
}

#[test]
fn spectral_radius_is_sqrt_det_for_complex_pair() {
    let a = uav().a().clone();
    let rho = spectral_radius(&a).unwrap();
    assert_relative_eq!(rho, a.determinant().sqrt(), epsilon = 1e-12);
    assert_relative_eq!(rho, 0.942601166984213, epsilon = 1e-12);
}

#[test]
fn kalman_matches_frozen_riccati_solution() {
    let sol = solve_kalman(&uav(), &noise()).unwrap();
    let p = dmatrix![
        0.0028705519070478577, -0.00025460658218986196;
        -0.00025460658218986196, 0.017252767050138305
    ];
    assert_relative_eq!(sol.p, p, epsilon = 1e-9);
    assert_relative_eq!(
        sol.l,
        dmatrix![0.1948737246406778; -0.20668615817461372],
        epsilon = 1e-8
    );
    assert_relative_eq!(sol.sigma_r[(0, 0)], 0.012870551907047858, epsilon = 1e-10);
}

#[test]
fn lqr_matches_frozen_gain_and_published_rounding() {
    let f = lqr();
    let frozen = dmatrix![
        -0.255013044932844, 0.38557930614317515;
        -0.051328715050921014, 0.07600475513211988
    ];
    assert_relative_eq!(f, frozen, epsilon = 1e-8);
    // published to four decimals in the u = −Kx convention
    let published = dmatrix![0.2550, -0.3856; 0.0513, -0.0760];
    assert!((&f + published).amax() < 1e-4);
}

#[test]
fn unified_solution_reduces_to_kalman() {
    let sys = uav();
    let nz = noise();
    let e_d = hcat(&sqrt_psd(nz.sigma_omega()), &DMatrix::zeros(2, 1));
    let f_d = hcat(&DMatrix::zeros(1, 2), &sqrt_psd(nz.sigma_eta()));
    let u = unified_solution(&sys, &DMatrix::identity(2, 2), &DMatrix::zeros(1, 2), &e_d, &f_d).unwrap();
    let k = solve_kalman(&sys, &nz).unwrap();
    assert!((&u.l_opt - &k.l).amax() <= 1e-6);
    assert!(u.riccati_residual(&sys) < 1e-10);
    assert_relative_eq!(u.v_opt[(0, 0)], 1.0 / k.sigma_r[(0, 0)].sqrt(), epsilon = 1e-9);
}

#[test]
fn loop_kalman_accounts_for_control_noise() {
    let sys = uav();
    let loop_k = solve_loop_kalman(&sys, &noise()).unwrap();
    let folded = NoiseSpec::new(
        noise().sigma_omega() + sys.b() * noise().sigma_eta_u() * sys.b().transpose(),
        dmatrix![0.01],
        DMatrix::zeros(2, 2),
        0,
    )
    .unwrap();
    let k = solve_kalman(&sys, &folded).unwrap();
    assert_relative_eq!(loop_k.l, k.l, epsilon = 1e-9);
    assert!(loop_k.sigma_r[(0, 0)] > solve_kalman(&sys, &noise()).unwrap().sigma_r[(0, 0)]);
}

fn factors() -> CoprimeFactors {
    let l = solve_kalman(&uav(), &noise()).unwrap().l;
    plant_coprime(&uav(), &ControllerParams::observer(lqr(), l)).unwrap()
}

#[test]
fn bezout_identity_holds() {
    assert!(verify_bezout(&factors(), 8).unwrap() <= 1e-8);
}

fn perturbed(sys: &StateSpaceModel, which: usize, i: usize, j: usize) -> StateSpaceModel {
    let mut mats = [sys.a().clone(), sys.b().clone(), sys.c().clone(), sys.d().clone()];
    mats[which][(i, j)] += 0.1;
    let [a, b, c, d] = mats;
    StateSpaceModel::new(a, b, c, d).unwrap()
}

#[test]
fn bezout_detects_every_single_entry_corruption() {
    let base = factors();
    let slots: [fn(&mut CoprimeFactors) -> &mut StateSpaceModel; 8] = [
        |f| &mut f.m_hat,
        |f| &mut f.n_hat,
        |f| &mut f.m,
        |f| &mut f.n,
        |f| &mut f.x_hat,
        |f| &mut f.y_hat,
        |f| &mut f.x,
        |f| &mut f.y,
    ];
    let mut weakest = f64::INFINITY;
    for slot in slots {
        let mut probe = base.clone();
        let sys = slot(&mut probe).clone();
        let shapes = [sys.a().shape(), sys.b().shape(), sys.c().shape(), sys.d().shape()];
        for (which, (rows, cols)) in shapes.into_iter().enumerate() {
            for i in 0..rows {
                for j in 0..cols {
                    let mut corrupted = base.clone();
                    *slot(&mut corrupted) = perturbed(&sys, which, i, j);
                    weakest = weakest.min(verify_bezout(&corrupted, 8).unwrap());
                }
            }
        }
    }
    assert!(weakest > 1e-3, "weakest corruption residual {weakest:e}");
}

#[test]
fn coprime_factors_recover_the_plant() {
    let f = factors();
    let sys = uav();
    for t in 0..12 {
        let z = Complex::from_polar(1.1, 0.5 * t as f64 + 0.1);
        let g = sys.evaluate(z).unwrap();
        let left = f.m_hat.evaluate(z).unwrap().try_inverse().unwrap() * f.n_hat.evaluate(z).unwrap();
        let right = f.n.evaluate(z).unwrap() * f.m.evaluate(z).unwrap().try_inverse().unwrap();
        assert!((&left - &g).norm() < 1e-10);
        assert!((&right - &g).norm() < 1e-10);
    }
}

#[test]
fn closed_loop_stealthy_attacks_are_impossible() {
    let l = solve_kalman(&uav(), &noise()).unwrap().l;
    for s in [1, 5, 10, 20] {
        let op = kernel_operator(&uav(), &lqr(), &l, s).unwrap();
        assert_eq!(op.shape(), (3 * s, 3 * s));
        assert!(min_singular_value(&op) > 1e-8, "rank deficient at s = {s}");
    }
}
