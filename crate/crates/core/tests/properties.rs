use dualguard_core::detectors::{chi2_cdf, chi2_threshold, persistence_filter};
use dualguard_core::synthesis::verify_bezout;
use dualguard_core::synthesis::{plant_coprime, ControllerParams};
use dualguard_core::{spectral_radius, NoiseChannel, NoiseGenerator, NoiseSpec, SimState, StateSpaceModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn entries(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn model(n: usize, m: usize, p: usize) -> impl Strategy<Value = StateSpaceModel> {
    (entries(n * n), entries(n * m), entries(p * n), entries(p * m)).prop_map(move |(a, b, c, d)| {
        StateSpaceModel::new(
            DMatrix::from_vec(n, n, a),
            DMatrix::from_vec(n, m, b),
            DMatrix::from_vec(p, n, c),
            DMatrix::from_vec(p, m, d),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_is_linear(
        sys in model(3, 2, 2),
        x1 in entries(3), x2 in entries(3), u1 in entries(2), u2 in entries(2),
        alpha in -2.0f64..2.0, beta in -2.0f64..2.0,
    ) {
        let (x1, x2) = (DVector::from_vec(x1), DVector::from_vec(x2));
        let (u1, u2) = (DVector::from_vec(u1), DVector::from_vec(u2));
        let (w, eta) = (DVector::zeros(3), DVector::zeros(2));
        let state = |x: DVector<f64>| SimState { x, k: 0 };
        let (s1, y1) = sys.step(&state(x1.clone()), &u1, &w, &eta).unwrap();
        let (s2, y2) = sys.step(&state(x2.clone()), &u2, &w, &eta).unwrap();
        let (s, y) = sys.step(&state(&x1 * alpha + &x2 * beta), &(&u1 * alpha + &u2 * beta), &w, &eta).unwrap();
        prop_assert!((s.x - (s1.x * alpha + s2.x * beta)).amax() < 1e-12);
        prop_assert!((y - (y1 * alpha + y2 * beta)).amax() < 1e-12);
    }

    #[test]
    fn schur_matrices_drive_the_state_to_zero(sys in model(3, 2, 1), f in entries(6), x0 in entries(3)) {
        let f = DMatrix::from_vec(2, 3, f);
        let acl = sys.a() + sys.b() * &f;
        let rho = spectral_radius(&acl).unwrap();
        prop_assume!(rho < 0.97);
        let x0 = DVector::from_vec(x0);
        prop_assume!(x0.norm() > 1e-3);
        let mut x = x0.clone();
        let mut decayed = false;
        for _ in 0..5000 {
            x = &acl * x;
            if x.norm() < 1e-6 * x0.norm() {
                decayed = true;
                break;
            }
        }
        prop_assert!(decayed);
    }

    #[test]
    fn observer_factors_satisfy_bezout(sys in model(2, 1, 1), f in entries(2), l in entries(2)) {
        let f = DMatrix::from_vec(1, 2, f);
        let l = DMatrix::from_vec(2, 1, l);
        prop_assume!(spectral_radius(&(sys.a() + sys.b() * &f)).unwrap() < 0.99);
        prop_assume!(spectral_radius(&(sys.a() - &l * sys.c())).unwrap() < 0.99);
        let factors = plant_coprime(&sys, &ControllerParams::observer(f, l)).unwrap();
        prop_assert!(verify_bezout(&factors, 8).unwrap() <= 1e-8);
    }

    #[test]
    fn threshold_inverts_the_cdf(dof in 1usize..12, alpha in 1e-4f64..0.5) {
        let t = chi2_threshold(dof, alpha).unwrap();
        prop_assert!((chi2_cdf(dof, t) - (1.0 - alpha)).abs() < 1e-9);
        let tighter = chi2_threshold(dof, alpha / 2.0).unwrap();
        prop_assert!(tighter > t);
    }

    #[test]
    fn persistence_filter_requires_a_full_run(raw in prop::collection::vec(any::<bool>(), 0..64), window in 1usize..6) {
        let out = persistence_filter(&raw, window);
        prop_assert_eq!(out.len(), raw.len());
        for (k, &flag) in out.iter().enumerate() {
            let full = k + 1 >= window && raw[k + 1 - window..=k].iter().all(|&b| b);
            prop_assert_eq!(flag, full);
        }
    }
}

#[test]
fn noise_channels_are_uncorrelated() {
    let spec = NoiseSpec::new(
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2),
        9,
    )
    .unwrap();
    let mut gen = NoiseGenerator::new(&spec);
    let n = 20_000;
    let draws: Vec<[DVector<f64>; 3]> = (0..n).map(|_| NoiseChannel::ALL.map(|c| gen.draw(c))).collect();
    let bound = 4.0 / (n as f64).sqrt();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let cross = draws
            .iter()
            .fold(DMatrix::zeros(2, 2), |acc, d| acc + &d[a] * d[b].transpose())
            / n as f64;
        assert!(cross.amax() < bound, "channels {a} and {b}: {cross}");
    }
}

#[test]
fn adding_a_channel_draw_leaves_the_others_unchanged() {
    let spec = NoiseSpec::new(
        DMatrix::identity(2, 2),
        DMatrix::identity(1, 1),
        DMatrix::identity(1, 1),
        4,
    )
    .unwrap();
    let mut plain = NoiseGenerator::new(&spec);
    let mut busy = NoiseGenerator::new(&spec);
    for _ in 0..50 {
        let w = plain.draw(NoiseChannel::Process);
        let _ = busy.draw(NoiseChannel::Control);
        let _ = busy.draw(NoiseChannel::Measurement);
        assert_eq!(w, busy.draw(NoiseChannel::Process));
    }
}
