use kerr_blockade::cli::RunConfig;
use kerr_blockade::dynamics::{evolve, DriveSchedule, EvolveOptions, Frame, Phase, Segment};
use kerr_blockade::feasibility::{kerr_strength, one_photon_power, CavityMode, MaterialParams};
use kerr_blockade::protocol::{alpha_from_drive, derive_blockade_params};
use kerr_blockade::quantum::{
    coherent_state, displacement_operator, g2_zero, ladder_operators, moment_loss,
    number_operator, wigner, PhaseSpaceGrid, QuantumState,
};
use kerr_blockade::Error;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn arb_complex(max: f64) -> impl Strategy<Value = Complex64> {
    (0.0..max, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ladder_algebra(dim in 2usize..40) {
        let (a, ad) = ladder_operators(dim).unwrap();
        prop_assert_eq!(ad.matrix(), &a.matrix().adjoint());
        let n = number_operator(dim).unwrap();
        for i in 0..dim {
            for j in 0..dim {
                let want = if i == j { i as f64 } else { 0.0 };
                prop_assert!((n.get(i, j) - c(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn displacement_group_law(a in arb_complex(1.5), b in arb_complex(1.5)) {
        // |a| + |b| <= sqrt(dim) / 2 with dim = 40
        let dim = 40;
        let da = displacement_operator(a, dim).unwrap();
        let db = displacement_operator(b, dim).unwrap();
        let dab = displacement_operator(a + b, dim).unwrap();
        let phase = Complex64::from_polar(1.0, (a * b.conj()).im);
        let lhs = &da * &db;
        // the truncated operators only compose faithfully on the low-lying block
        let k = dim / 4;
        for i in 0..k {
            for j in 0..k {
                let diff = lhs.get(i, j) - phase * dab.get(i, j);
                prop_assert!(diff.norm() < 1e-6, "({i},{j}) {diff}");
            }
        }
    }

    #[test]
    fn g2_vanishes_on_zero_one_support(p1 in 0.01f64..1.0, phase in 0.0f64..std::f64::consts::TAU, dim in 3usize..12) {
        let mut v = DVector::from_element(dim, c(0.0, 0.0));
        v[0] = c((1.0 - p1).sqrt(), 0.0);
        v[1] = Complex64::from_polar(p1.sqrt(), phase);
        let s = QuantumState::pure(v).unwrap();
        prop_assert!(g2_zero(&s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn coherent_g2_is_one(alpha in arb_complex(3.0)) {
        prop_assume!(alpha.norm() > 0.05);
        let s = coherent_state(alpha, 60).unwrap();
        prop_assert!(!s.truncation_warning);
        prop_assert!((g2_zero(&s.value).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wigner_bounded(alpha in arb_complex(1.5), p in 0.0f64..1.0) {
        let dim = 20;
        let coh = coherent_state(alpha, dim).unwrap().value.density_matrix();
        let one = QuantumState::fock(1, dim).unwrap().density_matrix();
        let rho: DMatrix<Complex64> = coh * c(p, 0.0) + one * c(1.0 - p, 0.0);
        let s = QuantumState::mixed(rho).unwrap();
        let grid = PhaseSpaceGrid::square(c(0.0, 0.0), 2.5, 11).unwrap();
        let w = wigner(&s, &grid).unwrap().value;
        let bound = 2.0 / std::f64::consts::PI + 1e-9;
        prop_assert!(w.values.iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn moment_loss_nonnegative(alpha in arb_complex(2.0), beta in arb_complex(2.0)) {
        let s = coherent_state(beta, 40).unwrap().value;
        let loss = moment_loss(&s, alpha);
        prop_assert!(loss >= 0.0);
        let exact = moment_loss(&coherent_state(alpha, 40).unwrap().value, alpha);
        prop_assert!(exact < 1e-8);
    }

    #[test]
    fn blockade_params_scale(alpha in 0.1f64..50.0, s in 0.2f64..5.0) {
        let a = derive_blockade_params(4.4e6, c(alpha, 0.0), 1, 1.934e8).unwrap();
        let b = derive_blockade_params(4.4e6, c(alpha * s, 0.0), 1, 1.934e8).unwrap();
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
        prop_assert!(rel(b.lambda2.norm(), s * s * a.lambda2.norm()) < 1e-12);
        prop_assert!(rel(b.delta, s * s * a.delta) < 1e-12);
        prop_assert!(rel(b.lambda_nl.norm(), s * a.lambda_nl.norm()) < 1e-12);
    }

    #[test]
    fn drive_inversion_roundtrip(alpha in 0.01f64..300.0) {
        let p = derive_blockade_params(4.4e6, c(alpha, 0.0), 1, 1.934e8).unwrap();
        let (_, back) = alpha_from_drive(p.lambda1.norm(), 4.4e6, 1, 1.934e8).unwrap();
        prop_assert!((back - alpha).abs() <= 1e-9 * alpha);
    }

    #[test]
    fn drive_inversion_monotone(x in 1e6f64..1e13, f in 1.0f64..3.0) {
        let (_, a) = alpha_from_drive(x, 4.4e6, 1, 1.934e8).unwrap();
        let (_, b) = alpha_from_drive(x * f, 4.4e6, 1, 1.934e8).unwrap();
        prop_assert!(b >= a);
    }

    #[test]
    fn one_photon_power_scales_quadratically(
        omega in 1e14f64..1e16,
        l in arb_complex(1e11),
        kappa in 1e6f64..1e10,
        s in 0.1f64..10.0,
    ) {
        let p = one_photon_power(l, omega, kappa).unwrap();
        let q = one_photon_power(l * s, omega * s, kappa * s).unwrap();
        prop_assert!((q - s * s * p).abs() <= 1e-12 * q.abs().max(1e-300));
    }

    #[test]
    fn kerr_strength_scaling(omega in 1e14f64..1e16, v in 1e-21f64..1e-18, s in 0.5f64..4.0) {
        let mat = MaterialParams::silicon();
        let u = kerr_strength(&CavityMode::new(omega, 1e7, v), &mat).unwrap();
        let u_w = kerr_strength(&CavityMode::new(omega * s, 1e7, v), &mat).unwrap();
        let u_v = kerr_strength(&CavityMode::new(omega, 1e7, v * s), &mat).unwrap();
        prop_assert!((u_w / u - s * s).abs() < 1e-10 * s * s);
        prop_assert!((u_v * s / u - 1.0).abs() < 1e-10);
    }

    #[test]
    fn config_roundtrip(
        alpha in -5.0f64..5.0,
        q in 1e5f64..1e9,
        frame_dim in 4usize..40,
        delta in -1.0f64..1.0,
    ) {
        let text = format!(
            "[cavity]\nomega_rad_s = 1.215e15\nq = {q:e}\nveff_m3 = 1e-20\n\
             [blockade]\nalpha_re = {alpha:e}\n\
             [protocol]\nframe_dim = {frame_dim}\n[protocol.errors]\ndelta_alpha = {delta:e}\n"
        );
        let cfg = RunConfig::from_toml(&text).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(cfg, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn evolution_preserves_trace_and_hermiticity(
        l1 in arb_complex(5e7),
        l2 in arb_complex(2e7),
        delta in -5e7f64..5e7,
    ) {
        let kappa = 1e8;
        let seg = Segment::constant(3.0 / kappa, l1, l2, delta, Phase::Hold);
        let sched = DriveSchedule::new(Frame::Lab, vec![seg]).unwrap();
        let opts = EvolveOptions { samples: 20, ..Default::default() };
        let traj = evolve(&QuantumState::vacuum(16).unwrap(), &sched, 4.4e6, kappa, &opts);
        let traj = match traj {
            Err(Error::TruncationOverflow { .. }) => return Ok(()),
            other => other.unwrap(),
        };
        prop_assert!(traj.max_trace_error() < 3e-8);
        prop_assert!(traj.min_eigenvalue().unwrap() >= -1e-7);
        let rho = traj.final_state.density_matrix();
        prop_assert!((&rho - rho.adjoint()).camax() < 1e-12);
    }
}
