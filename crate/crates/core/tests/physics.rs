//! Deterministic checks of the model's physical invariants.

use kerr_blockade::dynamics::{
    evolve, DriveSchedule, EvolveOptions, Frame, Phase, Segment, Stepping,
};
use kerr_blockade::feasibility::{log_log_slope, one_photon_power};
use kerr_blockade::protocol::{derive_blockade_params, run_protocol, HoldDuration, ProtocolConfig};
use kerr_blockade::quantum::{
    coherent_state, displacement_operator, g2_zero, wigner, PhaseSpaceGrid, QuantumState,
};
use num_complex::Complex64;

const KAPPA: f64 = 1.934e8;
const KERR: f64 = 4.4e6;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Classical RK4 for `d<a>/dt = -i Delta <a> - kappa/2 <a> - i L1(t)`.
fn mean_field_oracle(
    segments: &[Segment],
    delta: f64,
    kappa: f64,
    t_end: f64,
    steps: usize,
) -> Complex64 {
    let drive = |t: f64| {
        let mut start = 0.0;
        for s in segments {
            if t <= start + s.duration {
                let f = ((t - start) / s.duration).clamp(0.0, 1.0);
                return s.lambda1_start + (s.lambda1_end - s.lambda1_start) * f;
            }
            start += s.duration;
        }
        segments.last().unwrap().lambda1_end
    };
    let i = c(0.0, 1.0);
    let f = |t: f64, a: Complex64| -i * delta * a - a * (kappa / 2.0) - i * drive(t);
    let h = t_end / steps as f64;
    let mut a = c(0.0, 0.0);
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = f(t, a);
        let k2 = f(t + h / 2.0, a + k1 * (h / 2.0));
        let k3 = f(t + h / 2.0, a + k2 * (h / 2.0));
        let k4 = f(t + h, a + k3 * h);
        a += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    a
}

#[test]
fn linear_cavity_mean_field_matches_scalar_ode() {
    let delta = 3.0e7;
    let kappa = 1.0e8;
    let ramp = |d, a: Complex64, b: Complex64| Segment {
        duration: d,
        lambda1_start: a,
        lambda1_end: b,
        lambda2_start: c(0.0, 0.0),
        lambda2_end: c(0.0, 0.0),
        delta,
        phase: Phase::Init,
        discontinuous: false,
    };
    let segs = vec![
        ramp(1e-8, c(0.0, 0.0), c(6e7, 3e7)),
        ramp(2e-8, c(6e7, 3e7), c(6e7, 3e7)),
        ramp(1e-8, c(6e7, 3e7), c(-2e7, 0.0)),
    ];
    let sched = DriveSchedule::new(Frame::Lab, segs.clone()).unwrap();
    let opts = EvolveOptions {
        samples: 9,
        ..Default::default()
    };
    let traj = evolve(&QuantumState::vacuum(24).unwrap(), &sched, 0.0, kappa, &opts).unwrap();
    for r in &traj.records {
        let want = mean_field_oracle(&segs, delta, kappa, r.t, 20_000);
        assert!(
            (r.mean_field - want).norm() < 1e-6,
            "t = {:e}: {} vs {}",
            r.t,
            r.mean_field,
            want
        );
    }
    assert!(traj.records.iter().any(|r| r.mean_field.norm() > 0.5));
}

#[test]
fn trace_and_positivity_over_ten_lifetimes() {
    let seg = Segment::constant(10.0 / KAPPA, c(6e7, -2e7), c(1e7, 0.0), -3e7, Phase::Hold);
    let sched = DriveSchedule::new(Frame::Lab, vec![seg]).unwrap();
    let traj = evolve(
        &QuantumState::vacuum(14).unwrap(),
        &sched,
        KERR,
        KAPPA,
        &EvolveOptions {
            samples: 60,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(traj.max_trace_error() < 1e-8 * 10.0);
    assert!(traj.min_eigenvalue().unwrap() >= -1e-7);
}

fn ideal_hold(dim: usize, stepping: Stepping, duration: f64) -> Vec<f64> {
    let p = derive_blockade_params(KERR, c(2.0, 0.0), 1, KAPPA).unwrap();
    let seg = Segment::constant(duration, p.lambda1, p.lambda2, p.delta, Phase::Hold);
    let sched = DriveSchedule::new(Frame::Displaced { alpha: p.alpha }, vec![seg]).unwrap();
    let opts = EvolveOptions {
        stepping,
        samples: 40,
        monitor_positivity: false,
        ..Default::default()
    };
    let traj = evolve(&QuantumState::vacuum(dim).unwrap(), &sched, KERR, KAPPA, &opts).unwrap();
    traj.records.iter().map(|r| r.p1).collect()
}

#[test]
fn halving_tolerances_changes_p1_by_less_than_1e6() {
    let t = 2.0 / KAPPA;
    let a = ideal_hold(15, Stepping::default(), t);
    let b = ideal_hold(
        15,
        Stepping::Adaptive {
            rtol: 5e-9,
            atol: 5e-11,
        },
        t,
    );
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn lab_and_displaced_frames_agree() {
    let p = derive_blockade_params(KERR, c(2.0, 0.0), 1, KAPPA).unwrap();
    let t_end = std::f64::consts::PI / (2.0 * p.lambda_nl.norm());
    let seg = Segment::constant(t_end, p.lambda1, p.lambda2, p.delta, Phase::Hold);
    let times: Vec<(String, f64)> = (1..=4)
        .map(|k| (format!("t{k}"), t_end * k as f64 / 4.0))
        .collect();
    let opts = EvolveOptions {
        samples: 5,
        monitor_positivity: false,
        checkpoints: times.clone(),
        ..Default::default()
    };
    let lab_dim = 40;
    let lab = evolve(
        &coherent_state(p.alpha, lab_dim).unwrap().value,
        &DriveSchedule::new(Frame::Lab, vec![seg]).unwrap(),
        KERR,
        KAPPA,
        &opts,
    )
    .unwrap();
    let disp = evolve(
        &QuantumState::vacuum(15).unwrap(),
        &DriveSchedule::new(Frame::Displaced { alpha: p.alpha }, vec![seg]).unwrap(),
        KERR,
        KAPPA,
        &opts,
    )
    .unwrap();
    let back = displacement_operator(-p.alpha, lab_dim).unwrap();
    for (name, _) in &times {
        let l = lab.checkpoint(name).unwrap().state.transform(&back).unwrap();
        let d = &disp.checkpoint(name).unwrap().state;
        assert!((l.population(1) - d.population(1)).abs() < 1e-4, "{name}");
        let (gl, gd) = (g2_zero(&l).unwrap(), g2_zero(d).unwrap());
        assert!((gl - gd).abs() < 1e-4, "{name}: {gl} vs {gd}");
    }
}

#[test]
fn ideal_protocol_tracks_vacuum_start_displaced_run() {
    let p = derive_blockade_params(KERR, c(2.0, 0.0), 1, KAPPA).unwrap();
    let cfg = ProtocolConfig::default();
    let res = run_protocol(&p, &cfg).unwrap();
    let hold = cfg.hold_duration(&p);
    let seg = Segment::constant(hold, p.lambda1, p.lambda2, p.delta, Phase::Hold);
    let direct = evolve(
        &QuantumState::vacuum(15).unwrap(),
        &DriveSchedule::new(Frame::Displaced { alpha: p.alpha }, vec![seg]).unwrap(),
        KERR,
        KAPPA,
        &EvolveOptions {
            monitor_positivity: false,
            ..Default::default()
        },
    )
    .unwrap();
    let direct_peak = direct.records.iter().map(|r| r.p1).fold(0.0, f64::max);
    assert!(
        (res.peak_p1 - direct_peak).abs() < 1e-4,
        "{} vs {}",
        res.peak_p1,
        direct_peak
    );
    assert!((res.final_p1() - direct.final_state.population(1)).abs() < 1e-4);
}

#[test]
fn hold_leakage_is_bounded_at_first_peak() {
    let p = derive_blockade_params(KERR, c(2.0, 0.0), 1, KAPPA).unwrap();
    let cfg = ProtocolConfig {
        hold: HoldDuration::ScanToPeak,
        monitor_positivity: false,
        ..Default::default()
    };
    let res = run_protocol(&p, &cfg).unwrap();
    let at_peak = res
        .trajectory
        .records
        .iter()
        .find(|r| r.t == res.peak_time)
        .unwrap();
    assert!(at_peak.p2 < 1e-4 * at_peak.p1);
}

#[test]
fn number_state_wigner_is_rotationally_symmetric() {
    for n in 0..4 {
        let s = QuantumState::fock(n, 16).unwrap();
        let k = kerr_blockade::quantum::WignerKernel::new(&s).unwrap();
        for r in [0.3, 0.9, 1.7] {
            let base = k.at(c(r, 0.0));
            for theta in [0.4, 1.3, 2.9, 4.4] {
                let v = k.at(Complex64::from_polar(r, theta));
                assert!((v - base).abs() < 1e-8, "n={n} r={r} theta={theta}");
            }
        }
    }
}

#[test]
fn wigner_normalization_of_coherent_state() {
    let s = coherent_state(c(1.0, -0.5), 40).unwrap().value;
    let grid = PhaseSpaceGrid::square(c(1.0, -0.5), 3.5, 71).unwrap();
    let w = wigner(&s, &grid).unwrap().value;
    assert!((w.integral() - 1.0).abs() < 0.02);
}

#[test]
fn one_photon_power_grows_as_alpha_to_the_sixth() {
    let alphas: Vec<f64> = (0..6).map(|k| 20.0 * 10f64.powf(k as f64 / 5.0)).collect();
    let powers: Vec<f64> = alphas
        .iter()
        .map(|&a| {
            let p = derive_blockade_params(KERR, c(a, 0.0), 1, KAPPA).unwrap();
            one_photon_power(p.lambda1, 1.215e15, KAPPA).unwrap()
        })
        .collect();
    let slope = log_log_slope(&alphas, &powers);
    assert!((slope - 6.0).abs() < 0.2, "{slope}");
}
