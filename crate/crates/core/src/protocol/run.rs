use num_complex::Complex64;

use super::params::BlockadeParams;
use super::schedule::{
    build_protocol_schedule, FinalDisplacement, HoldDuration, ProtocolConfig,
};
use crate::dynamics::{
    evolve, evolve_partial, DriveSchedule, EvolveOptions, Frame, Phase, Record, Trajectory,
};
use crate::error::{Error, Result};
use crate::quantum::{
    coherent_state, displacement_operator, g2_zero, lab_frame_dim, MomentMismatch,
    MomentWeights, QuantumState,
};

/// Weight dropped when moving between truncations above which the result
/// is flagged.
const DROPPED_WEIGHT_WARN: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    /// Initialization records are lab frame, hold records displaced frame
    /// and reversed-schedule records lab frame again.
    pub trajectory: Trajectory,
    pub schedule: DriveSchedule,
    pub tau: f64,
    pub hold_duration: f64,
    /// Largest displaced-frame `P(1)` during the hold.
    pub peak_p1: f64,
    /// Absolute time of the peak.
    pub peak_time: f64,
    pub g2_at_peak: Option<f64>,
    pub peak_mean_photons: f64,
    /// g2(0) one cavity lifetime into the hold (or at its end if shorter).
    pub g2_one_lifetime: Option<f64>,
    pub init_loss: f64,
    pub init_mismatch: MomentMismatch,
    /// Lab-frame state handed to the hold (after any `delta_alpha` substitution).
    pub init_state: QuantumState,
    /// Displaced-frame states at the start and end of the hold.
    pub hold_start_state: QuantumState,
    pub hold_end_state: QuantumState,
    /// State after the final displacement: displaced frame for
    /// [`FinalDisplacement::Exact`], lab frame for the reversed schedule.
    pub final_state: QuantumState,
    pub truncation_warning: bool,
    pub optimizer_run: bool,
}

impl ProtocolResult {
    pub fn final_p1(&self) -> f64 {
        self.final_state.population(1)
    }
}

fn evolve_options(config: &ProtocolConfig) -> EvolveOptions {
    EvolveOptions {
        stepping: config.stepping,
        samples: config.samples,
        monitor_positivity: config.monitor_positivity,
        ..Default::default()
    }
}

/// Runs the initialization, hold and final displacement for `params`.
///
/// The initialization is simulated in the lab frame from vacuum. With a
/// non-zero `delta_alpha` its outcome is replaced by the coherent state
/// `|alpha (1 + delta_alpha)>`. The hold is simulated in the frame displaced
/// by `alpha` and the final displacement is either the exact operator
/// `D(-alpha)` or the reversed drive schedule.
pub fn run_protocol(params: &BlockadeParams, config: &ProtocolConfig) -> Result<ProtocolResult> {
    run_protocol_with(params, config, false)
}

/// Like [`run_protocol`], but also returns every record (absolute times)
/// produced before a numerical failure.
pub fn run_protocol_recording(
    params: &BlockadeParams,
    config: &ProtocolConfig,
) -> (Result<ProtocolResult>, Vec<Record>) {
    let mut partial = Vec::new();
    let out = run_inner(params, config, false, &mut partial);
    (out, partial)
}

pub(crate) fn run_protocol_with(
    params: &BlockadeParams,
    config: &ProtocolConfig,
    optimizer_run: bool,
) -> Result<ProtocolResult> {
    run_inner(params, config, optimizer_run, &mut Vec::new())
}

fn keep(partial: &mut Vec<Record>, records: &[Record], offset: f64) {
    let last = partial.last().map(|r| r.t);
    for r in records {
        let t = r.t + offset;
        if last.is_some_and(|l| t <= l) {
            continue;
        }
        partial.push(Record { t, ..*r });
    }
}

fn stage(
    state: &QuantumState,
    schedule: &DriveSchedule,
    params: &BlockadeParams,
    opts: &EvolveOptions,
    offset: f64,
    partial: &mut Vec<Record>,
) -> Result<Trajectory> {
    let (traj, err) = evolve_partial(state, schedule, params.kerr, params.kappa, opts)?;
    if let Some(e) = err {
        keep(partial, &traj.records, offset);
        return Err(e);
    }
    Ok(traj)
}

fn run_inner(
    params: &BlockadeParams,
    config: &ProtocolConfig,
    optimizer_run: bool,
    partial: &mut Vec<Record>,
) -> Result<ProtocolResult> {
    let schedule = build_protocol_schedule(params, config)?;
    let alpha = params.alpha;
    let kappa = params.kappa;
    let e = config.errors;
    let mut warn = false;

    let target = alpha * (1.0 + e.delta_alpha.abs());
    let lab_dim = config.lab_dim.unwrap_or_else(|| lab_frame_dim(target));
    if lab_dim < lab_frame_dim(target) {
        warn = true;
    }
    let opts = evolve_options(config);

    // initialization
    let init = schedule.phase(Phase::Init);
    let tau = init.total_duration();
    let vacuum = QuantumState::vacuum(lab_dim)?;
    let mut trajectory = stage(&vacuum, &init, params, &opts, 0.0, partial)?;
    keep(partial, &trajectory.records, 0.0);
    let mut state = trajectory.final_state.clone();
    if e.delta_alpha != 0.0 {
        let c = coherent_state(alpha * (1.0 + e.delta_alpha), lab_dim)?;
        warn |= c.truncation_warning;
        state = c.value.to_mixed();
    }
    let init_mismatch = MomentMismatch::new(&state, alpha);
    let init_loss = init_mismatch.weighted(&MomentWeights::default(), 0.0);

    // into the displaced frame
    let d_minus = displacement_operator(-alpha, lab_dim)?;
    let (framed, dropped) = state.transform(&d_minus)?.resize(config.frame_dim)?;
    warn |= dropped > DROPPED_WEIGHT_WARN;

    let hold_sched = schedule
        .phase(Phase::Hold)
        .with_frame(Frame::Displaced { alpha });
    let lifetime = 1.0 / kappa;
    let mut hold_opts = opts.clone();
    let window = hold_sched.total_duration();
    hold_opts
        .checkpoints
        .push(("one_lifetime".into(), lifetime.min(window)));
    let mut hold = stage(&framed, &hold_sched, params, &hold_opts, tau, partial)?;

    if config.hold == HoldDuration::ScanToPeak {
        let peak_t = hold.peak_by(|r| r.p1).map(|r| r.t).unwrap_or(window);
        if peak_t < window && peak_t > 0.0 {
            let mut seg = hold_sched.segments[0];
            seg.duration = peak_t;
            let trimmed = DriveSchedule::new(hold_sched.frame, vec![seg])?;
            hold_opts.checkpoints = vec![("one_lifetime".into(), lifetime.min(peak_t))];
            hold = stage(&framed, &trimmed, params, &hold_opts, tau, partial)?;
        }
    }
    keep(partial, &hold.records, tau);
    let hold_duration = hold.records.last().map(|r| r.t).unwrap_or(0.0);
    let g2_one_lifetime = g2_zero(&hold.checkpoint("one_lifetime")?.state).ok();
    let peak = *hold
        .peak_by(|r| r.p1)
        .ok_or_else(|| Error::InvalidSchedule("hold produced no records".into()))?;
    let peak_mean_photons = hold.records.iter().map(|r| r.n).fold(0.0, f64::max);
    let held_state = hold.final_state.clone();
    trajectory.append(hold, tau);

    // final displacement
    let final_state = match config.final_displacement {
        FinalDisplacement::Exact => held_state.clone(),
        FinalDisplacement::ReversedSchedule => {
            let (wide, _) = held_state.resize(lab_dim)?;
            let lab_state = wide.transform(&displacement_operator(alpha, lab_dim)?)?;
            let fin = schedule.phase(Phase::Final);
            let tail = stage(&lab_state, &fin, params, &opts, tau + hold_duration, partial)?;
            let out = tail.final_state.clone();
            trajectory.append(tail, tau + hold_duration);
            out
        }
    };

    Ok(ProtocolResult {
        trajectory,
        schedule,
        tau,
        hold_duration,
        peak_p1: peak.p1,
        peak_time: peak.t + tau,
        g2_at_peak: peak.g2,
        peak_mean_photons,
        g2_one_lifetime,
        init_loss,
        init_mismatch,
        init_state: state,
        hold_start_state: framed,
        hold_end_state: held_state,
        final_state,
        truncation_warning: warn,
        optimizer_run,
    })
}

/// Peak mean photon number of the blockade Hamiltonian driven from vacuum
/// with coupling `lambda_nl`, over a window of `12 / kappa + 6 / |L_NL|`.
pub fn blockade_peak_photons(
    lambda_nl: f64,
    n: u32,
    kappa: f64,
    dim: usize,
) -> Result<f64> {
    use crate::dynamics::Segment;
    if lambda_nl == 0.0 {
        return Ok(0.0);
    }
    let window = 12.0 / kappa + 6.0 / lambda_nl.abs();
    let seg = Segment::constant(
        window,
        Complex64::new(lambda_nl, 0.0),
        Complex64::new(0.0, 0.0),
        0.0,
        Phase::Hold,
    );
    let sched = DriveSchedule::new(Frame::Blockade { n }, vec![seg])?;
    let opts = EvolveOptions {
        samples: 800,
        monitor_positivity: false,
        ..Default::default()
    };
    let traj = evolve(&QuantumState::vacuum(dim)?, &sched, 0.0, kappa, &opts)?;
    Ok(traj.records.iter().map(|r| r.n).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::super::params::derive_blockade_params;
    use super::super::schedule::ErrorSpec;
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn ideal_run_basic_properties() {
        let p = derive_blockade_params(4.4e6, c(2.0), 1, 1.934e8).unwrap();
        let r = run_protocol(&p, &ProtocolConfig::default()).unwrap();
        assert!(!r.truncation_warning);
        assert!(r.init_loss < 0.05, "init loss {}", r.init_loss);
        assert!(r.peak_time > r.tau && r.peak_time <= r.tau + r.hold_duration * (1.0 + 1e-12));
        assert!(r.g2_at_peak.unwrap() <= 1e-4);
        assert!(r.trajectory.times().windows(2).all(|w| w[1] > w[0]));
        assert!(r.trajectory.max_trace_error() < 1e-6);
        let peak = r.trajectory.records.iter().find(|x| x.t == r.peak_time).unwrap();
        assert!(peak.p2 < 1e-4 * peak.p1);
    }

    #[test]
    fn phase_of_alpha_does_not_change_g2() {
        let cfg = ProtocolConfig {
            hold: HoldDuration::Fixed(2.0 / 1.934e8),
            errors: ErrorSpec {
                delta_alpha: 0.01,
                ..Default::default()
            },
            ..Default::default()
        };
        let a = derive_blockade_params(4.4e6, c(2.0), 1, 1.934e8).unwrap();
        let b = derive_blockade_params(4.4e6, Complex64::from_polar(2.0, 1.1), 1, 1.934e8)
            .unwrap();
        let ra = run_protocol(&a, &cfg).unwrap();
        let rb = run_protocol(&b, &cfg).unwrap();
        let (ga, gb) = (ra.g2_one_lifetime.unwrap(), rb.g2_one_lifetime.unwrap());
        assert!((ga - gb).abs() <= 1e-6 * ga.max(1e-12), "{ga} vs {gb}");
        assert!((ra.peak_p1 - rb.peak_p1).abs() < 1e-8);
    }

    #[test]
    fn peak_photons_grow_with_coupling() {
        let kappa = 1.934e8;
        let lo = blockade_peak_photons(0.05 * kappa, 1, kappa, 8).unwrap();
        let hi = blockade_peak_photons(0.5 * kappa, 1, kappa, 8).unwrap();
        assert!(lo < hi && hi < 1.0);
        assert_eq!(blockade_peak_photons(0.0, 1, kappa, 8).unwrap(), 0.0);
    }
}
