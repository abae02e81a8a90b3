use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::params::BlockadeParams;
use crate::dynamics::{DriveSchedule, Frame, Phase, Segment, Stepping};
use crate::error::{Error, Result};
use crate::quantum::DISPLACED_FRAME_DIM;

/// Length of the hold phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldDuration {
    /// `pi / (2 |L_NL|)`, falling back to `10 / kappa` when `L_NL = 0`.
    PiPulse,
    Fixed(f64),
    /// Scan a window of `max(pi / (2|L_NL|), 10 / kappa)` and stop the hold
    /// at the first maximum of `P(1)`.
    ScanToPeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalDisplacement {
    /// Apply `D(-alpha)` as an exact operator.
    Exact,
    /// Drive the cavity back with the time-reversed initialization, plateau
    /// sign flipped.
    ReversedSchedule,
}

/// Fractional errors applied to the ideal protocol. All values are
/// relative and must lie in `[-1, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorSpec {
    /// The post-initialization state is replaced by `|alpha (1 + delta_alpha)>`.
    pub delta_alpha: f64,
    pub lambda1_init: f64,
    pub lambda2_init: f64,
    pub lambda1_hold: f64,
    pub lambda2_hold: f64,
}

impl ErrorSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta_alpha", self.delta_alpha),
            ("lambda1_init", self.lambda1_init),
            ("lambda2_init", self.lambda2_init),
            ("lambda1_hold", self.lambda1_hold),
            ("lambda2_hold", self.lambda2_hold),
        ];
        for (name, v) in fields {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "error `{name}` = {v} is outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn is_ideal(&self) -> bool {
        *self == ErrorSpec::default()
    }
}

/// Free values of the initialization ramp: the `L1` plateau and the `L2`
/// value at the end of its slow ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitShape {
    pub lambda1_plateau: Complex64,
    pub lambda2_mid: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Initialization time; `None` means `0.01 / kappa`.
    pub tau: Option<f64>,
    /// `L1` ramp-up, plateau and ramp-to-target fractions of `tau`.
    pub lambda1_fractions: [f64; 3],
    /// `L2` slow-ramp and ramp-to-target fractions of `tau`.
    pub lambda2_fractions: [f64; 2],
    pub hold: HoldDuration,
    pub final_displacement: FinalDisplacement,
    /// Lab-frame truncation; `None` uses [`crate::quantum::lab_frame_dim`].
    pub lab_dim: Option<usize>,
    pub frame_dim: usize,
    pub errors: ErrorSpec,
    /// Replaces the linear warm start.
    pub init_shape: Option<InitShape>,
    pub stepping: Stepping,
    pub samples: usize,
    pub monitor_positivity: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            tau: None,
            lambda1_fractions: [0.1, 0.7, 0.2],
            lambda2_fractions: [0.8, 0.2],
            hold: HoldDuration::PiPulse,
            final_displacement: FinalDisplacement::Exact,
            lab_dim: None,
            frame_dim: DISPLACED_FRAME_DIM,
            errors: ErrorSpec::default(),
            init_shape: None,
            stepping: Stepping::default(),
            samples: 400,
            monitor_positivity: true,
        }
    }
}

fn check_fractions(name: &str, f: &[f64]) -> Result<()> {
    if f.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "{name} fractions must be non-negative: {f:?}"
        )));
    }
    let sum: f64 = f.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "{name} fractions sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

impl ProtocolConfig {
    pub fn tau(&self, kappa: f64) -> f64 {
        self.tau.unwrap_or(0.01 / kappa)
    }

    pub fn validate(&self, kappa: f64) -> Result<()> {
        let tau = self.tau(kappa);
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau = {tau} must be positive")));
        }
        check_fractions("lambda1", &self.lambda1_fractions)?;
        check_fractions("lambda2", &self.lambda2_fractions)?;
        if let HoldDuration::Fixed(t) = self.hold {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!("hold duration {t} must be positive")));
            }
        }
        self.errors.validate()
    }

    /// Hold length for `params` (the scan window for `ScanToPeak`).
    pub fn hold_duration(&self, params: &BlockadeParams) -> f64 {
        let lnl = params.lambda_nl.norm();
        let pi_pulse = if lnl > 0.0 {
            std::f64::consts::PI / (2.0 * lnl)
        } else {
            10.0 / params.kappa
        };
        match self.hold {
            HoldDuration::PiPulse => pi_pulse,
            HoldDuration::Fixed(t) => t,
            HoldDuration::ScanToPeak => pi_pulse.max(10.0 / params.kappa),
        }
    }
}

/// Piecewise-linear knots `(time, value)`.
type Knots = Vec<(f64, Complex64)>;

fn eval_knots(knots: &Knots, t: f64) -> Complex64 {
    for w in knots.windows(2) {
        let ((t0, v0), (t1, v1)) = (w[0], w[1]);
        if t <= t1 {
            if t1 <= t0 {
                return v1;
            }
            let f = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            return v0 + (v1 - v0) * f;
        }
    }
    knots.last().map(|k| k.1).unwrap_or_default()
}

/// Segments that reproduce two piecewise-linear tracks on `[0, total]`.
fn segments_from_knots(
    l1: &Knots,
    l2: &Knots,
    total: f64,
    delta: f64,
    phase: Phase,
) -> Vec<Segment> {
    let mut times: Vec<f64> = l1.iter().chain(l2.iter()).map(|k| k.0).collect();
    times.push(0.0);
    times.push(total);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * total);
    times
        .windows(2)
        .map(|w| Segment {
            duration: w[1] - w[0],
            lambda1_start: eval_knots(l1, w[0]),
            lambda1_end: eval_knots(l1, w[1]),
            lambda2_start: eval_knots(l2, w[0]),
            lambda2_end: eval_knots(l2, w[1]),
            delta,
            phase,
            discontinuous: false,
        })
        .collect()
}

fn init_knots(
    params: &BlockadeParams,
    config: &ProtocolConfig,
    shape: &InitShape,
    tau: f64,
) -> (Knots, Knots) {
    let [a, b, _] = config.lambda1_fractions;
    let [g, _] = config.lambda2_fractions;
    let zero = Complex64::new(0.0, 0.0);
    let l1 = vec![
        (0.0, zero),
        (a * tau, shape.lambda1_plateau),
        ((a + b) * tau, shape.lambda1_plateau),
        (tau, params.lambda1),
    ];
    let l2 = vec![(0.0, zero), (g * tau, shape.lambda2_mid), (tau, params.lambda2)];
    (l1, l2)
}

/// Initialization segments (lab frame) for a given ramp shape, with the
/// initialization error multipliers applied.
pub fn init_segments(
    params: &BlockadeParams,
    config: &ProtocolConfig,
    shape: &InitShape,
) -> Result<Vec<Segment>> {
    config.validate(params.kappa)?;
    let tau = config.tau(params.kappa);
    let (l1, l2) = init_knots(params, config, shape, tau);
    let e = &config.errors;
    Ok(segments_from_knots(&l1, &l2, tau, params.delta, Phase::Init)
        .into_iter()
        .map(|s| s.scaled(1.0 + e.lambda1_init, 1.0 + e.lambda2_init))
        .collect())
}

/// Time-reversed initialization with the `L1` plateau sign flipped.
fn final_segments(
    params: &BlockadeParams,
    config: &ProtocolConfig,
    shape: &InitShape,
    tau: f64,
) -> Vec<Segment> {
    let (l1, l2) = init_knots(params, config, shape, tau);
    let reverse = |k: &Knots, flip_interior: bool| -> Knots {
        let last = k.len() - 1;
        k.iter()
            .enumerate()
            .rev()
            .map(|(i, &(t, v))| {
                let v = if flip_interior && i != last { -v } else { v };
                (tau - t, v)
            })
            .collect()
    };
    segments_from_knots(
        &reverse(&l1, true),
        &reverse(&l2, false),
        tau,
        params.delta,
        Phase::Final,
    )
}

/// Mean field reached at `tau` by the linearized equation
/// `da/dt = -i Delta a - kappa a / 2 - i L1(t) - 2 i L2(t) a*`.
pub(crate) fn linear_mean_field(segments: &[Segment], kappa: f64) -> Complex64 {
    use crate::dynamics::Dopri5;
    let mut y = vec![Complex64::new(0.0, 0.0)];
    let mut rk = Dopri5::new(1);
    let i = Complex64::new(0.0, 1.0);
    let mut t0 = 0.0;
    for seg in segments {
        let start = t0;
        let mut f = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            let (l1, l2) = seg.drives_at(t - start);
            dy[0] = -i * seg.delta * y[0] - y[0] * (kappa / 2.0) - i * l1 - i * 2.0 * l2 * y[0].conj();
        };
        rk.invalidate();
        rk.h = 0.0;
        let stepping = Stepping::Adaptive {
            rtol: 1e-12,
            atol: 1e-14,
        };
        // a linear scalar ODE cannot fail with these tolerances
        let _ = rk.integrate(&mut f, start, start + seg.duration, &mut y, stepping, |_, _| Ok(()));
        t0 += seg.duration;
    }
    y[0]
}

/// Linear-cavity warm start: the `L1` plateau that brings the linearized mean
/// field to `alpha` at `tau`, with `L2` ramping at a constant rate.
pub fn warm_start_shape(params: &BlockadeParams, config: &ProtocolConfig) -> Result<InitShape> {
    config.validate(params.kappa)?;
    let tau = config.tau(params.kappa);
    let g = config.lambda2_fractions[0];
    let lambda2_mid = params.lambda2 * g;
    let field = |plateau: Complex64| {
        let shape = InitShape {
            lambda1_plateau: plateau,
            lambda2_mid,
        };
        let (l1, l2) = init_knots(params, config, &shape, tau);
        let segs = segments_from_knots(&l1, &l2, tau, params.delta, Phase::Init);
        linear_mean_field(&segs, params.kappa)
    };
    // the final field is real-linear in the plateau value
    let scale = (params.alpha.norm() / tau).max(1.0);
    let a0 = field(Complex64::new(0.0, 0.0));
    let ar = field(Complex64::new(scale, 0.0)) - a0;
    let ai = field(Complex64::new(0.0, scale)) - a0;
    let rhs = params.alpha - a0;
    let det = ar.re * ai.im - ai.re * ar.im;
    if det.abs() < 1e-300 {
        return Err(Error::InvalidParameter(
            "initialization ramp cannot reach alpha (plateau has no effect)".into(),
        ));
    }
    let x = (rhs.re * ai.im - ai.re * rhs.im) / det;
    let y = (ar.re * rhs.im - rhs.re * ar.im) / det;
    Ok(InitShape {
        lambda1_plateau: Complex64::new(x * scale, y * scale),
        lambda2_mid,
    })
}

/// The full lab-frame drive schedule: initialization, hold and (for
/// [`FinalDisplacement::ReversedSchedule`]) the reversed initialization.
/// Hold-phase error multipliers are applied to the hold segment.
pub fn build_protocol_schedule(
    params: &BlockadeParams,
    config: &ProtocolConfig,
) -> Result<DriveSchedule> {
    config.validate(params.kappa)?;
    let shape = match config.init_shape {
        Some(s) => s,
        None => warm_start_shape(params, config)?,
    };
    let tau = config.tau(params.kappa);
    let mut segments = init_segments(params, config, &shape)?;
    let e = &config.errors;
    let hold = Segment::constant(
        config.hold_duration(params),
        params.lambda1 * (1.0 + e.lambda1_hold),
        params.lambda2 * (1.0 + e.lambda2_hold),
        params.delta,
        Phase::Hold,
    );
    let hold_discontinuous = !e.is_ideal();
    segments.push(Segment {
        discontinuous: hold_discontinuous,
        ..hold
    });
    if config.final_displacement == FinalDisplacement::ReversedSchedule {
        let mut fin = final_segments(params, config, &shape, tau);
        if let Some(first) = fin.first_mut() {
            first.discontinuous = hold_discontinuous;
        }
        segments.extend(fin);
    }
    DriveSchedule::new(Frame::Lab, segments)
}

#[cfg(test)]
mod tests {
    use super::super::params::derive_blockade_params;
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn std_params() -> BlockadeParams {
        derive_blockade_params(4.4e6, c(2.0, 0.0), 1, 1.934e8).unwrap()
    }

    #[test]
    fn init_endpoints_hit_targets() {
        let p = std_params();
        let s = build_protocol_schedule(&p, &ProtocolConfig::default()).unwrap();
        let init = s.phase(Phase::Init);
        let last = init.segments.last().unwrap();
        assert!((last.lambda1_end - p.lambda1).norm() <= 1e-12 * p.lambda1.norm());
        assert!((last.lambda2_end - p.lambda2).norm() <= 1e-12 * p.lambda2.norm());
        let first = init.segments.first().unwrap();
        assert_eq!(first.lambda1_start, c(0.0, 0.0));
        assert!((init.total_duration() - 0.01 / 1.934e8).abs() < 1e-22);
    }

    #[test]
    fn default_hold_is_pi_pulse() {
        let p = std_params();
        let s = build_protocol_schedule(&p, &ProtocolConfig::default()).unwrap();
        let hold = s.phase(Phase::Hold).total_duration();
        assert!((hold - std::f64::consts::PI / (2.0 * 1.76e7)).abs() < 1e-20);
    }

    #[test]
    fn zero_alpha_gives_zero_schedule() {
        let p = derive_blockade_params(4.4e6, c(0.0, 0.0), 1, 1.934e8).unwrap();
        let cfg = ProtocolConfig {
            final_displacement: FinalDisplacement::ReversedSchedule,
            ..Default::default()
        };
        let s = build_protocol_schedule(&p, &cfg).unwrap();
        assert!(s.segments.iter().all(|seg| seg.lambda1_start.norm() < 1e-300
            && seg.lambda1_end.norm() < 1e-300
            && seg.lambda2_start.norm() == 0.0
            && seg.lambda2_end.norm() == 0.0
            && seg.delta == 0.0));
    }

    #[test]
    fn warm_start_reaches_alpha_in_linear_model() {
        let p = BlockadeParams::linear_cavity(c(1.5, 0.5), 1.934e8);
        let cfg = ProtocolConfig::default();
        let shape = warm_start_shape(&p, &cfg).unwrap();
        let segs = init_segments(&p, &cfg, &shape).unwrap();
        let a = linear_mean_field(&segs, p.kappa);
        assert!((a - p.alpha).norm() < 1e-9);
        // ramps count half: effective plateau length 0.05 + 0.7 + 0.1 of tau
        let tau = cfg.tau(p.kappa);
        let naive = Complex64::new(0.0, 1.0) * p.alpha / (0.85 * tau);
        assert!((shape.lambda1_plateau - naive).norm() / naive.norm() < 0.05);
    }

    #[test]
    fn reversed_schedule_is_continuous_and_ends_at_zero() {
        let p = std_params();
        let cfg = ProtocolConfig {
            final_displacement: FinalDisplacement::ReversedSchedule,
            ..Default::default()
        };
        let s = build_protocol_schedule(&p, &cfg).unwrap();
        let fin = s.phase(Phase::Final);
        assert!((fin.segments[0].lambda1_start - p.lambda1).norm() < 1e-3);
        let last = fin.segments.last().unwrap();
        assert_eq!(last.lambda1_end, c(0.0, 0.0));
        assert_eq!(last.lambda2_end, c(0.0, 0.0));
        let init = s.phase(Phase::Init);
        let plateau_init = init.segments[0].lambda1_end;
        assert!(fin
            .segments
            .iter()
            .any(|seg| (seg.lambda1_end + plateau_init).norm() < 1e-6 * plateau_init.norm()));
    }

    #[test]
    fn fractions_validated() {
        let p = std_params();
        let cfg = ProtocolConfig {
            lambda1_fractions: [0.5, 0.5, 0.5],
            ..Default::default()
        };
        assert!(build_protocol_schedule(&p, &cfg).is_err());
        let cfg = ProtocolConfig {
            errors: ErrorSpec {
                delta_alpha: 1.5,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(build_protocol_schedule(&p, &cfg).is_err());
    }
}
