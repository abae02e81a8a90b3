//! Gradient descent on the initialization ramp against the weighted moment
//! loss, warm-started from the linear-cavity solution.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, DriveSchedule, EvolveOptions, Frame, Stepping};
use crate::error::{Error, Result};
use crate::protocol::{
    init_segments, run_protocol_with, warm_start_shape, BlockadeParams, InitShape,
    ProtocolConfig, ProtocolResult,
};
use crate::quantum::{lab_frame_dim, MomentMismatch, MomentWeights, QuantumState};

/// Fixed steps per initialization inside the objective.
pub const OBJECTIVE_STEPS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub weights: MomentWeights,
    /// First trial step in normalized parameter units.
    pub initial_step: f64,
    /// Step shrink factor on a rejected trial.
    pub backtrack: f64,
    pub max_iterations: usize,
    /// Stop once the loss falls below this value.
    pub loss_tolerance: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
    /// Smoothing of `|x|` as `sqrt(x^2 + eps^2)`.
    pub smoothing: f64,
    /// Which of `[Re L1 plateau, Im L1 plateau, Re L2 mid, Im L2 mid]` move.
    pub free: [bool; 4],
    /// Smallest trial step before the line search gives up.
    pub min_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            weights: MomentWeights::default(),
            initial_step: 0.05,
            backtrack: 0.5,
            max_iterations: 500,
            loss_tolerance: 1e-4,
            fd_step: 1e-6,
            smoothing: 1e-12,
            free: [true; 4],
            min_step: 1e-10,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weights.0.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("weights must be >= 0".into()));
        }
        let positive = [
            ("initial_step", self.initial_step),
            ("fd_step", self.fd_step),
            ("min_step", self.min_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter("backtrack must lie in (0, 1)".into()));
        }
        if !(self.smoothing >= 0.0) || !(self.loss_tolerance >= 0.0) {
            return Err(Error::InvalidParameter(
                "smoothing and loss_tolerance must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Central-difference gradient with per-component step
/// `h * max(|x_i|, 1)`. Components are evaluated in parallel; the result
/// does not depend on scheduling.
pub fn finite_diff_gradient<F>(objective: F, point: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("finite-difference step must be > 0".into()));
    }
    (0..point.len())
        .into_par_iter()
        .map(|i| {
            let step = h * point[i].abs().max(1.0);
            let mut up = point.to_vec();
            let mut down = point.to_vec();
            up[i] += step;
            down[i] -= step;
            let (fu, fd) = (objective(&up), objective(&down));
            if !fu.is_finite() || !fd.is_finite() {
                return Err(Error::NonFiniteObjective { component: i });
            }
            Ok((fu - fd) / (up[i] - down[i]))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    LossBelowTolerance,
    LineSearchStalled,
    ZeroWeights,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    pub step: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub schedule: DriveSchedule,
    pub shape: InitShape,
    pub warm_start: InitShape,
    pub warm_start_loss: f64,
    pub loss: f64,
    pub accepted_steps: usize,
    pub log: Vec<IterationRecord>,
    pub stop: StopReason,
    pub converged: bool,
}

/// Evaluates the smoothed moment loss of the initialization phase for one
/// ramp shape, with fixed steps so that the value is smooth in the shape.
pub struct InitObjective {
    params: BlockadeParams,
    config: ProtocolConfig,
    weights: MomentWeights,
    smoothing: f64,
    dim: usize,
    options: EvolveOptions,
}

impl InitObjective {
    pub fn new(
        params: &BlockadeParams,
        config: &ProtocolConfig,
        weights: MomentWeights,
        smoothing: f64,
    ) -> Result<Self> {
        config.validate(params.kappa)?;
        let tau = config.tau(params.kappa);
        let dim = config.lab_dim.unwrap_or_else(|| lab_frame_dim(params.alpha));
        Ok(Self {
            params: *params,
            config: config.clone(),
            weights,
            smoothing,
            dim,
            options: EvolveOptions {
                stepping: Stepping::Fixed {
                    max_step: tau / OBJECTIVE_STEPS as f64,
                },
                samples: 2,
                monitor_positivity: false,
                ..Default::default()
            },
        })
    }

    pub fn schedule(&self, shape: &InitShape) -> Result<DriveSchedule> {
        DriveSchedule::new(Frame::Lab, init_segments(&self.params, &self.config, shape)?)
    }

    pub fn mismatch(&self, shape: &InitShape) -> Result<MomentMismatch> {
        let sched = self.schedule(shape)?;
        let vac = QuantumState::vacuum(self.dim)?;
        let traj = evolve(&vac, &sched, self.params.kerr, self.params.kappa, &self.options)?;
        Ok(MomentMismatch::new(&traj.final_state, self.params.alpha))
    }

    pub fn loss(&self, shape: &InitShape) -> Result<f64> {
        Ok(self.mismatch(shape)?.weighted(&self.weights, self.smoothing))
    }
}

/// Normalized coordinates: the plateau is measured in units of the warm
/// start plateau magnitude and the pair drive in units of its target.
struct Scaling {
    p: f64,
    m: f64,
}

impl Scaling {
    fn new(params: &BlockadeParams, warm: &InitShape) -> Self {
        let p = warm.lambda1_plateau.norm().max(params.lambda1.norm()).max(1.0);
        let m = params.lambda2.norm().max(1e-3 * p);
        Self { p, m }
    }

    fn to_shape(&self, x: &[f64; 4]) -> InitShape {
        InitShape {
            lambda1_plateau: Complex64::new(x[0], x[1]) * self.p,
            lambda2_mid: Complex64::new(x[2], x[3]) * self.m,
        }
    }

    fn to_vec(&self, s: &InitShape) -> [f64; 4] {
        [
            s.lambda1_plateau.re / self.p,
            s.lambda1_plateau.im / self.p,
            s.lambda2_mid.re / self.m,
            s.lambda2_mid.im / self.m,
        ]
    }
}

/// Minimizes the initialization loss over the ramp shape.
///
/// Each iteration takes a central-difference gradient, then backtracks
/// along the negative gradient from the current trial step until the loss
/// decreases. Accepted steps grow the next trial step by the inverse
/// backtracking factor. The loss is therefore non-increasing over accepted
/// iterations and never exceeds the warm-start loss.
pub fn optimize_initialization(
    params: &BlockadeParams,
    config: &ProtocolConfig,
    opt: &OptimizerConfig,
) -> Result<OptimizationResult> {
    opt.validate()?;
    let warm = match config.init_shape {
        Some(s) => s,
        None => warm_start_shape(params, config)?,
    };
    let objective = InitObjective::new(params, config, opt.weights, opt.smoothing)?;
    let scaling = Scaling::new(params, &warm);
    let f = |x: &[f64]| -> f64 {
        let x: [f64; 4] = [x[0], x[1], x[2], x[3]];
        objective.loss(&scaling.to_shape(&x)).unwrap_or(f64::NAN)
    };

    let mut x = scaling.to_vec(&warm);
    let warm_loss = if opt.weights.is_zero() { 0.0 } else { f(&x) };
    if !warm_loss.is_finite() {
        return Err(Error::NonFiniteObjective { component: 0 });
    }
    let mut loss = warm_loss;
    let mut log = vec![IterationRecord {
        iteration: 0,
        loss,
        step: 0.0,
        gradient_norm: 0.0,
    }];
    let mut step = opt.initial_step;
    let mut accepted = 0;

    let stop = if opt.weights.is_zero() {
        StopReason::ZeroWeights
    } else {
        let mut reason = StopReason::MaxIterations;
        for it in 1..=opt.max_iterations {
            if loss <= opt.loss_tolerance {
                reason = StopReason::LossBelowTolerance;
                break;
            }
            let mut grad = finite_diff_gradient(f, &x, opt.fd_step)?;
            for (g, free) in grad.iter_mut().zip(opt.free) {
                if !free {
                    *g = 0.0;
                }
            }
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm == 0.0 {
                reason = StopReason::LineSearchStalled;
                break;
            }
            let mut trial_step = step;
            let mut found = None;
            while trial_step >= opt.min_step {
                let mut trial = x;
                for i in 0..4 {
                    trial[i] -= trial_step * grad[i] / gnorm;
                }
                let lt = f(&trial);
                if lt.is_finite() && lt < loss {
                    found = Some((trial, lt));
                    break;
                }
                trial_step *= opt.backtrack;
            }
            match found {
                Some((trial, lt)) => {
                    x = trial;
                    loss = lt;
                    accepted += 1;
                    log.push(IterationRecord {
                        iteration: it,
                        loss,
                        step: trial_step,
                        gradient_norm: gnorm,
                    });
                    step = trial_step / opt.backtrack;
                }
                None => {
                    reason = StopReason::LineSearchStalled;
                    break;
                }
            }
        }
        if reason == StopReason::MaxIterations && loss <= opt.loss_tolerance {
            reason = StopReason::LossBelowTolerance;
        }
        reason
    };

    let shape = scaling.to_shape(&x);
    let final_shape = if accepted == 0 { warm } else { shape };
    Ok(OptimizationResult {
        schedule: objective.schedule(&final_shape)?,
        shape: final_shape,
        warm_start: warm,
        warm_start_loss: warm_loss,
        loss,
        accepted_steps: accepted,
        log,
        stop,
        converged: stop != StopReason::MaxIterations,
    })
}

/// Optimizes the initialization ramp, then runs the full protocol with it.
pub fn optimize_and_run(
    params: &BlockadeParams,
    config: &ProtocolConfig,
    opt: &OptimizerConfig,
) -> Result<(OptimizationResult, ProtocolResult)> {
    let optimized = optimize_initialization(params, config, opt)?;
    let tuned = ProtocolConfig {
        init_shape: Some(optimized.shape),
        ..config.clone()
    };
    let run = run_protocol_with(params, &tuned, true)?;
    Ok((optimized, run))
}

/// Loss along `L1 plateau -> scale * plateau` for each value in `scales`.
pub fn plateau_scale_slice(
    params: &BlockadeParams,
    config: &ProtocolConfig,
    weights: MomentWeights,
    scales: &[f64],
) -> Result<Vec<f64>> {
    let base = match config.init_shape {
        Some(s) => s,
        None => warm_start_shape(params, config)?,
    };
    let objective = InitObjective::new(params, config, weights, 0.0)?;
    scales
        .par_iter()
        .map(|&s| {
            objective.loss(&InitShape {
                lambda1_plateau: base.lambda1_plateau * s,
                ..base
            })
        })
        .collect()
}

/// Indices of strict interior local minima of a sampled curve.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] < values[i - 1] && values[i] < values[i + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::derive_blockade_params;

    #[test]
    fn gradient_of_square() {
        let g = finite_diff_gradient(|x: &[f64]| x[0] * x[0], &[3.0], 1e-6).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_of_linear_is_exact() {
        let g = finite_diff_gradient(|x: &[f64]| 2.0 * x[0] - 5.0 * x[1] + 0.5, &[1.0, -2.0], 1e-6)
            .unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!((g[1] + 5.0).abs() < 1e-8);
    }

    #[test]
    fn gradient_of_smoothed_abs() {
        let eps = 1e-12;
        let g = finite_diff_gradient(|x: &[f64]| x[0].hypot(eps), &[1.0], 1e-6).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_reports_bad_component() {
        let err = finite_diff_gradient(
            |x: &[f64]| if x[1] > 0.5 { f64::NAN } else { x[0] },
            &[0.0, 0.5],
            1e-3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteObjective { component: 1 }));
    }

    #[test]
    fn linear_cavity_needs_no_steps() {
        let p = BlockadeParams::linear_cavity(Complex64::new(2.0, 0.0), 1.934e8);
        let r = optimize_initialization(&p, &ProtocolConfig::default(), &OptimizerConfig::default())
            .unwrap();
        assert!(r.loss < 1e-3, "{}", r.loss);
        assert!(r.accepted_steps <= 1);
    }

    #[test]
    fn zero_weights_leave_schedule() {
        let p = derive_blockade_params(4.4e6, Complex64::new(2.0, 0.0), 1, 1.934e8).unwrap();
        let opt = OptimizerConfig {
            weights: MomentWeights([0.0; 4]),
            ..Default::default()
        };
        let r = optimize_initialization(&p, &ProtocolConfig::default(), &opt).unwrap();
        assert_eq!(r.loss, 0.0);
        assert_eq!(r.shape, r.warm_start);
        assert_eq!(r.stop, StopReason::ZeroWeights);
    }

    #[test]
    fn objective_is_deterministic() {
        let p = derive_blockade_params(4.4e6, Complex64::new(2.0, 0.0), 1, 1.934e8).unwrap();
        let cfg = ProtocolConfig::default();
        let obj = InitObjective::new(&p, &cfg, MomentWeights::default(), 1e-12).unwrap();
        let shape = warm_start_shape(&p, &cfg).unwrap();
        assert_eq!(
            obj.loss(&shape).unwrap().to_bits(),
            obj.loss(&shape).unwrap().to_bits()
        );
    }

    #[test]
    fn minima_detection() {
        assert_eq!(local_minima(&[3.0, 1.0, 2.0, 0.5, 4.0]), vec![1, 3]);
        assert!(local_minima(&[1.0, 2.0, 3.0]).is_empty());
    }
}
