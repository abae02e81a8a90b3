use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{Banded, HamiltonianTerms};
use super::integrator::{Dopri5, Stepping};
use super::schedule::{DriveSchedule, Frame, Phase, Segment};
use crate::error::{Error, Result};
use crate::quantum::{check_dim, g2_zero, MomentMismatch, MomentWeights, QuantumState};

/// Options for [`evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub stepping: Stepping,
    /// Evenly spaced record times across the schedule, in addition to the
    /// segment boundaries and checkpoints.
    pub samples: usize,
    /// Population limit for the two highest Fock levels.
    pub overflow_threshold: f64,
    /// Record the minimum density-matrix eigenvalue (costs one
    /// eigendecomposition per record).
    pub monitor_positivity: bool,
    /// Named times at which the full state is kept.
    pub checkpoints: Vec<(String, f64)>,
    /// Reference amplitude for the per-record moment loss.
    pub loss_reference: Option<Complex64>,
    pub loss_weights: MomentWeights,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            stepping: Stepping::default(),
            samples: 400,
            overflow_threshold: 1e-7,
            monitor_positivity: true,
            checkpoints: Vec::new(),
            loss_reference: None,
            loss_weights: MomentWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub n: f64,
    pub mean_field: Complex64,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    /// `None` when the mean photon number is below the g2 floor.
    pub g2: Option<f64>,
    pub trace_error: f64,
    pub min_eigenvalue: Option<f64>,
    pub loss: Option<f64>,
    pub phase: Phase,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub name: String,
    pub time: f64,
    pub state: QuantumState,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub checkpoints: Vec<Checkpoint>,
    pub final_state: QuantumState,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn checkpoint(&self, name: &str) -> Result<&Checkpoint> {
        self.checkpoints
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownCheckpoint(name.to_string()))
    }

    /// Record with the largest value of `key`.
    pub fn peak_by(&self, key: impl Fn(&Record) -> f64) -> Option<&Record> {
        self.records
            .iter()
            .max_by(|a, b| key(a).total_cmp(&key(b)))
    }

    pub fn max_trace_error(&self) -> f64 {
        self.records.iter().map(|r| r.trace_error).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.min_eigenvalue)
            .reduce(f64::min)
    }

    /// Appends `later`, shifting its times by `offset`. A leading record
    /// that coincides with the current last time is dropped.
    pub fn append(&mut self, later: Trajectory, offset: f64) {
        let last = self.records.last().map(|r| r.t);
        for mut r in later.records {
            r.t += offset;
            if last.is_some_and(|t| r.t <= t) {
                continue;
            }
            self.records.push(r);
        }
        for mut c in later.checkpoints {
            c.time += offset;
            self.checkpoints.push(c);
        }
        self.final_state = later.final_state;
        self.accepted_steps += later.accepted_steps;
        self.rejected_steps += later.rejected_steps;
    }
}

/// Dense row-major density matrix with the master-equation right-hand side.
struct Lindblad {
    dim: usize,
    kappa: f64,
    /// `sqrt(i+1) sqrt(j+1)` lookup.
    sqrt: Vec<f64>,
    h: Banded,
    /// `rows[k][i] = H[i, i + k - 2]`
    rows: [Vec<Complex64>; 5],
    /// `cols[k][j] = H[j + k - 2, j]`
    cols: [Vec<Complex64>; 5],
}

impl Lindblad {
    fn new(dim: usize, kappa: f64) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim];
        Self {
            dim,
            kappa,
            sqrt: (0..=dim).map(|m| (m as f64).sqrt()).collect(),
            h: Banded::default(),
            rows: std::array::from_fn(|_| z.clone()),
            cols: std::array::from_fn(|_| z.clone()),
        }
    }

    fn set_hamiltonian(&mut self, terms: &HamiltonianTerms) {
        let d = self.dim;
        terms.banded(d, &mut self.h);
        let z = Complex64::new(0.0, 0.0);
        for i in 0..d {
            let diag = Complex64::new(self.h.diag[i], 0.0);
            self.rows[2][i] = diag;
            self.cols[2][i] = diag;
            let s1 = if i + 1 < d { self.h.sub1[i] } else { z };
            let s2 = if i + 2 < d { self.h.sub2[i] } else { z };
            let s1m = if i >= 1 { self.h.sub1[i - 1] } else { z };
            let s2m = if i >= 2 { self.h.sub2[i - 2] } else { z };
            self.rows[0][i] = s2m;
            self.rows[1][i] = s1m;
            self.rows[3][i] = s1.conj();
            self.rows[4][i] = s2.conj();
            self.cols[0][i] = s2m.conj();
            self.cols[1][i] = s1m.conj();
            self.cols[3][i] = s1;
            self.cols[4][i] = s2;
        }
    }

    fn rhs(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim;
        let di = d as isize;
        let mi = Complex64::new(0.0, -1.0);
        for i in 0..d {
            let row_out = &mut out[i * d..(i + 1) * d];
            row_out.fill(Complex64::new(0.0, 0.0));
            // (H rho)[i, :] = sum_k H[i, i+k-2] rho[i+k-2, :]
            for k in 0..5 {
                let r = i as isize + k as isize - 2;
                if r < 0 || r >= di {
                    continue;
                }
                let h = self.rows[k][i];
                if h == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let src = &rho[r as usize * d..(r as usize + 1) * d];
                for (o, x) in row_out.iter_mut().zip(src) {
                    *o += h * x;
                }
            }
            // (rho H)[i, j] = sum_k rho[i, j+k-2] H[j+k-2, j]
            let row = &rho[i * d..(i + 1) * d];
            for k in 0..5 {
                let off = k as isize - 2;
                let j0 = (-off).max(0) as usize;
                let j1 = (di - off).min(di) as usize;
                let col = &self.cols[k];
                for j in j0..j1 {
                    row_out[j] -= row[(j as isize + off) as usize] * col[j];
                }
            }
            for o in row_out.iter_mut() {
                *o *= mi;
            }
            if self.kappa != 0.0 {
                let si = self.sqrt[i + 1];
                for j in 0..d {
                    let mut diss = -0.5 * (i + j) as f64 * row[j];
                    if i + 1 < d && j + 1 < d {
                        diss += rho[(i + 1) * d + j + 1] * (si * self.sqrt[j + 1]);
                    }
                    row_out[j] += diss * self.kappa;
                }
            }
        }
    }
}

fn terms_for(frame: &Frame, seg: &Segment, s: f64, kerr: f64, kappa: f64) -> HamiltonianTerms {
    let (l1, l2) = seg.drives_at(s);
    match *frame {
        Frame::Lab => HamiltonianTerms::lab(l1, l2, seg.delta, kerr),
        Frame::Displaced { alpha } => {
            HamiltonianTerms::displaced(l1, l2, seg.delta, kerr, kappa, alpha)
        }
        Frame::Blockade { n } => HamiltonianTerms::blockade(l1, n),
    }
}

fn top_population(rho: &[Complex64], d: usize) -> f64 {
    (d.saturating_sub(2)..d).map(|m| rho[m * d + m].re).sum()
}

fn to_state(rho: &[Complex64], d: usize) -> QuantumState {
    QuantumState::mixed_unchecked(DMatrix::from_row_slice(d, d, rho))
}

fn make_record(
    t: f64,
    rho: &[Complex64],
    d: usize,
    phase: Phase,
    opts: &EvolveOptions,
) -> Record {
    let diag = |m: usize| if m < d { rho[m * d + m].re } else { 0.0 };
    let trace: f64 = (0..d).map(diag).sum();
    let state = to_state(rho, d);
    Record {
        t,
        n: state.mean_photon_number(),
        mean_field: state.ladder_moment(1),
        p0: diag(0),
        p1: diag(1),
        p2: diag(2),
        g2: g2_zero(&state).ok(),
        trace_error: (trace - 1.0).abs(),
        min_eigenvalue: opts.monitor_positivity.then(|| state.min_eigenvalue()),
        loss: opts
            .loss_reference
            .map(|alpha| MomentMismatch::new(&state, alpha).weighted(&opts.loss_weights, 0.0)),
        phase,
    }
}

fn validate(
    state0: &QuantumState,
    schedule: &DriveSchedule,
    kerr: f64,
    kappa: f64,
    opts: &EvolveOptions,
) -> Result<()> {
    schedule.validate()?;
    if schedule.segments.is_empty() {
        return Err(Error::InvalidSchedule("schedule has no segments".into()));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa}")));
    }
    if !kerr.is_finite() {
        return Err(Error::InvalidParameter(format!("kerr = {kerr}")));
    }
    if opts.samples < 2 {
        return Err(Error::InvalidParameter("samples must be >= 2".into()));
    }
    match opts.stepping {
        Stepping::Adaptive { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => {
            return Err(Error::InvalidParameter("tolerances must be positive".into()))
        }
        Stepping::Fixed { max_step } if !(max_step > 0.0) => {
            return Err(Error::InvalidParameter("max_step must be positive".into()))
        }
        _ => {}
    }
    let total = schedule.total_duration();
    for (name, t) in &opts.checkpoints {
        if !(*t >= 0.0 && *t <= total * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "checkpoint `{name}` at {t:e} s lies outside the schedule"
            )));
        }
    }
    let dim = state0.dim();
    let min = match schedule.frame {
        Frame::Blockade { n } => {
            if n < 1 {
                return Err(Error::InvalidParameter("blockade order n must be >= 1".into()));
            }
            n as usize + 3
        }
        _ => {
            let zero = Complex64::new(0.0, 0.0);
            let pair = schedule
                .segments
                .iter()
                .any(|s| s.lambda2_start != zero || s.lambda2_end != zero);
            let displaced = matches!(schedule.frame, Frame::Displaced { .. });
            if kerr != 0.0 || pair || displaced {
                4
            } else {
                2
            }
        }
    };
    check_dim(dim, min)
}

/// Integrates the Lindblad master equation
/// `d rho/dt = -i[H(t), rho] + kappa (a rho a+ - {a+a, rho}/2)`
/// along `schedule`.
///
/// Records are taken at `opts.samples` evenly spaced times plus every
/// segment boundary and checkpoint. The run stops with
/// [`Error::TruncationOverflow`] if the two highest Fock levels hold more
/// than `opts.overflow_threshold` population after any accepted step.
pub fn evolve(
    state0: &QuantumState,
    schedule: &DriveSchedule,
    kerr: f64,
    kappa: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let (traj, err) = evolve_partial(state0, schedule, kerr, kappa, opts)?;
    match err {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Like [`evolve`], but returns the records collected up to a numerical
/// failure together with the error. Invalid inputs are still reported
/// through the outer `Result`.
pub fn evolve_partial(
    state0: &QuantumState,
    schedule: &DriveSchedule,
    kerr: f64,
    kappa: f64,
    opts: &EvolveOptions,
) -> Result<(Trajectory, Option<Error>)> {
    validate(state0, schedule, kerr, kappa, opts)?;
    let d = state0.dim();
    let total = schedule.total_duration();
    let boundaries = schedule.boundaries();

    // record times
    let tol = 1e-12 * total;
    let mut stops: Vec<f64> = crate::quantum::linspace(0.0, total, opts.samples);
    stops.extend(boundaries.iter().copied());
    stops.extend(opts.checkpoints.iter().map(|(_, t)| t.min(total)));
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= tol);

    let mut rho: Vec<Complex64> = state0.density_matrix().transpose().as_slice().to_vec();
    let mut sys = Lindblad::new(d, kappa);
    let mut rk = Dopri5::new(d * d);

    let mut traj = Trajectory {
        records: Vec::with_capacity(stops.len()),
        checkpoints: Vec::new(),
        final_state: state0.to_mixed(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut pending_ckpt: Vec<(String, f64)> = opts.checkpoints.clone();
    pending_ckpt.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut take_checkpoints = |t: f64, rho: &[Complex64], out: &mut Vec<Checkpoint>| {
        while let Some((_, ct)) = pending_ckpt.first() {
            if *ct <= t + tol {
                let (name, time) = pending_ckpt.remove(0);
                out.push(Checkpoint {
                    name,
                    time,
                    state: to_state(rho, d),
                });
            } else {
                break;
            }
        }
    };

    let first_phase = schedule.segments[0].phase;
    traj.records.push(make_record(0.0, &rho, d, first_phase, opts));
    take_checkpoints(0.0, &rho, &mut traj.checkpoints);
    let top = top_population(&rho, d);
    if top > opts.overflow_threshold {
        traj.final_state = to_state(&rho, d);
        return Ok((
            traj,
            Some(Error::TruncationOverflow {
                time: 0.0,
                population: top,
            }),
        ));
    }

    let mut stop_idx = 1;
    let mut failure = None;
    'segments: for (k, seg) in schedule.segments.iter().enumerate() {
        let t_start = boundaries[k];
        let t_end = boundaries[k + 1];
        rk.invalidate();
        let frame = schedule.frame;
        let mut t = t_start;
        while stop_idx < stops.len() && stops[stop_idx] <= t_end + tol {
            let target = if (stops[stop_idx] - t_end).abs() <= tol {
                t_end
            } else {
                stops[stop_idx]
            };
            let mut f = |tt: f64, y: &[Complex64], dy: &mut [Complex64]| {
                sys.set_hamiltonian(&terms_for(&frame, seg, tt - t_start, kerr, kappa));
                sys.rhs(y, dy);
            };
            let threshold = opts.overflow_threshold;
            let res = rk.integrate(&mut f, t, target, &mut rho, opts.stepping, |tt, y| {
                let top = top_population(y, d);
                if top > threshold {
                    Err(Error::TruncationOverflow {
                        time: tt,
                        population: top,
                    })
                } else {
                    Ok(())
                }
            });
            traj.accepted_steps = rk.accepted;
            traj.rejected_steps = rk.rejected;
            if let Err(e) = res {
                failure = Some(e);
                break 'segments;
            }
            t = target;
            traj.records.push(make_record(t, &rho, d, seg.phase, opts));
            take_checkpoints(t, &rho, &mut traj.checkpoints);
            stop_idx += 1;
        }
    }
    traj.final_state = to_state(&rho, d);
    Ok((traj, failure))
}
