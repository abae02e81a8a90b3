use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{
    Format, Metric, Resolved, RunConfig, SweepAxisName, SweepSpec, WignerSection,
};
use super::table::{Cell, Column, ResultTable};
use super::FrameChoice;
use crate::dynamics::{DriveSchedule, Record};
use crate::error::{Error, Result};
use crate::feasibility::{
    one_photon_power, power_map_point, two_photon_power, KerrSource, MapTarget, MaterialParams,
    PowerMapConfig, SweepAxis,
};
use crate::optimizer::optimize_initialization;
use crate::protocol::{
    build_protocol_schedule, derive_blockade_params, linear_init_amplitude,
    run_protocol_recording, BlockadeParams, FinalDisplacement, ProtocolConfig, ProtocolResult,
};
use crate::quantum::{
    displacement_operator, lab_frame_dim, wigner, PhaseSpaceGrid, QuantumState, StateTolerances,
    DISPLACED_FRAME_DIM,
};

/// Shared inputs of every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    /// Raw config bytes, hashed into the manifest.
    pub config_bytes: Vec<u8>,
    pub out_dir: PathBuf,
    pub dim: Option<usize>,
    pub frame: Option<FrameChoice>,
    pub jobs: Option<usize>,
    pub checkpoint: Option<String>,
}

/// Files written and the exit code to report.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<String>,
    pub exit_code: i32,
}

struct Writer<'a> {
    ctx: &'a Context,
    files: Vec<String>,
}

impl<'a> Writer<'a> {
    fn new(ctx: &'a Context) -> Result<Self> {
        std::fs::create_dir_all(&ctx.out_dir)?;
        Ok(Self {
            ctx,
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.ctx.out_dir.join(name)
    }

    fn csv(&mut self, name: &str, table: &ResultTable) -> Result<()> {
        if self.ctx.config.wants(Format::Csv) {
            let p = self.path(name);
            table.write_csv(&p)?;
        }
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        if self.ctx.config.wants(Format::Json) {
            let p = self.path(name);
            write_json(&p, value)?;
        }
        Ok(())
    }

    fn finish(mut self, command: &str, start: Instant, status: &str, exit_code: i32) -> Result<Outcome> {
        let hash = Sha256::digest(&self.ctx.config_bytes);
        let manifest = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "status": status,
            "config_sha256": hex::encode(hash),
            "wall_time_s": start.elapsed().as_secs_f64(),
            "files": self.files.clone(),
        });
        let p = self.ctx.out_dir.join("manifest.json");
        write_json(&p, &manifest)?;
        self.files.push("manifest.json".into());
        Ok(Outcome {
            files: self.files,
            exit_code,
        })
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn num(x: f64) -> Value {
    // JSON has no NaN; undefined values become null
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn cplx(z: Complex64) -> Value {
    json!({ "re": num(z.re), "im": num(z.im) })
}

// ---------------------------------------------------------------- power

pub fn cmd_power(ctx: &Context) -> Result<Outcome> {
    let start = Instant::now();
    let cfg = &ctx.config;
    cfg.cavity()?;
    cfg.material()?;
    let r = cfg.resolve()?;
    let pc = cfg.protocol_config(ctx.dim)?;
    let omega = r.mode.omega;
    let p = r.params;
    let tau = pc.tau(r.kappa);
    let beta = r.beta.unwrap_or(0.0);
    let p1 = one_photon_power(p.lambda1, omega, r.kappa)?;
    let p1_init = one_photon_power(linear_init_amplitude(r.alpha, tau)?, omega, r.kappa)?;
    let (p2, p3) = if r.blockade_possible() && beta > 0.0 {
        let pumps = two_photon_power(p.lambda2, beta, r.kappa, r.mode.detuning, omega, omega)?;
        (pumps.p2, pumps.p3)
    } else {
        (f64::NAN, f64::NAN)
    };

    let kerr_formula = if cfg.blockade.as_ref().and_then(|b| b.kerr_rad_s).is_some() {
        "configured: blockade.kerr_rad_s"
    } else {
        "3 hbar omega^2 chi3 / (4 eps0 V_eff eps_r^2)"
    };
    let beta_formula = if cfg.material.as_ref().and_then(|m| m.beta_rad_s).is_some() {
        "configured: material.beta_rad_s"
    } else {
        "0.01 U"
    };
    let rows: Vec<(&str, Option<&str>, f64, &str)> = vec![
        ("u", Some("rad_s"), r.kerr, kerr_formula),
        ("kappa", Some("rad_s"), r.kappa, "cavity.kappa_rad_s or omega / Q"),
        ("beta", Some("rad_s"), beta, beta_formula),
        ("alpha_re", None, r.alpha.re, "blockade.alpha_re"),
        ("alpha_im", None, r.alpha.im, "blockade.alpha_im"),
        ("lambda_nl_re", Some("rad_s"), p.lambda_nl.re, "2 U alpha"),
        ("lambda_nl_im", Some("rad_s"), p.lambda_nl.im, "2 U alpha"),
        ("lambda1_re", Some("rad_s"), p.lambda1.re, "L_NL (|L_NL|^2 / (2U^2) - n + i kappa / (4U))"),
        ("lambda1_im", Some("rad_s"), p.lambda1.im, "L_NL (|L_NL|^2 / (2U^2) - n + i kappa / (4U))"),
        ("lambda2_re", Some("rad_s"), p.lambda2.re, "-L_NL^2 / (4U)"),
        ("lambda2_im", Some("rad_s"), p.lambda2.im, "-L_NL^2 / (4U)"),
        ("delta", Some("rad_s"), p.delta, "-|L_NL|^2 / U"),
        ("laser_frequency", Some("rad_s"), p.laser_frequency(omega), "omega - 2U + Delta"),
        ("tau", Some("s"), tau, "protocol.tau_s or 0.01 / kappa"),
        ("p1", Some("w"), p1, "hbar omega |L1|^2 / kappa"),
        ("p1_init", Some("w"), p1_init, "hbar omega |alpha / tau|^2 / kappa"),
        ("p2", Some("w"), p2, "(|L2| / beta) ((kappa/2)^2 + Delta2^2) / (2 kappa) hbar omega"),
        ("p3", Some("w"), p3, "equal to p2 for symmetric pumps"),
    ];

    let mut columns: Vec<Column> = rows.iter().map(|(n, u, _, _)| Column::new(n, *u)).collect();
    columns.push(Column::new("blockade_possible", None));
    let mut table = ResultTable::new(columns);
    let mut cells: Vec<Cell> = rows.iter().map(|(_, _, v, _)| Cell::Num(*v)).collect();
    cells.push(Cell::Flag(r.blockade_possible()));
    table.push(cells)?;

    let mut values = serde_json::Map::new();
    let mut formulas = serde_json::Map::new();
    for (name, unit, v, f) in &rows {
        let key = Column::new(name, *unit).header();
        values.insert(key.clone(), num(*v));
        formulas.insert(key, json!(f));
    }
    values.insert("blockade_possible".into(), json!(r.blockade_possible()));
    let summary = json!({ "values": values, "formulas": formulas });

    let mut w = Writer::new(ctx)?;
    w.csv("power.csv", &table)?;
    w.json("summary.json", &summary)?;
    w.finish("power", start, "ok", 0)
}

// ------------------------------------------------------------- simulate

/// One stored state of `checkpoints.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredState {
    pub name: String,
    pub time_s: f64,
    pub frame: FrameChoice,
    pub dim: usize,
    /// Row-major real and imaginary parts of the density matrix.
    pub rho_re: Vec<f64>,
    pub rho_im: Vec<f64>,
}

impl StoredState {
    pub fn new(name: &str, time_s: f64, frame: FrameChoice, state: &QuantumState) -> Self {
        let rho = state.density_matrix();
        let d = rho.nrows();
        let mut rho_re = Vec::with_capacity(d * d);
        let mut rho_im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                rho_re.push(rho[(i, j)].re);
                rho_im.push(rho[(i, j)].im);
            }
        }
        Self {
            name: name.into(),
            time_s,
            frame,
            dim: d,
            rho_re,
            rho_im,
        }
    }

    pub fn state(&self) -> Result<QuantumState> {
        let d = self.dim;
        if self.rho_re.len() != d * d || self.rho_im.len() != d * d {
            return Err(Error::InvalidState(format!(
                "checkpoint `{}` does not hold a {d}x{d} matrix",
                self.name
            )));
        }
        let rho = DMatrix::from_fn(d, d, |i, j| {
            Complex64::new(self.rho_re[i * d + j], self.rho_im[i * d + j])
        });
        let tol = StateTolerances {
            norm: 1e-6,
            hermiticity: 1e-8,
            trace: 1e-4,
            min_eigenvalue: -1e-6,
        };
        QuantumState::mixed_with(rho, &tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    /// Displacement relating the two frames.
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub checkpoints: Vec<StoredState>,
}

impl CheckpointFile {
    pub fn alpha(&self) -> Complex64 {
        Complex64::new(self.alpha_re, self.alpha_im)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(path.display().to_string(), format!("cannot read checkpoints: {e}"))
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn get(&self, name: &str) -> Result<&StoredState> {
        self.checkpoints
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownCheckpoint(name.to_string()))
    }
}

pub fn trajectory_table(records: &[Record]) -> Result<ResultTable> {
    let mut t = ResultTable::new(vec![
        Column::new("t", Some("s")),
        Column::new("n_expect", None),
        Column::new("p0", None),
        Column::new("p1", None),
        Column::new("p2", None),
        Column::new("g2", None),
        Column::new("trace_err", None),
        Column::new("g2_defined", None),
        Column::new("phase", None),
    ]);
    for r in records {
        t.push(vec![
            Cell::Num(r.t),
            Cell::Num(r.n),
            Cell::Num(r.p0),
            Cell::Num(r.p1),
            Cell::Num(r.p2),
            Cell::Num(r.g2.unwrap_or(f64::NAN)),
            Cell::Num(r.trace_error),
            Cell::Flag(r.g2.is_some()),
            Cell::Text(r.phase.as_str().into()),
        ])?;
    }
    Ok(t)
}

pub fn schedule_table(schedule: &DriveSchedule) -> Result<ResultTable> {
    let mut t = ResultTable::new(vec![
        Column::new("phase", None),
        Column::new("duration", Some("s")),
        Column::new("l1_re_start", Some("rad_s")),
        Column::new("l1_im_start", Some("rad_s")),
        Column::new("l1_re_end", Some("rad_s")),
        Column::new("l1_im_end", Some("rad_s")),
        Column::new("l2_re_start", Some("rad_s")),
        Column::new("l2_im_start", Some("rad_s")),
        Column::new("l2_re_end", Some("rad_s")),
        Column::new("l2_im_end", Some("rad_s")),
        Column::new("delta", Some("rad_s")),
        Column::new("discontinuous", None),
    ]);
    for s in &schedule.segments {
        t.push(vec![
            Cell::Text(s.phase.as_str().into()),
            Cell::Num(s.duration),
            Cell::Num(s.lambda1_start.re),
            Cell::Num(s.lambda1_start.im),
            Cell::Num(s.lambda1_end.re),
            Cell::Num(s.lambda1_end.im),
            Cell::Num(s.lambda2_start.re),
            Cell::Num(s.lambda2_start.im),
            Cell::Num(s.lambda2_end.re),
            Cell::Num(s.lambda2_end.im),
            Cell::Num(s.delta),
            Cell::Flag(s.discontinuous),
        ])?;
    }
    Ok(t)
}

fn params_json(r: &Resolved, p: &BlockadeParams) -> Value {
    json!({
        "kerr_rad_s": num(r.kerr),
        "kappa_rad_s": num(r.kappa),
        "alpha": cplx(p.alpha),
        "n": r.n,
        "lambda_nl_rad_s": cplx(p.lambda_nl),
        "lambda1_rad_s": cplx(p.lambda1),
        "lambda2_rad_s": cplx(p.lambda2),
        "delta_rad_s": num(p.delta),
    })
}

fn result_json(res: &ProtocolResult) -> Value {
    let m = res.init_mismatch.magnitudes();
    json!({
        "tau_s": num(res.tau),
        "hold_s": num(res.hold_duration),
        "peak_p1": num(res.peak_p1),
        "peak_time_s": num(res.peak_time),
        "g2_at_peak": opt(res.g2_at_peak),
        "g2_one_lifetime": opt(res.g2_one_lifetime),
        "peak_mean_photons": num(res.peak_mean_photons),
        "init_loss": num(res.init_loss),
        "init_mismatch": {
            "mean_field": num(m[0]),
            "photon_number": num(m[1]),
            "second_moment": num(m[2]),
            "third_moment": num(m[3]),
        },
        "final_p1": num(res.final_p1()),
        "max_trace_error": num(res.trajectory.max_trace_error()),
        "min_eigenvalue": opt(res.trajectory.min_eigenvalue()),
        "accepted_steps": res.trajectory.accepted_steps,
        "rejected_steps": res.trajectory.rejected_steps,
        "truncation_warning": res.truncation_warning,
        "optimizer_run": res.optimizer_run,
    })
}

fn checkpoint_file(res: &ProtocolResult, alpha: Complex64, config: &ProtocolConfig) -> CheckpointFile {
    let mut cps = vec![
        StoredState::new("init_end", res.tau, FrameChoice::Lab, &res.init_state),
        StoredState::new("hold_start", res.tau, FrameChoice::Displaced, &res.hold_start_state),
    ];
    for c in &res.trajectory.checkpoints {
        cps.push(StoredState::new(&c.name, c.time, FrameChoice::Displaced, &c.state));
    }
    let hold_end = res.tau + res.hold_duration;
    cps.push(StoredState::new("hold_end", hold_end, FrameChoice::Displaced, &res.hold_end_state));
    let (t_final, frame) = match config.final_displacement {
        FinalDisplacement::Exact => (hold_end, FrameChoice::Displaced),
        FinalDisplacement::ReversedSchedule => (
            res.trajectory.records.last().map_or(hold_end, |r| r.t),
            FrameChoice::Lab,
        ),
    };
    cps.push(StoredState::new("final", t_final, frame, &res.final_state));
    CheckpointFile {
        alpha_re: alpha.re,
        alpha_im: alpha.im,
        checkpoints: cps,
    }
}

pub fn cmd_simulate(ctx: &Context) -> Result<Outcome> {
    let start = Instant::now();
    let cfg = &ctx.config;
    cfg.blockade()?;
    let r = cfg.resolve()?;
    let pc = cfg.protocol_config(ctx.dim)?;
    let (res, partial) = run_protocol_recording(&r.params, &pc);
    let mut w = Writer::new(ctx)?;
    match res {
        Ok(res) => {
            w.csv("trajectory.csv", &trajectory_table(&res.trajectory.records)?)?;
            w.csv("schedule.csv", &schedule_table(&res.schedule)?)?;
            w.json("checkpoints.json", &checkpoint_file(&res, r.alpha, &pc))?;
            let summary = json!({
                "status": "ok",
                "params": params_json(&r, &r.params),
                "result": result_json(&res),
            });
            w.json("summary.json", &summary)?;
            w.finish("simulate", start, "ok", 0)
        }
        Err(e) if e.exit_code() == 3 => {
            w.csv("trajectory.csv", &trajectory_table(&partial)?)?;
            let summary = json!({
                "status": "numerical_failure",
                "error": e.to_string(),
                "records_kept": partial.len(),
                "last_time_s": partial.last().map_or(Value::Null, |r| num(r.t)),
                "params": params_json(&r, &r.params),
            });
            w.json("summary.json", &summary)?;
            eprintln!("error: {e}");
            w.finish("simulate", start, "numerical_failure", 3)
        }
        Err(e) => Err(e),
    }
}

// ------------------------------------------------------------- optimize

pub fn cmd_optimize(ctx: &Context) -> Result<Outcome> {
    let start = Instant::now();
    let cfg = &ctx.config;
    cfg.blockade()?;
    let r = cfg.resolve()?;
    let pc = cfg.protocol_config(ctx.dim)?;
    let out = optimize_initialization(&r.params, &pc, &cfg.optimizer)?;

    let tuned = ProtocolConfig {
        init_shape: Some(out.shape),
        ..pc
    };
    let schedule = build_protocol_schedule(&r.params, &tuned)?;
    let mut curve = ResultTable::new(vec![
        Column::new("iteration", None),
        Column::new("loss", None),
        Column::new("step", None),
        Column::new("gradient_norm", None),
    ]);
    for rec in &out.log {
        curve.push(vec![
            Cell::Int(rec.iteration as i64),
            Cell::Num(rec.loss),
            Cell::Num(rec.step),
            Cell::Num(rec.gradient_norm),
        ])?;
    }
    let summary = json!({
        "params": params_json(&r, &r.params),
        "warm_start_loss": num(out.warm_start_loss),
        "loss": num(out.loss),
        "accepted_steps": out.accepted_steps,
        "stop": out.stop,
        "converged": out.converged,
        "warm_start": {
            "lambda1_plateau_rad_s": cplx(out.warm_start.lambda1_plateau),
            "lambda2_mid_rad_s": cplx(out.warm_start.lambda2_mid),
        },
        "optimized": {
            "lambda1_plateau_rad_s": cplx(out.shape.lambda1_plateau),
            "lambda2_mid_rad_s": cplx(out.shape.lambda2_mid),
        },
    });
    let mut w = Writer::new(ctx)?;
    w.csv("schedule.csv", &schedule_table(&schedule)?)?;
    w.csv("loss_curve.csv", &curve)?;
    w.json("summary.json", &summary)?;
    w.finish("optimize", start, "ok", 0)
}

// ---------------------------------------------------------------- sweep

struct PointResult {
    cells: Vec<Cell>,
}

fn axis_header(axis: SweepAxisName) -> Column {
    match axis {
        SweepAxisName::DeltaAlpha => Column::new("delta_alpha", None),
        SweepAxisName::Lambda1InitErr => Column::new("lambda1_init_err", None),
        SweepAxisName::Lambda2InitErr => Column::new("lambda2_init_err", None),
        SweepAxisName::HoldErrGrid => Column::new("lambda1_hold_err", None),
        SweepAxisName::Tau => Column::new("tau", Some("s")),
        SweepAxisName::Q => Column::new("q", None),
        SweepAxisName::VEff => Column::new("v_eff", Some("m3")),
        SweepAxisName::Alpha => Column::new("alpha", None),
    }
}

fn protocol_columns(spec: &SweepSpec) -> Vec<Column> {
    let mut cols = Vec::new();
    for m in &spec.metrics {
        match m {
            Metric::G2 => {
                cols.push(Column::new("g2_one_lifetime", None));
                cols.push(Column::new("g2_peak", None));
            }
            Metric::P1Peak => cols.push(Column::new("p1_peak", None)),
            Metric::Loss => cols.push(Column::new("loss", None)),
            Metric::P1Watt => cols.push(Column::new("p1", Some("w"))),
            Metric::NPeak => cols.push(Column::new("n_peak", None)),
        }
    }
    cols
}

fn protocol_point(
    spec: &SweepSpec,
    r: &Resolved,
    base: &ProtocolConfig,
    x: f64,
    y: f64,
) -> Result<Vec<Cell>> {
    let mut pc = base.clone();
    let mut params = r.params;
    match spec.axis {
        SweepAxisName::DeltaAlpha => pc.errors.delta_alpha = x,
        SweepAxisName::Lambda1InitErr => pc.errors.lambda1_init = x,
        SweepAxisName::Lambda2InitErr => pc.errors.lambda2_init = x,
        SweepAxisName::HoldErrGrid => {
            pc.errors.lambda1_hold = x;
            pc.errors.lambda2_hold = y;
        }
        SweepAxisName::Tau => pc.tau = Some(x),
        SweepAxisName::Alpha => {
            let alpha = Complex64::new(x, 0.0);
            params = if r.kerr > 0.0 {
                derive_blockade_params(r.kerr, alpha, r.n, r.kappa)?
            } else {
                BlockadeParams::linear_cavity(alpha, r.kappa)
            };
        }
        SweepAxisName::Q | SweepAxisName::VEff => unreachable!("power axes handled separately"),
    }
    let res = crate::protocol::run_protocol(&params, &pc)?;
    let mut cells = Vec::new();
    for m in &spec.metrics {
        match m {
            Metric::G2 => {
                cells.push(Cell::Num(res.g2_one_lifetime.unwrap_or(f64::NAN)));
                cells.push(Cell::Num(res.g2_at_peak.unwrap_or(f64::NAN)));
            }
            Metric::P1Peak => cells.push(Cell::Num(res.peak_p1)),
            Metric::Loss => cells.push(Cell::Num(res.init_loss)),
            Metric::P1Watt => cells.push(Cell::Num(one_photon_power(
                params.lambda1,
                r.mode.omega,
                r.kappa,
            )?)),
            Metric::NPeak => cells.push(Cell::Num(res.peak_mean_photons)),
        }
    }
    Ok(cells)
}

fn power_config(ctx: &Context, spec: &SweepSpec, r: &Resolved, values: Vec<f64>) -> Result<PowerMapConfig> {
    let cfg = &ctx.config;
    let cavity = cfg.cavity()?;
    let kerr_override = cfg.blockade.as_ref().and_then(|b| b.kerr_rad_s);
    let (material, kerr) = match (kerr_override, &cfg.material) {
        (Some(u), m) => (
            m.as_ref().map_or_else(MaterialParams::silicon, |m| m.params()),
            KerrSource::Reference {
                u_ref: u,
                v_ref: cavity.veff_m3,
            },
        ),
        (None, _) => (cfg.material()?.params(), KerrSource::Formula),
    };
    let target = match (spec.power_w, spec.target_n_peak) {
        (Some(p), _) => MapTarget::Power(p),
        (None, Some(t)) => MapTarget::PeakPhotons(t),
        (None, None) => MapTarget::Alpha(r.alpha.norm()),
    };
    let axis = match spec.axis {
        SweepAxisName::Q => SweepAxis::Q(values),
        _ => SweepAxis::VEff(values),
    };
    Ok(PowerMapConfig {
        mode: cavity.mode(),
        material,
        axis,
        kappa: cavity.kappa_convention(),
        kerr,
        target,
        n: r.n,
        dim: ctx.dim.unwrap_or(DISPLACED_FRAME_DIM),
        rel_tol: 1e-4,
    })
}

pub fn cmd_sweep(ctx: &Context) -> Result<Outcome> {
    let start = Instant::now();
    let cfg = &ctx.config;
    let spec = cfg.sweep()?.clone();
    let r = cfg.resolve()?;
    let pc = cfg.protocol_config(ctx.dim)?;
    let values = spec.values();

    let mut columns = vec![Column::new("index", None), axis_header(spec.axis)];
    let grid: Vec<(usize, f64, f64)> = if spec.axis == SweepAxisName::HoldErrGrid {
        columns.push(Column::new("lambda2_hold_err", None));
        let n = values.len();
        (0..n * n).map(|k| (k, values[k / n], values[k % n])).collect()
    } else {
        values.iter().enumerate().map(|(k, &x)| (k, x, 0.0)).collect()
    };

    let power = if spec.axis.is_power_axis() {
        let pm = power_config(ctx, &spec, &r, values.clone())?;
        for c in [
            Column::new("u", Some("rad_s")),
            Column::new("kappa", Some("rad_s")),
            Column::new("alpha", None),
            Column::new("lambda_nl", Some("rad_s")),
        ] {
            columns.push(c);
        }
        for m in &spec.metrics {
            match m {
                Metric::P1Watt => columns.push(Column::new("p1", Some("w"))),
                Metric::NPeak => columns.push(Column::new("n_peak", None)),
                _ => unreachable!("validated"),
            }
        }
        columns.push(Column::new("reachable", None));
        Some(pm)
    } else {
        columns.extend(protocol_columns(&spec));
        None
    };
    columns.push(Column::new("ok", None));
    columns.push(Column::new("note", None));
    let n_metric_cells = columns.len() - 2 - if spec.axis == SweepAxisName::HoldErrGrid { 3 } else { 2 };

    let eval = |&(_, x, y): &(usize, f64, f64)| -> PointResult {
        let body: Result<Vec<Cell>> = match &power {
            Some(pm) => power_map_point(pm, x).map(|row| {
                let mut cells = vec![
                    Cell::Num(row.kerr),
                    Cell::Num(row.kappa),
                    Cell::Num(row.alpha),
                    Cell::Num(row.lambda_nl),
                ];
                for m in &spec.metrics {
                    cells.push(Cell::Num(match m {
                        Metric::P1Watt => row.p1,
                        _ => row.n_peak,
                    }));
                }
                cells.push(Cell::Flag(row.reachable));
                cells
            }),
            None => protocol_point(&spec, &r, &pc, x, y),
        };
        let (mut cells, ok, note) = match body {
            Ok(c) => {
                let reachable = !c.iter().any(|c| matches!(c, Cell::Flag(false)));
                let note = if reachable { "" } else { "target unreachable" };
                (c, reachable, note.to_string())
            }
            Err(e) => {
                let mut c = vec![Cell::Num(f64::NAN); n_metric_cells];
                if power.is_some() {
                    *c.last_mut().unwrap() = Cell::Flag(false);
                }
                (c, false, e.to_string())
            }
        };
        cells.push(Cell::Flag(ok));
        cells.push(Cell::Text(note));
        PointResult { cells }
    };

    let results: Vec<PointResult> = match ctx.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::config("--jobs", e.to_string()))?;
            pool.install(|| grid.par_iter().map(eval).collect())
        }
        None => grid.par_iter().map(eval).collect(),
    };

    let mut table = ResultTable::new(columns);
    for ((k, x, y), res) in grid.iter().zip(results) {
        let mut row = vec![Cell::Int(*k as i64), Cell::Num(*x)];
        if spec.axis == SweepAxisName::HoldErrGrid {
            row.push(Cell::Num(*y));
        }
        row.extend(res.cells);
        table.push(row)?;
    }
    let mut w = Writer::new(ctx)?;
    w.csv("sweep.csv", &table)?;
    w.finish("sweep", start, "ok", 0)
}

// --------------------------------------------------------------- wigner

/// Expresses a stored state in `frame`, using the displacement `alpha`.
pub fn to_frame(stored: &StoredState, alpha: Complex64, frame: FrameChoice) -> Result<QuantumState> {
    let state = stored.state()?;
    match (stored.frame, frame) {
        (a, b) if a == b => Ok(state),
        (FrameChoice::Displaced, FrameChoice::Lab) => {
            let d = lab_frame_dim(alpha).max(state.dim());
            let (wide, _) = state.resize(d)?;
            wide.transform(&displacement_operator(alpha, d)?)
        }
        _ => state.transform(&displacement_operator(-alpha, state.dim())?),
    }
}

pub fn cmd_wigner(ctx: &Context) -> Result<Outcome> {
    let start = Instant::now();
    let section = ctx.config.wigner.clone().unwrap_or_default();
    if section.points < 2 {
        return Err(Error::config("wigner.points", "must be >= 2"));
    }
    if !(section.half_width > 0.0) {
        return Err(Error::config("wigner.half_width", "must be positive"));
    }
    let name = ctx.checkpoint.clone().unwrap_or(section.checkpoint.clone());
    let file = CheckpointFile::load(&ctx.out_dir.join("checkpoints.json"))?;
    let stored = file.get(&name)?;
    let frame = ctx.frame.unwrap_or(stored.frame);
    let state = to_frame(stored, file.alpha(), frame)?;
    let grid = wigner_grid(&section, &state)?;
    let w = wigner(&state, &grid)?;
    if w.truncation_warning {
        eprintln!("warning: Wigner grid extends beyond the reliable range of the Fock truncation");
    }
    let mut table = ResultTable::new(vec![
        Column::new("re", None),
        Column::new("im", None),
        Column::new("w", None),
    ]);
    let (re, im) = (w.value.re_axis(), w.value.im_axis());
    for (i, x) in re.iter().enumerate() {
        for (j, y) in im.iter().enumerate() {
            table.push(vec![Cell::Num(*x), Cell::Num(*y), Cell::Num(w.value.value(i, j))])?;
        }
    }
    let mut wr = Writer::new(ctx)?;
    let p = wr.path("wigner.csv");
    table.write_csv(&p)?;
    wr.finish("wigner", start, "ok", 0)
}

fn wigner_grid(section: &WignerSection, state: &QuantumState) -> Result<PhaseSpaceGrid> {
    let mean = state.ladder_moment(1);
    let center = Complex64::new(
        section.center_re.unwrap_or(mean.re),
        section.center_im.unwrap_or(mean.im),
    );
    PhaseSpaceGrid::square(center, section.half_width, section.points)
}
