//! Python bindings for the Kerr-cavity blockade simulator.

use ::kerr_blockade as kb;
use kb::protocol::{ErrorSpec, FinalDisplacement, HoldDuration, ProtocolConfig};
use kb::quantum::{MomentWeights, PhaseSpaceGrid};
use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: kb::Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "BlockadeParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyBlockadeParams {
    inner: kb::protocol::BlockadeParams,
}

#[pymethods]
impl PyBlockadeParams {
    /// Drive settings for Kerr strength `kerr`, displacement `alpha`, loss
    /// rate `kappa` and blockade order `n`.
    #[new]
    #[pyo3(signature = (kerr, alpha, kappa, n = 1))]
    fn new(kerr: f64, alpha: Complex64, kappa: f64, n: u32) -> PyResult<Self> {
        kb::protocol::derive_blockade_params(kerr, alpha, n, kappa)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn linear_cavity(alpha: Complex64, kappa: f64) -> Self {
        Self {
            inner: kb::protocol::BlockadeParams::linear_cavity(alpha, kappa),
        }
    }

    #[getter]
    fn kerr(&self) -> f64 {
        self.inner.kerr
    }
    #[getter]
    fn alpha(&self) -> Complex64 {
        self.inner.alpha
    }
    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }
    #[getter]
    fn lambda_nl(&self) -> Complex64 {
        self.inner.lambda_nl
    }
    #[getter]
    fn lambda1(&self) -> Complex64 {
        self.inner.lambda1
    }
    #[getter]
    fn lambda2(&self) -> Complex64 {
        self.inner.lambda2
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "BlockadeParams(kerr={:e}, alpha={}, kappa={:e}, n={})",
            p.kerr, p.alpha, p.kappa, p.n
        )
    }
}

#[pyclass(name = "QuantumState", frozen)]
struct PyQuantumState {
    inner: kb::quantum::QuantumState,
}

#[pymethods]
impl PyQuantumState {
    #[staticmethod]
    fn vacuum(dim: usize) -> PyResult<Self> {
        wrap(kb::quantum::QuantumState::vacuum(dim))
    }

    #[staticmethod]
    fn fock(n: usize, dim: usize) -> PyResult<Self> {
        wrap(kb::quantum::QuantumState::fock(n, dim))
    }

    #[staticmethod]
    fn thermal(mean: f64, dim: usize) -> PyResult<Self> {
        wrap(kb::quantum::QuantumState::thermal(mean, dim))
    }

    #[staticmethod]
    fn coherent(alpha: Complex64, dim: usize) -> PyResult<Self> {
        wrap(kb::quantum::coherent_state(alpha, dim).map(|c| c.value))
    }

    /// Builds a mixed state from a square nested list.
    #[staticmethod]
    fn from_density_matrix(rho: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let d = rho.len();
        if rho.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("density matrix must be square"));
        }
        wrap(kb::quantum::QuantumState::mixed(DMatrix::from_fn(d, d, |i, j| rho[i][j])))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn mean_photon_number(&self) -> f64 {
        self.inner.mean_photon_number()
    }

    fn populations(&self) -> Vec<f64> {
        self.inner.populations()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn g2(&self) -> PyResult<f64> {
        kb::quantum::g2_zero(&self.inner).map_err(to_py)
    }

    fn density_matrix(&self) -> Vec<Vec<Complex64>> {
        let rho = self.inner.density_matrix();
        (0..rho.nrows())
            .map(|i| (0..rho.ncols()).map(|j| rho[(i, j)]).collect())
            .collect()
    }

    /// Wigner function on a square grid; returns `(re_axis, im_axis, w)`
    /// with `w[i][j]` at `(re_axis[i], im_axis[j])`.
    #[pyo3(signature = (center = Complex64::new(0.0, 0.0), half_width = 3.0, points = 61))]
    fn wigner(
        &self,
        center: Complex64,
        half_width: f64,
        points: usize,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
        let grid = PhaseSpaceGrid::square(center, half_width, points).map_err(to_py)?;
        let w = kb::quantum::wigner(&self.inner, &grid).map_err(to_py)?.value;
        let rows = (0..w.re_count)
            .map(|i| (0..w.im_count).map(|j| w.value(i, j)).collect())
            .collect();
        Ok((w.re_axis(), w.im_axis(), rows))
    }
}

fn wrap(r: kb::Result<kb::quantum::QuantumState>) -> PyResult<PyQuantumState> {
    r.map(|inner| PyQuantumState { inner }).map_err(to_py)
}

/// Kerr strength `3 hbar omega^2 chi3 / (4 eps0 V_eff eps_r^2)` in rad/s.
#[pyfunction]
#[pyo3(signature = (omega, v_eff, chi3 = 0.45e-18, eps_r = 12.1, q = 1e7))]
fn kerr_strength(omega: f64, v_eff: f64, chi3: f64, eps_r: f64, q: f64) -> PyResult<f64> {
    let mode = kb::feasibility::CavityMode::new(omega, q, v_eff);
    let mat = kb::feasibility::MaterialParams::new(chi3, eps_r);
    kb::feasibility::kerr_strength(&mode, &mat).map_err(to_py)
}

#[pyfunction]
fn one_photon_power(lambda1: Complex64, omega: f64, kappa: f64) -> PyResult<f64> {
    kb::feasibility::one_photon_power(lambda1, omega, kappa).map_err(to_py)
}

/// Returns `(P2, P3)` in watts.
#[pyfunction]
#[pyo3(signature = (lambda2, beta, kappa, omega, delta2 = 0.0))]
fn two_photon_power(
    lambda2: Complex64,
    beta: f64,
    kappa: f64,
    omega: f64,
    delta2: f64,
) -> PyResult<(f64, f64)> {
    let p = kb::feasibility::two_photon_power(lambda2, beta, kappa, delta2, omega, omega)
        .map_err(to_py)?;
    Ok((p.p2, p.p3))
}

/// Returns `(lambda_nl, alpha)` for a drive magnitude `|L1|`.
#[pyfunction]
#[pyo3(signature = (lambda1_mag, kerr, kappa, n = 1))]
fn alpha_from_drive(lambda1_mag: f64, kerr: f64, kappa: f64, n: u32) -> PyResult<(f64, f64)> {
    kb::protocol::alpha_from_drive(lambda1_mag, kerr, n, kappa).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (lambda_nl, kappa, n = 1, dim = 15))]
fn blockade_peak_photons(lambda_nl: f64, kappa: f64, n: u32, dim: usize) -> PyResult<f64> {
    kb::protocol::blockade_peak_photons(lambda_nl, n, kappa, dim).map_err(to_py)
}

/// Runs the three-phase protocol and returns a dict of scalar results plus
/// the trajectory columns.
#[pyfunction]
#[pyo3(signature = (
    params, hold = "pi_pulse", hold_s = None, delta_alpha = 0.0, lambda1_init = 0.0,
    lambda2_init = 0.0, lambda1_hold = 0.0, lambda2_hold = 0.0, frame_dim = 15,
    samples = 400, reversed_final = false
))]
#[allow(clippy::too_many_arguments)]
fn run_protocol<'py>(
    py: Python<'py>,
    params: &PyBlockadeParams,
    hold: &str,
    hold_s: Option<f64>,
    delta_alpha: f64,
    lambda1_init: f64,
    lambda2_init: f64,
    lambda1_hold: f64,
    lambda2_hold: f64,
    frame_dim: usize,
    samples: usize,
    reversed_final: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let hold = match (hold, hold_s) {
        ("pi_pulse", _) => HoldDuration::PiPulse,
        ("scan_to_peak", _) => HoldDuration::ScanToPeak,
        ("fixed", Some(t)) => HoldDuration::Fixed(t),
        ("fixed", None) => return Err(PyValueError::new_err("hold='fixed' needs hold_s")),
        (other, _) => return Err(PyValueError::new_err(format!("unknown hold mode {other:?}"))),
    };
    let cfg = ProtocolConfig {
        hold,
        frame_dim,
        samples,
        final_displacement: if reversed_final {
            FinalDisplacement::ReversedSchedule
        } else {
            FinalDisplacement::Exact
        },
        errors: ErrorSpec {
            delta_alpha,
            lambda1_init,
            lambda2_init,
            lambda1_hold,
            lambda2_hold,
        },
        ..Default::default()
    };
    let r = kb::protocol::run_protocol(&params.inner, &cfg).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("tau_s", r.tau)?;
    d.set_item("hold_s", r.hold_duration)?;
    d.set_item("peak_p1", r.peak_p1)?;
    d.set_item("peak_time_s", r.peak_time)?;
    d.set_item("g2_at_peak", r.g2_at_peak)?;
    d.set_item("g2_one_lifetime", r.g2_one_lifetime)?;
    d.set_item("peak_mean_photons", r.peak_mean_photons)?;
    d.set_item("init_loss", r.init_loss)?;
    d.set_item("final_p1", r.final_p1())?;
    d.set_item("truncation_warning", r.truncation_warning)?;
    let recs = &r.trajectory.records;
    d.set_item("t_s", recs.iter().map(|x| x.t).collect::<Vec<_>>())?;
    d.set_item("n_expect", recs.iter().map(|x| x.n).collect::<Vec<_>>())?;
    d.set_item("p1", recs.iter().map(|x| x.p1).collect::<Vec<_>>())?;
    d.set_item("p2", recs.iter().map(|x| x.p2).collect::<Vec<_>>())?;
    d.set_item("g2", recs.iter().map(|x| x.g2).collect::<Vec<_>>())?;
    d.set_item(
        "phase",
        recs.iter().map(|x| x.phase.as_str()).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Optimizes the initialization ramp; returns losses and the optimized
/// plateau and pair-drive values.
#[pyfunction]
#[pyo3(signature = (params, max_iterations = 50, weights = [1.0, 1.0, 1.0, 1.0]))]
fn optimize_initialization<'py>(
    py: Python<'py>,
    params: &PyBlockadeParams,
    max_iterations: usize,
    weights: [f64; 4],
) -> PyResult<Bound<'py, PyDict>> {
    let opt = kb::optimizer::OptimizerConfig {
        max_iterations,
        weights: MomentWeights(weights),
        ..Default::default()
    };
    let r = kb::optimizer::optimize_initialization(&params.inner, &ProtocolConfig::default(), &opt)
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("warm_start_loss", r.warm_start_loss)?;
    d.set_item("loss", r.loss)?;
    d.set_item("accepted_steps", r.accepted_steps)?;
    d.set_item("converged", r.converged)?;
    d.set_item("loss_curve", r.log.iter().map(|x| x.loss).collect::<Vec<_>>())?;
    d.set_item("lambda1_plateau", r.shape.lambda1_plateau)?;
    d.set_item("lambda2_mid", r.shape.lambda2_mid)?;
    Ok(d)
}

/// Loads a checkpoint written by `blockade simulate`.
#[pyfunction]
fn load_checkpoint(path: &str, name: &str) -> PyResult<PyQuantumState> {
    let file = kb::cli::CheckpointFile::load(std::path::Path::new(path)).map_err(to_py)?;
    let stored = file
        .get(name)
        .map_err(|_| PyKeyError::new_err(name.to_string()))?;
    wrap(stored.state())
}

#[pymodule]
fn kerrblockade(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBlockadeParams>()?;
    m.add_class::<PyQuantumState>()?;
    m.add_function(wrap_pyfunction!(kerr_strength, m)?)?;
    m.add_function(wrap_pyfunction!(one_photon_power, m)?)?;
    m.add_function(wrap_pyfunction!(two_photon_power, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_from_drive, m)?)?;
    m.add_function(wrap_pyfunction!(blockade_peak_photons, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_initialization, m)?)?;
    m.add_function(wrap_pyfunction!(load_checkpoint, m)?)?;
    Ok(())
}
