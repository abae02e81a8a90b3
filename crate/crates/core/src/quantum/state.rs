use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operator::{check_dim, Operator};
use crate::error::{Error, Result};

/// Physicality tolerances for state validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateTolerances {
    pub norm: f64,
    pub hermiticity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl Default for StateTolerances {
    fn default() -> Self {
        Self {
            norm: 1e-10,
            hermiticity: 1e-10,
            trace: 1e-8,
            min_eigenvalue: -1e-8,
        }
    }
}

/// A pure state vector or a density matrix on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(DVector<Complex64>),
    Mixed(DMatrix<Complex64>),
}

/// A value together with a flag raised when the Fock truncation is suspect.
#[derive(Debug, Clone, PartialEq)]
pub struct Checked<T> {
    pub value: T,
    pub truncation_warning: bool,
}

impl QuantumState {
    pub fn pure(amplitudes: DVector<Complex64>) -> Result<Self> {
        Self::pure_with(amplitudes, &StateTolerances::default())
    }

    pub fn pure_with(amplitudes: DVector<Complex64>, tol: &StateTolerances) -> Result<Self> {
        check_dim(amplitudes.len(), 2)?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > tol.norm {
            return Err(Error::InvalidState(format!("pure state norm {norm} is not 1")));
        }
        Ok(QuantumState::Pure(amplitudes))
    }

    pub fn mixed(rho: DMatrix<Complex64>) -> Result<Self> {
        Self::mixed_with(rho, &StateTolerances::default())
    }

    pub fn mixed_with(rho: DMatrix<Complex64>, tol: &StateTolerances) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::DimensionMismatch {
                expected: rho.nrows(),
                found: rho.ncols(),
            });
        }
        check_dim(rho.nrows(), 2)?;
        let herm = hermiticity_error(&rho);
        if herm > tol.hermiticity {
            return Err(Error::InvalidState(format!(
                "density matrix not Hermitian (error {herm:e})"
            )));
        }
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > tol.trace || trace.im.abs() > tol.trace {
            return Err(Error::InvalidState(format!("density matrix trace {trace}")));
        }
        let min_eig = min_eigenvalue(&rho);
        if min_eig < tol.min_eigenvalue {
            return Err(Error::InvalidState(format!(
                "density matrix has eigenvalue {min_eig:e}"
            )));
        }
        Ok(QuantumState::Mixed(rho))
    }

    /// Wraps an evolved density matrix without re-validating it.
    pub(crate) fn mixed_unchecked(rho: DMatrix<Complex64>) -> Self {
        QuantumState::Mixed(rho)
    }

    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        check_dim(dim, 2)?;
        if n >= dim {
            return Err(Error::InvalidParameter(format!(
                "Fock level {n} outside dimension {dim}"
            )));
        }
        let mut v = DVector::zeros(dim);
        v[n] = Complex64::new(1.0, 0.0);
        Ok(QuantumState::Pure(v))
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::fock(0, dim)
    }

    /// Thermal state with geometric populations, renormalized after truncation.
    pub fn thermal(mean: f64, dim: usize) -> Result<Self> {
        check_dim(dim, 2)?;
        if !(mean >= 0.0) {
            return Err(Error::InvalidParameter(format!("thermal mean {mean}")));
        }
        let ratio = mean / (1.0 + mean);
        let mut pops: Vec<f64> = (0..dim).map(|n| ratio.powi(n as i32)).collect();
        let total: f64 = pops.iter().sum();
        pops.iter_mut().for_each(|p| *p /= total);
        let diag = DVector::from_iterator(dim, pops.iter().map(|&p| Complex64::new(p, 0.0)));
        Ok(QuantumState::Mixed(DMatrix::from_diagonal(&diag)))
    }

    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Mixed(m) => m.nrows(),
        }
    }

    pub fn is_pure_representation(&self) -> bool {
        matches!(self, QuantumState::Pure(_))
    }

    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        match self {
            QuantumState::Pure(v) => v * v.adjoint(),
            QuantumState::Mixed(m) => m.clone(),
        }
    }

    pub fn to_mixed(&self) -> Self {
        QuantumState::Mixed(self.density_matrix())
    }

    pub fn population(&self, n: usize) -> f64 {
        if n >= self.dim() {
            return 0.0;
        }
        match self {
            QuantumState::Pure(v) => v[n].norm_sqr(),
            QuantumState::Mixed(m) => m[(n, n)].re,
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.population(n)).collect()
    }

    pub fn trace(&self) -> f64 {
        match self {
            QuantumState::Pure(v) => v.norm_squared(),
            QuantumState::Mixed(m) => m.trace().re,
        }
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// `<a^k>`, evaluated on the band of the density matrix it touches.
    pub fn ladder_moment(&self, k: usize) -> Complex64 {
        let dim = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..dim.saturating_sub(k) {
            let weight: f64 = (m + 1..=m + k).map(|j| (j as f64).sqrt()).product();
            let element = match self {
                QuantumState::Pure(v) => v[m + k] * v[m].conj(),
                QuantumState::Mixed(rho) => rho[(m + k, m)],
            };
            acc += element * weight;
        }
        acc
    }

    /// `<a^dagger^2 a^2> = sum n(n-1) p_n`.
    pub fn second_factorial_moment(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p)
            .sum()
    }

    /// `U rho U^dagger` (or `U psi`).
    pub fn transform(&self, unitary: &Operator) -> Result<Self> {
        if unitary.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: unitary.dim(),
            });
        }
        let u = unitary.matrix();
        Ok(match self {
            QuantumState::Pure(v) => QuantumState::Pure(u * v),
            QuantumState::Mixed(m) => QuantumState::Mixed(u * m * u.adjoint()),
        })
    }

    /// Copies the state into a space of dimension `dim`, zero-padding or
    /// dropping the top levels. Returns the weight that was dropped.
    pub fn resize(&self, dim: usize) -> Result<(Self, f64)> {
        check_dim(dim, 2)?;
        let old = self.dim();
        let keep = old.min(dim);
        let dropped: f64 = (keep..old).map(|n| self.population(n)).sum();
        Ok(match self {
            QuantumState::Pure(v) => {
                let mut out = DVector::zeros(dim);
                out.rows_mut(0, keep).copy_from(&v.rows(0, keep));
                (QuantumState::Pure(out), dropped)
            }
            QuantumState::Mixed(m) => {
                let mut out = DMatrix::zeros(dim, dim);
                out.view_mut((0, 0), (keep, keep))
                    .copy_from(&m.view((0, 0), (keep, keep)));
                (QuantumState::Mixed(out), dropped)
            }
        })
    }

    /// Rescales to unit trace.
    pub fn renormalized(&self) -> Self {
        let tr = self.trace();
        match self {
            QuantumState::Pure(v) => QuantumState::Pure(v / Complex64::new(tr.sqrt(), 0.0)),
            QuantumState::Mixed(m) => QuantumState::Mixed(m / Complex64::new(tr, 0.0)),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            QuantumState::Pure(_) => 0.0,
            QuantumState::Mixed(m) => min_eigenvalue(m),
        }
    }
}

pub(crate) fn hermiticity_error(m: &DMatrix<Complex64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Coherent state `|alpha>` renormalized after truncation. The warning is
/// raised when `|alpha|^2 > dim - 5 |alpha|`.
pub fn coherent_state(alpha: Complex64, dim: usize) -> Result<Checked<QuantumState>> {
    check_dim(dim, 2)?;
    let mut amps = DVector::zeros(dim);
    amps[0] = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 1..dim {
        amps[n] = amps[n - 1] * alpha / (n as f64).sqrt();
    }
    let norm = amps.norm();
    amps /= Complex64::new(norm, 0.0);
    let r = alpha.norm();
    Ok(Checked {
        value: QuantumState::Pure(amps),
        truncation_warning: r * r > dim as f64 - 5.0 * r,
    })
}

/// Truncation level for lab-frame states: `ceil(|alpha|^2 + 7|alpha| + 10)`.
pub fn lab_frame_dim(alpha: Complex64) -> usize {
    let r = alpha.norm();
    (r * r + 7.0 * r + 10.0).ceil() as usize
}

/// Minimum truncation for displaced-frame blockade states.
pub const DISPLACED_FRAME_DIM: usize = 15;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherent_vacuum() {
        let s = coherent_state(Complex64::new(0.0, 0.0), 10).unwrap().value;
        assert_eq!(s.population(0), 1.0);
        assert_eq!(s.population(3), 0.0);
    }

    #[test]
    fn coherent_population_matches_poisson() {
        let s = coherent_state(Complex64::new(2.0, 0.0), 40).unwrap();
        assert!(!s.truncation_warning);
        assert!((s.value.population(0) - (-4.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn coherent_mean_field_by_series() {
        // direct series: <a> = sum_n sqrt(n+1) c_n^* c_{n+1}
        let alpha = Complex64::new(2.0, 0.0);
        let s = coherent_state(alpha, 40).unwrap().value;
        let QuantumState::Pure(v) = &s else { panic!() };
        let mut series = Complex64::new(0.0, 0.0);
        for n in 0..39 {
            series += v[n].conj() * v[n + 1] * ((n + 1) as f64).sqrt();
        }
        assert!((series - alpha).norm() < 1e-6);
        assert!((s.ladder_moment(1) - alpha).norm() < 1e-6);
    }

    #[test]
    fn truncation_warning_raised() {
        let s = coherent_state(Complex64::new(4.0, 0.0), 10).unwrap();
        assert!(s.truncation_warning);
    }

    #[test]
    fn mixed_validation_rejects_bad_trace() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.6, 0.0),
        ]));
        assert!(QuantumState::mixed(m).is_err());
    }

    #[test]
    fn mixed_validation_rejects_negative_eigenvalue() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.1, 0.0),
            Complex64::new(-0.1, 0.0),
        ]));
        assert!(QuantumState::mixed(m).is_err());
    }

    #[test]
    fn pure_validation_rejects_norm() {
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert!(QuantumState::pure(v).is_err());
    }

    #[test]
    fn resize_reports_dropped_weight() {
        let s = QuantumState::fock(5, 8).unwrap();
        let (small, dropped) = s.resize(4).unwrap();
        assert_eq!(small.dim(), 4);
        assert!((dropped - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_policy() {
        assert_eq!(lab_frame_dim(Complex64::new(2.0, 0.0)), 28);
        assert_eq!(lab_frame_dim(Complex64::new(0.0, 0.0)), 10);
    }
}
