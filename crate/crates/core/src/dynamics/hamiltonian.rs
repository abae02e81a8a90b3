use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::quantum::{check_dim, Operator};

/// Coefficients of a single-mode Hamiltonian with at most two-photon
/// off-diagonal reach:
///
/// `H = detuning a+a + kerr a+a+aa + (drive a+ + pair a+a+ + cubic a+a+a + h.c.)`
///
/// All coefficients are in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianTerms {
    pub detuning: f64,
    pub kerr: f64,
    pub drive: Complex64,
    pub pair: Complex64,
    pub cubic: Complex64,
}

impl HamiltonianTerms {
    /// Lab frame: `Delta a+a + (L1 a+ + L2 a+a+ + h.c.) + U a+a+aa`.
    pub fn lab(lambda1: Complex64, lambda2: Complex64, delta: f64, kerr: f64) -> Self {
        Self {
            detuning: delta,
            kerr,
            drive: lambda1,
            pair: lambda2,
            cubic: Complex64::new(0.0, 0.0),
        }
    }

    /// Lab-frame Hamiltonian and cavity loss rewritten for `a -> a + alpha`.
    /// The loss contributes the drive `-i kappa alpha / 2`.
    pub fn displaced(
        lambda1: Complex64,
        lambda2: Complex64,
        delta: f64,
        kerr: f64,
        kappa: f64,
        alpha: Complex64,
    ) -> Self {
        let n_alpha = alpha.norm_sqr();
        let i = Complex64::new(0.0, 1.0);
        Self {
            detuning: delta + 4.0 * kerr * n_alpha,
            kerr,
            drive: lambda1
                + alpha * delta
                + lambda2 * alpha.conj() * 2.0
                + alpha * (2.0 * kerr * n_alpha)
                - i * alpha * (kappa / 2.0),
            pair: lambda2 + alpha * alpha * kerr,
            cubic: alpha * (2.0 * kerr),
        }
    }

    /// Blockade form `L_NL a+(a+a - n) + h.c.`.
    pub fn blockade(lambda_nl: Complex64, n: u32) -> Self {
        Self {
            detuning: 0.0,
            kerr: 0.0,
            drive: -lambda_nl * n as f64,
            pair: Complex64::new(0.0, 0.0),
            cubic: lambda_nl,
        }
    }

    pub(crate) fn banded(&self, dim: usize, out: &mut Banded) {
        out.resize(dim);
        for m in 0..dim {
            let mf = m as f64;
            out.diag[m] = self.detuning * mf + self.kerr * mf * (mf - 1.0);
            if m + 1 < dim {
                let s = (mf + 1.0).sqrt();
                out.sub1[m] = self.drive * s + self.cubic * (mf * s);
            }
            if m + 2 < dim {
                out.sub2[m] = self.pair * ((mf + 1.0) * (mf + 2.0)).sqrt();
            }
        }
    }

    pub fn to_operator(&self, dim: usize) -> Result<Operator> {
        check_dim(dim, 2)?;
        let mut b = Banded::default();
        self.banded(dim, &mut b);
        Ok(b.to_operator())
    }
}

/// Hermitian pentadiagonal storage: diagonal, `(m+1, m)` and `(m+2, m)`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Banded {
    pub diag: Vec<f64>,
    pub sub1: Vec<Complex64>,
    pub sub2: Vec<Complex64>,
}

impl Banded {
    fn resize(&mut self, dim: usize) {
        self.diag.resize(dim, 0.0);
        self.sub1.resize(dim.saturating_sub(1), Complex64::new(0.0, 0.0));
        self.sub2.resize(dim.saturating_sub(2), Complex64::new(0.0, 0.0));
    }

    fn to_operator(&self) -> Operator {
        let dim = self.diag.len();
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(self.diag[i], 0.0);
        }
        for (i, &z) in self.sub1.iter().enumerate() {
            m[(i + 1, i)] = z;
            m[(i, i + 1)] = z.conj();
        }
        for (i, &z) in self.sub2.iter().enumerate() {
            m[(i + 2, i)] = z;
            m[(i, i + 2)] = z.conj();
        }
        Operator::from_matrix_unchecked(m)
    }
}

/// Lab-frame Hamiltonian `Delta a+a + (L1 a+ + L2 a+a+ + h.c.) + U a+a+aa`.
pub fn build_lab_hamiltonian(
    lambda1: Complex64,
    lambda2: Complex64,
    delta: f64,
    kerr: f64,
    dim: usize,
) -> Result<Operator> {
    let min = if kerr != 0.0 || lambda2 != Complex64::new(0.0, 0.0) {
        4
    } else {
        2
    };
    check_dim(dim, min)?;
    HamiltonianTerms::lab(lambda1, lambda2, delta, kerr).to_operator(dim)
}

/// Blockade Hamiltonian `L_NL a+(a+a - n) + h.c.`.
pub fn build_blockade_hamiltonian(lambda_nl: Complex64, n: u32, dim: usize) -> Result<Operator> {
    if n < 1 {
        return Err(crate::Error::InvalidParameter("blockade order n must be >= 1".into()));
    }
    check_dim(dim, n as usize + 3)?;
    HamiltonianTerms::blockade(lambda_nl, n).to_operator(dim)
}
