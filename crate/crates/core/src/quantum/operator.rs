use nalgebra::DMatrix;
use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Dense complex operator on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: DMatrix<Complex64>,
}

pub(crate) fn check_dim(dim: usize, min: usize) -> Result<()> {
    if dim < min {
        return Err(Error::InvalidDimension { dim, min });
    }
    Ok(())
}

impl Operator {
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("operator has non-finite entries".into()));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Self {
        Self { matrix }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            matrix: &self.matrix * factor,
        }
    }

    /// Largest |H - H^dagger| entry relative to the largest |H| entry.
    pub fn hermiticity_error(&self) -> f64 {
        let scale = self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let diff = &self.matrix - self.matrix.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_error() <= rel_tol
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        })
    }

    /// Matrix exponential (scaling and squaring Pade).
    pub fn exp(&self) -> Self {
        Self {
            matrix: self.matrix.clone().exp(),
        }
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator {
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator {
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator {
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

/// Annihilation and creation operators, `a[m, m+1] = sqrt(m+1)`.
pub fn ladder_operators(dim: usize) -> Result<(Operator, Operator)> {
    check_dim(dim, 2)?;
    let mut a = DMatrix::zeros(dim, dim);
    for m in 0..dim - 1 {
        a[(m, m + 1)] = Complex64::new(((m + 1) as f64).sqrt(), 0.0);
    }
    let annihilation = Operator { matrix: a };
    let creation = annihilation.adjoint();
    Ok((annihilation, creation))
}

pub fn number_operator(dim: usize) -> Result<Operator> {
    check_dim(dim, 2)?;
    let diag = nalgebra::DVector::from_fn(dim, |m, _| Complex64::new(m as f64, 0.0));
    Ok(Operator {
        matrix: DMatrix::from_diagonal(&diag),
    })
}

/// Fock-space parity `diag((-1)^n)`.
pub fn parity_operator(dim: usize) -> Result<Operator> {
    check_dim(dim, 2)?;
    let diag = nalgebra::DVector::from_fn(dim, |m, _| {
        Complex64::new(if m % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
    });
    Ok(Operator {
        matrix: DMatrix::from_diagonal(&diag),
    })
}

/// `D(alpha) = exp(alpha a^dagger - alpha^* a)` on the truncated space.
pub fn displacement_operator(alpha: Complex64, dim: usize) -> Result<Operator> {
    let (a, ad) = ladder_operators(dim)?;
    let generator = &ad.scale(alpha) - &a.scale(alpha.conj());
    Ok(generator.exp())
}
