//! Wigner quasi-probability via the displaced-parity formula
//! `W(beta) = (2/pi) Tr[rho D(beta) P D(beta)^dagger]`.
//!
//! With this normalization the integral of `W` over the phase-space plane
//! (measure `d Re(beta) d Im(beta)`) is 1 and `|W| <= 2/pi`.
//!
//! Since `P D(beta)^dagger = D(beta) P`, the kernel is `D(2 beta) P`. Writing
//! `beta = r e^{i theta}`, the rotation `exp(i theta n)` moves onto the
//! density matrix as a phase `e^{i theta (k - j)}` on element `(j, k)`, and
//! `D(2r)` is evaluated from one spectral decomposition of the Hermitian
//! generator `i (a^dagger - a)`. Each grid point then costs `O(dim^2)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use super::operator::ladder_operators;
use super::state::{Checked, QuantumState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub re_count: usize,
    pub im_min: f64,
    pub im_max: f64,
    pub im_count: usize,
    /// Quasi-probability density, indexed `[i_re * im_count + i_im]`.
    pub values: Vec<f64>,
}

impl PhaseSpaceGrid {
    pub fn new(
        (re_min, re_max, re_count): (f64, f64, usize),
        (im_min, im_max, im_count): (f64, f64, usize),
    ) -> Result<Self> {
        if re_count < 2 || im_count < 2 {
            return Err(Error::InvalidParameter("grid counts must be >= 2".into()));
        }
        if !(re_min < re_max) || !(im_min < im_max) {
            return Err(Error::InvalidParameter(
                "grid axes must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            re_min,
            re_max,
            re_count,
            im_min,
            im_max,
            im_count,
            values: Vec::new(),
        })
    }

    /// Square grid centred on `center` with half-width `half`.
    pub fn square(center: Complex64, half: f64, count: usize) -> Result<Self> {
        Self::new(
            (center.re - half, center.re + half, count),
            (center.im - half, center.im + half, count),
        )
    }

    pub fn re_axis(&self) -> Vec<f64> {
        linspace(self.re_min, self.re_max, self.re_count)
    }

    pub fn im_axis(&self) -> Vec<f64> {
        linspace(self.im_min, self.im_max, self.im_count)
    }

    pub fn value(&self, i_re: usize, i_im: usize) -> f64 {
        self.values[i_re * self.im_count + i_im]
    }

    /// Trapezoidal integral of the stored values.
    pub fn integral(&self) -> f64 {
        let dre = (self.re_max - self.re_min) / (self.re_count - 1) as f64;
        let dim_ = (self.im_max - self.im_min) / (self.im_count - 1) as f64;
        let mut acc = 0.0;
        for i in 0..self.re_count {
            let wi = if i == 0 || i == self.re_count - 1 { 0.5 } else { 1.0 };
            for j in 0..self.im_count {
                let wj = if j == 0 || j == self.im_count - 1 { 0.5 } else { 1.0 };
                acc += wi * wj * self.value(i, j);
            }
        }
        acc * dre * dim_
    }

    /// Location and value of the maximum.
    pub fn argmax(&self) -> (Complex64, f64) {
        let re = self.re_axis();
        let im = self.im_axis();
        let mut best = (Complex64::new(re[0], im[0]), f64::NEG_INFINITY);
        for i in 0..self.re_count {
            for j in 0..self.im_count {
                let v = self.value(i, j);
                if v > best.1 {
                    best = (Complex64::new(re[i], im[j]), v);
                }
            }
        }
        best
    }

    fn max_radius_sqr(&self) -> f64 {
        let re = self.re_min.abs().max(self.re_max.abs());
        let im = self.im_min.abs().max(self.im_max.abs());
        re * re + im * im
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Precomputed spectral data for evaluating `W` of one state at many points.
pub struct WignerKernel {
    eigenvalues: Vec<f64>,
    /// `coeff[(delta + dim - 1) * dim + l]`
    coeff: Vec<Complex64>,
    dim: usize,
}

impl WignerKernel {
    pub fn new(state: &QuantumState) -> Result<Self> {
        let dim = state.dim();
        let rho = state.density_matrix();
        let (a, ad) = ladder_operators(dim)?;
        let generator: DMatrix<Complex64> =
            (ad.matrix() - a.matrix()) * Complex64::new(0.0, 1.0);
        let eig = generator.symmetric_eigen();
        let v = eig.eigenvectors;
        let width = 2 * dim - 1;
        let mut coeff = vec![Complex64::new(0.0, 0.0); width * dim];
        for j in 0..dim {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            for k in 0..dim {
                let r = rho[(j, k)] * sign;
                if r == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row = (k + dim - 1 - j) * dim;
                for l in 0..dim {
                    coeff[row + l] += r * v[(j, l)].conj() * v[(k, l)];
                }
            }
        }
        Ok(Self {
            eigenvalues: eig.eigenvalues.iter().cloned().collect(),
            coeff,
            dim,
        })
    }

    pub fn at(&self, beta: Complex64) -> f64 {
        let (r, theta) = beta.to_polar();
        let dim = self.dim;
        let width = 2 * dim - 1;
        let phases: Vec<Complex64> = (0..width)
            .map(|i| Complex64::from_polar(1.0, theta * (i as f64 - (dim as f64 - 1.0))))
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..dim {
            let mut inner = Complex64::new(0.0, 0.0);
            for (i, ph) in phases.iter().enumerate() {
                inner += ph * self.coeff[i * dim + l];
            }
            acc += Complex64::from_polar(1.0, -2.0 * r * self.eigenvalues[l]) * inner;
        }
        2.0 / PI * acc.re
    }
}

/// Fills `grid` with the Wigner function of `state`. The warning is raised
/// when the grid reaches `|beta|^2 > dim / 2`.
pub fn wigner(state: &QuantumState, grid: &PhaseSpaceGrid) -> Result<Checked<PhaseSpaceGrid>> {
    let kernel = WignerKernel::new(state)?;
    let re = grid.re_axis();
    let im = grid.im_axis();
    let mut out = grid.clone();
    out.values = Vec::with_capacity(re.len() * im.len());
    for &x in &re {
        for &y in &im {
            out.values.push(kernel.at(Complex64::new(x, y)));
        }
    }
    let warn = grid.max_radius_sqr() > state.dim() as f64 / 2.0;
    Ok(Checked {
        value: out,
        truncation_warning: warn,
    })
}
