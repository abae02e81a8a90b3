use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drive settings that turn the displaced-frame Hamiltonian into the
/// blockade form `L_NL a+(a+a - n) + h.c.`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockadeParams {
    pub kerr: f64,
    pub alpha: Complex64,
    pub n: u32,
    pub kappa: f64,
    pub lambda_nl: Complex64,
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    pub delta: f64,
}

/// Computes the blockade drive settings for Kerr strength `kerr`,
/// displacement `alpha`, blockade order `n` and loss rate `kappa`:
///
/// - `L_NL = 2 U alpha`
/// - `L2 = -L_NL^2 / (4U)`
/// - `Delta = -|L_NL|^2 / U`
/// - `L1 = L_NL (|L_NL|^2 / (2U^2) - n + i kappa / (4U))`
pub fn derive_blockade_params(
    kerr: f64,
    alpha: Complex64,
    n: u32,
    kappa: f64,
) -> Result<BlockadeParams> {
    if kerr == 0.0 {
        return Err(Error::LinearCavity);
    }
    if !(kerr > 0.0 && kerr.is_finite()) {
        return Err(Error::InvalidParameter(format!("U = {kerr} must be positive")));
    }
    if n < 1 {
        return Err(Error::InvalidParameter("blockade order n must be >= 1".into()));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} must be positive")));
    }
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(Error::InvalidParameter("alpha must be finite".into()));
    }
    let lnl = alpha * (2.0 * kerr);
    let lnl2 = lnl.norm_sqr();
    let lambda1 = lnl
        * Complex64::new(
            lnl2 / (2.0 * kerr * kerr) - n as f64,
            kappa / (4.0 * kerr),
        );
    Ok(BlockadeParams {
        kerr,
        alpha,
        n,
        kappa,
        lambda_nl: lnl,
        lambda1,
        lambda2: -lnl * lnl / (4.0 * kerr),
        delta: -lnl2 / kerr,
    })
}

impl BlockadeParams {
    /// Steady drive holding `alpha` in a cavity without Kerr response.
    pub fn linear_cavity(alpha: Complex64, kappa: f64) -> Self {
        Self {
            kerr: 0.0,
            alpha,
            n: 1,
            kappa,
            lambda_nl: Complex64::new(0.0, 0.0),
            lambda1: Complex64::new(0.0, kappa / 2.0) * alpha,
            lambda2: Complex64::new(0.0, 0.0),
            delta: 0.0,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.kerr == 0.0
    }

    /// Pump laser frequency `omega_c - 2U + Delta`.
    pub fn laser_frequency(&self, omega_c: f64) -> f64 {
        omega_c - 2.0 * self.kerr + self.delta
    }
}

/// Constant one-photon drive `i alpha / tau` that displaces vacuum to
/// `alpha` in time `tau` when loss is negligible.
pub fn linear_init_amplitude(alpha: Complex64, tau: f64) -> Result<Complex64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must be positive")));
    }
    Ok(Complex64::new(0.0, 1.0) * alpha / tau)
}

/// `|L1|^2 = L^2 ((L^2 / (2U^2) - n)^2 + (kappa / (4U))^2)` as a function of
/// `s = L^2 / (2U^2)`, divided by `2U^2`.
fn drive_cubic(s: f64, n: f64, k: f64) -> f64 {
    s * ((s - n) * (s - n) + k * k)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm <= 0.0) == (flo <= 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverts the blockade drive magnitude: given `|L1|` returns
/// `(L_NL, alpha)` with real non-negative `alpha = L_NL / (2U)`.
///
/// The map is monotone when `kappa / (4U) >= n / sqrt(3)`. Otherwise, if
/// `|L1|` has several preimages, [`Error::MultipleRoots`] lists all of the
/// corresponding `alpha` values in increasing order. For `U = 0` the linear
/// cavity relation `|L1| = kappa alpha / 2` is used.
pub fn alpha_from_drive(lambda1_mag: f64, kerr: f64, n: u32, kappa: f64) -> Result<(f64, f64)> {
    if !(lambda1_mag >= 0.0 && lambda1_mag.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "drive magnitude {lambda1_mag} must be finite and >= 0"
        )));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} must be positive")));
    }
    if kerr == 0.0 {
        return Ok((0.0, 2.0 * lambda1_mag / kappa));
    }
    if !(kerr > 0.0) || n < 1 {
        return Err(Error::InvalidParameter("need U > 0 and n >= 1".into()));
    }
    if lambda1_mag == 0.0 {
        return Ok((0.0, 0.0));
    }
    let nf = n as f64;
    let k = kappa / (4.0 * kerr);
    let target = lambda1_mag * lambda1_mag / (2.0 * kerr * kerr);
    let g = |s: f64| drive_cubic(s, nf, k) - target;

    let mut hi = 2.0 * nf + target.cbrt() + 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    // critical points of the cubic
    let disc = 16.0 * nf * nf - 12.0 * (nf * nf + k * k);
    let mut brackets = Vec::new();
    if disc <= 0.0 {
        brackets.push((0.0, hi));
    } else {
        let s_minus = (4.0 * nf - disc.sqrt()) / 6.0;
        let s_plus = (4.0 * nf + disc.sqrt()) / 6.0;
        brackets.push((0.0, s_minus));
        brackets.push((s_minus, s_plus));
        brackets.push((s_plus, hi.max(s_plus)));
    }
    let mut roots: Vec<f64> = Vec::new();
    for (lo, hi) in brackets {
        let (glo, ghi) = (g(lo), g(hi));
        if glo == 0.0 {
            roots.push(lo);
        } else if (glo < 0.0) != (ghi < 0.0) || ghi == 0.0 {
            roots.push(bisect(g, lo, hi));
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    let to_alpha = |s: f64| {
        let lnl = (2.0 * kerr * kerr * s).sqrt();
        (lnl, lnl / (2.0 * kerr))
    };
    match roots.len() {
        1 => Ok(to_alpha(roots[0])),
        0 => Err(Error::InvalidParameter("no root found for drive magnitude".into())),
        _ => Err(Error::MultipleRoots {
            roots: roots.into_iter().map(|s| to_alpha(s).1).collect(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn standard_parameters() {
        let p = derive_blockade_params(4.4e6, c(2.0, 0.0), 1, 1.934e8).unwrap();
        // hand evaluation: L_NL^2/(2U^2) = 2 alpha^2 = 8
        assert!(rel(p.lambda_nl.re, 1.76e7) < 1e-12);
        assert!(rel(p.lambda2.re, -1.76e7) < 1e-12);
        assert!(rel(p.delta, -7.04e7) < 1e-12);
        assert!(rel(p.lambda1.re, 1.232e8) < 1e-12);
        assert!(rel(p.lambda1.im, 1.934e8) < 1e-12);
    }

    #[test]
    fn zero_alpha_and_scaling() {
        let p = derive_blockade_params(4.4e6, c(0.0, 0.0), 1, 1.934e8).unwrap();
        assert_eq!(p.lambda1, c(0.0, 0.0));
        assert_eq!(p.lambda2.norm(), 0.0);
        assert_eq!(p.delta, 0.0);
        let a = derive_blockade_params(4.4e6, c(1.3, 0.0), 1, 1.934e8).unwrap();
        let b = derive_blockade_params(4.4e6, c(2.6, 0.0), 1, 1.934e8).unwrap();
        assert!(rel(b.lambda2.norm(), 4.0 * a.lambda2.norm()) < 1e-12);
        assert!(rel(b.delta, 4.0 * a.delta) < 1e-12);
        assert!(rel(b.lambda_nl.norm(), 2.0 * a.lambda_nl.norm()) < 1e-12);
    }

    #[test]
    fn linear_cavity_rejected() {
        assert!(matches!(
            derive_blockade_params(0.0, c(2.0, 0.0), 1, 1e8),
            Err(Error::LinearCavity)
        ));
    }

    #[test]
    fn init_amplitude() {
        let l = linear_init_amplitude(c(60.3, 0.0), 0.82e-9).unwrap();
        assert!(rel(l.norm(), 7.3537e10) < 1e-4);
        assert_eq!(linear_init_amplitude(c(0.0, 0.0), 1e-9).unwrap(), c(0.0, 0.0));
        assert!(linear_init_amplitude(c(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn drive_inversion() {
        let (_, alpha) = alpha_from_drive(3.886e12, 4.4e6, 1, 1.934e8).unwrap();
        assert!((alpha - 60.3).abs() < 0.3, "{alpha}");
        for a in [0.01, 0.5, 2.0, 17.0, 60.3] {
            let p = derive_blockade_params(4.4e6, c(a, 0.0), 1, 1.934e8).unwrap();
            let (_, back) = alpha_from_drive(p.lambda1.norm(), 4.4e6, 1, 1.934e8).unwrap();
            assert!(rel(back, a) < 1e-9, "{a} -> {back}");
        }
        assert_eq!(alpha_from_drive(0.0, 4.4e6, 1, 1.934e8).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn multiple_roots_reported() {
        // kappa / 4U = 0.1 < 1/sqrt(3): the drive map folds near s = n
        let u = 1.0e7;
        let kappa = 0.4 * u;
        let p = derive_blockade_params(u, c(0.6, 0.0), 1, kappa).unwrap();
        match alpha_from_drive(p.lambda1.norm(), u, 1, kappa) {
            Err(Error::MultipleRoots { roots }) => {
                assert_eq!(roots.len(), 3);
                assert!(roots.iter().any(|r| (r - 0.6).abs() < 1e-9));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
