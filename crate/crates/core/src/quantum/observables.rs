use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operator::Operator;
use super::state::QuantumState;
use crate::error::{Error, Result};

/// Mean photon number below which g2(0) is reported as undefined.
pub const G2_MEAN_FLOOR: f64 = 1e-12;

/// `<psi|op|psi>` or `Tr(rho op)`.
pub fn expectation(op: &Operator, state: &QuantumState) -> Result<Complex64> {
    if op.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: op.dim(),
        });
    }
    let m = op.matrix();
    Ok(match state {
        QuantumState::Pure(v) => (v.adjoint() * m * v)[(0, 0)],
        QuantumState::Mixed(rho) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..rho.nrows() {
                for j in 0..rho.ncols() {
                    acc += rho[(i, j)] * m[(j, i)];
                }
            }
            acc
        }
    })
}

/// Zero-delay second-order correlation `<a+ a+ a a> / <a+ a>^2`.
pub fn g2_zero(state: &QuantumState) -> Result<f64> {
    let mean = state.mean_photon_number();
    if mean < G2_MEAN_FLOOR {
        return Err(Error::UndefinedCorrelation { mean });
    }
    Ok((state.second_factorial_moment() / (mean * mean)).max(0.0))
}

/// Weights for the four moment mismatches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentWeights(pub [f64; 4]);

impl Default for MomentWeights {
    fn default() -> Self {
        MomentWeights([10.0, 1.0, 1.0, 1.0])
    }
}

impl MomentWeights {
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&w| w == 0.0)
    }
}

/// Differences between the low-order moments of a state and those of the
/// coherent state `|alpha>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentMismatch {
    pub mean_field: Complex64,
    pub photon_number: f64,
    pub second: Complex64,
    pub third: Complex64,
}

impl MomentMismatch {
    pub fn new(state: &QuantumState, alpha: Complex64) -> Self {
        Self {
            mean_field: state.ladder_moment(1) - alpha,
            photon_number: state.mean_photon_number() - alpha.norm_sqr(),
            second: state.ladder_moment(2) - alpha * alpha,
            third: state.ladder_moment(3) - alpha * alpha * alpha,
        }
    }

    pub fn magnitudes(&self) -> [f64; 4] {
        [
            self.mean_field.norm(),
            self.photon_number.abs(),
            self.second.norm(),
            self.third.norm(),
        ]
    }

    /// `sum c_i sqrt(|d_i|^2 + eps^2)`; `eps = 0` gives the plain weighted sum.
    pub fn weighted(&self, weights: &MomentWeights, eps: f64) -> f64 {
        self.magnitudes()
            .iter()
            .zip(weights.0.iter())
            .map(|(d, c)| {
                if *c == 0.0 {
                    0.0
                } else if eps == 0.0 {
                    c * d
                } else {
                    c * d.hypot(eps)
                }
            })
            .sum()
    }
}

/// Weighted moment loss with the default weights (10, 1, 1, 1).
pub fn moment_loss(state: &QuantumState, alpha: Complex64) -> f64 {
    MomentMismatch::new(state, alpha).weighted(&MomentWeights::default(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::super::operator::{ladder_operators, number_operator};
    use super::super::state::coherent_state;
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn number_on_single_photon() {
        let n = number_operator(6).unwrap();
        let s = QuantumState::fock(1, 6).unwrap();
        assert!((expectation(&n, &s).unwrap() - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn annihilation_on_coherent() {
        let (a, _) = ladder_operators(40).unwrap();
        let s = coherent_state(c(2.0), 40).unwrap().value;
        assert!((expectation(&a, &s).unwrap() - c(2.0)).norm() < 1e-6);
    }

    #[test]
    fn pure_and_mixed_agree() {
        let (a, ad) = ladder_operators(30).unwrap();
        let op = &(&ad * &a) + &a.scale(Complex64::new(0.3, -0.7));
        let s = coherent_state(Complex64::new(1.2, 0.5), 30).unwrap().value;
        let pure = expectation(&op, &s).unwrap();
        let mixed = expectation(&op, &s.to_mixed()).unwrap();
        assert!((pure - mixed).norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let n = number_operator(5).unwrap();
        let s = QuantumState::vacuum(6).unwrap();
        assert!(expectation(&n, &s).is_err());
    }

    #[test]
    fn ladder_moments_match_dense_expectation() {
        let (a, _) = ladder_operators(25).unwrap();
        let s = QuantumState::thermal(0.7, 25).unwrap();
        let mixed = coherent_state(Complex64::new(0.4, 1.1), 25)
            .unwrap()
            .value
            .to_mixed();
        for state in [s, mixed] {
            let mut ak = Operator::identity(25);
            for k in 1..=3 {
                ak = &ak * &a;
                let dense = expectation(&ak, &state).unwrap();
                assert!((dense - state.ladder_moment(k)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn g2_coherent_single_photon_and_floor() {
        let coh = coherent_state(c(1.3), 40).unwrap().value;
        assert!((g2_zero(&coh).unwrap() - 1.0).abs() < 1e-6);
        let one = QuantumState::fock(1, 10).unwrap();
        assert_eq!(g2_zero(&one).unwrap(), 0.0);
        let vac = QuantumState::vacuum(10).unwrap();
        assert!(matches!(
            g2_zero(&vac),
            Err(Error::UndefinedCorrelation { .. })
        ));
    }

    #[test]
    fn g2_thermal_by_direct_summation() {
        // geometric populations p_n = (1/2)^(n+1), renormalized on 60 levels
        let dim = 60;
        let p: Vec<f64> = (0..dim).map(|n| 0.5f64.powi(n as i32 + 1)).collect();
        let z: f64 = p.iter().sum();
        let mean: f64 = p.iter().enumerate().map(|(n, x)| n as f64 * x / z).sum();
        let fact: f64 = p
            .iter()
            .enumerate()
            .map(|(n, x)| (n as f64) * (n as f64 - 1.0) * x / z)
            .sum();
        let oracle = fact / (mean * mean);
        assert!((oracle - 2.0).abs() < 1e-3);
        let s = QuantumState::thermal(1.0, dim).unwrap();
        assert!((g2_zero(&s).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn moment_loss_tabulated_values() {
        let coh = coherent_state(c(2.0), 40).unwrap().value;
        assert!(moment_loss(&coh, c(2.0)) < 1e-3);
        let vac = QuantumState::vacuum(40).unwrap();
        assert!((moment_loss(&vac, c(2.0)) - 36.0).abs() < 1e-12);
        let one = QuantumState::fock(1, 10).unwrap();
        assert!((moment_loss(&one, c(0.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_give_zero_loss() {
        let vac = QuantumState::vacuum(10).unwrap();
        let m = MomentMismatch::new(&vac, c(2.0));
        assert_eq!(m.weighted(&MomentWeights([0.0; 4]), 1e-12), 0.0);
    }
}
