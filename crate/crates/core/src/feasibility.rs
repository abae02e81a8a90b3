//! Physical parameter chain: Kerr strength, four-wave-mixing coupling,
//! pump powers, classical mode fields and power maps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{alpha_from_drive, blockade_peak_photons, derive_blockade_params};
use crate::quantum::DISPLACED_FRAME_DIM;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityMode {
    /// Resonance, rad/s.
    pub omega: f64,
    pub q: f64,
    /// Loss rate override, rad/s. `None` means `omega / q`.
    pub kappa: Option<f64>,
    /// Effective mode volume entering the Kerr strength, m^3.
    pub v_eff: f64,
    /// Normalization volume of the mode profile, m^3.
    pub v_mode: f64,
    /// Pump detuning from this mode, rad/s.
    pub detuning: f64,
    /// Ladder spacing of the triply resonant set, rad/s.
    pub spacing: f64,
}

impl CavityMode {
    pub fn new(omega: f64, q: f64, v_eff: f64) -> Self {
        Self {
            omega,
            q,
            kappa: None,
            v_eff,
            v_mode: v_eff,
            detuning: 0.0,
            spacing: 0.0,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or(self.omega / self.q)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega", self.omega),
            ("q", self.q),
            ("v_eff", self.v_eff),
            ("v_mode", self.v_mode),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidParameter(format!("kappa = {k} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Third-order susceptibility, m^2/V^2.
    pub chi3: f64,
    pub eps_r: f64,
    /// Reference permittivities of modes 1..3, F/m.
    pub eps_bar: [f64; 3],
    pub hbar: f64,
    pub eps0: f64,
}

impl MaterialParams {
    pub fn new(chi3: f64, eps_r: f64) -> Self {
        Self {
            chi3,
            eps_r,
            eps_bar: [EPSILON_0 * eps_r; 3],
            hbar: HBAR,
            eps0: EPSILON_0,
        }
    }

    /// Crystalline silicon near 1550 nm.
    pub fn silicon() -> Self {
        Self::new(0.45e-18, 12.1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi3 >= 0.0 && self.chi3.is_finite()) {
            return Err(Error::InvalidParameter("chi3 must be >= 0".into()));
        }
        if !(self.eps_r >= 1.0) {
            return Err(Error::InvalidParameter("eps_r must be >= 1".into()));
        }
        if self.eps_bar.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidParameter("eps_bar must be positive".into()));
        }
        Ok(())
    }
}

/// Kerr strength `U = 3 hbar omega^2 chi3 / (4 eps0 V_eff eps_r^2)`, rad/s.
pub fn kerr_strength(mode: &CavityMode, material: &MaterialParams) -> Result<f64> {
    mode.validate()?;
    material.validate()?;
    Ok(3.0 * material.hbar * mode.omega * mode.omega * material.chi3
        / (4.0 * material.eps0 * mode.v_eff * material.eps_r * material.eps_r))
}

/// Mode profiles of the three cavity modes on one uniform 3-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFieldGrid {
    /// Points along x, y, z.
    pub shape: [usize; 3],
    /// Grid spacing along x, y, z, m.
    pub spacing: [f64; 3],
    /// Profiles of modes 1, 2, 3, flattened with z fastest.
    pub profiles: [Vec<Complex64>; 3],
    /// Optional position-dependent susceptibility, m^2/V^2.
    pub chi3: Option<Vec<f64>>,
}

impl ModeFieldGrid {
    pub fn new(
        shape: [usize; 3],
        spacing: [f64; 3],
        profiles: [Vec<Complex64>; 3],
        chi3: Option<Vec<f64>>,
    ) -> Result<Self> {
        let g = Self {
            shape,
            spacing,
            profiles,
            chi3,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.iter().any(|&n| n < 2) {
            return Err(Error::GridMismatch("each axis needs at least 2 points".into()));
        }
        if self.spacing.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::GridMismatch("grid spacing must be positive".into()));
        }
        let n = self.len();
        for (i, p) in self.profiles.iter().enumerate() {
            if p.len() != n {
                return Err(Error::GridMismatch(format!(
                    "profile {} has {} points, grid has {n}",
                    i + 1,
                    p.len()
                )));
            }
            let max = p.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if (max - 1.0).abs() > 1e-6 {
                return Err(Error::GridMismatch(format!(
                    "profile {} has max |phi| = {max}, expected 1",
                    i + 1
                )));
            }
        }
        if let Some(c) = &self.chi3 {
            if c.len() != n {
                return Err(Error::GridMismatch(format!(
                    "chi3 map has {} points, grid has {n}",
                    c.len()
                )));
            }
        }
        Ok(())
    }

    /// Builds a grid by sampling closures at `x, y, z` coordinates centred
    /// on the origin. Each profile is rescaled to unit peak magnitude.
    pub fn sample(
        shape: [usize; 3],
        spacing: [f64; 3],
        profiles: [&dyn Fn(f64, f64, f64) -> Complex64; 3],
        chi3: Option<&dyn Fn(f64, f64, f64) -> f64>,
    ) -> Result<Self> {
        let coords = |axis: usize, i: usize| {
            (i as f64 - (shape[axis] - 1) as f64 / 2.0) * spacing[axis]
        };
        let mut points = Vec::with_capacity(shape.iter().product());
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                for k in 0..shape[2] {
                    points.push((coords(0, i), coords(1, j), coords(2, k)));
                }
            }
        }
        let sample = |f: &dyn Fn(f64, f64, f64) -> Complex64| -> Vec<Complex64> {
            let v: Vec<Complex64> = points.iter().map(|&(x, y, z)| f(x, y, z)).collect();
            let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if max > 0.0 {
                v.into_iter().map(|z| z / max).collect()
            } else {
                v
            }
        };
        let chi = chi3.map(|f| points.iter().map(|&(x, y, z)| f(x, y, z)).collect());
        Self::new(
            shape,
            spacing,
            [sample(profiles[0]), sample(profiles[1]), sample(profiles[2])],
            chi,
        )
    }
}

/// Trapezoidal quadrature of `chi3(r) conj(phi1)^2 phi2 phi3` (or without
/// `chi3` when the grid carries no susceptibility map).
pub fn overlap_integral(grid: &ModeFieldGrid) -> Result<Complex64> {
    grid.validate()?;
    let [nx, ny, nz] = grid.shape;
    let w = |i: usize, n: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let [p1, p2, p3] = &grid.profiles;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut idx = 0;
    for i in 0..nx {
        for j in 0..ny {
            let wij = w(i, nx) * w(j, ny);
            for k in 0..nz {
                let chi = grid.chi3.as_ref().map_or(1.0, |c| c[idx]);
                let f = p1[idx].conj() * p1[idx].conj() * p2[idx] * p3[idx];
                acc += f * (chi * wij * w(k, nz));
                idx += 1;
            }
        }
    }
    Ok(acc * grid.spacing.iter().product::<f64>())
}

/// Four-wave-mixing coupling
/// `beta = (3 eps0 hbar / 8) sqrt(w1^2 w2 w3 / (V1^2 V2 V3 e1^2 e2 e3)) * overlap`,
/// rad/s, using each mode's normalization volume.
pub fn fwm_beta(
    modes: [&CavityMode; 3],
    material: &MaterialParams,
    overlap: Complex64,
) -> Result<Complex64> {
    for m in modes {
        m.validate()?;
    }
    material.validate()?;
    let [m1, m2, m3] = modes;
    let [e1, e2, e3] = material.eps_bar;
    let ratio = (m1.omega * m1.omega * m2.omega * m3.omega)
        / (m1.v_mode * m1.v_mode * m2.v_mode * m3.v_mode * e1 * e1 * e2 * e3);
    Ok(overlap * (3.0 * material.eps0 * material.hbar / 8.0 * ratio.sqrt()))
}

/// Coupling assumed when no field data is available: `0.01 U`.
pub fn fwm_beta_default(kerr: f64) -> f64 {
    0.01 * kerr
}

/// Input power `hbar omega |L1|^2 / kappa` of the one-photon pump, W.
pub fn one_photon_power(lambda1: Complex64, omega: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} must be positive")));
    }
    Ok(HBAR * omega * lambda1.norm_sqr() / kappa)
}

/// Inverse of [`one_photon_power`]: drive magnitude for power `p`.
pub fn drive_for_power(p: f64, omega: f64, kappa: f64) -> Result<f64> {
    if !(p >= 0.0 && omega > 0.0 && kappa > 0.0) {
        return Err(Error::InvalidParameter("need p >= 0, omega > 0, kappa > 0".into()));
    }
    Ok((p * kappa / (HBAR * omega)).sqrt())
}

/// Steady intracavity field `sqrt(k2) a_in / (k2/2 - i Delta)`.
pub fn steady_mode_field(a_in: Complex64, kappa2: f64, delta: f64) -> Result<Complex64> {
    if !(kappa2 > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa2 = {kappa2} must be positive")));
    }
    Ok(a_in * kappa2.sqrt() / Complex64::new(kappa2 / 2.0, -delta))
}

/// Pump powers and classical fields of the two-photon drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonPumps {
    pub p2: f64,
    pub p3: f64,
    /// Intracavity amplitude of modes 2 and 3, equal by assumption.
    pub mode_field: Complex64,
    pub input_field: Complex64,
}

/// Pump power for the two-photon drive `L2 = beta a2 a3` with symmetric
/// pumps (`a2 = a3`, `P2 = P3`):
/// `P2 = (|L2| / beta) ((kappa/2)^2 + Delta2^2) / (2 kappa) hbar sqrt(w1 w2)`.
pub fn two_photon_power(
    lambda2: Complex64,
    beta: f64,
    kappa: f64,
    delta2: f64,
    omega1: f64,
    omega2: f64,
) -> Result<TwoPhotonPumps> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} must be positive")));
    }
    let occupation = lambda2.norm() / beta;
    let lorentz = (kappa / 2.0).powi(2) + delta2 * delta2;
    let p2 = occupation * lorentz / (2.0 * kappa) * HBAR * (omega1 * omega2).sqrt();
    let mode_field = Complex64::new(occupation.sqrt(), 0.0);
    let input_field = mode_field * Complex64::new(kappa / 2.0, -delta2) / kappa.sqrt();
    Ok(TwoPhotonPumps {
        p2,
        p3: p2,
        mode_field,
        input_field,
    })
}

/// Full pump budget at the blockade settings for `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub beta: f64,
    pub mode_field: Complex64,
    pub input_field: Complex64,
    pub lambda_nl: Complex64,
    pub lambda1: Complex64,
    pub lambda2: Complex64,
}

pub fn power_budget(
    kerr: f64,
    alpha: Complex64,
    n: u32,
    mode: &CavityMode,
    beta: f64,
    delta2: f64,
) -> Result<PowerBudget> {
    let kappa = mode.kappa();
    let params = derive_blockade_params(kerr, alpha, n, kappa)?;
    let p1 = one_photon_power(params.lambda1, mode.omega, kappa)?;
    let pumps = two_photon_power(params.lambda2, beta, kappa, delta2, mode.omega, mode.omega)?;
    Ok(PowerBudget {
        p1,
        p2: pumps.p2,
        p3: pumps.p3,
        beta,
        mode_field: pumps.mode_field,
        input_field: pumps.input_field,
        lambda_nl: params.lambda_nl,
        lambda1: params.lambda1,
        lambda2: params.lambda2,
    })
}

/// Swept quantity of a power map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Effective mode volume, m^3.
    VEff(Vec<f64>),
    Q(Vec<f64>),
}

impl SweepAxis {
    pub fn values(&self) -> &[f64] {
        match self {
            SweepAxis::VEff(v) | SweepAxis::Q(v) => v,
        }
    }

    pub fn column(&self) -> &'static str {
        match self {
            SweepAxis::VEff(_) => "v_eff_m3",
            SweepAxis::Q(_) => "q",
        }
    }
}

/// How the loss rate follows Q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KappaConvention {
    /// `kappa = omega / Q`, or the mode's explicit value if set.
    OmegaOverQ,
    /// `kappa = kappa_ref * q_ref / Q`.
    Scaled { kappa_ref: f64, q_ref: f64 },
}

/// Where the Kerr strength comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KerrSource {
    /// [`kerr_strength`] at each grid point.
    Formula,
    /// `U = u_ref * v_ref / V_eff`.
    Reference { u_ref: f64, v_ref: f64 },
}

/// What each grid point is solved for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum MapTarget {
    /// Find the displacement giving this peak mean photon number.
    PeakPhotons(f64),
    Alpha(f64),
    /// One-photon pump power, W.
    Power(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerMapConfig {
    pub mode: CavityMode,
    pub material: MaterialParams,
    pub axis: SweepAxis,
    pub kappa: KappaConvention,
    pub kerr: KerrSource,
    pub target: MapTarget,
    pub n: u32,
    /// Displaced-frame truncation for the peak photon simulation.
    pub dim: usize,
    /// Relative tolerance of the peak-photon inversion.
    pub rel_tol: f64,
}

impl PowerMapConfig {
    pub fn new(axis: SweepAxis, target: MapTarget) -> Self {
        Self {
            mode: CavityMode::new(1.215e15, 1e7, 1e-20),
            material: MaterialParams::silicon(),
            axis,
            kappa: KappaConvention::OmegaOverQ,
            kerr: KerrSource::Formula,
            target,
            n: 1,
            dim: DISPLACED_FRAME_DIM,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerMapRow {
    pub axis_value: f64,
    pub kerr: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub lambda_nl: f64,
    pub lambda1_abs: f64,
    pub p1: f64,
    pub n_peak: f64,
    pub reachable: bool,
}

/// Coupling ratio `L_NL / kappa` above which the peak photon number is
/// treated as saturated.
const MAX_COUPLING_RATIO: f64 = 200.0;
const MIN_COUPLING_RATIO: f64 = 1e-5;

/// Smallest `L_NL` whose simulated peak `<n>` reaches `target`, by
/// bisection in `log L_NL`. `None` when the target is above the ceiling.
pub fn coupling_for_peak_photons(
    target: f64,
    n: u32,
    kappa: f64,
    dim: usize,
    rel_tol: f64,
) -> Result<Option<(f64, f64)>> {
    if !(target > 0.0) {
        return Err(Error::InvalidParameter("target peak <n> must be > 0".into()));
    }
    let peak = |g: f64| blockade_peak_photons(g, n, kappa, dim);
    // bracket outwards from kappa; extreme couplings are costly to simulate
    let mut lo = kappa;
    let mut hi = kappa;
    let mut n_hi = peak(hi)?;
    while n_hi < target {
        if hi >= MAX_COUPLING_RATIO * kappa {
            return Ok(None);
        }
        lo = hi;
        hi = (4.0 * hi).min(MAX_COUPLING_RATIO * kappa);
        n_hi = peak(hi)?;
    }
    if lo == hi {
        loop {
            if lo <= MIN_COUPLING_RATIO * kappa {
                return Ok(Some((hi, n_hi)));
            }
            lo = (lo / 4.0).max(MIN_COUPLING_RATIO * kappa);
            let n_lo = peak(lo)?;
            if n_lo < target {
                break;
            }
            hi = lo;
            n_hi = n_lo;
        }
    }
    let mut n_at_hi = n_hi;
    while hi / lo > 1.0 + rel_tol {
        let mid = (lo * hi).sqrt();
        let v = peak(mid)?;
        if v >= target {
            hi = mid;
            n_at_hi = v;
        } else {
            lo = mid;
        }
    }
    Ok(Some((hi, n_at_hi)))
}

/// One grid point of [`power_map`].
pub fn power_map_point(cfg: &PowerMapConfig, value: f64) -> Result<PowerMapRow> {
    let mut mode = cfg.mode;
    match cfg.axis {
        SweepAxis::VEff(_) => {
            mode.v_eff = value;
        }
        SweepAxis::Q(_) => {
            mode.q = value;
            mode.kappa = None;
        }
    }
    let kappa = match (cfg.kappa, &cfg.axis) {
        (KappaConvention::Scaled { kappa_ref, q_ref }, _) => kappa_ref * q_ref / mode.q,
        (KappaConvention::OmegaOverQ, SweepAxis::Q(_)) => mode.omega / mode.q,
        (KappaConvention::OmegaOverQ, SweepAxis::VEff(_)) => mode.kappa(),
    };
    mode.kappa = Some(kappa);
    let kerr = match cfg.kerr {
        KerrSource::Formula => kerr_strength(&mode, &cfg.material)?,
        KerrSource::Reference { u_ref, v_ref } => u_ref * v_ref / mode.v_eff,
    };
    let mut row = PowerMapRow {
        axis_value: value,
        kerr,
        kappa,
        alpha: f64::NAN,
        lambda_nl: f64::NAN,
        lambda1_abs: f64::NAN,
        p1: f64::NAN,
        n_peak: f64::NAN,
        reachable: true,
    };
    let alpha = match cfg.target {
        MapTarget::Alpha(a) => a,
        MapTarget::PeakPhotons(t) => {
            match coupling_for_peak_photons(t, cfg.n, kappa, cfg.dim, cfg.rel_tol)? {
                Some((g, _)) => g / (2.0 * kerr),
                None => {
                    row.reachable = false;
                    return Ok(row);
                }
            }
        }
        MapTarget::Power(p) => {
            let l1 = drive_for_power(p, mode.omega, kappa)?;
            alpha_from_drive(l1, kerr, cfg.n, kappa)?.1
        }
    };
    let params = derive_blockade_params(kerr, Complex64::new(alpha, 0.0), cfg.n, kappa)?;
    row.alpha = alpha;
    row.lambda_nl = params.lambda_nl.norm();
    row.lambda1_abs = params.lambda1.norm();
    row.p1 = one_photon_power(params.lambda1, mode.omega, kappa)?;
    row.n_peak = blockade_peak_photons(row.lambda_nl, cfg.n, kappa, cfg.dim)?;
    Ok(row)
}

/// Evaluates each point of `cfg.axis`, in axis order.
pub fn power_map(cfg: &PowerMapConfig) -> Result<Vec<PowerMapRow>> {
    use rayon::prelude::*;
    let values = cfg.axis.values();
    if values.is_empty() || values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(
            "sweep values must be positive and non-empty".into(),
        ));
    }
    cfg.mode.validate()?;
    cfg.material.validate()?;
    values.par_iter().map(|&v| power_map_point(cfg, v)).collect()
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn kerr_strength_standard() {
        let mode = CavityMode::new(1.215e15, 1e7, 1e-20);
        let u = kerr_strength(&mode, &MaterialParams::silicon()).unwrap();
        // 3 hbar w^2 chi / (4 eps0 V eps_r^2), evaluated by hand
        let expect = 3.0 * 1.054571817e-34 * 1.215e15f64.powi(2) * 0.45e-18
            / (4.0 * 8.8541878128e-12 * 1e-20 * 12.1 * 12.1);
        assert!(rel(u, expect) < 1e-12);
        assert!(rel(u, 4.4e6) < 0.15);
        let mut big = mode;
        big.v_eff *= 2.0;
        assert!(rel(kerr_strength(&big, &MaterialParams::silicon()).unwrap(), u / 2.0) < 1e-12);
        let none = MaterialParams::new(0.0, 12.1);
        assert_eq!(kerr_strength(&mode, &none).unwrap(), 0.0);
    }

    #[test]
    fn one_photon_power_values() {
        let p = one_photon_power(Complex64::new(7.35e10, 0.0), 1.215e15, 1.934e8).unwrap();
        assert!(rel(p, 3.57e-6) < 0.01);
        assert_eq!(one_photon_power(Complex64::new(0.0, 0.0), 1.215e15, 1e8).unwrap(), 0.0);
        let l = Complex64::new(3e9, 1e9);
        let a = one_photon_power(l, 1.2e15, 1e8).unwrap();
        let b = one_photon_power(l * 2.0, 1.2e15, 1e8).unwrap();
        assert!(rel(b, 4.0 * a) < 1e-14);
    }

    #[test]
    fn steady_field_limits() {
        let a_in = Complex64::new(1.5, -0.5);
        let k = 2.0e8;
        let z = steady_mode_field(a_in, k, 0.0).unwrap();
        assert!((z - a_in * 2.0 / k.sqrt()).norm() < 1e-15);
        let h = steady_mode_field(a_in, k, k / 2.0).unwrap();
        assert!(rel(h.norm(), (2.0 / k).sqrt() * a_in.norm()) < 1e-12);
        assert!(steady_mode_field(a_in, k, 1e30).unwrap().norm() < 1e-20);
    }

    #[test]
    fn two_photon_power_values() {
        let u = 4.4e6;
        let k = 1.934e8;
        let w = 1.215e15;
        let at0 = two_photon_power(Complex64::new(1.606e10, 0.0), 0.01 * u, k, 0.0, w, w).unwrap();
        assert!(rel(at0.p2, 1.13e-6) < 0.01, "{}", at0.p2);
        let half = two_photon_power(Complex64::new(1.606e10, 0.0), 0.01 * u, k, k / 2.0, w, w)
            .unwrap();
        assert!(rel(half.p2, 2.0 * at0.p2) < 1e-12);
        let zero = two_photon_power(Complex64::new(0.0, 0.0), 0.01 * u, k, 0.0, w, w).unwrap();
        assert_eq!(zero.p2, 0.0);
        assert!(two_photon_power(Complex64::new(1.0, 0.0), 0.0, k, 0.0, w, w).is_err());
        // input field reproduces the mode field through the steady-state relation
        let back = steady_mode_field(at0.input_field, k, 0.0).unwrap();
        assert!((back - at0.mode_field).norm() < 1e-9 * at0.mode_field.norm());
    }

    #[test]
    fn beta_plausibility_and_reduction() {
        let mut m = CavityMode::new(1.215e15, 1e7, 1e-19);
        m.v_mode = 1e-19;
        let mat = MaterialParams::new(0.45e-18, 12.1);
        let overlap = Complex64::new(0.45e-18 * 1e-20, 0.0);
        let beta = fwm_beta([&m, &m, &m], &mat, overlap).unwrap();
        // (3 eps0 hbar / 8) w^2 / (V^2 eps^2) * overlap
        let eps = 8.8541878128e-12 * 12.1;
        let expect = 3.0 * 8.8541878128e-12 * 1.054571817e-34 / 8.0 * 1.215e15f64.powi(2)
            / (1e-38 * eps * eps)
            * overlap.re;
        assert!(rel(beta.re, expect) < 1e-12);
        assert!(rel(beta.re, 2.03e4) < 0.01);
        assert_eq!(fwm_beta([&m, &m, &m], &mat, Complex64::new(0.0, 0.0)).unwrap().norm(), 0.0);
    }

    fn box_grid(n: usize, f2: &dyn Fn(f64, f64, f64) -> Complex64) -> ModeFieldGrid {
        let one = |_: f64, _: f64, _: f64| Complex64::new(1.0, 0.0);
        let chi = |_: f64, _: f64, _: f64| 2.0e-19;
        ModeFieldGrid::sample([n, n, n], [0.1, 0.1, 0.1], [&one, f2, &one], Some(&chi)).unwrap()
    }

    #[test]
    fn overlap_uniform_odd_and_half() {
        let n = 21;
        let side = 0.1 * (n - 1) as f64;
        let one = |_: f64, _: f64, _: f64| Complex64::new(1.0, 0.0);
        let uni = overlap_integral(&box_grid(n, &one)).unwrap();
        assert!(rel(uni.re, 2.0e-19 * side.powi(3)) < 1e-12);
        let odd = |x: f64, _: f64, _: f64| Complex64::new(x, 0.0);
        assert!(overlap_integral(&box_grid(n, &odd)).unwrap().norm() < 1e-12 * uni.norm());
        let half = |x: f64, _: f64, _: f64| {
            Complex64::new(if x < 0.0 { 1.0 } else if x == 0.0 { 0.5 } else { 0.0 }, 0.0)
        };
        let h = overlap_integral(&box_grid(n, &half)).unwrap();
        assert!(rel(h.re, uni.re / 2.0) < 1e-12);
    }

    #[test]
    fn grid_mismatch_detected() {
        let p = vec![Complex64::new(1.0, 0.0); 8];
        let short = vec![Complex64::new(1.0, 0.0); 7];
        assert!(matches!(
            ModeFieldGrid::new([2, 2, 2], [1.0; 3], [p.clone(), short, p.clone()], None),
            Err(Error::GridMismatch(_))
        ));
        let weak = vec![Complex64::new(0.5, 0.0); 8];
        assert!(ModeFieldGrid::new([2, 2, 2], [1.0; 3], [p.clone(), weak, p], None).is_err());
    }

    #[test]
    fn slope_fit() {
        let x = [1.0, 10.0, 100.0];
        let y = [2.0, 2.0e4, 2.0e8];
        assert!((log_log_slope(&x, &y) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn peak_photon_inversion() {
        let kappa = 1.934e8;
        let (g, n) = coupling_for_peak_photons(0.13, 1, kappa, 8, 1e-5).unwrap().unwrap();
        assert!((n - 0.13).abs() < 1e-3);
        assert!((blockade_peak_photons(g, 1, kappa, 8).unwrap() - 0.13).abs() < 1e-3);
        assert!(coupling_for_peak_photons(0.999, 1, kappa, 8, 1e-4).unwrap().is_none());
    }
}
