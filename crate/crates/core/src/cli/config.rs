//! TOML run configuration. Every key carries its SI unit in the name.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{fwm_beta_default, kerr_strength, CavityMode, KappaConvention, MaterialParams};
use crate::optimizer::OptimizerConfig;
use crate::protocol::{
    derive_blockade_params, BlockadeParams, ErrorSpec, FinalDisplacement, HoldDuration,
    ProtocolConfig,
};
use crate::quantum::DISPLACED_FRAME_DIM;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<CavitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blockade: Option<BlockadeSection>,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner: Option<WignerSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub omega_rad_s: f64,
    pub q: f64,
    /// Overrides `omega / Q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_rad_s: Option<f64>,
    pub veff_m3: f64,
    /// Defaults to `veff_m3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vmode_m3: Option<f64>,
    /// Detuning of the two-photon pump modes.
    #[serde(default)]
    pub pump_detuning_rad_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub chi3_m2_per_v2: f64,
    #[serde(default = "default_eps_r")]
    pub eps_r: f64,
    /// Overrides the `0.01 U` four-wave-mixing estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_rad_s: Option<f64>,
}

fn default_eps_r() -> f64 {
    12.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockadeSection {
    pub alpha_re: f64,
    #[serde(default)]
    pub alpha_im: f64,
    #[serde(default = "default_n")]
    pub n: u32,
    /// Overrides the Kerr strength computed from cavity and material.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kerr_rad_s: Option<f64>,
}

fn default_n() -> u32 {
    1
}

impl Default for BlockadeSection {
    fn default() -> Self {
        Self {
            alpha_re: 2.0,
            alpha_im: 0.0,
            n: 1,
            kerr_rad_s: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldMode {
    PiPulse,
    Fixed,
    ScanToPeak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
    pub lambda1_fractions: [f64; 3],
    pub lambda2_fractions: [f64; 2],
    pub hold: HoldMode,
    /// Required when `hold = "fixed"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hold_s: Option<f64>,
    pub final_displacement: FinalDisplacement,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lab_dim: Option<usize>,
    pub frame_dim: usize,
    pub samples: usize,
    pub monitor_positivity: bool,
    pub errors: ErrorSpec,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        Self {
            tau_s: None,
            lambda1_fractions: p.lambda1_fractions,
            lambda2_fractions: p.lambda2_fractions,
            hold: HoldMode::PiPulse,
            hold_s: None,
            final_displacement: p.final_displacement,
            lab_dim: None,
            frame_dim: DISPLACED_FRAME_DIM,
            samples: p.samples,
            monitor_positivity: p.monitor_positivity,
            errors: ErrorSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxisName {
    DeltaAlpha,
    Lambda1InitErr,
    Lambda2InitErr,
    /// Two-dimensional grid over the `L1` and `L2` hold errors.
    HoldErrGrid,
    Tau,
    #[serde(rename = "Q", alias = "q")]
    Q,
    #[serde(rename = "V_eff", alias = "v_eff")]
    VEff,
    Alpha,
}

impl SweepAxisName {
    pub fn is_power_axis(self) -> bool {
        matches!(self, SweepAxisName::Q | SweepAxisName::VEff)
    }

    pub fn is_relative_error(self) -> bool {
        matches!(
            self,
            SweepAxisName::DeltaAlpha
                | SweepAxisName::Lambda1InitErr
                | SweepAxisName::Lambda2InitErr
                | SweepAxisName::HoldErrGrid
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "g2")]
    G2,
    #[serde(rename = "p1_peak")]
    P1Peak,
    #[serde(rename = "loss")]
    Loss,
    #[serde(rename = "P1_watt", alias = "p1_watt")]
    P1Watt,
    #[serde(rename = "n_peak")]
    NPeak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxisName,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
    pub metrics: Vec<Metric>,
    /// Fixed one-photon pump power for `Q` / `V_eff` sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_w: Option<f64>,
    /// Target peak mean photon number for `Q` / `V_eff` sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_n_peak: Option<f64>,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * f,
                    Spacing::Log => {
                        (self.min.ln() + (self.max.ln() - self.min.ln()) * f).exp()
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerSection {
    pub checkpoint: String,
    /// Grid centre; defaults to the state's mean field.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_im: Option<f64>,
    pub half_width: f64,
    pub points: usize,
}

impl Default for WignerSection {
    fn default() -> Self {
        Self {
            checkpoint: "init_end".into(),
            center_re: None,
            center_im: None,
            half_width: 3.0,
            points: 61,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite, got {v}")))
    }
}

fn missing(section: &str) -> Error {
    Error::config(section, "missing section")
}

impl CavitySection {
    pub fn validate(&self) -> Result<()> {
        positive("cavity.omega_rad_s", self.omega_rad_s)?;
        positive("cavity.q", self.q)?;
        positive("cavity.veff_m3", self.veff_m3)?;
        if let Some(k) = self.kappa_rad_s {
            positive("cavity.kappa_rad_s", k)?;
        }
        if let Some(v) = self.vmode_m3 {
            positive("cavity.vmode_m3", v)?;
        }
        finite("cavity.pump_detuning_rad_s", self.pump_detuning_rad_s)
    }

    pub fn mode(&self) -> CavityMode {
        CavityMode {
            omega: self.omega_rad_s,
            q: self.q,
            kappa: self.kappa_rad_s,
            v_eff: self.veff_m3,
            v_mode: self.vmode_m3.unwrap_or(self.veff_m3),
            detuning: self.pump_detuning_rad_s,
            spacing: 0.0,
        }
    }

    /// Loss rate as a function of Q: proportional to `1/Q` through the
    /// configured point when `kappa_rad_s` is given, `omega / Q` otherwise.
    pub fn kappa_convention(&self) -> KappaConvention {
        match self.kappa_rad_s {
            Some(k) => KappaConvention::Scaled {
                kappa_ref: k,
                q_ref: self.q,
            },
            None => KappaConvention::OmegaOverQ,
        }
    }
}

impl MaterialSection {
    pub fn validate(&self) -> Result<()> {
        if !(self.chi3_m2_per_v2 >= 0.0 && self.chi3_m2_per_v2.is_finite()) {
            return Err(Error::config("material.chi3_m2_per_v2", "must be >= 0 and finite"));
        }
        if !(self.eps_r >= 1.0 && self.eps_r.is_finite()) {
            return Err(Error::config("material.eps_r", "must be >= 1"));
        }
        if let Some(b) = self.beta_rad_s {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::config("material.beta_rad_s", "must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> MaterialParams {
        MaterialParams::new(self.chi3_m2_per_v2, self.eps_r)
    }
}

impl BlockadeSection {
    pub fn validate(&self) -> Result<()> {
        finite("blockade.alpha_re", self.alpha_re)?;
        finite("blockade.alpha_im", self.alpha_im)?;
        if self.n < 1 {
            return Err(Error::config("blockade.n", "must be >= 1"));
        }
        if let Some(u) = self.kerr_rad_s {
            if !(u >= 0.0 && u.is_finite()) {
                return Err(Error::config("blockade.kerr_rad_s", "must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> Complex64 {
        Complex64::new(self.alpha_re, self.alpha_im)
    }
}

/// Physical quantities resolved from the cavity, material and blockade
/// sections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub mode: CavityMode,
    pub kerr: f64,
    pub kappa: f64,
    pub alpha: Complex64,
    pub n: u32,
    /// `None` without a material section.
    pub beta: Option<f64>,
    pub params: BlockadeParams,
}

impl Resolved {
    pub fn blockade_possible(&self) -> bool {
        self.kerr > 0.0
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .map(|line| format!("line {line}"))
                .unwrap_or_else(|| "config".into());
            Error::config(path, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(path.display().to_string(), format!("cannot read: {e}"))
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn cavity(&self) -> Result<&CavitySection> {
        let c = self.cavity.as_ref().ok_or_else(|| missing("cavity"))?;
        c.validate()?;
        Ok(c)
    }

    pub fn material(&self) -> Result<&MaterialSection> {
        let m = self.material.as_ref().ok_or_else(|| missing("material"))?;
        m.validate()?;
        Ok(m)
    }

    pub fn blockade(&self) -> Result<&BlockadeSection> {
        let b = self.blockade.as_ref().ok_or_else(|| missing("blockade"))?;
        b.validate()?;
        Ok(b)
    }

    pub fn sweep(&self) -> Result<&SweepSpec> {
        let s = self.sweep.as_ref().ok_or_else(|| missing("sweep"))?;
        if s.count < 2 {
            return Err(Error::config("sweep.count", "must be >= 2"));
        }
        finite("sweep.min", s.min)?;
        finite("sweep.max", s.max)?;
        if !(s.min < s.max) {
            return Err(Error::config("sweep.max", "must be greater than sweep.min"));
        }
        if s.spacing == Spacing::Log && !(s.min > 0.0) {
            return Err(Error::config("sweep.min", "log spacing needs a positive range"));
        }
        if s.metrics.is_empty() {
            return Err(Error::config("sweep.metrics", "at least one metric is required"));
        }
        if s.axis.is_relative_error() && (s.min < -1.0 || s.max > 1.0) {
            return Err(Error::config("sweep.min", "relative errors must lie in [-1, 1]"));
        }
        if matches!(s.axis, SweepAxisName::Tau | SweepAxisName::Q | SweepAxisName::VEff)
            && !(s.min > 0.0)
        {
            return Err(Error::config("sweep.min", "axis values must be positive"));
        }
        if s.axis.is_power_axis() {
            if let Some(m) = s
                .metrics
                .iter()
                .find(|m| !matches!(m, Metric::P1Watt | Metric::NPeak))
            {
                return Err(Error::config(
                    "sweep.metrics",
                    format!("{m:?} is not available on a Q / V_eff sweep (use P1_watt, n_peak)"),
                ));
            }
            match (s.power_w, s.target_n_peak) {
                (Some(_), Some(_)) => {
                    return Err(Error::config(
                        "sweep.power_w",
                        "set either power_w or target_n_peak, not both",
                    ))
                }
                (Some(p), None) => positive("sweep.power_w", p)?,
                (None, Some(t)) => positive("sweep.target_n_peak", t)?,
                (None, None) => {}
            }
        }
        Ok(s)
    }

    /// Resolves the physical parameters. The Kerr strength comes from
    /// `blockade.kerr_rad_s` if set, otherwise from cavity and material.
    pub fn resolve(&self) -> Result<Resolved> {
        let cavity = self.cavity()?;
        let blockade = self.blockade.clone().unwrap_or_default();
        blockade.validate()?;
        let mode = cavity.mode();
        let material = match &self.material {
            Some(m) => Some(m.validate().map(|_| m)?),
            None => None,
        };
        let kerr = match (blockade.kerr_rad_s, material) {
            (Some(u), _) => u,
            (None, Some(m)) => kerr_strength(&mode, &m.params())?,
            (None, None) => {
                return Err(Error::config(
                    "material",
                    "missing section (or set blockade.kerr_rad_s)",
                ))
            }
        };
        let kappa = mode.kappa();
        let alpha = blockade.alpha();
        let params = if kerr > 0.0 {
            derive_blockade_params(kerr, alpha, blockade.n, kappa)?
        } else {
            BlockadeParams::linear_cavity(alpha, kappa)
        };
        let beta = material.map(|m| m.beta_rad_s.unwrap_or_else(|| fwm_beta_default(kerr)));
        Ok(Resolved {
            mode,
            kerr,
            kappa,
            alpha,
            n: blockade.n,
            beta,
            params,
        })
    }

    /// Protocol settings, with `frame_dim` optionally overridden.
    pub fn protocol_config(&self, dim_override: Option<usize>) -> Result<ProtocolConfig> {
        let p = &self.protocol;
        let hold = match (p.hold, p.hold_s) {
            (HoldMode::PiPulse, _) => HoldDuration::PiPulse,
            (HoldMode::ScanToPeak, _) => HoldDuration::ScanToPeak,
            (HoldMode::Fixed, Some(t)) => {
                positive("protocol.hold_s", t)?;
                HoldDuration::Fixed(t)
            }
            (HoldMode::Fixed, None) => {
                return Err(Error::config("protocol.hold_s", "required when hold = \"fixed\""))
            }
        };
        if let Some(t) = p.tau_s {
            positive("protocol.tau_s", t)?;
        }
        if p.samples < 2 {
            return Err(Error::config("protocol.samples", "must be >= 2"));
        }
        let frame_dim = dim_override.unwrap_or(p.frame_dim);
        if frame_dim < 4 {
            return Err(Error::config("protocol.frame_dim", "must be >= 4"));
        }
        p.errors
            .validate()
            .map_err(|e| Error::config("protocol.errors", e.to_string()))?;
        Ok(ProtocolConfig {
            tau: p.tau_s,
            lambda1_fractions: p.lambda1_fractions,
            lambda2_fractions: p.lambda2_fractions,
            hold,
            final_displacement: p.final_displacement,
            lab_dim: p.lab_dim,
            frame_dim,
            errors: p.errors,
            init_shape: None,
            samples: p.samples,
            monitor_positivity: p.monitor_positivity,
            ..Default::default()
        })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STANDARD: &str = r#"
[cavity]
omega_rad_s = 1.215e15
q = 1e7
kappa_rad_s = 1.934e8
veff_m3 = 1e-20

[material]
chi3_m2_per_v2 = 0.45e-18

[blockade]
alpha_re = 2.0
kerr_rad_s = 4.4e6

[protocol.errors]
delta_alpha = 0.01

[sweep]
axis = "delta_alpha"
min = -0.05
max = 0.05
count = 5
metrics = ["g2", "P1_watt"]
"#;

    #[test]
    fn parse_and_roundtrip() {
        let c = RunConfig::from_toml(STANDARD).unwrap();
        assert_eq!(c.protocol.errors.delta_alpha, 0.01);
        assert_eq!(c.sweep.as_ref().unwrap().values()[4], 0.05);
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        let r = c.resolve().unwrap();
        assert_eq!(r.kerr, 4.4e6);
        assert_eq!(r.kappa, 1.934e8);
        assert!((r.beta.unwrap() - 4.4e4).abs() < 1e-9);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = STANDARD.replace("q = 1e7", "q = 1e7\nquality = 3");
        let e = RunConfig::from_toml(&bad).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("quality"), "{e}");
    }

    #[test]
    fn missing_section_named() {
        let c = RunConfig::from_toml("[blockade]\nalpha_re = 1.0\n").unwrap();
        let e = c.resolve().unwrap_err();
        assert!(e.to_string().contains("cavity"));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn sweep_checks() {
        let mut c = RunConfig::from_toml(STANDARD).unwrap();
        c.sweep.as_mut().unwrap().count = 1;
        assert!(c.sweep().unwrap_err().to_string().contains("sweep.count"));
        let mut c = RunConfig::from_toml(STANDARD).unwrap();
        c.sweep.as_mut().unwrap().max = -0.1;
        assert!(c.sweep().is_err());
        let mut c = RunConfig::from_toml(STANDARD).unwrap();
        let s = c.sweep.as_mut().unwrap();
        s.axis = SweepAxisName::Q;
        s.min = 1e6;
        s.max = 1e7;
        assert!(c.sweep().unwrap_err().to_string().contains("sweep.metrics"));
    }

    #[test]
    fn log_spacing() {
        let s = SweepSpec {
            axis: SweepAxisName::Q,
            min: 1e6,
            max: 1e8,
            count: 3,
            spacing: Spacing::Log,
            metrics: vec![Metric::NPeak],
            power_w: Some(0.01),
            target_n_peak: None,
        };
        let v = s.values();
        assert!((v[1] - 1e7).abs() < 1e-3);
    }
}
