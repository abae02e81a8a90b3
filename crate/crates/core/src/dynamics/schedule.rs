use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for drive continuity across segment boundaries.
pub const CONTINUITY_TOL: f64 = 1e-9;

/// How schedule drive values are turned into a Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Frame {
    /// Lab-frame Hamiltonian with the schedule's `Lambda1`, `Lambda2`, `Delta`.
    Lab,
    /// Lab-frame drives and loss rewritten for `a -> a + alpha`.
    Displaced { alpha: Complex64 },
    /// Blockade Hamiltonian with `Lambda_NL` read from the `Lambda1` track.
    Blockade { n: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Hold,
    Final,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Hold => "hold",
            Phase::Final => "final",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "init" => Some(Phase::Init),
            "hold" => Some(Phase::Hold),
            "final" => Some(Phase::Final),
            _ => None,
        }
    }
}

/// One linear-ramp segment of a drive schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub lambda1_start: Complex64,
    pub lambda1_end: Complex64,
    pub lambda2_start: Complex64,
    pub lambda2_end: Complex64,
    pub delta: f64,
    pub phase: Phase,
    /// Allows a jump in drive values at the start of this segment.
    pub discontinuous: bool,
}

impl Segment {
    pub fn constant(
        duration: f64,
        lambda1: Complex64,
        lambda2: Complex64,
        delta: f64,
        phase: Phase,
    ) -> Self {
        Self {
            duration,
            lambda1_start: lambda1,
            lambda1_end: lambda1,
            lambda2_start: lambda2,
            lambda2_end: lambda2,
            delta,
            phase,
            discontinuous: false,
        }
    }

    /// Drive values at `s` seconds into the segment.
    pub fn drives_at(&self, s: f64) -> (Complex64, Complex64) {
        let f = if self.duration > 0.0 {
            (s / self.duration).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (
            self.lambda1_start + (self.lambda1_end - self.lambda1_start) * f,
            self.lambda2_start + (self.lambda2_end - self.lambda2_start) * f,
        )
    }

    pub fn scaled(&self, lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1_start: self.lambda1_start * lambda1,
            lambda1_end: self.lambda1_end * lambda1,
            lambda2_start: self.lambda2_start * lambda2,
            lambda2_end: self.lambda2_end * lambda2,
            ..*self
        }
    }
}

/// Piecewise-linear time course of the one- and two-photon drives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    pub frame: Frame,
    pub segments: Vec<Segment>,
}

fn close(a: Complex64, b: Complex64) -> bool {
    let scale = a.norm().max(b.norm());
    (a - b).norm() <= CONTINUITY_TOL * scale
}

impl DriveSchedule {
    pub fn new(frame: Frame, segments: Vec<Segment>) -> Result<Self> {
        let s = Self { frame, segments };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.duration > 0.0 && seg.duration.is_finite()) {
                return Err(Error::InvalidSchedule(format!(
                    "segment {i} has duration {}",
                    seg.duration
                )));
            }
            let values = [
                seg.lambda1_start,
                seg.lambda1_end,
                seg.lambda2_start,
                seg.lambda2_end,
            ];
            if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
                || !seg.delta.is_finite()
            {
                return Err(Error::InvalidSchedule(format!(
                    "segment {i} has non-finite drives"
                )));
            }
        }
        for (i, pair) in self.segments.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            if next.discontinuous {
                continue;
            }
            if !close(prev.lambda1_end, next.lambda1_start)
                || !close(prev.lambda2_end, next.lambda2_start)
            {
                return Err(Error::InvalidSchedule(format!(
                    "drive discontinuity between segments {i} and {}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Segment start times plus the final end time.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Sub-schedule containing only the segments of `phase`, in the same frame.
    pub fn phase(&self, phase: Phase) -> DriveSchedule {
        let mut segments: Vec<Segment> = self
            .segments
            .iter()
            .filter(|s| s.phase == phase)
            .cloned()
            .collect();
        if let Some(first) = segments.first_mut() {
            first.discontinuous = false;
        }
        DriveSchedule {
            frame: self.frame,
            segments,
        }
    }

    pub fn with_frame(&self, frame: Frame) -> DriveSchedule {
        DriveSchedule {
            frame,
            segments: self.segments.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        let zero = Complex64::new(0.0, 0.0);
        self.segments.iter().all(|s| {
            s.lambda1_start == zero
                && s.lambda1_end == zero
                && s.lambda2_start == zero
                && s.lambda2_end == zero
                && s.delta == 0.0
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn ramp(d: f64, a: f64, b: f64) -> Segment {
        Segment {
            duration: d,
            lambda1_start: c(a),
            lambda1_end: c(b),
            lambda2_start: c(0.0),
            lambda2_end: c(0.0),
            delta: 0.0,
            phase: Phase::Init,
            discontinuous: false,
        }
    }

    #[test]
    fn rejects_nonpositive_duration() {
        assert!(DriveSchedule::new(Frame::Lab, vec![ramp(0.0, 0.0, 1.0)]).is_err());
        assert!(DriveSchedule::new(Frame::Lab, vec![ramp(-1.0, 0.0, 1.0)]).is_err());
    }

    #[test]
    fn continuity_enforced_unless_flagged() {
        let segs = vec![ramp(1.0, 0.0, 1.0), ramp(1.0, 1.5, 2.0)];
        assert!(DriveSchedule::new(Frame::Lab, segs.clone()).is_err());
        let mut flagged = segs;
        flagged[1].discontinuous = true;
        assert!(DriveSchedule::new(Frame::Lab, flagged).is_ok());
    }

    #[test]
    fn interpolation_and_boundaries() {
        let s = DriveSchedule::new(Frame::Lab, vec![ramp(2.0, 0.0, 4.0), ramp(1.0, 4.0, 4.0)])
            .unwrap();
        assert_eq!(s.segments[0].drives_at(0.5).0, c(1.0));
        assert_eq!(s.boundaries(), vec![0.0, 2.0, 3.0]);
        assert_eq!(s.total_duration(), 3.0);
    }
}
