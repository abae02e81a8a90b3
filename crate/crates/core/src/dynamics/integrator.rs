//! Dormand-Prince 5(4) embedded Runge-Kutta pair with first-same-as-last
//! stage reuse, on a flat complex state vector.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Step-size control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    Adaptive { rtol: f64, atol: f64 },
    /// Uniform steps no longer than `max_step` seconds; smooth in parameters.
    Fixed { max_step: f64 },
}

impl Default for Stepping {
    fn default() -> Self {
        Stepping::Adaptive {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

pub(crate) struct Dopri5 {
    k: [Vec<Complex64>; 7],
    ytmp: Vec<Complex64>,
    ynew: Vec<Complex64>,
    fsal_valid: bool,
    /// Last accepted (untruncated) step proposal.
    pub h: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    pub fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Self {
            k: std::array::from_fn(|_| z.clone()),
            ytmp: z.clone(),
            ynew: z,
            fsal_valid: false,
            h: 0.0,
            accepted: 0,
            rejected: 0,
        }
    }

    /// Forces the next step to re-evaluate the derivative, e.g. after the
    /// right-hand side changed discontinuously.
    pub fn invalidate(&mut self) {
        self.fsal_valid = false;
    }

    fn stages<F>(&mut self, f: &mut F, t: f64, h: f64, y: &[Complex64])
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        if !self.fsal_valid {
            f(t, y, &mut self.k[0]);
        }
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let yt = &mut self.ytmp;
        for i in 0..n {
            yt[i] = y[i] + k1[i] * (h * A21);
        }
        f(t + C2 * h, yt, k2);
        for i in 0..n {
            yt[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        f(t + C3 * h, yt, k3);
        for i in 0..n {
            yt[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        f(t + C4 * h, yt, k4);
        for i in 0..n {
            yt[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        f(t + C5 * h, yt, k5);
        for i in 0..n {
            yt[i] = y[i]
                + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        f(t + h, yt, k6);
        let yn = &mut self.ynew;
        for i in 0..n {
            yn[i] = y[i]
                + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        f(t + h, yn, k7);
    }

    fn error_norm(&self, h: f64, y: &[Complex64], rtol: f64, atol: f64) -> f64 {
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                * h;
            let sc = atol + rtol * y[i].norm().max(self.ynew[i].norm());
            acc += (e.norm() / sc).powi(2);
        }
        (acc / y.len() as f64).sqrt()
    }

    fn accept(&mut self, y: &mut [Complex64]) {
        y.copy_from_slice(&self.ynew);
        self.k.swap(0, 6);
        self.fsal_valid = true;
        self.accepted += 1;
    }

    /// Advances `y` from `t0` to `t1`. `on_step` sees every accepted state
    /// and may abort the integration by returning an error.
    pub fn integrate<F, G>(
        &mut self,
        f: &mut F,
        t0: f64,
        t1: f64,
        y: &mut [Complex64],
        stepping: Stepping,
        mut on_step: G,
    ) -> Result<()>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        G: FnMut(f64, &[Complex64]) -> Result<()>,
    {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        match stepping {
            Stepping::Fixed { max_step } => {
                let steps = (span / max_step).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                let mut t = t0;
                for s in 0..steps {
                    self.stages(f, t, h, y);
                    self.accept(y);
                    t = if s + 1 == steps { t1 } else { t + h };
                    on_step(t, y)?;
                }
                Ok(())
            }
            Stepping::Adaptive { rtol, atol } => {
                if self.h <= 0.0 {
                    self.h = self.initial_step(f, t0, y, span, rtol, atol);
                }
                let mut t = t0;
                let h_min = 1e-14 * t1.abs().max(span);
                while t < t1 {
                    let remaining = t1 - t;
                    let last = self.h >= remaining * (1.0 - 1e-12);
                    let h = if last { remaining } else { self.h };
                    self.stages(f, t, h, y);
                    let err = self.error_norm(h, y, rtol, atol);
                    if !err.is_finite() {
                        return Err(Error::IntegratorFailure {
                            time: t,
                            reason: "non-finite derivative".into(),
                        });
                    }
                    let factor = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    if err <= 1.0 {
                        self.accept(y);
                        t = if last { t1 } else { t + h };
                        on_step(t, y)?;
                        // keep the natural step if this one was truncated
                        if !last || h >= self.h {
                            self.h = h * factor;
                        }
                    } else {
                        self.rejected += 1;
                        // stage 1 is still valid after a rejection
                        self.fsal_valid = true;
                        self.h = h * factor.min(1.0);
                        if self.h < h_min {
                            return Err(Error::IntegratorFailure {
                                time: t,
                                reason: format!("step size underflow ({:e} s)", self.h),
                            });
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn initial_step<F>(
        &mut self,
        f: &mut F,
        t0: f64,
        y: &[Complex64],
        span: f64,
        rtol: f64,
        atol: f64,
    ) -> f64
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        f(t0, y, &mut self.k[0]);
        self.fsal_valid = true;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..y.len() {
            let sc = atol + rtol * y[i].norm();
            d0 += (y[i].norm() / sc).powi(2);
            d1 += (self.k[0][i].norm() / sc).powi(2);
        }
        let n = y.len() as f64;
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6 * span
        } else {
            0.01 * d0 / d1
        };
        h.min(span)
    }
}
