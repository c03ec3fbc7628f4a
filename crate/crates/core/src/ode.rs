//! Dormand–Prince 5(4) explicit Runge–Kutta integrator with adaptive steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size control for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-12,
            atol: 1e-12,
            h_min: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.h_min > 0.0) {
            return Err(Error::Config("ODE tolerances must be positive".into()));
        }
        if self.rtol > 1e-10 || self.atol > 1e-10 {
            return Err(Error::Config(
                "ODE tolerances above 1e-10 per step are not supported".into(),
            ));
        }
        Ok(())
    }
}

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

// 5th minus 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Adaptive Dormand–Prince integrator over a fixed-size state.
#[derive(Debug, Clone)]
pub struct Dopri5<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    h: f64,
    ctl: StepControl,
    pub accepted: usize,
    pub rejected: usize,
    /// Largest scaled error norm over accepted steps.
    pub max_error: f64,
}

impl<const N: usize> Dopri5<N> {
    pub fn new(t0: f64, y0: [f64; N], h0: f64, ctl: StepControl) -> Self {
        Dopri5 {
            t: t0,
            y: y0,
            h: h0,
            ctl,
            accepted: 0,
            rejected: 0,
            max_error: 0.0,
        }
    }

    fn trial<F>(&self, f: &mut F, h: f64) -> Result<([f64; N], f64)>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let (t, y) = (self.t, &self.y);
        let k1 = f(t, y)?;
        let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, &k1)]))?;
        let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = f(
            t + C5 * h,
            &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        )?;
        let k6 = f(
            t + h,
            &axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        )?;
        let y_new = axpy(
            y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = f(t + h, &y_new)?;
        let mut err = 0.0_f64;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = self.ctl.atol + self.ctl.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / scale).abs());
        }
        Ok((y_new, err))
    }

    /// Advances exactly to `t_end`, adapting the internal step on the way.
    pub fn advance_to<F>(&mut self, f: &mut F, t_end: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        while self.t < t_end {
            if self.accepted + self.rejected >= self.ctl.max_steps {
                return Err(Error::Numerical(format!(
                    "ODE step budget exhausted at t = {}",
                    self.t
                )));
            }
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let (y_new, err) = self.trial(f, h)?;
            if err <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
                self.t = if last { t_end } else { self.t + h };
                self.y = y_new;
                self.accepted += 1;
                self.max_error = self.max_error.max(err);
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last {
                    self.h = h * grow;
                } else {
                    self.h = self.h.max(h * grow);
                }
            } else {
                self.rejected += 1;
                let shrink = if err.is_finite() {
                    (0.9 * err.powf(-0.25)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                self.h = h * shrink;
                if self.h < self.ctl.h_min {
                    return Err(Error::StepUnderflow {
                        t: self.t,
                        r: self.y[0],
                        phi: if N > 2 { self.y[2] } else { f64::NAN },
                    });
                }
            }
        }
        Ok(())
    }
}
