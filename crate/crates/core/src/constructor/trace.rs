//! Meridian sampled in arc length from the apex, with cubic Hermite
//! interpolation between samples.

use serde::Serialize;

use crate::error::{Error, Result};

/// Meridian state at one arc length: base radius, height and profile angle,
/// with their arc-length derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceState {
    pub t: f64,
    pub r: f64,
    pub s: f64,
    pub phi: f64,
    pub dr: f64,
    pub ds: f64,
    pub dphi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcTrace {
    states: Vec<TraceState>,
    /// First index of the uniformly spaced tail (the integrator output).
    uniform_from: usize,
    dt: f64,
}

fn hermite(t0: f64, t1: f64, y0: f64, d0: f64, y1: f64, d1: f64, t: f64) -> (f64, f64) {
    let h = t1 - t0;
    let x = (t - t0) / h;
    let x2 = x * x;
    let x3 = x2 * x;
    let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
    let h10 = x3 - 2.0 * x2 + x;
    let h01 = -2.0 * x3 + 3.0 * x2;
    let h11 = x3 - x2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let slope = ((6.0 * x2 - 6.0 * x) * (y0 - y1)) / h
        + (3.0 * x2 - 4.0 * x + 1.0) * d0
        + (3.0 * x2 - 2.0 * x) * d1;
    (value, slope)
}

impl ArcTrace {
    pub(crate) fn new(states: Vec<TraceState>, uniform_from: usize, dt: f64) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::Numerical("arc trace needs two samples".into()));
        }
        if states.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Numerical("arc trace times must increase".into()));
        }
        Ok(ArcTrace {
            states,
            uniform_from,
            dt,
        })
    }

    pub fn states(&self) -> &[TraceState] {
        &self.states
    }

    /// Samples spaced exactly `dt` apart in arc length.
    pub fn uniform_states(&self) -> &[TraceState] {
        &self.states[self.uniform_from..]
    }

    pub fn uniform_step(&self) -> f64 {
        self.dt
    }

    /// Meridian length from the apex to the boundary circle.
    pub fn length(&self) -> f64 {
        self.states[self.states.len() - 1].t
    }

    fn segment(&self, t: f64) -> usize {
        let j = self.states.partition_point(|st| st.t <= t);
        j.clamp(1, self.states.len() - 1) - 1
    }

    pub fn state_at(&self, t: f64) -> Result<TraceState> {
        if !(t >= 0.0 && t <= self.length()) {
            return Err(Error::RadiusExceedsProfile {
                requested: t,
                length: self.length(),
            });
        }
        let j = self.segment(t);
        let (a, b) = (&self.states[j], &self.states[j + 1]);
        let (r, dr) = hermite(a.t, b.t, a.r, a.dr, b.r, b.dr, t);
        let (s, ds) = hermite(a.t, b.t, a.s, a.ds, b.s, b.ds, t);
        let (phi, dphi) = hermite(a.t, b.t, a.phi, a.dphi, b.phi, b.dphi, t);
        Ok(TraceState {
            t,
            r,
            s,
            phi,
            dr,
            ds,
            dphi,
        })
    }

    /// Arc length at which the meridian reaches base radius `r`.
    pub fn t_at_radius(&self, r: f64) -> Result<f64> {
        let first = &self.states[0];
        let last = &self.states[self.states.len() - 1];
        if r <= first.r {
            return Ok(first.t);
        }
        if r >= last.r {
            return Ok(last.t);
        }
        let j = self.states.partition_point(|st| st.r <= r).clamp(1, self.states.len() - 1) - 1;
        let (a, b) = (&self.states[j], &self.states[j + 1]);
        let (mut lo, mut hi) = (a.t, b.t);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (value, _) = hermite(a.t, b.t, a.r, a.dr, b.r, b.dr, mid);
            if value < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let df = |t: f64| -2.0 + 1.5 * t * t;
        let (v, d) = hermite(0.2, 0.9, f(0.2), df(0.2), f(0.9), df(0.9), 0.47);
        assert!((v - f(0.47)).abs() < 1e-14);
        assert!((d - df(0.47)).abs() < 1e-13);
    }

    #[test]
    fn quarter_circle_trace() {
        let states: Vec<TraceState> = (0..=64)
            .map(|j| {
                let t = std::f64::consts::FRAC_PI_2 * j as f64 / 64.0;
                TraceState {
                    t,
                    r: t.sin(),
                    s: t.cos(),
                    phi: t,
                    dr: t.cos(),
                    ds: -t.sin(),
                    dphi: 1.0,
                }
            })
            .collect();
        let trace = ArcTrace::new(states, 0, std::f64::consts::FRAC_PI_2 / 64.0).unwrap();
        let t = trace.t_at_radius(0.6).unwrap();
        assert!((t - 0.6f64.asin()).abs() < 1e-9);
        let st = trace.state_at(t).unwrap();
        assert!((st.s - 0.8).abs() < 1e-9);
        assert!(trace.state_at(2.0).is_err());
    }
}
