//! Meridian in arc length, integrated from the boundary circle inward:
//!
//! ```text
//! ṙ = cos φ,   ṡ = e^ψ sin φ,   φ̇ = -n H0 - sin φ (-k ψ' + (n-1) ξ'/ξ)
//! r(0) = r0,   s(0) = 0,        φ(0) = π/2
//! ```
//!
//! Here `φ` runs from `π/2` on the boundary to `π` at the apex; profiles
//! store `π - φ`. The coefficient of `sin φ` is singular at the axis and the
//! linearisation there has a mode growing like `r^{-(n-1)}`, so integration
//! stops at `r ≈ r0/100` and the last stretch is closed with the axis series
//! `sin φ = |H0| r + b r³`, `b` matched at the hand-over radius.

use std::f64::consts::{FRAC_PI_2, PI};

use super::{chebyshev_grid, solve_radius, ArcTrace, Diagnostics, GraphProfile, GraphSolution, Method, TraceState, Variant};
use crate::error::{Error, Result};
use crate::geometry::ModelManifold;
use crate::ode::{Dopri5, StepControl};
use crate::quadrature::{self, QuadratureConfig};

/// Hand-over radius as a fraction of `r0`.
const CLOSURE_FRACTION: f64 = 0.01;
/// Output spacing is `r0 / OUTPUT_STEPS`.
const OUTPUT_STEPS: f64 = 512.0;
/// Samples of the axis series between the apex and the hand-over radius.
const CLOSURE_SAMPLES: usize = 32;
/// Give up if the meridian is longer than this multiple of `r0`.
const MAX_LENGTH_FACTOR: f64 = 100.0;
/// Tolerated angle overshoot before a fold is declared.
const ANGLE_SLACK: f64 = 1e-9;

/// Raw integrator output: states `[t, r, s, φ]` at multiples of `dt`,
/// starting at the boundary and ending at the first sample inside the
/// hand-over radius.
#[derive(Debug, Clone, PartialEq)]
pub struct MeridianRun {
    pub dt: f64,
    pub samples: Vec<[f64; 4]>,
    pub accepted: usize,
    pub rejected: usize,
    pub max_error: f64,
}

fn meridian_rhs(
    m: &ModelManifold,
    h0: f64,
    k: f64,
) -> impl Fn(f64, &[f64; 3]) -> Result<[f64; 3]> + '_ {
    let nh0 = m.dim() as f64 * h0;
    move |_t, y| {
        let [r, _s, phi] = *y;
        if !(r > 0.0) {
            return Err(Error::Numerical(format!(
                "meridian reached the axis inside a step (r = {r})"
            )));
        }
        let (sin, cos) = phi.sin_cos();
        Ok([
            cos,
            m.psi(r)?.exp() * sin,
            -nh0 - sin * m.density_log_derivative(r, k)?,
        ])
    }
}

/// Integrates the meridian from `(r0, 0, π/2)` toward the axis.
///
/// No sign check is made on `h0`; a meridian that turns outward
/// (`φ < π/2`) or past the vertical (`φ > π`) is reported as a fold.
pub fn integrate_meridian(
    m: &ModelManifold,
    h0: f64,
    variant: Variant,
    r0: f64,
    ctl: &StepControl,
) -> Result<MeridianRun> {
    ctl.validate()?;
    let k = variant.weight_exponent();
    let rhs = meridian_rhs(m, h0, k);
    let mut f = |t: f64, y: &[f64; 3]| rhs(t, y);
    let dt = r0 / OUTPUT_STEPS;
    let r_stop = CLOSURE_FRACTION * r0;
    let mut solver = Dopri5::new(0.0, [r0, 0.0, FRAC_PI_2], dt / 8.0, *ctl);
    let mut samples = vec![[0.0, r0, 0.0, FRAC_PI_2]];
    let mut j = 1usize;
    loop {
        let t = j as f64 * dt;
        if t > MAX_LENGTH_FACTOR * r0 {
            return Err(Error::Numerical(format!(
                "meridian did not reach the axis within arc length {t}"
            )));
        }
        solver.advance_to(&mut f, t)?;
        let [r, s, phi] = solver.y;
        if phi < FRAC_PI_2 - ANGLE_SLACK || phi > PI + ANGLE_SLACK {
            return Err(Error::Fold { t, r, phi });
        }
        samples.push([t, r, s, phi]);
        if r <= r_stop {
            break;
        }
        j += 1;
    }
    Ok(MeridianRun {
        dt,
        samples,
        accepted: solver.accepted,
        rejected: solver.rejected,
        max_error: solver.max_error,
    })
}

/// Builds the graph by integrating the meridian and resampling it on the
/// clustered grid.
pub fn build_profile_ode(
    m: &ModelManifold,
    h0: f64,
    variant: Variant,
    grid_size: usize,
    ctl: &StepControl,
    q: &QuadratureConfig,
) -> Result<GraphSolution> {
    let k = variant.weight_exponent();
    let r0 = solve_radius(m, h0, k, q)?;
    let grid = chebyshev_grid(r0, grid_size)?;
    let run = integrate_meridian(m, h0, variant, r0, ctl)?;
    let mut diagnostics = Diagnostics {
        ode_accepted: run.accepted,
        ode_rejected: run.rejected,
        ode_max_error: run.max_error,
        ..Diagnostics::default()
    };
    let trace = assemble_trace(m, h0, k, &run, q, &mut diagnostics)?;
    let profile = resample(m, variant, &trace, &grid)?;
    Ok(GraphSolution {
        profile,
        h0,
        r0,
        model: m.clone(),
        method: Method::Ode,
        diagnostics,
        trace: Some(trace),
    })
}

/// Joins the axis series and the integrator output into one trace in arc
/// length from the apex.
fn assemble_trace(
    m: &ModelManifold,
    h0: f64,
    k: f64,
    run: &MeridianRun,
    q: &QuadratureConfig,
    diag: &mut Diagnostics,
) -> Result<ArcTrace> {
    let &[t_stop, r_s, s_s, phi_s] = run.samples.last().expect("at least two samples");
    let a = -h0;
    let sigma_s = phi_s.sin();
    let b = (sigma_s - a * r_s) / (r_s * r_s * r_s);
    diag.closure_radius = r_s;
    diag.axis_regularity = (sigma_s / (a * r_s) - 1.0).abs();
    if !(diag.axis_regularity <= 0.1) {
        return Err(Error::Numerical(format!(
            "meridian does not meet the axis orthogonally: sin φ = {sigma_s} at r = {r_s}"
        )));
    }
    let sigma = |r: f64| a * r + b * r * r * r;
    let cosine = |r: f64| -> Result<f64> {
        let s = sigma(r);
        let c2 = (1.0 - s) * (1.0 + s);
        if !(c2 > 0.0) {
            return Err(Error::DegenerateDenominator { r });
        }
        Ok(c2.sqrt())
    };

    // axis series on [0, r_s]
    let radii: Vec<f64> = (0..=CLOSURE_SAMPLES)
        .map(|j| r_s * j as f64 / CLOSURE_SAMPLES as f64)
        .collect();
    let mut t_apex = vec![0.0; radii.len()];
    let mut height = vec![0.0; radii.len()];
    for j in 1..radii.len() {
        let est = quadrature::integrate(|r| Ok(1.0 / cosine(r)?), radii[j - 1], radii[j], q)?;
        t_apex[j] = t_apex[j - 1] + est.value;
        diag.quadrature_error += est.error;
        diag.quadrature_panels += est.intervals;
    }
    height[CLOSURE_SAMPLES] = s_s;
    for j in (0..CLOSURE_SAMPLES).rev() {
        let est = quadrature::integrate(
            |r| Ok(m.psi(r)?.exp() * sigma(r) / cosine(r)?),
            radii[j],
            radii[j + 1],
            q,
        )?;
        height[j] = height[j + 1] + est.value;
        diag.quadrature_error += est.error;
        diag.quadrature_panels += est.intervals;
    }
    let t_join = t_apex[CLOSURE_SAMPLES];

    let mut states = Vec::with_capacity(CLOSURE_SAMPLES + run.samples.len());
    for j in 0..CLOSURE_SAMPLES {
        let r = radii[j];
        let s = sigma(r);
        states.push(TraceState {
            t: t_apex[j],
            r,
            s: height[j],
            phi: s.asin(),
            dr: cosine(r)?,
            ds: -m.psi(r)?.exp() * s,
            dphi: a + 3.0 * b * r * r,
        });
    }
    let rhs = meridian_rhs(m, h0, k);
    for &[t, r, s, phi] in run.samples.iter().rev() {
        let [dr, ds, dphi] = rhs(t, &[r, s, phi])?;
        states.push(TraceState {
            t: t_join + (t_stop - t),
            r,
            s,
            phi: PI - phi,
            dr: -dr,
            ds: -ds,
            dphi,
        });
    }
    ArcTrace::new(states, CLOSURE_SAMPLES, run.dt)
}

fn resample(m: &ModelManifold, variant: Variant, trace: &ArcTrace, grid: &[f64]) -> Result<GraphProfile> {
    let n = grid.len();
    let mut profile = GraphProfile {
        variant,
        r: grid.to_vec(),
        u: Vec::with_capacity(n),
        u_prime: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        t: Vec::with_capacity(n),
    };
    for (i, &r) in grid.iter().enumerate() {
        let e = m.psi(r)?.exp();
        if i == n - 1 {
            profile.u.push(0.0);
            profile.u_prime.push(f64::NEG_INFINITY);
            profile.w.push(f64::INFINITY);
            profile.phi.push(FRAC_PI_2);
            profile.t.push(trace.length());
            continue;
        }
        let t = trace.t_at_radius(r)?;
        let st = trace.state_at(t)?;
        let phi = st.phi.clamp(0.0, FRAC_PI_2);
        let (sin, cos) = phi.sin_cos();
        profile.u.push(st.s);
        profile.u_prime.push(-e * sin / cos);
        profile.w.push(e / cos);
        profile.phi.push(phi);
        profile.t.push(t);
    }
    Ok(profile)
}
