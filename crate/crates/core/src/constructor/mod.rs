//! Rotational Killing graphs of constant (weighted) mean curvature `H0 < 0`
//! over a disk `B_{r0}(o)` of a model base.
//!
//! Two independent builders are provided. [`build_profile_quadrature`]
//! integrates the first integral `u'/W = I/A_k` from the boundary inward;
//! [`build_profile_ode`] integrates the meridian in arc length from the
//! boundary circle to the axis. [`corollary_profile`] evaluates the closed
//! forms for the corollary weights.
//!
//! Profile angles follow the graph convention: `φ = 0` at the apex and
//! `φ = π/2` on the boundary, with `sin φ = -u'/W`.

mod corollary;
mod flux;
mod meridian;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tightened, ModelManifold, MonotoneScan};
use crate::quadrature::QuadratureConfig;

pub use corollary::corollary_profile;
pub use flux::{build_profile_quadrature, flat_profile};
pub(crate) use flux::SlopeField;
pub use meridian::{build_profile_ode, integrate_meridian, MeridianRun};
pub use trace::{ArcTrace, TraceState};

pub const DEFAULT_GRID_SIZE: usize = 257;

/// Resolution of the monotonicity scan run before root finding.
pub const SCAN_RESOLUTION: usize = 64;

/// Which curvature is held constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `H_ψ = H0`, flux against `e^{-2ψ} ξ^{n-1}`.
    Weighted,
    /// `H = H0`, flux against `e^{-ψ} ξ^{n-1}`.
    Unweighted,
}

impl Variant {
    pub fn weight_exponent(self) -> f64 {
        match self {
            Variant::Weighted => 2.0,
            Variant::Unweighted => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Weighted => "weighted",
            Variant::Unweighted => "unweighted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    Ode,
    Corollary,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::Ode => "ode",
            Method::Corollary => "corollary",
        }
    }
}

/// Sampled radial profile. `u_prime` and `W` are infinite at `r0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphProfile {
    pub variant: Variant,
    #[serde(rename = "r_grid")]
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub u_prime: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub phi: Vec<f64>,
    /// Arc length along the meridian, measured from the apex.
    pub t: Vec<f64>,
}

impl GraphProfile {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn max_height(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `u e^{-ψ}` at every node.
    pub fn weighted_height(&self, m: &ModelManifold) -> Result<Vec<f64>> {
        self.r
            .iter()
            .zip(&self.u)
            .map(|(&r, &u)| Ok(u * (-m.psi(r)?).exp()))
            .collect()
    }

    /// `u'/W`, finite everywhere including `-1` at `r0`.
    pub fn slope_ratio(&self) -> Vec<f64> {
        self.phi.iter().map(|p| -p.sin()).collect()
    }
}

/// Solver bookkeeping carried along with a solution.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Sum of the error estimates of all profile integrals.
    pub quadrature_error: f64,
    pub quadrature_panels: usize,
    pub ode_accepted: usize,
    pub ode_rejected: usize,
    /// Largest scaled local error over accepted steps (1 = at tolerance).
    pub ode_max_error: f64,
    /// Radius where the meridian integration hands over to the axis series.
    pub closure_radius: f64,
    /// `|sin φ / (|H0| r) - 1|` at the hand-over radius; small for a
    /// meridian that meets the axis orthogonally.
    pub axis_regularity: f64,
}

#[derive(Debug, Clone)]
pub struct GraphSolution {
    pub profile: GraphProfile,
    pub h0: f64,
    pub r0: f64,
    pub model: ModelManifold,
    pub method: Method,
    pub diagnostics: Diagnostics,
    /// Arc-length trace, present for ODE-built solutions.
    pub trace: Option<ArcTrace>,
}

impl GraphSolution {
    pub fn variant(&self) -> Variant {
        self.profile.variant
    }

    pub fn weight_exponent(&self) -> f64 {
        self.variant().weight_exponent()
    }

    pub fn max_weighted_height(&self) -> Result<f64> {
        Ok(self
            .profile
            .weighted_height(&self.model)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

/// `r_i = r0 sin(π i / (2(N-1)))`: clustered toward `r0`, where `u'` blows up.
pub fn chebyshev_grid(r0: f64, nodes: usize) -> Result<Vec<f64>> {
    if nodes < 9 {
        return Err(Error::GridTooCoarse(format!(
            "{nodes} nodes; at least 9 are needed"
        )));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::Config(format!("grid radius {r0} must be positive")));
    }
    let last = (nodes - 1) as f64;
    let mut grid: Vec<f64> = (0..nodes)
        .map(|i| r0 * (std::f64::consts::FRAC_PI_2 * i as f64 / last).sin())
        .collect();
    grid[0] = 0.0;
    grid[nodes - 1] = r0;
    Ok(grid)
}

/// Boundary radius `r0` with `A_k(r0)/V_k(r0) = n|H0|`, by bisection on the
/// non-increasing ratio.
pub fn solve_radius(m: &ModelManifold, h0: f64, k: f64, q: &QuadratureConfig) -> Result<f64> {
    if !(h0 < 0.0 && h0.is_finite()) {
        return Err(Error::SignConvention { h0 });
    }
    q.validate()?;
    if let MonotoneScan::Violation { lo, hi, from, to } =
        m.ratio_monotone_scan(k, SCAN_RESOLUTION, q)?
    {
        return Err(Error::NonMonotoneRatio { lo, hi, from, to });
    }
    let target = m.dim() as f64 * h0.abs();
    let tq = tightened(q);
    let ratio = |r: f64| m.isoperimetric_ratio(r, k, &tq);

    let mut hi = m.domain_end() * (1.0 - 1e-9);
    let inf = ratio(hi)?;
    if !(target > inf) {
        return Err(Error::TargetOutOfRange {
            target,
            inf,
            sup: f64::INFINITY,
        });
    }
    let mut lo = (0.5 * m.dim() as f64 / target).min(0.5 * hi);
    let mut halvings = 0;
    while ratio(lo)? <= target {
        lo *= 0.5;
        halvings += 1;
        if halvings > 1000 {
            return Err(Error::Numerical(format!(
                "no radius with ratio above {target} found"
            )));
        }
    }
    while hi - lo > 2.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ratio(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r0 = 0.5 * (lo + hi);
    let achieved = (ratio(r0)? - target).abs();
    if achieved > 1e-12 * target {
        return Err(Error::Numerical(format!(
            "bisection stalled at r0 = {r0}: ratio misses n|H0| by {achieved:e}"
        )));
    }
    Ok(r0)
}

/// `I(r) = n H0 V_k(r)`.
pub fn flux_integral(
    m: &ModelManifold,
    r: f64,
    h0: f64,
    k: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    if h0 == 0.0 {
        return Ok(0.0);
    }
    Ok(m.dim() as f64 * h0 * m.ball_volume(r, k, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ModelSpec;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn grid_shape() {
        let g = chebyshev_grid(2.0, 257).unwrap();
        assert_eq!(g.len(), 257);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[256], 2.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        // clustered toward r0
        assert!(g[256] - g[255] < g[1] - g[0]);
        assert!(matches!(chebyshev_grid(1.0, 5), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn euclidean_radius() {
        let m = ModelManifold::new(&ModelSpec::Euclidean { n: 2 }).unwrap();
        let r0 = solve_radius(&m, -0.5, 2.0, &q()).unwrap();
        assert!((r0 - 2.0).abs() < 1e-12, "{r0}");
        let m3 = ModelManifold::new(&ModelSpec::Euclidean { n: 3 }).unwrap();
        let r0 = solve_radius(&m3, -2.0, 1.0, &q()).unwrap();
        assert!((r0 - 0.5).abs() < 1e-12, "{r0}");
    }

    #[test]
    fn hyperbolic_radius_is_ln3() {
        let m = ModelManifold::new(&ModelSpec::Hyperbolic { n: 2, kappa: 1.0 }).unwrap();
        let r0 = solve_radius(&m, -1.0, 1.0, &q()).unwrap();
        assert!((r0 - 3f64.ln()).abs() < 1e-10, "{r0}");
    }

    #[test]
    fn spherical_radius_closed_form() {
        let m = ModelManifold::new(&ModelSpec::Spherical { n: 2, kappa: 1.0 }).unwrap();
        let r0 = solve_radius(&m, -1.0, 1.0, &q()).unwrap();
        assert!((r0 - 2.0 * 0.5f64.atan()).abs() < 1e-10, "{r0}");
    }

    #[test]
    fn radius_errors() {
        let m = ModelManifold::new(&ModelSpec::Hyperbolic { n: 2, kappa: 1.0 }).unwrap();
        assert!(matches!(
            solve_radius(&m, 1.0, 1.0, &q()),
            Err(Error::SignConvention { .. })
        ));
        // the ratio of H^2 decreases to 1, so n|H0| = 0.8 is never attained
        match solve_radius(&m, -0.4, 1.0, &q()) {
            Err(Error::TargetOutOfRange { inf, .. }) => assert!((inf - 1.0).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flux_closed_forms() {
        let e2 = ModelManifold::new(&ModelSpec::Euclidean { n: 2 }).unwrap();
        let h2 = ModelManifold::new(&ModelSpec::Hyperbolic { n: 2, kappa: 1.0 }).unwrap();
        for r in [0.0, 0.3, 0.9, 1.7] {
            let i = flux_integral(&e2, r, -1.0, 2.0, &q()).unwrap();
            assert!((i + r * r).abs() < 1e-13);
            let i = flux_integral(&h2, r, -1.0, 1.0, &q()).unwrap();
            assert!((i + 2.0 * (r.cosh() - 1.0)).abs() < 1e-12);
            assert_eq!(flux_integral(&h2, r, 0.0, 1.0, &q()).unwrap(), 0.0);
        }
    }
}
