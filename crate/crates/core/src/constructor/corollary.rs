//! Closed-form profiles for the corollary weights `ψ = c (n-1)/k log(ξ/r)`
//! (`k = 2` weighted, `k = 1` unweighted), where `r0 = 1/|H0|`:
//!
//! ```text
//! weighted:    u(r) = ∫_r^{r0} |H0| τ e^{ψ(τ)} / √(1 - H0² τ²) dτ
//! unweighted:  u(r) = ∫_r^{r0} |H0| τ / √(1 - H0² τ²) dτ
//! ```
//!
//! Both are evaluated as written, with `W = √(e^{2ψ} + u'²)`.

use std::f64::consts::FRAC_PI_2;

use super::{chebyshev_grid, Diagnostics, GraphProfile, GraphSolution, Method, Variant};
use crate::error::{Error, Result};
use crate::geometry::{ModelManifold, ModelSpec};
use crate::quadrature::{self, QuadratureConfig};

pub fn corollary_profile(
    base: &ModelSpec,
    c: f64,
    h0: f64,
    variant: Variant,
    grid_size: usize,
    q: &QuadratureConfig,
) -> Result<GraphSolution> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("corollary exponent c = {c} must be positive")));
    }
    if !(h0 < 0.0 && h0.is_finite()) {
        return Err(Error::SignConvention { h0 });
    }
    q.validate()?;
    let spec = match variant {
        Variant::Weighted => ModelSpec::CorollaryWeighted {
            base: Box::new(base.clone()),
            c,
        },
        Variant::Unweighted => ModelSpec::CorollaryUnweighted {
            base: Box::new(base.clone()),
            c,
        },
    };
    let m = ModelManifold::new(&spec)?;
    let a = h0.abs();
    let r0 = 1.0 / a;
    if !(r0 < m.radius_limit()) {
        return Err(Error::OutOfRange {
            r: r0,
            limit: m.radius_limit(),
        });
    }
    let grid = chebyshev_grid(r0, grid_size)?;
    let n = grid.len();

    // -u' and W e^{-ψ} at r = r0 - gap, with 1 - H0²r² = a·gap·(1 + a r)
    let slope = |r: f64, gap: f64| -> Result<(f64, f64)> {
        let rho = a * r;
        let root = (a * gap * (1.0 + rho)).sqrt();
        let psi = m.psi(r)?;
        let p = rho / root;
        Ok(match variant {
            Variant::Weighted => (psi.exp() * p, 1.0 / root),
            Variant::Unweighted => (p, (1.0 + (-2.0 * psi).exp() * p * p).sqrt()),
        })
    };
    let panel_q = QuadratureConfig {
        abs_tol: q.abs_tol / n as f64,
        ..*q
    };
    let panel = |lo: f64, hi: f64, height: bool| {
        let pick = |r: f64, gap: f64| -> Result<f64> {
            let (dp, stretch) = slope(r, gap)?;
            Ok(if height { dp } else { stretch })
        };
        quadrature::integrate_to_sqrt_endpoint(pick, lo, hi, r0, &panel_q)
    };

    let mut diagnostics = Diagnostics::default();
    let mut u = vec![0.0; n];
    for i in (0..n - 1).rev() {
        let est = panel(grid[i], grid[i + 1], true)?;
        u[i] = u[i + 1] + est.value;
        diagnostics.quadrature_error += est.error;
        diagnostics.quadrature_panels += est.intervals;
    }
    let mut t = vec![0.0; n];
    for i in 1..n {
        let est = panel(grid[i - 1], grid[i], false)?;
        t[i] = t[i - 1] + est.value;
        diagnostics.quadrature_error += est.error;
        diagnostics.quadrature_panels += est.intervals;
    }
    let mut profile = GraphProfile {
        variant,
        r: grid.clone(),
        u,
        u_prime: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        t,
    };
    for &r in &grid[..n - 1] {
        let (dp, _) = slope(r, r0 - r)?;
        let e = m.psi(r)?.exp();
        profile.u_prime.push(-dp);
        profile.w.push(e.hypot(dp));
        profile.phi.push(dp.atan2(e));
    }
    profile.u_prime.push(f64::NEG_INFINITY);
    profile.w.push(f64::INFINITY);
    profile.phi.push(FRAC_PI_2);
    Ok(GraphSolution {
        profile,
        h0,
        r0,
        model: m,
        method: Method::Corollary,
        diagnostics,
        trace: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn euclidean_base_is_hemisphere() {
        let base = ModelSpec::Euclidean { n: 2 };
        for variant in [Variant::Weighted, Variant::Unweighted] {
            let sol = corollary_profile(&base, 1.0, -1.0, variant, 129, &q()).unwrap();
            for (r, u) in sol.profile.r.iter().zip(&sol.profile.u) {
                assert!((u - (1.0 - r * r).sqrt()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unweighted_integrand_has_no_weight() {
        let base = ModelSpec::Hyperbolic { n: 2, kappa: 1.0 };
        let sol = corollary_profile(&base, 1.0, -1.0, Variant::Unweighted, 129, &q()).unwrap();
        for (r, u) in sol.profile.r.iter().zip(&sol.profile.u) {
            assert!((u - (1.0 - r * r).sqrt()).abs() < 1e-10);
        }
        let psi1 = sol.model.psi(1.0).unwrap();
        assert!((psi1 - 1f64.sinh().ln()).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        let sphere = ModelSpec::Spherical { n: 2, kappa: 1.0 };
        // r0 = 4 is beyond R = π
        assert!(matches!(
            corollary_profile(&sphere, 1.0, -0.25, Variant::Weighted, 65, &q()),
            Err(Error::OutOfRange { .. })
        ));
        assert!(corollary_profile(&sphere, 0.0, -1.0, Variant::Weighted, 65, &q()).is_err());
        assert!(matches!(
            corollary_profile(&sphere, 1.0, 1.0, Variant::Weighted, 65, &q()),
            Err(Error::SignConvention { .. })
        ));
    }
}
