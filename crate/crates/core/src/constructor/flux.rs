//! Profile from the first integral `u'/W = I/A_k`.
//!
//! With `σ = n|H| V_k/A_k` the slope is `u' = -e^ψ σ/√(1-σ²)` and
//! `u(r) = ∫_r^{r0} e^ψ σ/√(1-σ²) dτ`. Near `r0` the radicand is formed as
//! `1 - σ² = D (A + n|H| V)/A²` with `D(r) = A - n|H| V = ∫_r^{r0} A_k (n|H| - A_k'/A_k)`,
//! which stays accurate where `σ → 1`.

use std::f64::consts::FRAC_PI_2;

use super::{chebyshev_grid, solve_radius, Diagnostics, GraphProfile, GraphSolution, Method, Variant};
use crate::error::{Error, Result};
use crate::geometry::{tightened, ModelManifold};
use crate::quadrature::{self, QuadratureConfig};

/// Gaps below this fraction of `r0` use the leading-order deficit.
const TINY_GAP: f64 = 1e-10;

/// `σ(r)` and `√(1 - σ²)` for a fixed flux constant `n|H|` on `[0, r0]`.
pub(crate) struct SlopeField<'a> {
    m: &'a ModelManifold,
    k: f64,
    nh: f64,
    r0: f64,
    q: QuadratureConfig,
    knots: Vec<f64>,
    volumes: Vec<f64>,
    deficits: Vec<f64>,
    /// `A_k(r0)` and `n|H| - A_k'/A_k` at `r0`, for the leading-order deficit.
    end_density: f64,
    end_gradient: f64,
}

impl<'a> SlopeField<'a> {
    /// Uses `n|H| = A_k(r0)/V_k(r0)` so that `σ(r0) = 1` exactly.
    pub(crate) fn at_boundary(
        m: &'a ModelManifold,
        k: f64,
        r0: f64,
        knots: &[f64],
        q: &QuadratureConfig,
    ) -> Result<Self> {
        Self::build(m, k, None, r0, knots, q)
    }

    fn build(
        m: &'a ModelManifold,
        k: f64,
        nh: Option<f64>,
        r0: f64,
        knots: &[f64],
        q: &QuadratureConfig,
    ) -> Result<Self> {
        let q = tightened(q);
        let mut knots = knots.to_vec();
        if knots.first() != Some(&0.0) {
            knots.insert(0, 0.0);
        }
        if knots.last() != Some(&r0) {
            knots.push(r0);
        }
        let mut volumes = Vec::with_capacity(knots.len());
        let mut acc = 0.0;
        volumes.push(0.0);
        for w in knots.windows(2) {
            acc += m.volume_between(w[0], w[1], k, &q)?;
            volumes.push(acc);
        }
        let end_density = m.density_unchecked(r0, k)?;
        let nh = nh.unwrap_or(end_density / acc);
        let end_gradient = nh - m.density_log_derivative(r0, k)?;
        let mut field = SlopeField {
            m,
            k,
            nh,
            r0,
            q,
            knots,
            volumes,
            deficits: Vec::new(),
            end_density,
            end_gradient,
        };
        let n = field.knots.len();
        let mut deficits = vec![0.0; n];
        for j in (0..n - 1).rev() {
            let (a, b) = (field.knots[j], field.knots[j + 1]);
            if b <= 0.5 * r0 {
                // only the outer half uses the deficit form
                break;
            }
            deficits[j] = deficits[j + 1] + field.deficit_between(r0 - b, r0 - a)?;
        }
        field.deficits = deficits;
        Ok(field)
    }

    /// Deficit contribution of `r ∈ [r0 - gap_hi, r0 - gap_lo]`, integrated in
    /// the gap so that the interval width carries no rounding from `r0 - gap`.
    fn deficit_between(&self, gap_lo: f64, gap_hi: f64) -> Result<f64> {
        let (m, k, nh, r0) = (self.m, self.k, self.nh, self.r0);
        // D is O(gap) near r0; an absolute floor would swamp it
        let scale = self.end_density * (self.end_gradient.abs() + 1.0 / r0);
        let q = QuadratureConfig {
            abs_tol: 1e-15 * scale * (gap_hi - gap_lo).abs(),
            ..self.q
        };
        Ok(quadrature::integrate(
            |x| {
                let t = r0 - x;
                Ok(m.density_unchecked(t, k)? * (nh - m.density_log_derivative(t, k)?))
            },
            gap_lo,
            gap_hi,
            &q,
        )?
        .value)
    }

    /// Index of the last knot not exceeding `r`.
    fn knot_below(&self, r: f64) -> usize {
        self.knots.partition_point(|&x| x <= r).saturating_sub(1)
    }

    pub(crate) fn volume(&self, r: f64) -> Result<f64> {
        let j = self.knot_below(r);
        Ok(self.volumes[j] + self.m.volume_between(self.knots[j], r, self.k, &self.q)?)
    }

    /// `D(r) = ∫_r^{r0} A_k (n|H| - A_k'/A_k)` for `r` in the outer half.
    fn deficit(&self, r: f64, gap: f64) -> Result<f64> {
        if gap < TINY_GAP * self.r0 {
            return Ok(self.end_density * self.end_gradient * gap);
        }
        let j = (self.knot_below(r) + 1).min(self.knots.len() - 1);
        Ok(self.deficits[j] + self.deficit_between(self.r0 - self.knots[j], gap)?)
    }

    pub(crate) fn sine(&self, r: f64) -> Result<f64> {
        if r <= 0.0 || self.nh == 0.0 {
            return Ok(0.0);
        }
        if r < 1e-9 * self.r0 {
            return Ok(self.nh * r / self.m.dim() as f64);
        }
        Ok(self.nh * self.volume(r)? / self.m.density_unchecked(r, self.k)?)
    }

    /// `(sin φ, cos φ)` at `r = r0 - gap`.
    pub(crate) fn sine_cosine(&self, r: f64, gap: f64) -> Result<(f64, f64)> {
        if self.nh == 0.0 {
            return Ok((0.0, 1.0));
        }
        if gap <= 0.0 {
            return Ok((1.0, 0.0));
        }
        if r < 0.5 * self.r0 {
            let s = self.sine(r)?;
            let c2 = (1.0 - s) * (1.0 + s);
            if !(c2 > 0.0) {
                return Err(Error::DegenerateDenominator { r });
            }
            return Ok((s, c2.sqrt()));
        }
        let a = if gap < TINY_GAP * self.r0 {
            self.end_density
        } else {
            self.m.density_unchecked(r, self.k)?
        };
        let v = self.volume(r)?;
        let d = self.deficit(r, gap)?;
        if !(d > 0.0) {
            return Err(Error::DegenerateDenominator { r });
        }
        let s = (self.nh * v / a).min(1.0);
        Ok((s, (d * (a + self.nh * v)).sqrt() / a))
    }
}

/// Fills the profile columns at `r` from `(sin φ, cos φ)`.
fn slope_columns(m: &ModelManifold, r: f64, s: f64, c: f64) -> Result<(f64, f64, f64)> {
    let e = m.psi(r)?.exp();
    if c == 0.0 {
        return Ok((f64::NEG_INFINITY, f64::INFINITY, FRAC_PI_2));
    }
    Ok((-e * s / c, e / c, s.atan2(c)))
}

/// Integrates `u` inward and `t` outward on `grid` for a given slope field.
pub(crate) fn integrate_profile(
    m: &ModelManifold,
    field: &SlopeField<'_>,
    variant: Variant,
    grid: &[f64],
    q: &QuadratureConfig,
    diag: &mut Diagnostics,
) -> Result<GraphProfile> {
    let n = grid.len();
    let r0 = grid[n - 1];
    let panel_q = QuadratureConfig {
        abs_tol: q.abs_tol / n as f64,
        ..*q
    };
    let panel = |a: f64, b: f64, height: bool| -> Result<quadrature::Estimate> {
        let value = |r: f64, gap: f64| -> Result<f64> {
            let (s, c) = field.sine_cosine(r, gap)?;
            if height {
                Ok(m.psi(r)?.exp() * s / c)
            } else {
                Ok(1.0 / c)
            }
        };
        if b > 0.5 * r0 {
            quadrature::integrate_to_sqrt_endpoint(value, a, b, r0, &panel_q)
        } else {
            quadrature::integrate(|r| value(r, r0 - r), a, b, &panel_q)
        }
    };

    let mut u = vec![0.0; n];
    for i in (0..n - 1).rev() {
        let est = panel(grid[i], grid[i + 1], true)?;
        u[i] = u[i + 1] + est.value;
        diag.quadrature_error += est.error;
        diag.quadrature_panels += est.intervals;
    }
    let mut t = vec![0.0; n];
    for i in 1..n {
        let est = panel(grid[i - 1], grid[i], false)?;
        t[i] = t[i - 1] + est.value;
        diag.quadrature_error += est.error;
        diag.quadrature_panels += est.intervals;
    }
    let mut u_prime = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for &r in grid {
        let (s, c) = field.sine_cosine(r, r0 - r)?;
        let (up, wv, p) = slope_columns(m, r, s, c)?;
        u_prime.push(up);
        w.push(wv);
        phi.push(p);
    }
    Ok(GraphProfile {
        variant,
        r: grid.to_vec(),
        u,
        u_prime,
        w,
        phi,
        t,
    })
}

/// Builds the graph by quadrature of the first integral on a
/// `grid_size`-node clustered grid.
pub fn build_profile_quadrature(
    m: &ModelManifold,
    h0: f64,
    variant: Variant,
    grid_size: usize,
    q: &QuadratureConfig,
) -> Result<GraphSolution> {
    let k = variant.weight_exponent();
    let r0 = solve_radius(m, h0, k, q)?;
    let grid = chebyshev_grid(r0, grid_size)?;
    let field = SlopeField::at_boundary(m, k, r0, &grid, q)?;
    let mut diagnostics = Diagnostics::default();
    let profile = integrate_profile(m, &field, variant, &grid, q, &mut diagnostics)?;
    Ok(GraphSolution {
        profile,
        h0,
        r0,
        model: m.clone(),
        method: Method::Quadrature,
        diagnostics,
        trace: None,
    })
}

/// The flat disk `u ≡ 0` over `B_{r0}`: the zero-flux solution, stored with
/// the prescribed `H0` so that checks report it against that target.
pub fn flat_profile(
    m: &ModelManifold,
    h0: f64,
    r0: f64,
    variant: Variant,
    grid_size: usize,
    q: &QuadratureConfig,
) -> Result<GraphSolution> {
    if !(r0 > 0.0 && r0 < m.radius_limit()) {
        return Err(Error::OutOfRange {
            r: r0,
            limit: m.radius_limit(),
        });
    }
    let grid = chebyshev_grid(r0, grid_size)?;
    let field = SlopeField::build(m, variant.weight_exponent(), Some(0.0), r0, &grid, q)?;
    let mut diagnostics = Diagnostics::default();
    let profile = integrate_profile(m, &field, variant, &grid, q, &mut diagnostics)?;
    Ok(GraphSolution {
        profile,
        h0,
        r0,
        model: m.clone(),
        method: Method::Quadrature,
        diagnostics,
        trace: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ModelSpec;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn hemisphere() {
        let m = ModelManifold::new(&ModelSpec::Euclidean { n: 2 }).unwrap();
        let sol = build_profile_quadrature(&m, -1.0, Variant::Weighted, 257, &q()).unwrap();
        let p = &sol.profile;
        assert!((sol.r0 - 1.0).abs() < 1e-12);
        // sphere of radius r0, which is 1 up to the root-finding tolerance
        let r0 = sol.r0;
        for i in 0..p.len() {
            let r = p.r[i];
            let exact = ((r0 - r) * (r0 + r)).sqrt();
            assert!((p.u[i] - exact).abs() < 1e-10, "u({r}) = {}", p.u[i]);
            assert!((p.t[i] - r0 * (r / r0).asin()).abs() < 1e-10, "t({r}) = {}", p.t[i]);
            assert!((p.phi[i] - (r / r0).asin()).abs() < 1e-10);
        }
        assert_eq!(p.u[p.len() - 1], 0.0);
        assert_eq!(p.u_prime[p.len() - 1], f64::NEG_INFINITY);
        assert!((p.max_height() - 1.0).abs() < 1e-12);
        // u(0.6) = 0.8 through the field directly
        let field = SlopeField::at_boundary(&m, 2.0, 1.0, &[0.0, 1.0], &q()).unwrap();
        let (s, c) = field.sine_cosine(0.6, 0.4).unwrap();
        assert!((s - 0.6).abs() < 1e-14 && (c - 0.8).abs() < 1e-14);
    }

    #[test]
    fn deficit_form_matches_direct_radicand() {
        let m = ModelManifold::new(&ModelSpec::Hyperbolic { n: 3, kappa: 1.0 }).unwrap();
        let r0 = 0.8;
        let field = SlopeField::at_boundary(&m, 1.0, r0, &chebyshev_grid(r0, 33).unwrap(), &q())
            .unwrap();
        for r in [0.45, 0.6, 0.75] {
            let (s, c) = field.sine_cosine(r, r0 - r).unwrap();
            assert!((c - (1.0 - s * s).sqrt()).abs() < 1e-12);
        }
        // leading-order branch agrees with the integral one where both apply
        let gap = 2e-10 * r0;
        let (_, c1) = field.sine_cosine(r0 - gap, gap).unwrap();
        let (_, c2) = field.sine_cosine(r0 - 0.5 * gap, 0.5 * gap).unwrap();
        assert!((c1 / c2 - 2f64.sqrt()).abs() < 1e-4, "{c1} {c2}");
    }

    #[test]
    fn flat_disk() {
        let m = ModelManifold::new(&ModelSpec::Hyperbolic { n: 2, kappa: 1.0 }).unwrap();
        let sol = flat_profile(&m, -1.0, 1.0, Variant::Unweighted, 65, &q()).unwrap();
        assert!(sol.profile.u.iter().all(|&u| u == 0.0));
        assert!(sol.profile.phi.iter().all(|&p| p == 0.0));
        for (r, t) in sol.profile.r.iter().zip(&sol.profile.t) {
            assert!((r - t).abs() < 1e-13);
        }
    }

    #[test]
    fn corollary_weighted_height_bracket() {
        let spec = ModelSpec::CorollaryWeighted {
            base: Box::new(ModelSpec::Hyperbolic { n: 2, kappa: 1.0 }),
            c: 1.0,
        };
        let m = ModelManifold::new(&spec).unwrap();
        let sol = build_profile_quadrature(&m, -1.0, Variant::Weighted, 257, &q()).unwrap();
        assert!((sol.r0 - 1.0).abs() < 1e-10, "{}", sol.r0);
        let u0 = sol.profile.u[0];
        assert!(u0 > 1.0 && u0 < m.psi(1.0).unwrap().exp(), "{u0}");
        // oracle: the weighted corollary integral, by plain adaptive quadrature
        // on the substituted variable τ = sin θ
        let oracle = quadrature::integrate(
            |th: f64| Ok(th.sin() * m.psi(th.sin())?.exp()),
            0.0,
            FRAC_PI_2,
            &QuadratureConfig {
                abs_tol: 1e-14,
                rel_tol: 1e-13,
                max_depth: 48,
            },
        )
        .unwrap()
        .value;
        assert!((u0 - oracle).abs() < 1e-8, "{u0} vs {oracle}");
    }
}
