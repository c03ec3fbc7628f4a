//! Independent numerical checks of a constructed graph: curvature by finite
//! differences, height and angle bounds, the weighted Laplacian identity,
//! Salavessa's inequality and the intrinsic volume lemma.
//!
//! Every check returns [`CheckResult`]s whose `margin` is positive when the
//! inequality or identity holds. Residual-type checks use
//! `margin = tolerance - residual`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constructor::{ArcTrace, GraphSolution, Method, SlopeField, Variant};
use crate::error::{Error, Result};
use crate::geometry::ModelManifold;
use crate::quadrature::{self, QuadratureConfig};

/// Fraction of `r0` cut from each end of the residual window.
const WINDOW_CUT: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Failed, but listed as an expected failure by the caller.
    #[serde(rename = "expected-fail")]
    ExpectedFail,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::ExpectedFail => "expected-fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub target: f64,
    pub margin: f64,
    pub tolerance: f64,
    /// Grid and step bookkeeping, keyed by name.
    pub metadata: BTreeMap<String, f64>,
    pub detail: String,
}

impl CheckResult {
    /// Passes iff `margin >= -tolerance`. Non-finite margins fail and are
    /// replaced by `-f64::MAX` so reports stay serialisable.
    pub fn new(name: impl Into<String>, measured: f64, target: f64, margin: f64, tolerance: f64) -> Self {
        let (margin, ok) = if margin.is_finite() {
            (margin, margin >= -tolerance)
        } else {
            (-f64::MAX, false)
        };
        CheckResult {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            measured: finite_or(measured),
            target: finite_or(target),
            margin,
            tolerance,
            metadata: BTreeMap::new(),
            detail: String::new(),
        }
    }

    /// `residual <= tolerance`, reported with `margin = tolerance - residual`.
    pub fn residual(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let mut c = CheckResult::new(name, residual, 0.0, tolerance - residual, 0.0);
        c.tolerance = tolerance;
        c
    }

    pub fn with_meta(mut self, key: &str, value: f64) -> Self {
        self.metadata.insert(key.to_string(), finite_or(value));
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

fn finite_or(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else if x > 0.0 {
        f64::MAX
    } else {
        -f64::MAX
    }
}

/// Checks in the order they were requested.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = CheckResult>) {
        self.checks.extend(checks);
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    /// Turns failures of the named checks (or of checks whose name starts
    /// with `prefix(`) into expected failures.
    pub fn mark_expected_failures(&mut self, names: &[String]) {
        for c in &mut self.checks {
            let base = c.name.split('(').next().unwrap_or(&c.name);
            if c.status == Status::Fail && names.iter().any(|n| n == &c.name || n == base) {
                c.status = Status::ExpectedFail;
            }
        }
    }
}

/// Report tolerances. Inequalities pass with margin `>= -bound_slack·scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Curvature residual for quadrature and closed-form profiles.
    pub residual_quadrature: f64,
    /// Curvature residual for ODE-built profiles.
    pub residual_ode: f64,
    pub laplacian: f64,
    pub flux: f64,
    /// Relative tolerance of equalities (Salavessa at `r0`).
    pub equality: f64,
    /// Upper bound for `1/W` at the last interior node.
    pub boundary_angle: f64,
    /// Relative rounding slack of inequality margins.
    pub bound_slack: f64,
    pub growth_slack: f64,
    pub agreement: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual_quadrature: 1e-6,
            residual_ode: 1e-5,
            laplacian: 1e-5,
            flux: 1e-8,
            equality: 1e-10,
            boundary_angle: 1e-2,
            bound_slack: 1e-9,
            growth_slack: 0.05,
            agreement: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.residual_quadrature,
            self.residual_ode,
            self.laplacian,
            self.flux,
            self.equality,
            self.boundary_angle,
            self.bound_slack,
            self.growth_slack,
            self.agreement,
        ];
        if all.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::Config("tolerances must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn residual_for(&self, method: Method) -> f64 {
        match method {
            Method::Ode => self.residual_ode,
            Method::Quadrature | Method::Corollary => self.residual_quadrature,
        }
    }
}

/// Weight oscillation and the optional relaxed-bound data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub sup_psi: f64,
    pub inf_psi: f64,
    pub c_relax: Option<f64>,
    pub g_bound: Option<f64>,
}

impl BoundParams {
    /// `sup ψ` and `inf ψ` over `[0, r0]`, sampled on the profile grid and a
    /// uniform 2048-interval grid.
    pub fn from_solution(sol: &GraphSolution, c_relax: Option<f64>, g_bound: Option<f64>) -> Result<Self> {
        let m = &sol.model;
        let uniform = (0..=2048).map(|i| sol.r0 * i as f64 / 2048.0);
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        for r in sol.profile.r.iter().copied().chain(uniform) {
            let p = m.psi(r)?;
            sup = sup.max(p);
            inf = inf.min(p);
        }
        let bp = BoundParams {
            sup_psi: sup,
            inf_psi: inf,
            c_relax,
            g_bound,
        };
        bp.validate()?;
        Ok(bp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sup_psi >= self.inf_psi) {
            return Err(Error::Config(format!(
                "sup psi = {} is below inf psi = {}",
                self.sup_psi, self.inf_psi
            )));
        }
        if let Some(c) = self.c_relax {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::Config(format!("c_relax = {c} must lie in (0, 1]")));
            }
        }
        if let Some(g) = self.g_bound {
            if !(g >= 0.0) {
                return Err(Error::Config(format!("G = {g} must be nonnegative")));
            }
        }
        Ok(())
    }

    pub fn oscillation(&self) -> f64 {
        self.sup_psi - self.inf_psi
    }
}

/// Derivative at `x[c]` of the polynomial interpolating `(x[j], y[j])`.
fn lagrange_derivative(x: &[f64], y: &[f64], c: usize) -> f64 {
    let xc = x[c];
    let mut total = 0.0;
    for j in 0..x.len() {
        let mut dl = 0.0;
        for m in 0..x.len() {
            if m == j {
                continue;
            }
            let mut term = 1.0 / (x[j] - x[m]);
            for l in 0..x.len() {
                if l != j && l != m {
                    term *= (xc - x[l]) / (x[j] - x[l]);
                }
            }
            dl += term;
        }
        total += y[j] * dl;
    }
    total
}

/// Sup and grid-L² residual of the prescribed-curvature equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureResidual {
    pub sup: f64,
    pub l2: f64,
    pub worst_r: f64,
    pub nodes: usize,
}

/// Recomputes `n H_ψ = (u'/W)' + (u'/W)((n-1)ξ'/ξ - 2ψ')` (weighted) or
/// `n H = (u'/W)' + (u'/W)((n-1)ξ'/ξ - ψ')` (unweighted) on the window
/// `[0.02, 0.98]·r0` from degree-4 fits over the 5 nearest nodes, and compares
/// with `n H0`.
pub fn curvature_residual(sol: &GraphSolution) -> Result<CurvatureResidual> {
    let p = &sol.profile;
    let m = &sol.model;
    let n = p.len();
    if n < 9 {
        return Err(Error::GridTooCoarse(format!("{n} nodes; at least 9 are needed")));
    }
    let k = sol.weight_exponent();
    let q = p.slope_ratio();
    let target = m.dim() as f64 * sol.h0;
    let (lo, hi) = (WINDOW_CUT * sol.r0, (1.0 - WINDOW_CUT) * sol.r0);
    let window: Vec<usize> = (0..n).filter(|&i| p.r[i] >= lo && p.r[i] <= hi).collect();
    if window.len() < 5 {
        return Err(Error::GridTooCoarse(format!(
            "only {} nodes in the residual window",
            window.len()
        )));
    }
    let mut residuals = Vec::with_capacity(window.len());
    for &i in &window {
        let start = i.saturating_sub(2).min(n - 5);
        let dq = lagrange_derivative(&p.r[start..start + 5], &q[start..start + 5], i - start);
        let computed = dq + q[i] * m.density_log_derivative(p.r[i], k)?;
        residuals.push((p.r[i], (computed - target).abs()));
    }
    let (worst_r, sup) = residuals
        .iter()
        .copied()
        .fold((f64::NAN, 0.0_f64), |acc, (r, e)| if e > acc.1 || acc.0.is_nan() { (r, e) } else { acc });
    let mut l2 = 0.0;
    for w in residuals.windows(2) {
        l2 += 0.5 * (w[0].1 * w[0].1 + w[1].1 * w[1].1) * (w[1].0 - w[0].0);
    }
    let span = residuals[residuals.len() - 1].0 - residuals[0].0;
    Ok(CurvatureResidual {
        sup,
        l2: (l2 / span).sqrt(),
        worst_r,
        nodes: window.len(),
    })
}

pub fn curvature_residual_check(sol: &GraphSolution, tol: &Tolerances) -> Result<CheckResult> {
    let res = curvature_residual(sol)?;
    Ok(CheckResult::residual("curvature_residual", res.sup, tol.residual_for(sol.method))
        .with_meta("l2", res.l2)
        .with_meta("worst_r", res.worst_r)
        .with_meta("window_nodes", res.nodes as f64)
        .with_detail(format!(
            "sup |nH_computed - nH0| on [{WINDOW_CUT}, {}]·r0, {} variant",
            1.0 - WINDOW_CUT,
            sol.variant().name()
        )))
}

/// `|(u'/W) A_k(r) - I(r)|` at every node, with `I` from an independent
/// volume quadrature.
pub fn flux_identity_check(sol: &GraphSolution, tol: &Tolerances, q: &QuadratureConfig) -> Result<CheckResult> {
    let p = &sol.profile;
    let m = &sol.model;
    let k = sol.weight_exponent();
    let slopes = p.slope_ratio();
    let mut worst: f64 = 0.0;
    let mut worst_r = 0.0;
    for (i, &r) in p.r.iter().enumerate() {
        let flux = crate::constructor::flux_integral(m, r, sol.h0, k, q)?;
        let lhs = slopes[i] * m.density_unchecked(r, k)?;
        let e = (lhs - flux).abs();
        if e > worst {
            worst = e;
            worst_r = r;
        }
    }
    Ok(CheckResult::residual("flux_identity", worst, tol.flux)
        .with_meta("worst_r", worst_r)
        .with_meta("nodes", p.len() as f64))
}

/// `σ/√(1-σ²)` integrated over `[0, r0]`: the height bound of the rotational
/// construction before the weight factor.
pub fn integral_height_bound(sol: &GraphSolution, q: &QuadratureConfig) -> Result<f64> {
    let m = &sol.model;
    let r0 = sol.r0;
    let field = SlopeField::at_boundary(m, sol.weight_exponent(), r0, &sol.profile.r, q)?;
    let half = 0.5 * r0;
    let g = |r: f64, gap: f64| -> Result<f64> {
        let (s, c) = field.sine_cosine(r, gap)?;
        Ok(s / c)
    };
    let inner = quadrature::integrate(|r| g(r, r0 - r), 0.0, half, q)?.value;
    let outer = quadrature::integrate_to_sqrt_endpoint(g, half, r0, r0, q)?.value;
    Ok(inner + outer)
}

/// Height bounds: (i) `u e^{-ψ} >= 0`; (ii) `max u e^{-ψ} <= e^{2Δψ}/|H0|`;
/// (iii) `max u e^{-ψ} <= e^{Δψ} ∫ σ/√(1-σ²)`; (iv) with `c_relax`,
/// `max u e^{-ψ} <= e^{2Δψ}/(c|H0|)`, plus its hypothesis `(1-c)H0²/n >= G²`
/// when `G` is given.
pub fn height_bound_check(
    sol: &GraphSolution,
    bp: &BoundParams,
    tol: &Tolerances,
    q: &QuadratureConfig,
) -> Result<Vec<CheckResult>> {
    bp.validate()?;
    let heights = sol.profile.weighted_height(&sol.model)?;
    let min = heights.iter().copied().fold(f64::INFINITY, f64::min);
    let max = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let osc = bp.oscillation();
    let h = sol.h0.abs();
    let slack = |bound: f64| tol.bound_slack * bound.abs().max(1.0);

    let mut out = Vec::new();
    out.push(
        CheckResult::new("height_lower", min, 0.0, min, 0.0)
            .with_detail("min u e^{-psi} >= 0"),
    );
    let theorem_a = (2.0 * osc).exp() / h;
    out.push(
        CheckResult::new("height_theorem_a", max, theorem_a, theorem_a - max, slack(theorem_a))
            .with_meta("oscillation", osc)
            .with_detail("max u e^{-psi} <= e^{2(sup psi - inf psi)}/|H0|"),
    );
    let integral = integral_height_bound(sol, q)?;
    let sharp = osc.exp() * integral;
    out.push(
        CheckResult::new("height_integral", max, sharp, sharp - max, slack(sharp))
            .with_meta("oscillation", osc)
            .with_meta("integral", integral)
            .with_detail("max u e^{-psi} <= e^{sup psi - inf psi} * int_0^r0 sigma/sqrt(1 - sigma^2)"),
    );
    if let Some(c) = bp.c_relax {
        let relaxed = (2.0 * osc).exp() / (c * h);
        out.push(
            CheckResult::new("height_relaxed", max, relaxed, relaxed - max, slack(relaxed))
                .with_meta("c_relax", c)
                .with_detail("max u e^{-psi} <= e^{2(sup psi - inf psi)}/(c |H0|)"),
        );
        if let Some(g) = bp.g_bound {
            let n = sol.model.dim() as f64;
            let lhs = (1.0 - c) * h * h / n;
            out.push(
                CheckResult::new("height_relaxed_hypothesis", g * g, lhs, lhs - g * g, 0.0)
                    .with_meta("g_bound", g)
                    .with_detail("(1 - c) H0^2 / n >= G^2"),
            );
        }
    }
    Ok(out)
}

/// `0 < 1/W <= e^{-ψ}` on interior nodes, and the vertical boundary:
/// `1/W(r0) = 0`, `1/W` decreasing over the last nodes and below
/// `tol.boundary_angle` at the last interior node.
pub fn angle_function_check(sol: &GraphSolution, tol: &Tolerances) -> Result<Vec<CheckResult>> {
    let p = &sol.profile;
    let m = &sol.model;
    let n = p.len();
    let mut margin = f64::INFINITY;
    let mut worst_r = 0.0;
    for i in 0..n - 1 {
        let inv_w = 1.0 / p.w[i];
        let cap = (-m.psi(p.r[i])?).exp();
        // rounding can put 1/W an ulp above e^{-ψ} where they coincide
        let local = inv_w.min(cap * (1.0 + 4.0 * f64::EPSILON) - inv_w);
        if local < margin {
            margin = local;
            worst_r = p.r[i];
        }
    }
    let bounds = CheckResult::new("angle_function_bounds", margin, 0.0, margin, 0.0)
        .with_meta("worst_r", worst_r)
        .with_detail("0 < 1/W <= e^{-psi} at interior nodes");

    let last = 1.0 / p.w[n - 2];
    let at_end = 1.0 / p.w[n - 1];
    let tail = (n - 6..n).all(|i| 1.0 / p.w[i] < 1.0 / p.w[i - 1]);
    let mut boundary = CheckResult::new(
        "angle_function_boundary",
        last,
        tol.boundary_angle,
        tol.boundary_angle - last,
        0.0,
    )
    .with_meta("inverse_w_at_r0", at_end)
    .with_meta("last_interior_r", p.r[n - 2])
    .with_detail("1/W(r0) = 0, 1/W decreasing on the last nodes, small at the last interior node");
    if at_end != 0.0 || !tail {
        boundary.status = Status::Fail;
    }
    Ok(vec![bounds, boundary])
}

/// Sup residual of the weighted Laplacian identity and the residual of the
/// same identity with the factor `n` dropped from the curvature term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacianResidual {
    pub sup: f64,
    pub sup_without_n: f64,
    pub samples: usize,
    pub step: f64,
}

/// Checks `Δ_{Cψ} u = (nH + (C-2)⟨∇ψ,N⟩) e^{2ψ} ⟨Y,N⟩` on the uniform
/// arc-length samples of the trace.
///
/// Along the meridian `Δ_{Cψ} u = s̈ + ((n-1)ξ'/ξ - Cψ') ṙ ṡ`, both
/// derivatives by 5-point central differences. With `sin φ = -u'/W`:
/// `⟨Y,N⟩ = 1/W = e^{-ψ} cos φ`, `⟨∇ψ,N⟩ = -ψ' u'/W = ψ' sin φ`, and
/// `nH = nH0 - ψ' sin φ` for the weighted variant, `nH = nH0` otherwise.
pub fn laplacian_identity(sol: &GraphSolution, c_exponent: f64) -> Result<LaplacianResidual> {
    let trace = sol.trace.as_ref().ok_or(Error::MissingTrace)?;
    let m = &sol.model;
    let dims = (m.dim() - 1) as f64;
    let n = m.dim() as f64;
    let nh0 = n * sol.h0;
    let states = trace.uniform_states();
    let dt = trace.uniform_step();
    let (lo, hi) = (WINDOW_CUT * sol.r0, (1.0 - WINDOW_CUT) * sol.r0);
    let mut sup: f64 = 0.0;
    let mut sup_without_n: f64 = 0.0;
    let mut samples = 0;
    for j in 2..states.len().saturating_sub(2) {
        let st = &states[j];
        if st.r < lo || st.r > hi {
            continue;
        }
        let s = |o: isize| states[(j as isize + o) as usize].s;
        let r = |o: isize| states[(j as isize + o) as usize].r;
        let s_dd = (-s(2) + 16.0 * s(1) - 30.0 * s(0) + 16.0 * s(-1) - s(-2)) / (12.0 * dt * dt);
        let s_d = (-s(2) + 8.0 * s(1) - 8.0 * s(-1) + s(-2)) / (12.0 * dt);
        let r_d = (-r(2) + 8.0 * r(1) - 8.0 * r(-1) + r(-2)) / (12.0 * dt);
        let x = st.r;
        let dpsi = m.psi_prime(x)?;
        let lhs = s_dd + (dims * m.xi_prime(x)? / m.xi(x)? - c_exponent * dpsi) * r_d * s_d;

        let (sin, cos) = st.phi.sin_cos();
        let normal_psi = dpsi * sin;
        let nh = match sol.variant() {
            Variant::Weighted => nh0 - normal_psi,
            Variant::Unweighted => nh0,
        };
        let e2 = (2.0 * m.psi(x)?).exp();
        let angle = (-m.psi(x)?).exp() * cos;
        let rhs = (nh + (c_exponent - 2.0) * normal_psi) * e2 * angle;
        let rhs_without_n = (nh / n + (c_exponent - 2.0) * normal_psi) * e2 * angle;
        sup = sup.max((lhs - rhs).abs());
        sup_without_n = sup_without_n.max((lhs - rhs_without_n).abs());
        samples += 1;
    }
    if samples == 0 {
        return Err(Error::GridTooCoarse("no trace samples in the residual window".into()));
    }
    Ok(LaplacianResidual {
        sup,
        sup_without_n,
        samples,
        step: dt,
    })
}

pub fn laplacian_identity_check(sol: &GraphSolution, c_exponent: f64, tol: &Tolerances) -> Result<CheckResult> {
    let res = laplacian_identity(sol, c_exponent)?;
    let reading = if res.sup <= res.sup_without_n {
        "data supports the factor n"
    } else {
        "data supports dropping the factor n"
    };
    Ok(CheckResult::residual(format!("laplacian_identity(C={c_exponent})"), res.sup, tol.laplacian)
        .with_meta("C", c_exponent)
        .with_meta("residual_without_n", res.sup_without_n)
        .with_meta("samples", res.samples as f64)
        .with_meta("dt", res.step)
        .with_detail(reading))
}

/// `n|H0| V_k(r) <= A_k(r)` for each `r`, and equality at `r0`.
pub fn salavessa_check(
    m: &ModelManifold,
    sol: &GraphSolution,
    radii: &[f64],
    k: f64,
    tol: &Tolerances,
    q: &QuadratureConfig,
) -> Result<Vec<CheckResult>> {
    let tq = crate::geometry::tightened(q);
    let nh = m.dim() as f64 * sol.h0.abs();
    let mut out = Vec::with_capacity(radii.len() + 1);
    let side = |r: f64| -> Result<(f64, f64)> {
        Ok((nh * m.ball_volume(r, k, &tq)?, m.area_density(r, k)?))
    };
    for &r in radii {
        if !(r > 0.0 && r <= sol.r0 * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange { r, limit: sol.r0 });
        }
        let (lhs, rhs) = side(r)?;
        out.push(
            CheckResult::new(
                format!("salavessa(r={r:.6})"),
                lhs,
                rhs,
                rhs - lhs,
                tol.equality * rhs.abs(),
            )
            .with_meta("r", r)
            .with_meta("k", k)
            .with_detail("n |H| vol(B_r) <= vol(dB_r)"),
        );
    }
    let (lhs, rhs) = side(sol.r0)?;
    let rel = (lhs - rhs).abs() / rhs.abs();
    out.push(
        CheckResult::residual("salavessa_equality_r0", rel, tol.equality)
            .with_meta("r0", sol.r0)
            .with_detail("relative gap of n |H| vol(B_r0) = vol(dB_r0)"),
    );
    Ok(out)
}

/// `|S^{n-1}| = 2π^{n/2}/Γ(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    // Γ(n/2) by recurrence from Γ(1) = 1 or Γ(1/2) = √π
    let mut gamma = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if n % 2 == 0 { 1.0 } else { 0.5 };
    while x + 0.5 < n as f64 / 2.0 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / gamma
}

/// Integrates `g(t)` over `[0, t_end]`, one adaptive panel per trace segment.
fn integrate_along(trace: &ArcTrace, t_end: f64, q: &QuadratureConfig, mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for w in trace.states().windows(2) {
        let (a, b) = (w[0].t, w[1].t.min(t_end));
        if a >= t_end {
            break;
        }
        total += quadrature::integrate(&mut g, a, b, q)?.value;
    }
    Ok(total)
}

/// `|S^{n-1}| ∫_0^{R} ξ(r(t))^{n-1} e^{-Dψ(r(t))} dt` for the intrinsic ball of
/// radius `R` about the apex.
pub fn intrinsic_ball_volume(sol: &GraphSolution, rgeo: f64, d_exponent: f64, q: &QuadratureConfig) -> Result<f64> {
    let trace = sol.trace.as_ref().ok_or(Error::MissingTrace)?;
    if !(rgeo >= 0.0) || rgeo > trace.length() {
        return Err(Error::RadiusExceedsProfile {
            requested: rgeo,
            length: trace.length(),
        });
    }
    let m = &sol.model;
    let pow = m.dim() as i32 - 1;
    let integral = integrate_along(trace, rgeo, q, |t| {
        let r = trace.state_at(t)?.r.max(0.0);
        Ok(m.xi(r)?.powi(pow) * (-d_exponent * m.psi(r)?).exp())
    })?;
    Ok(sphere_area(m.dim()) * integral)
}

/// Volume lemma on the intrinsic ball `B_R` about the apex:
///
/// ```text
/// vol_{Dψ}(B_R) <= 1/(δR) ∫_{Ω_ρ} u e^{-ψ} e^{-Dψ} dP + n ∫_{Ω_ρ} u e^{-ψ} |H_{Dψ}| e^{-Dψ} dP
/// ```
///
/// with `ρ = min((1+δ)R, r0)`, `dP = ξ^{n-1} dr dθ` and
/// `H_{Dψ} = H + (D/n)⟨∇ψ,N⟩ = H + (D/n) ψ' sin φ`. Also checks that the
/// projection of `B_R` stays in `Ω_R`: `r(R) <= R`.
pub fn volume_lemma_check(
    sol: &GraphSolution,
    rgeo: f64,
    delta: f64,
    d_exponent: f64,
    q: &QuadratureConfig,
    tol: &Tolerances,
) -> Result<Vec<CheckResult>> {
    let trace = sol.trace.as_ref().ok_or(Error::MissingTrace)?;
    if !(rgeo > 0.0 && delta > 0.0) {
        return Err(Error::Config(format!(
            "volume lemma needs R > 0 and delta > 0 (got {rgeo}, {delta})"
        )));
    }
    let m = &sol.model;
    let n = m.dim() as f64;
    let pow = m.dim() as i32 - 1;
    let left = intrinsic_ball_volume(sol, rgeo, d_exponent, q)?;
    let rho = ((1.0 + delta) * rgeo).min(sol.r0);
    let t_rho = trace.t_at_radius(rho)?;

    // dP = ξ^{n-1} dr = ξ^{n-1} ṙ dt along the meridian
    let mut first = 0.0;
    let mut second = 0.0;
    for w in trace.states().windows(2) {
        let (a, b) = (w[0].t, w[1].t.min(t_rho));
        if a >= t_rho {
            break;
        }
        let term = |t: f64, which: u8| -> Result<f64> {
            let st = trace.state_at(t)?;
            let r = st.r.max(0.0);
            let psi = m.psi(r)?;
            let base = st.s.abs() * (-psi).exp() * (-d_exponent * psi).exp() * m.xi(r)?.powi(pow) * st.dr;
            if which == 0 {
                return Ok(base);
            }
            let normal_psi = m.psi_prime(r)? * st.phi.sin();
            let h = match sol.variant() {
                Variant::Weighted => sol.h0 - normal_psi / n,
                Variant::Unweighted => sol.h0,
            };
            Ok(base * (h + d_exponent / n * normal_psi).abs())
        };
        first += quadrature::integrate(|t| term(t, 0), a, b, q)?.value;
        second += quadrature::integrate(|t| term(t, 1), a, b, q)?.value;
    }
    let area = sphere_area(m.dim());
    let right = area * (first / (delta * rgeo) + n * second);
    let label = format!("R={rgeo}, delta={delta}, D={d_exponent}");
    let lemma = CheckResult::new(
        format!("volume_lemma({label})"),
        left,
        right,
        right - left,
        tol.bound_slack * right.abs().max(1.0),
    )
    .with_meta("R", rgeo)
    .with_meta("delta", delta)
    .with_meta("D", d_exponent)
    .with_meta("rho", rho)
    .with_meta("first_term", area * first / (delta * rgeo))
    .with_meta("second_term", area * n * second);

    let reach = trace.state_at(rgeo.min(trace.length()))?.r;
    let containment = CheckResult::new(
        format!("projection_containment(R={rgeo})"),
        reach,
        rgeo,
        rgeo - reach,
        0.0,
    )
    .with_detail("largest base radius within intrinsic distance R of the apex is <= R");
    Ok(vec![lemma, containment])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthProbe {
    pub slope: f64,
    pub intercept: f64,
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
}

/// Least-squares slope of `log V_k(R)` against `log R`.
pub fn volume_growth_probe(m: &ModelManifold, k: f64, radii: &[f64], q: &QuadratureConfig) -> Result<GrowthProbe> {
    if radii.len() < 2 {
        return Err(Error::Config("growth probe needs at least two radii".into()));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(Error::Config("growth probe radii must be positive and increasing".into()));
    }
    let volumes = radii
        .iter()
        .map(|&r| m.ball_volume(r, k, q))
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = volumes.iter().map(|v| v.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(GrowthProbe {
        slope,
        intercept: my - slope * mx,
        radii: radii.to_vec(),
        volumes,
    })
}

/// Quadratic growth criterion: `slope <= 2 + growth_slack`.
pub fn volume_growth_check(
    m: &ModelManifold,
    k: f64,
    radii: &[f64],
    q: &QuadratureConfig,
    tol: &Tolerances,
) -> Result<CheckResult> {
    let probe = volume_growth_probe(m, k, radii, q)?;
    let limit = 2.0 + tol.growth_slack;
    Ok(CheckResult::new("volume_growth", probe.slope, limit, limit - probe.slope, 0.0)
        .with_meta("k", k)
        .with_meta("r_min", radii[0])
        .with_meta("r_max", radii[radii.len() - 1])
        .with_detail("log-log slope of vol_k(B_R) <= 2 + slack"))
}

/// `sup |u_a - u_b|` over a common grid.
pub fn method_agreement(a: &GraphSolution, b: &GraphSolution) -> Result<f64> {
    if a.profile.r.len() != b.profile.r.len()
        || a.profile.r.iter().zip(&b.profile.r).any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0))
    {
        return Err(Error::Config("method agreement needs profiles on a common grid".into()));
    }
    Ok(a.profile
        .u
        .iter()
        .zip(&b.profile.u)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

pub fn method_agreement_check(a: &GraphSolution, b: &GraphSolution, tol: &Tolerances) -> Result<CheckResult> {
    let sup = method_agreement(a, b)?;
    Ok(CheckResult::residual("method_agreement", sup, tol.agreement)
        .with_detail(format!("sup |u_{} - u_{}|", a.method.name(), b.method.name())))
}

/// Radial Bakry–Émery diagnostic: the smallest `Ric_ψ(Y,Y)` on the grid.
/// Always passes; the value is informative.
pub fn bakry_emery_diagnostic(sol: &GraphSolution) -> Result<CheckResult> {
    let mut min = f64::INFINITY;
    let mut at = 0.0;
    for &r in sol.profile.r.iter().filter(|&&r| r > 0.0) {
        let v = sol.model.bakry_emery_yy(r)?;
        if v < min {
            min = v;
            at = r;
        }
    }
    let mut c = CheckResult::new("bakry_emery_radial", min, 0.0, 0.0, 0.0).with_meta("at_r", at);
    c.detail = "min over the grid of e^{-2psi}(psi'' + (n-1)(xi'/xi)psi' - psi'^2); informative".into();
    Ok(c)
}
