//! Rotationally symmetric model bases `P = [0, R) ×_ξ S^{n-1}` carrying a
//! radial weight `ψ = -log|Y|`.
//!
//! All areas and volumes omit the factor `|S^{n-1}|`. The weight exponent `k`
//! selects the measure: `k = 2` is the measure of the weighted construction,
//! `k = 1` the one of the unweighted construction and `k = 0` the plain
//! Riemannian one.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, ExprAst};
use crate::quadrature::{self, QuadratureConfig};

/// Cap used for numerics when the model is complete (`R = ∞`).
pub const DEFAULT_R_MAX: f64 = 50.0;

/// Radii below this are treated with the pole asymptotics `A/V ≈ n/r`.
const POLE_RADIUS: f64 = 1e-9;

static NO_PARAMS: BTreeMap<String, f64> = BTreeMap::new();

/// Declarative description of a model, as found in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelSpec {
    Euclidean {
        n: usize,
    },
    Hyperbolic {
        n: usize,
        #[serde(default = "unit")]
        kappa: f64,
    },
    Spherical {
        n: usize,
        #[serde(default = "unit")]
        kappa: f64,
    },
    /// `ψ = c (n-1)/2 · log(ξ/r)`, so that `e^{-2ψ} ξ^{n-1} = r^{n-1}` when `c = 1`.
    CorollaryWeighted { base: Box<ModelSpec>, c: f64 },
    /// `ψ = c (n-1) · log(ξ/r)`, so that `e^{-ψ} ξ^{n-1} = r^{n-1}` when `c = 1`.
    CorollaryUnweighted { base: Box<ModelSpec>, c: f64 },
    Custom(CustomModel),
}

fn unit() -> f64 {
    1.0
}

fn zero_expr() -> String {
    "0".to_string()
}

/// A model given by user expressions in `r` and named parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub n: usize,
    pub xi: String,
    pub xi_prime: String,
    #[serde(default = "zero_expr")]
    pub psi: String,
    #[serde(default = "zero_expr")]
    pub psi_prime: String,
    /// Radius limit `R`; omitted means `R = ∞`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Entry of the built-in model registry.
#[derive(Debug, Clone, Serialize)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub params: &'static [(&'static str, &'static str)],
    pub description: &'static str,
}

pub const REGISTRY: [RegistryEntry; 6] = [
    RegistryEntry {
        name: "euclidean",
        params: &[("n", "integer >= 2")],
        description: "flat R^n: xi = r, psi = 0",
    },
    RegistryEntry {
        name: "hyperbolic",
        params: &[("n", "integer >= 2"), ("kappa", "real > 0, default 1")],
        description: "space form of curvature -kappa: xi = sinh(sqrt(kappa) r)/sqrt(kappa), psi = 0",
    },
    RegistryEntry {
        name: "spherical",
        params: &[("n", "integer >= 2"), ("kappa", "real > 0, default 1")],
        description: "space form of curvature kappa: xi = sin(sqrt(kappa) r)/sqrt(kappa), R = pi/sqrt(kappa), psi = 0",
    },
    RegistryEntry {
        name: "corollary_weighted",
        params: &[("base", "euclidean | hyperbolic | spherical | custom"), ("c", "real > 0")],
        description: "base warping with psi = c (n-1)/2 log(xi/r), psi(0) = 0",
    },
    RegistryEntry {
        name: "corollary_unweighted",
        params: &[("base", "euclidean | hyperbolic | spherical | custom"), ("c", "real > 0")],
        description: "base warping with psi = c (n-1) log(xi/r), psi(0) = 0",
    },
    RegistryEntry {
        name: "custom",
        params: &[
            ("n", "integer >= 2"),
            ("xi", "expression in r"),
            ("xi_prime", "expression in r"),
            ("psi", "expression in r, default 0"),
            ("psi_prime", "expression in r, default 0"),
            ("radius", "real > 0, default infinite"),
            ("params", "map name -> real"),
        ],
        description: "user-defined warping and weight; derivatives are checked by central differences",
    },
];

/// A radial function `[0, R) → ℝ`.
#[derive(Debug, Clone)]
pub enum RadialFn {
    Expr(Arc<ExprAst>),
    /// `factor · log(ξ(r)/r)`, extended by `0` at the pole.
    LogRatio { xi: Box<RadialFn>, factor: f64 },
    /// `factor · (ξ'/ξ - 1/r)`, extended by `0` at the pole.
    LogRatioSlope {
        xi: Box<RadialFn>,
        xi_prime: Box<RadialFn>,
        factor: f64,
    },
}

impl RadialFn {
    fn expr(source: &str) -> Result<RadialFn> {
        Ok(RadialFn::Expr(Arc::new(expr::parse(source)?)))
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        match self {
            RadialFn::Expr(ast) => Ok(ast.eval(r, &NO_PARAMS)?),
            RadialFn::LogRatio { xi, factor } => {
                if r == 0.0 {
                    return Ok(0.0);
                }
                let ratio = xi.eval(r)? / r;
                if ratio <= 0.0 {
                    return Err(Error::Numerical(format!("log(xi/r) undefined at r = {r}")));
                }
                Ok(factor * ratio.ln())
            }
            RadialFn::LogRatioSlope {
                xi,
                xi_prime,
                factor,
            } => {
                if r == 0.0 {
                    return Ok(0.0);
                }
                let x = xi.eval(r)?;
                let dx = xi_prime.eval(r)?;
                Ok(factor * (r * dx - x) / (r * x))
            }
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, RadialFn::Expr(ast) if ast.is_constant_zero())
    }
}

/// Validated model manifold: dimension, warping `ξ`, weight `ψ`, radius limit.
#[derive(Debug, Clone)]
pub struct ModelManifold {
    spec: ModelSpec,
    label: String,
    n: usize,
    radius: f64,
    r_max: f64,
    xi: RadialFn,
    xi_prime: RadialFn,
    psi: RadialFn,
    psi_prime: RadialFn,
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Euclidean { n } => write!(f, "euclidean(n={n})"),
            ModelSpec::Hyperbolic { n, kappa } => write!(f, "hyperbolic(n={n}, kappa={kappa})"),
            ModelSpec::Spherical { n, kappa } => write!(f, "spherical(n={n}, kappa={kappa})"),
            ModelSpec::CorollaryWeighted { base, c } => {
                write!(f, "corollary_weighted({base}, c={c})")
            }
            ModelSpec::CorollaryUnweighted { base, c } => {
                write!(f, "corollary_unweighted({base}, c={c})")
            }
            ModelSpec::Custom(custom) => match &custom.label {
                Some(label) => write!(f, "custom({label})"),
                None => write!(f, "custom(n={}, xi={})", custom.n, custom.xi),
            },
        }
    }
}

impl ModelSpec {
    pub fn registry_name(&self) -> &'static str {
        match self {
            ModelSpec::Euclidean { .. } => "euclidean",
            ModelSpec::Hyperbolic { .. } => "hyperbolic",
            ModelSpec::Spherical { .. } => "spherical",
            ModelSpec::CorollaryWeighted { .. } => "corollary_weighted",
            ModelSpec::CorollaryUnweighted { .. } => "corollary_unweighted",
            ModelSpec::Custom(_) => "custom",
        }
    }
}

struct Parts {
    n: usize,
    radius: f64,
    xi: RadialFn,
    xi_prime: RadialFn,
    psi: RadialFn,
    psi_prime: RadialFn,
}

fn check_dimension(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Config(format!("dimension n = {n} must be at least 2")));
    }
    Ok(())
}

fn check_curvature(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Config(format!("kappa = {kappa} must be a positive real")));
    }
    Ok(())
}

fn build_parts(spec: &ModelSpec) -> Result<Parts> {
    match spec {
        ModelSpec::Euclidean { n } => {
            check_dimension(*n)?;
            Ok(Parts {
                n: *n,
                radius: f64::INFINITY,
                xi: RadialFn::expr("r")?,
                xi_prime: RadialFn::expr("1")?,
                psi: RadialFn::expr("0")?,
                psi_prime: RadialFn::expr("0")?,
            })
        }
        ModelSpec::Hyperbolic { n, kappa } => {
            check_dimension(*n)?;
            check_curvature(*kappa)?;
            let s = kappa.sqrt();
            Ok(Parts {
                n: *n,
                radius: f64::INFINITY,
                xi: RadialFn::expr(&format!("sinh({s:?}*r)/{s:?}"))?,
                xi_prime: RadialFn::expr(&format!("cosh({s:?}*r)"))?,
                psi: RadialFn::expr("0")?,
                psi_prime: RadialFn::expr("0")?,
            })
        }
        ModelSpec::Spherical { n, kappa } => {
            check_dimension(*n)?;
            check_curvature(*kappa)?;
            let s = kappa.sqrt();
            Ok(Parts {
                n: *n,
                radius: std::f64::consts::PI / s,
                xi: RadialFn::expr(&format!("sin({s:?}*r)/{s:?}"))?,
                xi_prime: RadialFn::expr(&format!("cos({s:?}*r)"))?,
                psi: RadialFn::expr("0")?,
                psi_prime: RadialFn::expr("0")?,
            })
        }
        ModelSpec::CorollaryWeighted { base, c } | ModelSpec::CorollaryUnweighted { base, c } => {
            if !(*c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("c = {c} must be a positive real")));
            }
            let base = build_parts(base)?;
            let dims = (base.n - 1) as f64;
            let factor = match spec {
                ModelSpec::CorollaryWeighted { .. } => c * dims / 2.0,
                _ => c * dims,
            };
            Ok(Parts {
                psi: RadialFn::LogRatio {
                    xi: Box::new(base.xi.clone()),
                    factor,
                },
                psi_prime: RadialFn::LogRatioSlope {
                    xi: Box::new(base.xi.clone()),
                    xi_prime: Box::new(base.xi_prime.clone()),
                    factor,
                },
                ..base
            })
        }
        ModelSpec::Custom(custom) => {
            check_dimension(custom.n)?;
            let radius = custom.radius.unwrap_or(f64::INFINITY);
            if !(radius > 0.0) {
                return Err(Error::Config(format!("radius {radius} must be positive")));
            }
            let keys: Vec<&str> = custom.params.keys().map(String::as_str).collect();
            let compile = |src: &str| -> Result<RadialFn> {
                let ast = expr::parse_with_params(src, &keys)?.bind(&custom.params)?;
                Ok(RadialFn::Expr(Arc::new(ast)))
            };
            Ok(Parts {
                n: custom.n,
                radius,
                xi: compile(&custom.xi)?,
                xi_prime: compile(&custom.xi_prime)?,
                psi: compile(&custom.psi)?,
                psi_prime: compile(&custom.psi_prime)?,
            })
        }
    }
}

/// Outcome of [`ModelManifold::ratio_monotone_scan`].
#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneScan {
    Pass { samples: usize },
    Violation { lo: f64, hi: f64, from: f64, to: f64 },
}

impl MonotoneScan {
    pub fn passed(&self) -> bool {
        matches!(self, MonotoneScan::Pass { .. })
    }
}

impl ModelManifold {
    /// Builds and validates a model with the default numeric cap for `R = ∞`.
    pub fn new(spec: &ModelSpec) -> Result<ModelManifold> {
        Self::with_r_max(spec, DEFAULT_R_MAX)
    }

    pub fn with_r_max(spec: &ModelSpec, r_max: f64) -> Result<ModelManifold> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::Config(format!("r_max = {r_max} must be a positive real")));
        }
        let parts = build_parts(spec)?;
        let model = ModelManifold {
            spec: spec.clone(),
            label: spec.to_string(),
            n: parts.n,
            radius: parts.radius,
            r_max,
            xi: parts.xi,
            xi_prime: parts.xi_prime,
            psi: parts.psi,
            psi_prime: parts.psi_prime,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let end = self.domain_end();
        let invariant = |check: &'static str, r: f64, detail: String| Error::ModelInvariant {
            check,
            r,
            detail,
        };
        let eval = |check: &'static str, f: &RadialFn, r: f64| -> Result<f64> {
            f.eval(r)
                .map_err(|e| invariant(check, r, format!("evaluation failed: {e}")))
        };

        let xi0 = eval("xi(0) = 0", &self.xi, 0.0)?;
        if xi0.abs() > 1e-12 {
            return Err(invariant("xi(0) = 0", 0.0, format!("xi(0) = {xi0}")));
        }
        let dxi0 = eval("xi'(0) = 1", &self.xi_prime, 0.0)?;
        if (dxi0 - 1.0).abs() > 1e-8 {
            return Err(invariant("xi'(0) = 1", 0.0, format!("xi'(0) = {dxi0}")));
        }
        let h = 1e-6 * end.min(1.0);
        let slope = eval("xi'(0) = 1", &self.xi, h)? / h;
        if (slope - 1.0).abs() > 1e-6 {
            return Err(invariant("xi'(0) = 1", h, format!("xi(h)/h = {slope}")));
        }
        let dpsi0 = eval("psi'(0) = 0", &self.psi_prime, 0.0)?;
        if dpsi0.abs() > 1e-8 {
            return Err(invariant("psi'(0) = 0", 0.0, format!("psi'(0) = {dpsi0}")));
        }
        let positive_samples = 256;
        for i in 1..=positive_samples {
            let r = end * (i as f64 / positive_samples as f64) * (1.0 - 1e-6);
            let x = eval("xi > 0", &self.xi, r)?;
            if !(x > 0.0) {
                return Err(invariant("xi > 0", r, format!("xi = {x}")));
            }
        }
        let sample: Vec<f64> = (0..32)
            .map(|i| end * (0.01 + 0.98 * i as f64 / 31.0))
            .collect();
        for (check, f, fp) in [
            ("xi' consistent with xi", &self.xi, &self.xi_prime),
            ("psi' consistent with psi", &self.psi, &self.psi_prime),
        ] {
            let dev = expr::derivative_deviation(|r| f.eval(r), |r| fp.eval(r), &sample)
                .map_err(|e| invariant(check, f64::NAN, format!("evaluation failed: {e}")))?;
            if dev > 1e-6 {
                let worst = sample
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        let d = |r: f64| {
                            expr::derivative_deviation(|x| f.eval(x), |x| fp.eval(x), &[r])
                                .unwrap_or(f64::INFINITY)
                        };
                        d(a).total_cmp(&d(b))
                    })
                    .unwrap_or(f64::NAN);
                return Err(invariant(check, worst, format!("max relative deviation {dev:e}")));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Radius limit `R` (possibly infinite).
    pub fn radius_limit(&self) -> f64 {
        self.radius
    }

    /// `min(R, r_max)`: the right end of every scan.
    pub fn domain_end(&self) -> f64 {
        self.radius.min(self.r_max)
    }

    pub fn has_trivial_weight(&self) -> bool {
        self.psi.is_zero() && self.psi_prime.is_zero()
    }

    pub fn xi(&self, r: f64) -> Result<f64> {
        self.xi.eval(r)
    }

    pub fn xi_prime(&self, r: f64) -> Result<f64> {
        self.xi_prime.eval(r)
    }

    pub fn psi(&self, r: f64) -> Result<f64> {
        self.psi.eval(r)
    }

    pub fn psi_prime(&self, r: f64) -> Result<f64> {
        self.psi_prime.eval(r)
    }

    /// `-k ψ'(r) + (n-1) ξ'(r)/ξ(r)`: logarithmic derivative of the area density.
    pub fn density_log_derivative(&self, r: f64, k: f64) -> Result<f64> {
        let dims = (self.n - 1) as f64;
        Ok(-k * self.psi_prime(r)? + dims * self.xi_prime(r)? / self.xi(r)?)
    }

    fn check_range(&self, r: f64) -> Result<()> {
        if !(r >= 0.0 && r < self.radius) {
            return Err(Error::OutOfRange {
                r,
                limit: self.radius,
            });
        }
        Ok(())
    }

    /// `e^{-kψ(r)} ξ(r)^{n-1}`.
    pub fn area_density(&self, r: f64, k: f64) -> Result<f64> {
        self.check_range(r)?;
        self.density_unchecked(r, k)
    }

    pub(crate) fn density_unchecked(&self, r: f64, k: f64) -> Result<f64> {
        let x = self.xi(r)?;
        let w = if k == 0.0 { 1.0 } else { (-k * self.psi(r)?).exp() };
        Ok(w * x.powi(self.n as i32 - 1))
    }

    /// `∫_0^r e^{-kψ} ξ^{n-1} dτ`.
    pub fn ball_volume(&self, r: f64, k: f64, q: &QuadratureConfig) -> Result<f64> {
        Ok(self.ball_volume_estimate(r, k, q)?.value)
    }

    pub fn ball_volume_estimate(
        &self,
        r: f64,
        k: f64,
        q: &QuadratureConfig,
    ) -> Result<quadrature::Estimate> {
        self.check_range(r)?;
        quadrature::integrate(|t| self.density_unchecked(t, k), 0.0, r, q)
    }

    /// `∫_a^b e^{-kψ} ξ^{n-1} dτ` without range checks.
    pub(crate) fn volume_between(&self, a: f64, b: f64, k: f64, q: &QuadratureConfig) -> Result<f64> {
        Ok(quadrature::integrate(|t| self.density_unchecked(t, k), a, b, q)?.value)
    }

    /// Isoperimetric ratio `A_k(r)/V_k(r)` of the geodesic ball `B_r(o)`.
    pub fn isoperimetric_ratio(&self, r: f64, k: f64, q: &QuadratureConfig) -> Result<f64> {
        if !(r > 0.0 && r < self.radius) {
            return Err(Error::OutOfRange {
                r,
                limit: self.radius,
            });
        }
        if r < POLE_RADIUS {
            // A = r^{n-1}(1 + O(r²)), V = r^n/n (1 + O(r²))
            return Ok(self.n as f64 / r);
        }
        let v = self.ball_volume(r, k, q)?;
        let a = self.density_unchecked(r, k)?;
        if v <= 0.0 {
            return Ok(self.n as f64 / r);
        }
        Ok(a / v)
    }

    /// Sample radii for scans: geometric near the pole, uniform beyond.
    pub fn scan_grid(&self, resolution: usize) -> Vec<f64> {
        let end = self.domain_end();
        let eps: f64 = 1e-3;
        let knee = 0.05;
        let mut grid = Vec::with_capacity(2 * resolution);
        let ratio = (knee / eps).powf(1.0 / resolution as f64);
        let mut x = eps;
        for _ in 0..resolution {
            grid.push(end * x);
            x *= ratio;
        }
        for i in 0..=resolution {
            let s = knee + (1.0 - eps - knee) * i as f64 / resolution as f64;
            grid.push(end * s);
        }
        grid
    }

    /// Checks that `A_k/V_k` is non-increasing on `(ε, R - ε)` up to
    /// `1e-10 (1 + |value|)`.
    pub fn ratio_monotone_scan(
        &self,
        k: f64,
        resolution: usize,
        q: &QuadratureConfig,
    ) -> Result<MonotoneScan> {
        if resolution < 16 {
            return Err(Error::Config(format!(
                "scan resolution {resolution} must be at least 16"
            )));
        }
        let q = tightened(q);
        let grid = self.scan_grid(resolution);
        let mut volume = self.volume_between(0.0, grid[0], k, &q)?;
        let mut prev = self.density_unchecked(grid[0], k)? / volume;
        for w in grid.windows(2) {
            volume += self.volume_between(w[0], w[1], k, &q)?;
            let value = self.density_unchecked(w[1], k)? / volume;
            if value > prev + 1e-10 * (1.0 + prev.abs()) {
                return Ok(MonotoneScan::Violation {
                    lo: w[0],
                    hi: w[1],
                    from: prev,
                    to: value,
                });
            }
            prev = value;
        }
        Ok(MonotoneScan::Pass {
            samples: grid.len(),
        })
    }

    /// Radial Bakry–Émery component `Ric_ψ(Y, Y) = e^{-2ψ}(ψ'' + (n-1)(ξ'/ξ)ψ' - ψ'²)`.
    ///
    /// `ψ''` is a central difference of `ψ'` with `h = 1e-5·max(1, r)`; for
    /// `r < h` the stencil is reflected through the pole using that `ψ'` is odd.
    pub fn bakry_emery_yy(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r < self.radius) {
            return Err(Error::OutOfRange {
                r,
                limit: self.radius,
            });
        }
        let h = 1e-5 * r.max(1.0);
        let right = self.psi_prime(r + h)?;
        let left = if r > h {
            self.psi_prime(r - h)?
        } else {
            -self.psi_prime(h - r)?
        };
        let psi_pp = (right - left) / (2.0 * h);
        let dpsi = self.psi_prime(r)?;
        let dims = (self.n - 1) as f64;
        let radial = psi_pp + dims * self.xi_prime(r)? / self.xi(r)? * dpsi - dpsi * dpsi;
        Ok((-2.0 * self.psi(r)?).exp() * radial)
    }
}

/// Tolerances used where the ratio itself is compared at the 1e-12 level.
pub(crate) fn tightened(q: &QuadratureConfig) -> QuadratureConfig {
    QuadratureConfig {
        abs_tol: q.abs_tol.min(1e-15),
        rel_tol: q.rel_tol.min(1e-13),
        max_depth: q.max_depth.max(48),
    }
}
