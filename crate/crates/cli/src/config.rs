//! Run configuration: a single JSON document.

use std::fs;
use std::path::{Path, PathBuf};

use kcl_core::verifier::Tolerances;
use kcl_core::{Error, ModelSpec, QuadratureConfig, StepControl, Variant};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Quadrature,
    Ode,
    /// Closed form; the model must be a corollary model.
    Corollary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    CurvatureResidual,
    FluxIdentity,
    HeightBounds,
    AngleFunction,
    LaplacianIdentity,
    Salavessa,
    VolumeLemma,
    VolumeGrowth,
    MethodAgreement,
    BakryEmery,
}

impl CheckKind {
    pub const ALL: [CheckKind; 10] = [
        CheckKind::CurvatureResidual,
        CheckKind::FluxIdentity,
        CheckKind::HeightBounds,
        CheckKind::AngleFunction,
        CheckKind::LaplacianIdentity,
        CheckKind::Salavessa,
        CheckKind::VolumeLemma,
        CheckKind::VolumeGrowth,
        CheckKind::MethodAgreement,
        CheckKind::BakryEmery,
    ];

    /// Whether the check runs on the arc-length trace of an ODE build.
    pub fn needs_trace(self) -> bool {
        matches!(self, CheckKind::LaplacianIdentity | CheckKind::VolumeLemma)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub c_relax: Option<f64>,
    #[serde(rename = "G")]
    pub g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeLemmaConfig {
    /// Geodesic radii; defaults to fixed fractions of the meridian length.
    pub radii: Option<Vec<f64>>,
    pub deltas: Vec<f64>,
    pub d_exponents: Vec<f64>,
}

impl Default for VolumeLemmaConfig {
    fn default() -> Self {
        VolumeLemmaConfig {
            radii: None,
            deltas: vec![1.0, 2.0],
            d_exponents: vec![0.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "c")]
    C,
    #[serde(rename = "H0", alias = "h0")]
    H0,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::C => "c",
            SweepParameter::H0 => "H0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default = "weighted")]
    pub variant: Variant,
    #[serde(rename = "H0", alias = "h0")]
    pub h0: f64,
    #[serde(default)]
    pub method: MethodChoice,
    /// Overrides the measure exponent `k` of the Salavessa and growth checks.
    #[serde(default)]
    pub weight_exponent: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub ode: StepControl,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Checks run by `verify`; all of them when omitted.
    #[serde(default)]
    pub checks: Option<Vec<CheckKind>>,
    /// Check names whose failure is informative only.
    #[serde(default)]
    pub expected_fail: Vec<String>,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default = "default_exponents")]
    pub laplacian_exponents: Vec<f64>,
    #[serde(default)]
    pub volume_lemma: VolumeLemmaConfig,
    #[serde(default)]
    pub growth_radii: Option<Vec<f64>>,
    /// Radii of the Salavessa check as fractions of `r0`.
    #[serde(default = "default_fractions")]
    pub salavessa_fractions: Vec<f64>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn weighted() -> Variant {
    Variant::Weighted
}

fn default_grid() -> usize {
    kcl_core::constructor::DEFAULT_GRID_SIZE
}

fn default_exponents() -> Vec<f64> {
    vec![2.0, 3.0]
}

fn default_fractions() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.h0 < 0.0 && self.h0.is_finite()) {
            return Err(Error::SignConvention { h0: self.h0 });
        }
        self.quadrature.validate()?;
        self.ode.validate()?;
        self.tolerances.validate()?;
        if self.grid_size < 9 {
            return Err(Error::GridTooCoarse(format!(
                "grid_size = {}; at least 9 nodes are needed",
                self.grid_size
            )));
        }
        if let Some(k) = self.weight_exponent {
            if !k.is_finite() {
                return Err(Error::Config("weight_exponent must be finite".into()));
            }
        }
        if self.method == MethodChoice::Corollary && self.corollary_parts().is_none() {
            return Err(Error::Config(
                "method `corollary` needs a corollary_weighted or corollary_unweighted model".into(),
            ));
        }
        if self.salavessa_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::Config("salavessa_fractions must lie in (0, 1]".into()));
        }
        let lemma = &self.volume_lemma;
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !positive(&lemma.deltas) || lemma.radii.as_deref().is_some_and(|r| !positive(r)) {
            return Err(Error::Config("volume lemma radii and deltas must be positive".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep range is empty".into()));
            }
            if sweep.parameter == SweepParameter::C && self.corollary_parts().is_none() {
                return Err(Error::Config("sweeping c needs a corollary model".into()));
            }
            if sweep.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sweep values must be finite".into()));
            }
        }
        Ok(())
    }

    /// Base model, `c` and variant of a corollary model.
    pub fn corollary_parts(&self) -> Option<(&ModelSpec, f64, Variant)> {
        match &self.model {
            ModelSpec::CorollaryWeighted { base, c } => Some((base, *c, Variant::Weighted)),
            ModelSpec::CorollaryUnweighted { base, c } => Some((base, *c, Variant::Unweighted)),
            _ => None,
        }
    }

    pub fn checks(&self) -> Vec<CheckKind> {
        self.checks.clone().unwrap_or_else(|| CheckKind::ALL.to_vec())
    }

    /// Output directory: the command line wins over the config file.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = RunConfig::from_json(r#"{"model": {"name": "euclidean", "n": 2}, "H0": -1}"#).unwrap();
        assert_eq!(cfg.variant, Variant::Weighted);
        assert_eq!(cfg.grid_size, 257);
        assert_eq!(cfg.checks().len(), 10);
        assert_eq!(cfg.quadrature, QuadratureConfig::default());
    }

    #[test]
    fn rejections() {
        let bad = [
            r#"{"model": {"name": "euclidean", "n": 2}, "H0": 1}"#,
            r#"{"model": {"name": "euclidean", "n": 2}, "H0": -1, "grid_size": 4}"#,
            r#"{"model": {"name": "euclidean", "n": 2}, "H0": -1, "method": "corollary"}"#,
            r#"{"model": {"name": "euclidean", "n": 2}, "H0": -1, "sweep": {"parameter": "H0", "values": []}}"#,
            r#"{"model": {"name": "euclidean", "n": 2}, "H0": -1, "colour": 3}"#,
            r#"{"model": {"name": "euclidean", "n": 2}, "H0": -1, "quadrature": {"abs_tol": -1}}"#,
        ];
        for text in bad {
            let err = RunConfig::from_json(text).unwrap_err();
            assert!(
                err.is_config_error() || matches!(err, Error::GridTooCoarse(_)),
                "{text}: {err}"
            );
        }
    }

    #[test]
    fn partial_tolerances() {
        let cfg = RunConfig::from_json(
            r#"{"model": {"name": "hyperbolic", "n": 2}, "H0": -1,
                "quadrature": {"rel_tol": 1e-11}, "tolerances": {"growth_slack": 0.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.quadrature.rel_tol, 1e-11);
        assert_eq!(cfg.quadrature.abs_tol, QuadratureConfig::default().abs_tol);
        assert_eq!(cfg.tolerances.growth_slack, 0.0);
    }
}
