//! Construction and numerical verification of rotationally symmetric Killing
//! graphs with constant (weighted) mean curvature over model manifolds.

pub mod constructor;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod ode;
pub mod quadrature;
pub mod verifier;

pub use constructor::{GraphProfile, GraphSolution, Method, Variant};
pub use error::{Error, Result};
pub use expr::{ExprAst, ExprError};
pub use geometry::{ModelManifold, ModelSpec};
pub use ode::StepControl;
pub use quadrature::QuadratureConfig;
pub use verifier::{CheckResult, Status, Tolerances, VerificationReport};
