use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("model invariant `{check}` violated at r = {r}: {detail}")]
    ModelInvariant {
        check: &'static str,
        r: f64,
        detail: String,
    },
    #[error("radius {r} outside the model domain [0, {limit})")]
    OutOfRange { r: f64, limit: f64 },
    #[error("H0 = {h0} violates the sign convention (H0 < 0, u' <= 0, boundary at u = 0)")]
    SignConvention { h0: f64 },
    #[error(
        "target n|H0| = {target} is outside the attainable range of the isoperimetric ratio \
         ({inf} at the domain end, {sup} near the pole)"
    )]
    TargetOutOfRange { target: f64, inf: f64, sup: f64 },
    #[error("isoperimetric ratio increases on [{lo}, {hi}] ({from} -> {to})")]
    NonMonotoneRatio {
        lo: f64,
        hi: f64,
        from: f64,
        to: f64,
    },
    #[error("quadrature did not converge on [{a}, {b}]: error {achieved:e} > {requested:e}")]
    QuadratureNonConvergence {
        achieved: f64,
        requested: f64,
        a: f64,
        b: f64,
    },
    #[error("radicand A^2 - I^2 vanishes at interior radius {r}; the isoperimetric hypothesis fails")]
    DegenerateDenominator { r: f64 },
    #[error("step size underflow at t = {t} (r = {r}, phi = {phi})")]
    StepUnderflow { t: f64, r: f64, phi: f64 },
    #[error("meridian folds back at t = {t} (r = {r}, phi = {phi}); the surface is not a graph")]
    Fold { t: f64, r: f64, phi: f64 },
    #[error("operation requires an arc-length trace (ODE-built solution)")]
    MissingTrace,
    #[error("geodesic radius {requested} exceeds the profile length {length}")]
    RadiusExceedsProfile { requested: f64, length: f64 },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Whether the error stems from user input rather than from the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Expr(_)
                | Error::Config(_)
                | Error::UnknownModel(_)
                | Error::ModelInvariant { .. }
                | Error::SignConvention { .. }
        )
    }
}
