//! Numerical evaluation of the drift symbol and its three parts.

pub mod fit;
pub mod kernel;
pub mod mc;
pub mod reduced;

use serde::Serialize;

use crate::constants::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AdaptiveQuadrature,
    MonteCarlo,
}

/// A numerical value with an absolute error estimate.
///
/// Monte Carlo results report the standard error of the batch means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub method: Method,
    pub samples_or_evals: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Target {
    ITra,
    IStr,
    IMix,
    HQuadraticForm,
    FQuadraticForm,
}

impl Target {
    pub const ALL: [Target; 5] = [
        Target::ITra,
        Target::IStr,
        Target::IMix,
        Target::HQuadraticForm,
        Target::FQuadraticForm,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolRequest {
    pub params: ModelParams,
    /// `|n|`.
    pub lambda: f64,
    pub target: Target,
}

impl SymbolRequest {
    pub fn new(params: ModelParams, lambda: f64, target: Target) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("need lambda > 0, got {lambda}")));
        }
        Ok(SymbolRequest {
            params,
            lambda,
            target,
        })
    }
}

/// Evaluates the requested part by reduced quadrature.
pub fn quadrature(req: &SymbolRequest) -> Result<IntegralResult> {
    let (p, l) = (&req.params, req.lambda);
    match req.target {
        Target::ITra => reduced::i_tra(p, l),
        Target::IStr => reduced::i_str(p, l),
        Target::IMix => reduced::i_mix(p, l),
        Target::HQuadraticForm => reduced::h_quadratic_form(p, l),
        Target::FQuadraticForm => reduced::f_quadratic_form(p, l),
    }
}
