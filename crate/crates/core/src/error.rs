//! Error vocabulary shared by every module.
//!
//! Degenerate denominators are reported as errors, never clamped: a vanishing
//! volatility gap or a saturated delta-cost is exactly the arbitrage signal
//! the rate formulas are built to expose.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    /// The time step is too large: a branch probability left (0,1) or a
    /// down factor became non-positive.
    #[error("StepTooCoarse: dt={dt} yields p_up={p_up}, down_factor={down_factor}")]
    StepTooCoarse { dt: f64, p_up: f64, down_factor: f64 },

    /// Two volatilities coincide where a rate formula divides by their gap.
    #[error("DegenerateVolatility: |{v1} - {v2}| <= {tol}, implied rate explodes")]
    DegenerateVolatility { v1: f64, v2: f64, tol: f64 },

    /// Both agents carry identical cost parameters; the costed-rate formulas
    /// need heterogeneity in (c, eps).
    #[error("HeterogeneityRequired: agents share trans_rate={trans_rate} and mix={mix}")]
    HeterogeneityRequired { trans_rate: f64, mix: f64 },

    /// A drift that must be strictly positive is not.
    #[error("NonPositiveDrift: mu={mu}")]
    NonPositiveDrift { mu: f64 },

    /// The node-level 2x2 replication system is (numerically) singular.
    #[error("SingularReplication: scaled determinant {det} below {tol}")]
    SingularReplication { det: f64, tol: f64 },

    /// The closed-form risk-neutral probability left (0,1); dt is too large
    /// for the drift/volatility gap.
    #[error("QOutOfRange: q={q} at dt={dt}")]
    QOutOfRange { q: f64, dt: f64 },

    /// Grid sizes below the minimum the scheme supports.
    #[error("GridTooCoarse: need at least {min} nodes per axis, got {got}")]
    GridTooCoarse { min: usize, got: usize },

    /// Delta-cost at or above 1: the discount rate diverges.
    #[error("DeltaCostSaturated: delta={delta}")]
    DeltaCostSaturated { delta: f64 },

    /// 1 + lambda*Gamma went negative; the augmented variance is undefined.
    #[error("NegativeVarianceAugmentation: 1 + lambda*gamma = {value}")]
    NegativeVarianceAugmentation { value: f64 },

    /// A coefficient evaluation produced NaN or infinity along a path.
    #[error("NonFinitePath: {context} at t={t}, x={x}")]
    NonFinitePath { context: &'static str, t: f64, x: f64 },

    /// A domain-type invariant was violated at construction.
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
}

impl PricingError {
    /// Stable machine-readable name, used by the CLI error contract.
    pub fn name(&self) -> &'static str {
        match self {
            PricingError::StepTooCoarse { .. } => "StepTooCoarse",
            PricingError::DegenerateVolatility { .. } => "DegenerateVolatility",
            PricingError::HeterogeneityRequired { .. } => "HeterogeneityRequired",
            PricingError::NonPositiveDrift { .. } => "NonPositiveDrift",
            PricingError::SingularReplication { .. } => "SingularReplication",
            PricingError::QOutOfRange { .. } => "QOutOfRange",
            PricingError::GridTooCoarse { .. } => "GridTooCoarse",
            PricingError::DeltaCostSaturated { .. } => "DeltaCostSaturated",
            PricingError::NegativeVarianceAugmentation { .. } => "NegativeVarianceAugmentation",
            PricingError::NonFinitePath { .. } => "NonFinitePath",
            PricingError::InvalidParameter(_) => "InvalidParameter",
        }
    }
}
