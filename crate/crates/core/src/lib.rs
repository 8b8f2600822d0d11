//! Lévy-driven forward-curve models in the Musiela parametrization.
//!
//! The crate covers the driver cumulants, curve norms, the no-arbitrage drift,
//! dyadic stochastic integrals and a Monte Carlo engine for the curve dynamics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod drift;
pub mod engine;
pub mod error;
pub mod integration;
pub mod levy;
pub mod quadrature;
pub mod rng;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use curves::{AnalyticCurve, CurveSpaceConfig, ForwardCurve, NormVariant, WeightSpec, WeightedConfig};
pub use drift::{hjm_drift, primitive, AdmissibilityReport, DriftInput};
pub use engine::{simulate, Ensemble, SimulationScenario, VolatilitySpec};
pub use error::{Error, Result};
pub use levy::{Jump, LevyKind, LevyModel, LevyPath, PathGrid};
