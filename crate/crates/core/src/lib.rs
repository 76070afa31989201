//! Utility-indifference pricing of claims on a non-traded asset hedged with a
//! correlated traded asset, under exponential utility.
//!
//! The reservation price of a claim `h(S_T)` is a scaled log-Laplace transform
//! of a lognormal variable. Splitting that transform with the Lambert W
//! function gives a closed-form deterministic part plus a residual expectation
//! that is close to one and cheap to estimate by Monte Carlo.

pub mod analysis;
pub mod decomposition;
pub mod error;
pub mod hedging;
pub mod market;
pub mod mc;
pub mod pricing;
pub mod quadrature;
pub mod special_functions;
pub mod taylor;

pub use error::{IndiffError, Result};
pub use market::{AgentParams, DerivedQuantities, MarketScenario, Preset};
pub use mc::{EstimatorResult, McConfig};
pub use pricing::PayoffSpec;

/// Crate version, stamped into CLI output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
