//! Popularity- and personalization-driven news ranking: an agent-based
//! simulator, the windowed evaluation indices, and the limit theory of the
//! clicking and highlighting distributions.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases below fix `f64`, which is what the command-line tool uses.

pub mod analytic;
pub mod config;
pub mod error;
pub mod metrics;
pub mod model;
pub mod quadrature;
pub mod ranking;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod sweep;

pub use config::{
    BenchmarkMode, ConfigWarning, EngNormalization, HighlightCenter, HighlightMode, ModeKind, ModelConfig,
};
pub use error::{Error, Result};
pub use ranking::Group;
pub use scalar::Scalar;

pub type Config = ModelConfig<f64>;
pub type Config32 = ModelConfig<f32>;
pub type Agent = model::Agent<f64>;
pub type ItemSet = model::ItemSet<f64>;
pub type RankingState = ranking::RankingState<f64>;
pub type ClickEvent = sim::ClickEvent<f64>;
pub type RunResult = sim::RunResult<f64>;
pub type Ensemble = sim::Ensemble<f64>;
pub type IndexReport = metrics::IndexReport<f64>;
pub type AnalyticModel = analytic::AnalyticModel<f64>;
