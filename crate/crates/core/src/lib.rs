//! Curvature-based market graph analytics.
//!
//! The crate builds daily weighted graphs from tabular market data, computes
//! discrete Ricci curvature on their edges (Ollivier via exact optimal
//! transport, or Forman), evolves edge weights under discrete Ricci flow,
//! extracts root-cause paths over strong curvature shifts, and produces
//! curvature-penalized Top-K asset rankings together with a synthetic-shock
//! evaluation harness.
//!
//! All numeric code is generic over the scalar type through [`num::Real`];
//! the `*64` aliases at the crate root fix the common `f64` instantiations.

// Guards written as `!(x > 0.0)` intentionally treat NaN as invalid.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curvature;
pub mod entity;
pub mod error;
pub mod flow;
pub mod graph;
pub mod market;
pub mod num;
pub mod pipeline;
pub mod rca;
pub mod scoring;
pub mod stress;
mod transport;

pub use entity::{EdgeKey, EntityId};
pub use error::{CoreError, Result};
pub use num::Real;

/// Feature vector over `f64`.
pub type FeatureVector64 = market::FeatureVector<f64>;
/// Market frame over `f64`.
pub type MarketFrame64 = market::MarketFrame<f64>;
/// Collapsed weighted graph over `f64`.
pub type WeightedGraph64 = graph::WeightedGraph<f64>;
/// Daily heterogeneous graph over `f64`.
pub type FinGraph64 = graph::FinGraph<f64>;
/// Curvature map over `f64`.
pub type CurvatureMap64 = curvature::CurvatureMap<f64>;
/// Flow configuration over `f64`.
pub type FlowConfig64 = flow::FlowConfig<f64>;
/// Flow trace over `f64`.
pub type FlowTrace64 = flow::FlowTrace<f64>;
/// Root-cause search parameters over `f64`.
pub type RcaParams64 = rca::RcaParams<f64>;
/// Score board over `f64`.
pub type ScoreBoard64 = scoring::ScoreBoard<f64>;
