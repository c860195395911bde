//! Snapshot-driven futures microstructure pipeline: feed ingestion, derived
//! order-flow quantities, technical and microstructure features, VWAP-smoothed
//! direction labels, purged walk-forward splits, a baseline classifier with
//! fold ensembling, and a margin-aware backtester.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod column;
pub mod dataset;
pub mod error;
pub mod features;
pub mod feed;
pub mod labeling;
pub mod micro;
pub mod pipeline;
pub mod model;
pub mod preprocess;
pub mod quality;
pub mod ta;

pub use error::{Error, Result};
pub use quality::Quality;
