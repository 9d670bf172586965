//! Drift analysis for epoch-partitioned subject catalogs.
//!
//! The pipeline ingests a catalog of dated records tagged with hierarchical
//! subject terms, slices it into fixed-length epochs, and builds one term
//! co-occurrence graph per epoch and indexing level. Each graph is embedded
//! on a toroidal self-organizing map; comparing best-matching units across
//! consecutive epochs yields split and merge events that quantify how the
//! vocabulary regroups over time. PageRank scores double as term masses for
//! an inverse-square force summary of each epoch's map.
//!
//! Everything downstream of ingestion is deterministic for a fixed seed,
//! including under parallel execution.

pub mod catalog;
pub mod clusterer;
pub mod config;
pub mod cooccur;
pub mod driftlog;
pub mod error;
pub mod esom;
pub mod mechanics;
pub mod pipeline;
pub mod report;
pub mod termgraph;
pub mod verify;

pub use error::{Error, Result};
