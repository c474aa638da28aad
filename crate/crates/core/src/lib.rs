//! Scheduling and analytic cost estimation for neural-network inference on
//! multi-chip-module accelerators.
//!
//! A network is split into segments that occupy the whole package in turn.
//! Inside a segment, contiguous layers are merged into clusters, each
//! cluster runs on its own region of chiplets, and the clusters form a
//! pipeline over the batch. [`search`] finds the segments, clusters, region
//! sizes and per-layer partitions; [`cost`] prices a schedule.

#![allow(clippy::single_range_in_vec_init)]

pub mod cost;
pub mod error;
pub mod io;
pub mod model;
pub mod placement;
pub mod schedule;
pub mod search;
pub mod zoo;

pub use cost::{coefficient_of_variation, evaluate, CostModel, CostReport, Energy, PhaseTimes};
pub use error::{Error, Result};
pub use io::{load_hardware, load_network};
pub use model::{layer_stats, halo_elems, HardwareConfig, LayerDesc, LayerKind, LayerStats, Network, Partition};
pub use placement::{Coord, Mesh};
pub use schedule::{Cluster, Schedule, Segment};
pub use search::{schedule_baseline, schedule_scope, Method, SearchResult};
pub use zoo::{builtin_network, BUILTIN_NETWORKS};
