//! Localization by retrieval over a geotagged database of semantic label maps.
//!
//! The crate is `no_std` and needs only `alloc`. It holds the pure pipeline:
//!
//! - [`labelmap`]: the dense class-id grid and mode downsampling.
//! - [`geo`]: poses, great-circle distance and radius-based triplet mining.
//! - [`descriptor`]: spatial-pyramid class histograms.
//! - [`metric`]: the normalized linear embedding and its triplet-loss trainer.
//! - [`retrieval`]: exact nearest-neighbour search with pose transfer.
//! - [`eval`]: Top-1 Recall@D and Recall@N.
//! - [`synth`]: a seeded "same route, different conditions" benchmark.
//!
//! File formats, the CLI and everything else touching the OS live in the
//! `semloc` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(a < b)` is how NaN gets rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod descriptor;
pub mod eval;
pub mod geo;
pub mod labelmap;
pub mod metric;
pub mod retrieval;
pub mod synth;

mod linalg;

pub use descriptor::{descriptor_dim, pyramid_histogram, DescriptorError, RawDescriptor};
pub use eval::{
    evaluate, evaluate_embeddings, recall_at_n, top1_recall_at_d, EmbeddedQuery, EvalConfig,
    EvalError, EvalReport, LabeledQuery, QueryOutcome,
};
pub use geo::{haversine_m, mine_triplets, GeoError, GeoPose, MinedTriplets, MiningParams, Triplet};
pub use labelmap::{downsample_mode, LabelMap, LabelMapError};
pub use metric::{
    loss_gradient, train, triplet_loss, EmbeddingModel, LossGradient, MetricError, TrainConfig,
    TrainLog,
};
pub use retrieval::{GeoDatabase, Match, RankedMatches, RetrievalError};
pub use synth::{
    generate_dataset, generate_world, observe, ConditionSpec, Dataset, DatasetConfig, Observation,
    Split, SynthError, View, World, WorldConfig,
};
