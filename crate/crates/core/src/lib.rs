//! Scene-based graph neural recommendation.
//!
//! Items live in two graphs: the user-item interaction graph and a
//! three-layer item / category / scene hierarchy, where a scene is a set of
//! categories that show up together in one real-life situation. Item
//! representations are learned in both spaces and combined; neighbor
//! aggregation in the hierarchy is weighted by how many scenes two nodes'
//! categories share.
//!
//! Modules:
//!
//! - [`graph`]: entity maps, both graphs, loaders and validation.
//! - [`coview`]: item-item and category-category layers from view sessions.
//! - [`synth`]: seeded synthetic datasets with planted scene preferences.
//! - [`model`]: parameters, forward pass and exact gradients.
//! - [`train`]: BPR loss, RMSProp, negative sampling and the epoch loop.
//! - [`eval`]: leave-one-out splits, HR@K / NDCG@K and attention explanations.
//! - [`checkpoint`], [`config`], [`cli`]: persistence and command-line plumbing.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod coview;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod rng;
pub mod synth;
pub mod train;
pub mod tsv;

pub use error::{Error, Result};
pub use graph::{BipartiteGraph, Dataset, EntityMaps, Graphs, SceneGraph};
pub use model::{ParameterSet, SceneRec, Variant};
