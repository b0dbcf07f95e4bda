//! Link prediction under bilateral edge noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`] and [`autodiff`]: dense row-major matrices, a sparse
//!   adjacency operator and a reverse-mode tape over them.
//! * [`graph`]: undirected graphs, edge-list ingestion, query splits and a
//!   stochastic block model generator.
//! * [`noise`]: bilateral noise injection and feature homophily.
//! * [`encoder`]: GCN, GAT and GraphSAGE message passing with dot-product
//!   and Hadamard readouts.
//! * [`augment`]: hybrid graph augmentation and DropEdge.
//! * [`objectives`], [`optim`], [`trainer`]: losses, Adam and the training loop.
//! * [`metrics`]: AUC, alignment, uniformity and result records.
//! * [`config`] and [`harness`]: experiment grids and their execution.

pub mod augment;
pub mod autodiff;
pub mod config;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod noise;
pub mod objectives;
pub mod optim;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
