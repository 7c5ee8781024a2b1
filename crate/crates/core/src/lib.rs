//! Scene recognition with inter-object discriminative knowledge.
//!
//! The pipeline has two halves:
//!
//! * [`iodp`] turns object co-occurrence counts over a labelled corpus into
//!   an `L x L` prototype `Ω`, scoring how strongly each object pair
//!   concentrates the scene posterior on few categories.
//! * [`graph`] and [`model`] build a per-image graph whose nodes are
//!   pixel-level features and whose edges are looked up in `Ω`, then run one
//!   normalized graph convolution, global average pooling and a classifier,
//!   with an auxiliary shared-weight head used only during training.
//!
//! [`corpus`] holds the data model, binary formats and a planted-object
//! synthetic generator; [`oracle`] holds brute-force references for tests.

mod codec;
pub mod corpus;
mod error;
pub mod graph;
pub mod iodp;
pub mod model;
pub mod nn;
pub mod oracle;

pub use codec::write_atomic;
pub use error::{Error, Result};
