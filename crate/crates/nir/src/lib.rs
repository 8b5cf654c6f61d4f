//! Toolchain for a graph IR of hybrid continuous-time neural primitives.
//!
//! The crate is organized as a small compiler stack:
//!
//! - [`core`]: the graph data model, validation, shape inference, and the
//!   canonical on-disk format
//! - [`primitives`]: parameter bundles and declared semantics of every
//!   computational primitive
//! - [`dialects`]: discretization policies and per-backend parameter
//!   translations
//! - [`engine`]: deterministic discrete-time execution and trace recording
//! - [`passes`]: graph rewrites, constraint checking, quantization, and
//!   platform lowering
//! - [`analysis`]: cross-dialect divergence measurement and report emission

pub mod analysis;
pub mod core;
pub mod dialects;
pub mod engine;
pub mod error;
pub mod passes;
pub mod primitives;

pub use crate::core::{Graph, GraphBuilder, Node, NodeId, Shape, Tensor};
pub use crate::error::{Error, Result};
pub use crate::primitives::{Kind, PrimitiveParams};
