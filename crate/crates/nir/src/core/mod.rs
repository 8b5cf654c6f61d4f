//! IR data model: graphs, ports, shapes, validation, shape inference, and
//! the canonical serialization format.

pub mod graph;
pub mod serialize;
pub mod shape_infer;
pub mod tensor;

pub use graph::{
    Diagnostic, Edge, Endpoint, Graph, GraphBuilder, Node, NodeId, Severity, Shape, Subject,
    FORMAT_VERSION,
};
pub use serialize::{deserialize, serialize};
pub use shape_infer::infer_shapes;
pub use tensor::Tensor;
