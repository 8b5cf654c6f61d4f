//! Port shape inference.
//!
//! Every kind except Conv fully determines its ports from its parameters.
//! Conv spatial extents depend on the feeding node, so inference walks the
//! graph and fills in each Conv's input shape until a fixpoint is reached.

use std::collections::BTreeMap;

use crate::core::graph::{Graph, Node, NodeId, Shape};
use crate::error::{Error, Result};
use crate::primitives::{port_signature, PrimitiveParams, PORT_INPUT};

/// Resolve every port shape in the graph.
///
/// Fails with `ShapeConflict` when two propagation paths disagree about one
/// port, and with `UnknownNode` when an edge references a missing node.
pub fn infer_shapes(graph: &Graph) -> Result<Graph> {
    for edge in graph.edges() {
        for node in [&edge.source.node, &edge.target.node] {
            if graph.node(node).is_none() {
                return Err(Error::UnknownNode(node.to_string()));
            }
        }
    }

    let mut nodes: BTreeMap<NodeId, Node> =
        graph.nodes().map(|n| (n.id.clone(), n.clone())).collect();

    loop {
        let mut changed = false;
        let ids: Vec<NodeId> = nodes.keys().cloned().collect();
        for id in &ids {
            let needs = matches!(
                nodes[id].params,
                PrimitiveParams::Conv { input_shape: None, .. }
            );
            if !needs {
                continue;
            }
            let mut derived: Option<Shape> = None;
            for edge in graph.incoming(id) {
                if edge.target.port != PORT_INPUT {
                    continue;
                }
                let Some(src) = nodes.get(&edge.source.node) else { continue };
                let Ok(sig) = port_signature(&src.params) else { continue };
                let Some(shape) = sig.output_shape(&edge.source.port) else { continue };
                match &derived {
                    None => derived = Some(shape.clone()),
                    Some(prev) if prev != shape => {
                        return Err(Error::ShapeConflict {
                            node: id.to_string(),
                            port: PORT_INPUT.to_string(),
                            first: prev.dims().to_vec(),
                            second: shape.dims().to_vec(),
                        });
                    }
                    Some(_) => {}
                }
            }
            if let Some(shape) = derived {
                let node = nodes.get_mut(id).unwrap();
                if let PrimitiveParams::Conv { input_shape, .. } = &mut node.params {
                    *input_shape = Some(shape);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Every signature must now resolve, and edge endpoints must agree.
    for node in nodes.values() {
        port_signature(&node.params).map_err(|_| {
            Error::InvalidGraph(format!(
                "cannot infer input shape for conv `{}`: no shaped predecessor",
                node.id
            ))
        })?;
    }
    for edge in graph.edges() {
        let src = port_signature(&nodes[&edge.source.node].params)?;
        let dst = port_signature(&nodes[&edge.target.node].params)?;
        if let (Some(s), Some(d)) = (
            src.output_shape(&edge.source.port),
            dst.input_shape(&edge.target.port),
        ) {
            if s != d {
                return Err(Error::ShapeConflict {
                    node: edge.target.node.to_string(),
                    port: edge.target.port.clone(),
                    first: d.dims().to_vec(),
                    second: s.dims().to_vec(),
                });
            }
        }
    }

    Ok(Graph::from_parts(
        nodes,
        graph.edges().to_vec(),
        graph.metadata().clone(),
        graph.version().to_string(),
    ))
}
