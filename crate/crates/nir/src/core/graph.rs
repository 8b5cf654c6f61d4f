//! Graph data model: shapes, nodes, typed ports, edges, and structural
//! validation.

use std::collections::BTreeMap;
use std::fmt;

use crate::core::tensor::Tensor;
use crate::error::{Error, Result};
use crate::primitives::{port_signature, Kind, PrimitiveParams, PORT_RESET};

/// Positive integer extents of a signal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        let s = Shape(dims);
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidParameter("shape must be non-empty".into()));
        }
        if self.0.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "shape {:?} has a zero extent",
                self.0
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    /// Total element count.
    pub fn size(&self) -> usize {
        self.0.iter().product()
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Graph-unique node identifier, restricted to `[A-Za-z0-9_.-]+`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidParameter("node id must be non-empty".into()));
        }
        if !id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
        {
            return Err(Error::InvalidParameter(format!(
                "node id `{id}` contains characters outside [A-Za-z0-9_.-]"
            )));
        }
        Ok(NodeId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One end of an edge: a node and one of its port names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub node: NodeId,
    pub port: String,
}

impl Endpoint {
    pub fn new(node: NodeId, port: impl Into<String>) -> Self {
        Endpoint { node, port: port.into() }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.port)
    }
}

/// Directed connection from an output port to an input port.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub source: Endpoint,
    pub target: Endpoint,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.source, self.target)
    }
}

/// A computational node: a primitive and its parameters. Ports are derived
/// from the parameters and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub params: PrimitiveParams,
    /// Explicit initial state per state variable; engine defaults apply when
    /// absent.
    pub initial_state: BTreeMap<String, Tensor>,
}

impl Node {
    pub fn kind(&self) -> Kind {
        self.params.kind()
    }
}

/// An immutable computation graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    nodes: BTreeMap<NodeId, Node>,
    edges: Vec<Edge>,
    metadata: BTreeMap<String, String>,
    version: String,
}

/// Current serialization format version.
pub const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// What a diagnostic refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum Subject {
    Node(NodeId),
    Edge(Edge),
    Graph,
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub subject: Subject,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.subject {
            Subject::Node(id) => write!(f, "{sev}: node `{id}`: {}", self.message),
            Subject::Edge(e) => write!(f, "{sev}: edge `{e}`: {}", self.message),
            Subject::Graph => write!(f, "{sev}: {}", self.message),
        }
    }
}

fn error(subject: Subject, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        severity: Severity::Error,
        subject,
        message: message.into(),
    }
}

impl Graph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Nodes in lexicographic id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Edges in canonical (source, target) order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn incoming<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a Edge> {
        self.edges.iter().filter(move |e| &e.target.node == id)
    }

    pub fn outgoing<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a Edge> {
        self.edges.iter().filter(move |e| &e.source.node == id)
    }

    /// Number of distinct incoming edges across all ports of `id`.
    pub fn fan_in(&self, id: &NodeId) -> Result<usize> {
        if !self.nodes.contains_key(id) {
            return Err(Error::UnknownNode(id.to_string()));
        }
        Ok(self.incoming(id).count())
    }

    /// Number of distinct outgoing edges across all ports of `id`.
    pub fn fan_out(&self, id: &NodeId) -> Result<usize> {
        if !self.nodes.contains_key(id) {
            return Err(Error::UnknownNode(id.to_string()));
        }
        Ok(self.outgoing(id).count())
    }

    /// Structural validation. Empty iff every type invariant and per-edge
    /// shape compatibility holds.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut signatures = BTreeMap::new();

        for node in self.nodes.values() {
            for msg in node.params.check() {
                out.push(error(Subject::Node(node.id.clone()), msg));
            }
            match port_signature(&node.params) {
                Ok(sig) => {
                    signatures.insert(node.id.clone(), sig);
                }
                Err(e) => out.push(error(Subject::Node(node.id.clone()), e.to_string())),
            }
            for (state, tensor) in &node.initial_state {
                if !tensor.all_finite() {
                    out.push(error(
                        Subject::Node(node.id.clone()),
                        format!("initial state `{state}` contains non-finite values"),
                    ));
                }
            }
        }

        let mut seen = std::collections::BTreeSet::new();
        for edge in &self.edges {
            if !seen.insert(edge.clone()) {
                out.push(error(Subject::Edge(edge.clone()), "duplicate edge"));
                continue;
            }
            let mut endpoint_shape = |node: &NodeId, port: &str, is_source: bool| -> Option<Shape> {
                match self.nodes.get(node) {
                    None => {
                        out.push(error(
                            Subject::Edge(edge.clone()),
                            format!("unknown node `{node}`"),
                        ));
                        None
                    }
                    Some(_) => match signatures.get(node) {
                        None => None, // node already diagnosed
                        Some(sig) => {
                            let shape = if is_source {
                                sig.output_shape(port)
                            } else {
                                sig.input_shape(port)
                            };
                            if shape.is_none() {
                                let dir = if is_source { "output" } else { "input" };
                                out.push(error(
                                    Subject::Edge(edge.clone()),
                                    format!("node `{node}` has no {dir} port `{port}`"),
                                ));
                            }
                            shape.cloned()
                        }
                    },
                }
            };
            let src = endpoint_shape(&edge.source.node, &edge.source.port, true);
            let dst = endpoint_shape(&edge.target.node, &edge.target.port, false);
            if let (Some(src), Some(dst)) = (src, dst) {
                if src != dst {
                    out.push(error(
                        Subject::Edge(edge.clone()),
                        format!("shape mismatch on edge: {src} does not equal {dst}"),
                    ));
                }
            }
        }

        let has_input = self.nodes.values().any(|n| n.kind() == Kind::Input);
        let has_output = self.nodes.values().any(|n| n.kind() == Kind::Output);
        if !has_input {
            out.push(error(Subject::Graph, "graph has no input node"));
        }
        if !has_output {
            out.push(error(Subject::Graph, "graph has no output node"));
        }
        out
    }

    /// Nodes and edges equality, ignoring metadata.
    pub fn same_structure(&self, other: &Graph) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }

    /// Copy of this graph with one metadata entry added.
    pub fn with_metadata(&self, key: impl Into<String>, value: impl Into<String>) -> Graph {
        let mut g = self.clone();
        g.metadata.insert(key.into(), value.into());
        g
    }

    /// Rebuild from parts; used by passes and the deserializer. Edges are
    /// sorted into canonical order, duplicates preserved for validate to
    /// report.
    pub(crate) fn from_parts(
        nodes: BTreeMap<NodeId, Node>,
        mut edges: Vec<Edge>,
        metadata: BTreeMap<String, String>,
        version: String,
    ) -> Graph {
        edges.sort();
        Graph { nodes, edges, metadata, version }
    }

    /// True when the edge targets a distinguished reset port.
    pub fn is_reset_edge(edge: &Edge) -> bool {
        edge.target.port == PORT_RESET
    }
}

/// Builder for [`Graph`]; the only mutation path.
#[derive(Default)]
pub struct GraphBuilder {
    nodes: BTreeMap<NodeId, Node>,
    edges: Vec<Edge>,
    metadata: BTreeMap<String, String>,
}

impl GraphBuilder {
    pub fn add(mut self, id: &str, params: PrimitiveParams) -> Result<Self> {
        let id = NodeId::new(id)?;
        if self.nodes.contains_key(&id) {
            return Err(Error::InvalidGraph(format!("duplicate node id `{id}`")));
        }
        self.nodes.insert(
            id.clone(),
            Node { id, params, initial_state: BTreeMap::new() },
        );
        Ok(self)
    }

    /// Connect arbitrary ports.
    pub fn connect(
        mut self,
        source: &str,
        source_port: &str,
        target: &str,
        target_port: &str,
    ) -> Result<Self> {
        let edge = Edge {
            source: Endpoint::new(NodeId::new(source)?, source_port),
            target: Endpoint::new(NodeId::new(target)?, target_port),
        };
        if self.edges.contains(&edge) {
            return Err(Error::InvalidGraph(format!("duplicate edge `{edge}`")));
        }
        self.edges.push(edge);
        Ok(self)
    }

    /// Connect the default `output` port to the default `input` port.
    pub fn wire(self, source: &str, target: &str) -> Result<Self> {
        self.connect(source, "output", target, "input")
    }

    pub fn initial_state(mut self, node: &str, state: &str, value: Tensor) -> Result<Self> {
        let id = NodeId::new(node)?;
        let entry = self
            .nodes
            .get_mut(&id)
            .ok_or_else(|| Error::UnknownNode(node.to_string()))?;
        entry.initial_state.insert(state.to_string(), value);
        Ok(self)
    }

    pub fn metadata(mut self, key: &str, value: &str) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn build(self) -> Graph {
        Graph::from_parts(self.nodes, self.edges, self.metadata, FORMAT_VERSION.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor1(v: &[f64]) -> Tensor {
        Tensor::vector(v)
    }

    fn simple_chain() -> Graph {
        Graph::builder()
            .add("in", PrimitiveParams::Input { shape: Shape::new(vec![2]).unwrap() })
            .unwrap()
            .add(
                "aff",
                PrimitiveParams::Affine {
                    weight: Tensor::matrix(3, 2, vec![1.0; 6]).unwrap(),
                    bias: Tensor::zeros(vec![3]),
                },
            )
            .unwrap()
            .add("out", PrimitiveParams::Output { shape: Shape::new(vec![3]).unwrap() })
            .unwrap()
            .wire("in", "aff")
            .unwrap()
            .wire("aff", "out")
            .unwrap()
            .build()
    }

    #[test]
    fn valid_chain_has_no_diagnostics() {
        assert!(simple_chain().validate().is_empty());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        // input [2] feeding a 3x4 affine expects [4]
        let g = Graph::builder()
            .add("in", PrimitiveParams::Input { shape: Shape::new(vec![2]).unwrap() })
            .unwrap()
            .add(
                "aff",
                PrimitiveParams::Affine {
                    weight: Tensor::matrix(3, 4, vec![1.0; 12]).unwrap(),
                    bias: Tensor::zeros(vec![3]),
                },
            )
            .unwrap()
            .add("out", PrimitiveParams::Output { shape: Shape::new(vec![3]).unwrap() })
            .unwrap()
            .wire("in", "aff")
            .unwrap()
            .wire("aff", "out")
            .unwrap()
            .build();
        let diags = g.validate();
        assert!(diags.iter().any(|d| d.message.contains("shape mismatch on edge")), "{diags:?}");
    }

    #[test]
    fn dangling_edge_is_reported() {
        let g = Graph::builder()
            .add("in", PrimitiveParams::Input { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .add("out", PrimitiveParams::Output { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .wire("in", "out")
            .unwrap()
            .wire("in", "x")
            .unwrap()
            .build();
        let diags = g.validate();
        assert!(diags.iter().any(|d| d.message.contains("unknown node `x`")), "{diags:?}");
    }

    #[test]
    fn fan_counts() {
        let g = simple_chain();
        let aff = NodeId::new("aff").unwrap();
        assert_eq!(g.fan_in(&aff).unwrap(), 1);
        assert_eq!(g.fan_out(&aff).unwrap(), 1);
        assert!(g.fan_in(&NodeId::new("nope").unwrap()).is_err());
    }

    #[test]
    fn isolated_node_has_zero_fans() {
        let g = Graph::builder()
            .add("lone", PrimitiveParams::Scale { scale: tensor1(&[1.0]) })
            .unwrap()
            .build();
        let id = NodeId::new("lone").unwrap();
        assert_eq!(g.fan_in(&id).unwrap(), 0);
        assert_eq!(g.fan_out(&id).unwrap(), 0);
    }

    #[test]
    fn recurrent_edge_counts_in_fan_in() {
        // in -> lif, linear -> lif (recurrence): fan_in(lif) = 2
        let lif = PrimitiveParams::Lif {
            tau: tensor1(&[1.0]),
            r: tensor1(&[1.0]),
            v_leak: tensor1(&[0.0]),
            threshold: tensor1(&[1.0]),
        };
        let g = Graph::builder()
            .add("in", PrimitiveParams::Input { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .add("lif", lif)
            .unwrap()
            .add("rec", PrimitiveParams::Linear { weight: tensor1(&[0.5]) })
            .unwrap()
            .add("out", PrimitiveParams::Output { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .wire("in", "lif")
            .unwrap()
            .wire("lif", "rec")
            .unwrap()
            .wire("rec", "lif")
            .unwrap()
            .wire("lif", "out")
            .unwrap()
            .build();
        assert_eq!(g.fan_in(&NodeId::new("lif").unwrap()).unwrap(), 2);
    }

    #[test]
    fn node_id_charset_is_enforced()  {
        assert!(NodeId::new("ok_node.1-a").is_ok());
        assert!(NodeId::new("").is_err());
        assert!(NodeId::new("has space").is_err());
        assert!(NodeId::new("uni\u{00e9}").is_err());
    }

    #[test]
    fn duplicate_edges_rejected_by_builder() {
        let r = Graph::builder()
            .add("a", PrimitiveParams::Scale { scale: tensor1(&[1.0]) })
            .unwrap()
            .add("b", PrimitiveParams::Scale { scale: tensor1(&[1.0]) })
            .unwrap()
            .wire("a", "b")
            .unwrap()
            .wire("a", "b");
        assert!(r.is_err());
    }
}
