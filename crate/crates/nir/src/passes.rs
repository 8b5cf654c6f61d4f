//! Graph-to-graph transformations and platform compatibility: higher-order
//! decomposition and recomposition via anchored subgraph matching, algebraic
//! simplification, post-training quantization, and constraint checking
//! against platform profiles.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{Map, Value};

use crate::core::graph::{Edge, Endpoint, Graph, Node, NodeId};
use crate::core::tensor::Tensor;
use crate::dialects::{named_config, translate_named, DialectConfig, NamedDialect, Numeric};
use crate::error::{Error, Result};
use crate::primitives::{Kind, PrimitiveParams, PORT_INPUT, PORT_OUTPUT, PORT_RESET};

/// Relative tolerance for recomposition parameter guards.
const GUARD_RTOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// decompose
// ---------------------------------------------------------------------------

/// Replace higher-order nodes with their defining compositions.
///
/// A LIF becomes `{li, spike, linear(-theta)}` with the linear output wired
/// to the li `reset` port; IF uses an integrator; CuBa-LIF becomes the
/// `li -> linear(1) -> lif` chain whose lif expands in turn when requested.
pub fn decompose(graph: &Graph, kinds: &BTreeSet<Kind>) -> Result<Graph> {
    let mut current = graph.clone();
    loop {
        let Some(target) = current
            .nodes()
            .find(|n| kinds.contains(&n.kind()) && n.kind().is_higher_order())
            .map(|n| n.id.clone())
        else {
            return Ok(current);
        };
        current = decompose_one(&current, &target)?;
    }
}

fn decompose_one(graph: &Graph, id: &NodeId) -> Result<Graph> {
    let node = graph.node(id).ok_or_else(|| Error::UnknownNode(id.to_string()))?;
    let mut nodes: BTreeMap<NodeId, Node> =
        graph.nodes().filter(|n| &n.id != id).map(|n| (n.id.clone(), n.clone())).collect();
    let fresh = |nodes: &BTreeMap<NodeId, Node>, base: String| -> NodeId {
        let mut candidate = base.clone();
        let mut k = 0;
        while nodes.contains_key(&NodeId::new(candidate.clone()).unwrap()) {
            k += 1;
            candidate = format!("{base}_{k}");
        }
        NodeId::new(candidate).unwrap()
    };

    // (input target, output source, reset target) of the replacement.
    let (input_to, output_from, reset_to);
    match &node.params {
        PrimitiveParams::Lif { tau, r, v_leak, threshold } => {
            let li = fresh(&nodes, format!("{id}.li"));
            let spike = fresh(&nodes, format!("{id}.spike"));
            let feedback = fresh(&nodes, format!("{id}.reset"));
            let mut li_node = Node {
                id: li.clone(),
                params: PrimitiveParams::Li {
                    tau: tau.clone(),
                    r: r.clone(),
                    v_leak: v_leak.clone(),
                },
                initial_state: BTreeMap::new(),
            };
            if let Some(v) = node.initial_state.get("v") {
                li_node.initial_state.insert("v".into(), v.clone());
            }
            nodes.insert(li.clone(), li_node);
            nodes.insert(
                spike.clone(),
                Node {
                    id: spike.clone(),
                    params: PrimitiveParams::Spike { threshold: threshold.clone() },
                    initial_state: BTreeMap::new(),
                },
            );
            nodes.insert(
                feedback.clone(),
                Node {
                    id: feedback.clone(),
                    params: PrimitiveParams::Linear { weight: threshold.map(|t| -t) },
                    initial_state: BTreeMap::new(),
                },
            );
            let mut edges = keep_edges(graph, id);
            edges.push(wire(&li, PORT_OUTPUT, &spike, PORT_INPUT));
            edges.push(wire(&spike, PORT_OUTPUT, &feedback, PORT_INPUT));
            edges.push(wire(&feedback, PORT_OUTPUT, &li, PORT_RESET));
            input_to = li.clone();
            output_from = spike;
            reset_to = li;
            rebuild(graph, nodes, edges, id, &input_to, &output_from, &reset_to)
        }
        PrimitiveParams::If { r, threshold } => {
            let integ = fresh(&nodes, format!("{id}.integrator"));
            let spike = fresh(&nodes, format!("{id}.spike"));
            let feedback = fresh(&nodes, format!("{id}.reset"));
            let mut integ_node = Node {
                id: integ.clone(),
                params: PrimitiveParams::Integrator { r: r.clone() },
                initial_state: BTreeMap::new(),
            };
            if let Some(v) = node.initial_state.get("v") {
                integ_node.initial_state.insert("v".into(), v.clone());
            }
            nodes.insert(integ.clone(), integ_node);
            nodes.insert(
                spike.clone(),
                Node {
                    id: spike.clone(),
                    params: PrimitiveParams::Spike { threshold: threshold.clone() },
                    initial_state: BTreeMap::new(),
                },
            );
            nodes.insert(
                feedback.clone(),
                Node {
                    id: feedback.clone(),
                    params: PrimitiveParams::Linear { weight: threshold.map(|t| -t) },
                    initial_state: BTreeMap::new(),
                },
            );
            let mut edges = keep_edges(graph, id);
            edges.push(wire(&integ, PORT_OUTPUT, &spike, PORT_INPUT));
            edges.push(wire(&spike, PORT_OUTPUT, &feedback, PORT_INPUT));
            edges.push(wire(&feedback, PORT_OUTPUT, &integ, PORT_RESET));
            input_to = integ.clone();
            output_from = spike;
            reset_to = integ;
            rebuild(graph, nodes, edges, id, &input_to, &output_from, &reset_to)
        }
        PrimitiveParams::CubaLif { tau_syn, tau_mem, r, v_leak, w_in, threshold } => {
            let syn = fresh(&nodes, format!("{id}.syn"));
            let coupling = fresh(&nodes, format!("{id}.w"));
            let lif = fresh(&nodes, format!("{id}.lif"));
            let mut syn_node = Node {
                id: syn.clone(),
                params: PrimitiveParams::Li {
                    tau: tau_syn.clone(),
                    r: w_in.clone(),
                    v_leak: Tensor::zeros(tau_syn.shape().to_vec()),
                },
                initial_state: BTreeMap::new(),
            };
            if let Some(u) = node.initial_state.get("u") {
                syn_node.initial_state.insert("v".into(), u.clone());
            }
            nodes.insert(syn.clone(), syn_node);
            nodes.insert(
                coupling.clone(),
                Node {
                    id: coupling.clone(),
                    params: PrimitiveParams::Linear {
                        weight: Tensor::filled(tau_syn.shape().to_vec(), 1.0),
                    },
                    initial_state: BTreeMap::new(),
                },
            );
            let mut lif_node = Node {
                id: lif.clone(),
                params: PrimitiveParams::Lif {
                    tau: tau_mem.clone(),
                    r: r.clone(),
                    v_leak: v_leak.clone(),
                    threshold: threshold.clone(),
                },
                initial_state: BTreeMap::new(),
            };
            if let Some(v) = node.initial_state.get("v") {
                lif_node.initial_state.insert("v".into(), v.clone());
            }
            nodes.insert(lif.clone(), lif_node);
            let mut edges = keep_edges(graph, id);
            edges.push(wire(&syn, PORT_OUTPUT, &coupling, PORT_INPUT));
            edges.push(wire(&coupling, PORT_OUTPUT, &lif, PORT_INPUT));
            input_to = syn;
            output_from = lif.clone();
            reset_to = lif;
            rebuild(graph, nodes, edges, id, &input_to, &output_from, &reset_to)
        }
        _ => Err(Error::InvalidParameter(format!(
            "node `{id}` of kind `{}` is not a higher-order primitive",
            node.kind().as_str()
        ))),
    }
}

fn keep_edges(graph: &Graph, removed: &NodeId) -> Vec<Edge> {
    graph
        .edges()
        .iter()
        .filter(|e| &e.source.node != removed && &e.target.node != removed)
        .cloned()
        .collect()
}

fn wire(src: &NodeId, src_port: &str, dst: &NodeId, dst_port: &str) -> Edge {
    Edge {
        source: Endpoint::new(src.clone(), src_port),
        target: Endpoint::new(dst.clone(), dst_port),
    }
}

fn rebuild(
    graph: &Graph,
    nodes: BTreeMap<NodeId, Node>,
    mut edges: Vec<Edge>,
    removed: &NodeId,
    input_to: &NodeId,
    output_from: &NodeId,
    reset_to: &NodeId,
) -> Result<Graph> {
    for edge in graph.edges() {
        if &edge.target.node == removed {
            let target = if edge.target.port == PORT_RESET {
                Endpoint::new(reset_to.clone(), PORT_RESET)
            } else {
                Endpoint::new(input_to.clone(), PORT_INPUT)
            };
            edges.push(Edge { source: edge.source.clone(), target });
        } else if &edge.source.node == removed {
            edges.push(Edge {
                source: Endpoint::new(output_from.clone(), PORT_OUTPUT),
                target: edge.target.clone(),
            });
        }
    }
    Ok(Graph::from_parts(
        nodes,
        edges,
        graph.metadata().clone(),
        graph.version().to_string(),
    ))
}

// ---------------------------------------------------------------------------
// recompose
// ---------------------------------------------------------------------------

/// Collapse maximal non-overlapping composition patterns back into
/// higher-order nodes, anchored at each candidate membrane node in
/// lexicographic order. Guards require consistent parameters; non-matching
/// structure passes through untouched.
pub fn recompose(graph: &Graph, targets: &BTreeSet<Kind>) -> Result<Graph> {
    let mut current = graph.clone();
    loop {
        let mut changed = false;
        if targets.contains(&Kind::Lif) || targets.contains(&Kind::If) {
            while let Some(m) = find_spiking_triangle(&current, targets) {
                current = collapse_triangle(&current, &m)?;
                changed = true;
            }
        }
        if targets.contains(&Kind::CubaLif) {
            while let Some(m) = find_cuba_chain(&current) {
                current = collapse_chain(&current, &m)?;
                changed = true;
            }
        }
        if !changed {
            return Ok(current);
        }
    }
}

struct TriangleMatch {
    membrane: NodeId,
    spike: NodeId,
    feedback: NodeId,
}

struct ChainMatch {
    syn: NodeId,
    coupling: NodeId,
    lif: NodeId,
}

fn single_target<'g>(graph: &'g Graph, from: &'g NodeId, port: &str) -> Option<&'g Edge> {
    let mut out = graph.outgoing(from).filter(|e| e.source.port == port);
    let first = out.next()?;
    out.next().is_none().then_some(first)
}

fn only_feeder<'g>(graph: &'g Graph, node: &'g NodeId, port: &str) -> Option<&'g Edge> {
    let mut inc = graph.incoming(node).filter(|e| e.target.port == port);
    let first = inc.next()?;
    inc.next().is_none().then_some(first)
}

fn tensors_close_neg(weight: &Tensor, theta: &Tensor) -> bool {
    if weight.shape() != theta.shape() {
        return false;
    }
    weight.data().iter().zip(theta.data().iter()).all(|(&w, &t)| {
        if t == 0.0 {
            w == 0.0
        } else {
            (w + t).abs() <= GUARD_RTOL * t.abs()
        }
    })
}

fn tensors_close_one(weight: &Tensor) -> bool {
    weight.data().iter().all(|&w| (w - 1.0).abs() <= GUARD_RTOL)
}

/// An LI or Integrator whose only consumer is a Spike, whose feedback Linear
/// carries `-theta` back to the membrane's reset port.
fn find_spiking_triangle(graph: &Graph, targets: &BTreeSet<Kind>) -> Option<TriangleMatch> {
    for node in graph.nodes() {
        let wants = match node.kind() {
            Kind::Li => targets.contains(&Kind::Lif),
            Kind::Integrator => targets.contains(&Kind::If),
            _ => false,
        };
        if !wants {
            continue;
        }
        // Membrane output feeds exactly the spike node.
        let Some(to_spike) = single_target(graph, &node.id, PORT_OUTPUT) else { continue };
        if to_spike.target.port != PORT_INPUT {
            continue;
        }
        let spike_id = &to_spike.target.node;
        let Some(spike) = graph.node(spike_id) else { continue };
        if spike.kind() != Kind::Spike {
            continue;
        }
        // The spike must be fed only by this membrane.
        if only_feeder(graph, spike_id, PORT_INPUT).map(|e| &e.source.node) != Some(&node.id) {
            continue;
        }
        // Find the feedback among the spike's consumers.
        let mut feedback = None;
        for edge in graph.outgoing(spike_id) {
            let Some(cand) = graph.node(&edge.target.node) else { continue };
            if cand.kind() != Kind::Linear || edge.target.port != PORT_INPUT {
                continue;
            }
            let Some(back) = single_target(graph, &cand.id, PORT_OUTPUT) else { continue };
            if back.target.node != node.id || back.target.port != PORT_RESET {
                continue;
            }
            if only_feeder(graph, &cand.id, PORT_INPUT).map(|e| &e.source.node) != Some(spike_id) {
                continue;
            }
            let PrimitiveParams::Linear { weight } = &cand.params else { continue };
            let PrimitiveParams::Spike { threshold } = &spike.params else { continue };
            if !tensors_close_neg(weight, threshold) {
                continue;
            }
            feedback = Some(cand.id.clone());
            break;
        }
        let Some(feedback) = feedback else { continue };
        return Some(TriangleMatch {
            membrane: node.id.clone(),
            spike: spike_id.clone(),
            feedback,
        });
    }
    None
}

fn collapse_triangle(graph: &Graph, m: &TriangleMatch) -> Result<Graph> {
    let membrane = graph.node(&m.membrane).unwrap();
    let spike = graph.node(&m.spike).unwrap();
    let PrimitiveParams::Spike { threshold } = &spike.params else { unreachable!() };

    let recovered = recovered_id(graph, &[&m.membrane, &m.spike, &m.feedback]);
    let params = match &membrane.params {
        PrimitiveParams::Li { tau, r, v_leak } => PrimitiveParams::Lif {
            tau: tau.clone(),
            r: r.clone(),
            v_leak: v_leak.clone(),
            threshold: threshold.clone(),
        },
        PrimitiveParams::Integrator { r } => {
            PrimitiveParams::If { r: r.clone(), threshold: threshold.clone() }
        }
        _ => unreachable!(),
    };
    let mut initial_state = BTreeMap::new();
    if let Some(v) = membrane.initial_state.get("v") {
        initial_state.insert("v".to_string(), v.clone());
    }

    let removed: BTreeSet<&NodeId> = [&m.membrane, &m.spike, &m.feedback].into_iter().collect();
    let mut nodes: BTreeMap<NodeId, Node> = graph
        .nodes()
        .filter(|n| !removed.contains(&n.id))
        .map(|n| (n.id.clone(), n.clone()))
        .collect();
    nodes.insert(
        recovered.clone(),
        Node { id: recovered.clone(), params, initial_state },
    );

    let mut edges = Vec::new();
    for edge in graph.edges() {
        let s_in = removed.contains(&edge.source.node);
        let t_in = removed.contains(&edge.target.node);
        match (s_in, t_in) {
            (false, false) => edges.push(edge.clone()),
            // Internal pattern wiring disappears.
            (true, true) => {}
            (false, true) => {
                let port =
                    if edge.target.port == PORT_RESET { PORT_RESET } else { PORT_INPUT };
                edges.push(Edge {
                    source: edge.source.clone(),
                    target: Endpoint::new(recovered.clone(), port),
                });
            }
            (true, false) => edges.push(Edge {
                source: Endpoint::new(recovered.clone(), PORT_OUTPUT),
                target: edge.target.clone(),
            }),
        }
    }
    Ok(Graph::from_parts(nodes, edges, graph.metadata().clone(), graph.version().to_string()))
}

/// A zero-leak LI feeding a unit Linear feeding a LIF, each consumed once.
fn find_cuba_chain(graph: &Graph) -> Option<ChainMatch> {
    for node in graph.nodes() {
        if node.kind() != Kind::Li {
            continue;
        }
        let PrimitiveParams::Li { v_leak, .. } = &node.params else { continue };
        if !v_leak.all_zero() {
            continue;
        }
        // No feedback may target the synapse.
        if graph.incoming(&node.id).any(|e| e.target.port == PORT_RESET) {
            continue;
        }
        let Some(to_w) = single_target(graph, &node.id, PORT_OUTPUT) else { continue };
        if to_w.target.port != PORT_INPUT {
            continue;
        }
        let Some(coupling) = graph.node(&to_w.target.node) else { continue };
        let PrimitiveParams::Linear { weight } = &coupling.params else { continue };
        if !tensors_close_one(weight) || weight.shape() != v_leak.shape() {
            continue;
        }
        if only_feeder(graph, &coupling.id, PORT_INPUT).map(|e| &e.source.node) != Some(&node.id) {
            continue;
        }
        let Some(to_lif) = single_target(graph, &coupling.id, PORT_OUTPUT) else { continue };
        if to_lif.target.port != PORT_INPUT {
            continue;
        }
        let Some(lif) = graph.node(&to_lif.target.node) else { continue };
        if lif.kind() != Kind::Lif {
            continue;
        }
        if only_feeder(graph, &lif.id, PORT_INPUT).map(|e| &e.source.node) != Some(&coupling.id) {
            continue;
        }
        return Some(ChainMatch {
            syn: node.id.clone(),
            coupling: coupling.id.clone(),
            lif: lif.id.clone(),
        });
    }
    None
}

fn collapse_chain(graph: &Graph, m: &ChainMatch) -> Result<Graph> {
    let syn = graph.node(&m.syn).unwrap();
    let lif = graph.node(&m.lif).unwrap();
    let PrimitiveParams::Li { tau: tau_syn, r: w_in, .. } = &syn.params else { unreachable!() };
    let PrimitiveParams::Lif { tau, r, v_leak, threshold } = &lif.params else { unreachable!() };

    let recovered = recovered_id(graph, &[&m.syn, &m.coupling, &m.lif]);
    let params = PrimitiveParams::CubaLif {
        tau_syn: tau_syn.clone(),
        tau_mem: tau.clone(),
        r: r.clone(),
        v_leak: v_leak.clone(),
        w_in: w_in.clone(),
        threshold: threshold.clone(),
    };
    let mut initial_state = BTreeMap::new();
    if let Some(u) = syn.initial_state.get("v") {
        initial_state.insert("u".to_string(), u.clone());
    }
    if let Some(v) = lif.initial_state.get("v") {
        initial_state.insert("v".to_string(), v.clone());
    }

    let removed: BTreeSet<&NodeId> = [&m.syn, &m.coupling, &m.lif].into_iter().collect();
    let mut nodes: BTreeMap<NodeId, Node> = graph
        .nodes()
        .filter(|n| !removed.contains(&n.id))
        .map(|n| (n.id.clone(), n.clone()))
        .collect();
    nodes.insert(recovered.clone(), Node { id: recovered.clone(), params, initial_state });

    let mut edges = Vec::new();
    for edge in graph.edges() {
        let s_in = removed.contains(&edge.source.node);
        let t_in = removed.contains(&edge.target.node);
        match (s_in, t_in) {
            (false, false) => edges.push(edge.clone()),
            (true, true) => {}
            (false, true) => {
                let port =
                    if edge.target.port == PORT_RESET { PORT_RESET } else { PORT_INPUT };
                edges.push(Edge {
                    source: edge.source.clone(),
                    target: Endpoint::new(recovered.clone(), port),
                });
            }
            (true, false) => edges.push(Edge {
                source: Endpoint::new(recovered.clone(), PORT_OUTPUT),
                target: edge.target.clone(),
            }),
        }
    }
    Ok(Graph::from_parts(nodes, edges, graph.metadata().clone(), graph.version().to_string()))
}

/// Recover `p` from members named `p.li`, `p.spike`, ...; fall back to a
/// fresh name derived from the first member.
fn recovered_id(graph: &Graph, members: &[&NodeId]) -> NodeId {
    let prefix = members[0].as_str().rsplit_once('.').map(|(p, _)| p.to_string());
    if let Some(prefix) = prefix {
        let all_share = members
            .iter()
            .all(|m| m.as_str().rsplit_once('.').map(|(p, _)| p) == Some(prefix.as_str()));
        if all_share && !prefix.is_empty() {
            if let Ok(id) = NodeId::new(prefix) {
                if graph.node(&id).is_none() {
                    return id;
                }
            }
        }
    }
    let mut k = 0;
    loop {
        let candidate = format!("{}-fused{}", members[0], if k == 0 { String::new() } else { k.to_string() });
        if let Ok(id) = NodeId::new(candidate) {
            if graph.node(&id).is_none() {
                return id;
            }
        }
        k += 1;
    }
}

/// Tag spiking populations with a direct linear recurrence so backends that
/// model recurrent blocks as one unit can find them. Adds
/// `recurrent_block.<neuron>` metadata entries; the structure is unchanged.
pub fn annotate_recurrent_blocks(graph: &Graph) -> Graph {
    let mut out = graph.clone();
    for node in graph.nodes() {
        if !node.kind().is_spiking() || node.kind() == Kind::Spike {
            continue;
        }
        for edge in graph.outgoing(&node.id) {
            let Some(linear) = graph.node(&edge.target.node) else { continue };
            if linear.kind() != Kind::Linear || edge.target.port != PORT_INPUT {
                continue;
            }
            let closes = graph
                .outgoing(&linear.id)
                .any(|e| e.target.node == node.id && e.target.port == PORT_INPUT);
            if closes {
                out = out.with_metadata(
                    format!("recurrent_block.{}", node.id),
                    linear.id.to_string(),
                );
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// simplify
// ---------------------------------------------------------------------------

/// Replace every affine map whose bias is exactly zero with a linear map.
pub fn simplify_affine(graph: &Graph) -> Graph {
    let nodes: BTreeMap<NodeId, Node> = graph
        .nodes()
        .map(|n| {
            let node = match &n.params {
                PrimitiveParams::Affine { weight, bias } if bias.all_zero() => Node {
                    id: n.id.clone(),
                    params: PrimitiveParams::Linear { weight: weight.clone() },
                    initial_state: n.initial_state.clone(),
                },
                _ => n.clone(),
            };
            (n.id.clone(), node)
        })
        .collect();
    Graph::from_parts(
        nodes,
        graph.edges().to_vec(),
        graph.metadata().clone(),
        graph.version().to_string(),
    )
}

// ---------------------------------------------------------------------------
// platform profiles and constraint checking
// ---------------------------------------------------------------------------

/// Declarative hardware constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformProfile {
    pub name: String,
    pub max_neurons: Option<usize>,
    pub max_fan_in: Option<usize>,
    pub max_fan_out: Option<usize>,
    pub supported_kinds: BTreeSet<String>,
    pub weight_bits: u32,
    pub state_bits: u32,
    /// `float` or `fixed` state storage.
    pub state_representation: StateRepresentation,
    pub reset_modes: BTreeSet<String>,
    /// Named dialect realizing this platform's update rule.
    pub dialect: Option<NamedDialect>,
    pub notes: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateRepresentation {
    Float,
    Fixed,
}

impl PlatformProfile {
    pub fn check(&self) -> Result<()> {
        if self.weight_bits == 0 || self.state_bits == 0 {
            return Err(Error::InvalidParameter("profile bit widths must be >= 1".into()));
        }
        if self.supported_kinds.is_empty() {
            return Err(Error::InvalidParameter("profile must support at least one kind".into()));
        }
        Ok(())
    }

    /// Numeric mode this profile induces.
    pub fn numeric(&self) -> Numeric {
        match self.state_representation {
            StateRepresentation::Float => Numeric::Float64,
            StateRepresentation::Fixed => Numeric::Fixed {
                state_bits: self.state_bits,
                weight_bits: self.weight_bits,
                accumulator_bits: 32,
            },
        }
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        if let Some(d) = self.dialect {
            m.insert("dialect".into(), Value::String(d.as_str().into()));
        }
        if let Some(v) = self.max_fan_in {
            m.insert("max_fan_in".into(), Value::Number((v as u64).into()));
        }
        if let Some(v) = self.max_fan_out {
            m.insert("max_fan_out".into(), Value::Number((v as u64).into()));
        }
        if let Some(v) = self.max_neurons {
            m.insert("max_neurons".into(), Value::Number((v as u64).into()));
        }
        m.insert("name".into(), Value::String(self.name.clone()));
        if !self.notes.is_empty() {
            m.insert("notes".into(), Value::String(self.notes.clone()));
        }
        m.insert(
            "reset_modes".into(),
            Value::Array(self.reset_modes.iter().map(|s| Value::String(s.clone())).collect()),
        );
        m.insert("state_bits".into(), Value::Number((self.state_bits as u64).into()));
        m.insert(
            "state_representation".into(),
            Value::String(
                match self.state_representation {
                    StateRepresentation::Float => "float",
                    StateRepresentation::Fixed => "fixed",
                }
                .into(),
            ),
        );
        m.insert(
            "supported_kinds".into(),
            Value::Array(self.supported_kinds.iter().map(|s| Value::String(s.clone())).collect()),
        );
        m.insert("weight_bits".into(), Value::Number((self.weight_bits as u64).into()));
        Value::Object(m)
    }

    pub fn from_json(bytes: &[u8]) -> Result<PlatformProfile> {
        let value: Value = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::Parse {
            location: "$".into(),
            message: "profile must be an object".into(),
        })?;
        let get_str = |key: &str| -> Result<String> {
            obj.get(key)
                .and_then(|v| v.as_str())
                .map(|s| s.to_string())
                .ok_or_else(|| Error::Parse {
                    location: key.into(),
                    message: "missing or non-string".into(),
                })
        };
        let get_uint = |key: &str| -> Option<usize> {
            obj.get(key).and_then(|v| v.as_u64()).map(|v| v as usize)
        };
        let strings = |key: &str| -> BTreeSet<String> {
            obj.get(key)
                .and_then(|v| v.as_array())
                .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
                .unwrap_or_default()
        };
        let profile = PlatformProfile {
            name: get_str("name")?,
            max_neurons: get_uint("max_neurons"),
            max_fan_in: get_uint("max_fan_in"),
            max_fan_out: get_uint("max_fan_out"),
            supported_kinds: strings("supported_kinds"),
            weight_bits: get_uint("weight_bits").unwrap_or(0) as u32,
            state_bits: get_uint("state_bits").unwrap_or(0) as u32,
            state_representation: match obj
                .get("state_representation")
                .and_then(|v| v.as_str())
                .unwrap_or("float")
            {
                "fixed" => StateRepresentation::Fixed,
                _ => StateRepresentation::Float,
            },
            reset_modes: strings("reset_modes"),
            dialect: obj
                .get("dialect")
                .and_then(|v| v.as_str())
                .and_then(NamedDialect::from_str),
            notes: obj.get("notes").and_then(|v| v.as_str()).unwrap_or("").to_string(),
        };
        profile.check()?;
        Ok(profile)
    }
}

/// Profiles shipped with the toolchain, mirroring the documented platforms.
pub fn builtin_profile(name: &str) -> Option<PlatformProfile> {
    let json = match name {
        "xylo" => include_str!("../../../profiles/xylo.json"),
        "speck" => include_str!("../../../profiles/speck.json"),
        "spinnaker2" => include_str!("../../../profiles/spinnaker2.json"),
        "loihi2" => include_str!("../../../profiles/loihi2.json"),
        _ => return None,
    };
    Some(PlatformProfile::from_json(json.as_bytes()).expect("builtin profiles are valid"))
}

pub const BUILTIN_PROFILES: [&str; 4] = ["loihi2", "speck", "spinnaker2", "xylo"];

/// One failed constraint and the nodes that break it.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: String,
    pub nodes: Vec<NodeId>,
}

/// Result of a compatibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatReport {
    pub compatible: bool,
    pub violations: Vec<Violation>,
    pub applied_rewrites: Vec<String>,
    /// The graph after rewrites, when rewriting was requested and changed it.
    pub rewritten: Option<Graph>,
}

/// Check a graph against a platform profile. With `try_rewrites`, greedily
/// applies the documented lowering and simplification rules before
/// re-checking and reports the sequence used.
pub fn check_constraints(
    graph: &Graph,
    profile: &PlatformProfile,
    cfg: Option<&DialectConfig>,
    try_rewrites: bool,
) -> Result<CompatReport> {
    profile.check()?;
    let base = raw_violations(graph, profile, cfg)?;
    if base.is_empty() || !try_rewrites {
        return Ok(CompatReport {
            compatible: base.is_empty(),
            violations: base,
            applied_rewrites: vec![],
            rewritten: None,
        });
    }

    let mut applied = Vec::new();
    let mut current = graph.clone();

    let simplified = simplify_affine(&current);
    if !simplified.same_structure(&current) {
        applied.push("simplify_affine".to_string());
        current = simplified;
    }

    // Lower unsupported higher-order kinds whenever their parts are available.
    let parts_supported = ["li", "spike", "linear", "integrator", "lif"]
        .iter()
        .filter(|k| profile.supported_kinds.contains(**k))
        .count();
    let mut lower: BTreeSet<Kind> = BTreeSet::new();
    for kind in [Kind::If, Kind::Lif, Kind::CubaLif] {
        let present = current.nodes().any(|n| n.kind() == kind);
        if present && !profile.supported_kinds.contains(kind.as_str()) && parts_supported > 0 {
            lower.insert(kind);
        }
    }
    if !lower.is_empty() {
        let names: Vec<&str> = lower.iter().map(|k| k.as_str()).collect();
        current = decompose(&current, &lower)?;
        applied.push(format!("decompose({})", names.join(",")));
    }

    // Raise low-level compositions when only higher-order kinds are supported.
    let mut raise: BTreeSet<Kind> = BTreeSet::new();
    for kind in [Kind::If, Kind::Lif, Kind::CubaLif] {
        if profile.supported_kinds.contains(kind.as_str()) {
            raise.insert(kind);
        }
    }
    let low_unsupported = ["li", "integrator", "spike"]
        .iter()
        .any(|k| !profile.supported_kinds.contains(*k) && current.nodes().any(|n| n.kind().as_str() == *k));
    if low_unsupported && !raise.is_empty() {
        let raised = recompose(&current, &raise)?;
        if !raised.same_structure(&current) {
            applied.push("recompose".to_string());
            current = raised;
        }
    }

    let violations = raw_violations(&current, profile, cfg)?;
    Ok(CompatReport {
        compatible: violations.is_empty(),
        violations,
        applied_rewrites: applied,
        rewritten: Some(current),
    })
}

fn raw_violations(
    graph: &Graph,
    profile: &PlatformProfile,
    cfg: Option<&DialectConfig>,
) -> Result<Vec<Violation>> {
    let mut out = Vec::new();

    let mut unsupported: BTreeMap<String, Vec<NodeId>> = BTreeMap::new();
    for node in graph.nodes() {
        let kind = node.kind().as_str();
        if !profile.supported_kinds.contains(kind) {
            unsupported.entry(kind.to_string()).or_default().push(node.id.clone());
        }
    }
    for (kind, nodes) in unsupported {
        out.push(Violation {
            constraint: format!("kind `{kind}` not supported by `{}`", profile.name),
            nodes,
        });
    }

    if let Some(budget) = profile.max_neurons {
        // Hardware budgets are per neuron: count elements of stateful nodes.
        let mut total = 0usize;
        let mut holders = Vec::new();
        for node in graph.nodes() {
            if node.kind().is_stateful_neuron() {
                let elems = node.params.element_tensors();
                let size = elems.first().map(|(_, t)| t.len()).unwrap_or(0);
                total += size;
                holders.push(node.id.clone());
            }
        }
        if total > budget {
            out.push(Violation {
                constraint: format!("neuron budget: {total} neurons exceed limit {budget}"),
                nodes: holders,
            });
        }
    }

    for node in graph.nodes() {
        if let Some(limit) = profile.max_fan_in {
            let fan = graph.fan_in(&node.id)?;
            if fan > limit {
                out.push(Violation {
                    constraint: format!("fan-in {fan} exceeds limit {limit}"),
                    nodes: vec![node.id.clone()],
                });
            }
        }
        if let Some(limit) = profile.max_fan_out {
            let fan = graph.fan_out(&node.id)?;
            if fan > limit {
                out.push(Violation {
                    constraint: format!("fan-out {fan} exceeds limit {limit}"),
                    nodes: vec![node.id.clone()],
                });
            }
        }
    }

    if let Some(cfg) = cfg {
        let mode = match cfg.reset {
            crate::dialects::Reset::Hard => "hard",
            crate::dialects::Reset::Subtractive { .. } => "subtractive",
        };
        if !profile.reset_modes.is_empty() && !profile.reset_modes.contains(mode) {
            out.push(Violation {
                constraint: format!("reset mode `{mode}` not supported by `{}`", profile.name),
                nodes: vec![],
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// quantization
// ---------------------------------------------------------------------------

/// Integer image and scale of one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorQuant {
    pub node: NodeId,
    pub tensor: &'static str,
    pub scale: f64,
    pub ints: Vec<i64>,
}

/// Symmetric per-tensor quantization: `scale = max|w| / (2^(bits-1) - 1)`,
/// integers rounded half to even and clamped to the symmetric range. An
/// all-zero tensor maps to scale 1 and all-zero integers.
pub fn quantize_tensor(t: &Tensor, bits: u32) -> (Vec<i64>, f64) {
    let qmax = ((1i64 << (bits - 1)) - 1) as f64;
    let max_abs = t.data().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if max_abs == 0.0 {
        return (vec![0; t.len()], 1.0);
    }
    let scale = max_abs / qmax;
    let ints = t
        .data()
        .iter()
        .map(|&v| (v / scale).round_ties_even().clamp(-qmax, qmax) as i64)
        .collect();
    (ints, scale)
}

/// Post-training quantization of connection weights. Weight tensors are
/// replaced by their dequantized images; biases share the weight scale.
/// Returns the annotated graph and the integer tensors with their scales.
pub fn quantize(graph: &Graph, weight_bits: u32) -> Result<(Graph, Vec<TensorQuant>)> {
    if !(2..=32).contains(&weight_bits) {
        return Err(Error::InvalidParameter(format!(
            "weight bits must lie in [2, 32], got {weight_bits}"
        )));
    }
    let mut quants = Vec::new();
    let mut nodes: BTreeMap<NodeId, Node> = BTreeMap::new();
    for node in graph.nodes() {
        let mut new = node.clone();
        let quantize_into =
            |name: &'static str, t: &Tensor, quants: &mut Vec<TensorQuant>| -> Tensor {
                let (ints, scale) = quantize_tensor(t, weight_bits);
                let deq = Tensor::new(
                    t.shape().to_vec(),
                    ints.iter().map(|&i| i as f64 * scale).collect(),
                )
                .expect("same shape");
                quants.push(TensorQuant { node: node.id.clone(), tensor: name, scale, ints });
                deq
            };
        // Bias tensors reuse the weight scale with unit input scale.
        let requantize_bias = |bias: &Tensor, scale: f64| -> Tensor {
            bias.map(|b| (b / scale).round_ties_even() * scale)
        };
        match &node.params {
            PrimitiveParams::Linear { weight } => {
                new.params = PrimitiveParams::Linear {
                    weight: quantize_into("weight", weight, &mut quants),
                };
            }
            PrimitiveParams::Affine { weight, bias } => {
                let deq = quantize_into("weight", weight, &mut quants);
                let scale = quants.last().unwrap().scale;
                new.params =
                    PrimitiveParams::Affine { weight: deq, bias: requantize_bias(bias, scale) };
            }
            PrimitiveParams::Scale { scale } => {
                new.params = PrimitiveParams::Scale {
                    scale: quantize_into("scale", scale, &mut quants),
                };
            }
            PrimitiveParams::Conv { weight, stride, padding, dilation, groups, bias, input_shape } => {
                let deq = quantize_into("weight", weight, &mut quants);
                let scale = quants.last().unwrap().scale;
                new.params = PrimitiveParams::Conv {
                    weight: deq,
                    stride: stride.clone(),
                    padding: padding.clone(),
                    dilation: dilation.clone(),
                    groups: *groups,
                    bias: requantize_bias(bias, scale),
                    input_shape: input_shape.clone(),
                };
            }
            _ => {}
        }
        nodes.insert(node.id.clone(), new);
    }
    let mut out = Graph::from_parts(
        nodes,
        graph.edges().to_vec(),
        graph.metadata().clone(),
        graph.version().to_string(),
    );
    out = out.with_metadata("quant.weight_bits", weight_bits.to_string());
    for q in &quants {
        out = out.with_metadata(format!("quant.{}.{}", q.node, q.tensor), q.scale.to_string());
    }
    Ok((out, quants))
}

// ---------------------------------------------------------------------------
// platform lowering
// ---------------------------------------------------------------------------

/// Lower a graph for a platform: apply compatibility rewrites, substitute a
/// one-step synapse where the platform only has current-based neurons, and
/// derive the platform's dialect configuration. Reports the rewrites used.
pub fn translate_for_profile(
    graph: &Graph,
    profile: &PlatformProfile,
    dt: f64,
) -> Result<(Graph, DialectConfig, Vec<String>)> {
    profile.check()?;
    let mut applied = Vec::new();
    let mut current = simplify_affine(graph);
    if !current.same_structure(graph) {
        applied.push("simplify_affine".to_string());
    }

    // A platform with only current-based neurons takes plain LIF nodes via a
    // one-step synapse: tau_syn = dt is the smallest representable constant.
    let needs_cuba = !profile.supported_kinds.contains("lif")
        && profile.supported_kinds.contains("cuba_lif")
        && current.nodes().any(|n| n.kind() == Kind::Lif);
    if needs_cuba {
        let nodes: BTreeMap<NodeId, Node> = current
            .nodes()
            .map(|n| {
                let node = match &n.params {
                    PrimitiveParams::Lif { tau, r, v_leak, threshold } => Node {
                        id: n.id.clone(),
                        params: PrimitiveParams::CubaLif {
                            tau_syn: Tensor::filled(tau.shape().to_vec(), dt),
                            tau_mem: tau.clone(),
                            r: r.clone(),
                            v_leak: v_leak.clone(),
                            w_in: Tensor::filled(tau.shape().to_vec(), 1.0),
                            threshold: threshold.clone(),
                        },
                        initial_state: n.initial_state.clone(),
                    },
                    _ => n.clone(),
                };
                (n.id.clone(), node)
            })
            .collect();
        current = Graph::from_parts(
            nodes,
            current.edges().to_vec(),
            current.metadata().clone(),
            current.version().to_string(),
        );
        applied.push("lif_to_cuba_lif(tau_syn=dt)".to_string());
    }

    let report = check_constraints(&current, profile, None, true)?;
    if let Some(rewritten) = &report.rewritten {
        current = rewritten.clone();
    }
    applied.extend(report.applied_rewrites.clone());
    if !report.compatible {
        let list: Vec<String> = report.violations.iter().map(|v| v.constraint.clone()).collect();
        return Err(Error::UnsatisfiableConstraint(format!(
            "graph is incompatible with `{}`: {}",
            profile.name,
            list.join("; ")
        )));
    }

    let dialect = profile.dialect.unwrap_or(NamedDialect::Spinnaker2ExpEuler);
    let mut cfg = named_config(dialect, dt);
    cfg.numeric = profile.numeric();
    if matches!(cfg.decay, crate::dialects::Decay::Bitshift { .. })
        && !matches!(cfg.numeric, Numeric::Fixed { .. })
    {
        cfg.numeric = Numeric::Fixed {
            state_bits: profile.state_bits,
            weight_bits: profile.weight_bits,
            accumulator_bits: 32,
        };
    }

    // Per-node constraint validation against the named dialect; surfaces
    // unsatisfiable leak couplings and reports the rescalings applied.
    for node in current.nodes() {
        if matches!(node.kind(), Kind::Lif | Kind::CubaLif) {
            let translation = translate_named(&node.params, dialect, dt)?;
            if translation.input_scale.is_some() || translation.threshold.is_some() {
                applied.push(format!("rescale({})", node.id));
            }
        }
    }
    Ok((current, cfg, applied))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::graph::Shape;

    fn id(s: &str) -> NodeId {
        NodeId::new(s).unwrap()
    }

    fn io_chain(mid: &str, params: PrimitiveParams, width: usize) -> Graph {
        Graph::builder()
            .add("in", PrimitiveParams::Input { shape: Shape::new(vec![width]).unwrap() })
            .unwrap()
            .add(mid, params)
            .unwrap()
            .add("out", PrimitiveParams::Output { shape: Shape::new(vec![width]).unwrap() })
            .unwrap()
            .wire("in", mid)
            .unwrap()
            .wire(mid, "out")
            .unwrap()
            .build()
    }

    fn lif_params(n: usize) -> PrimitiveParams {
        PrimitiveParams::Lif {
            tau: Tensor::filled(vec![n], 4.0),
            r: Tensor::filled(vec![n], 1.0),
            v_leak: Tensor::zeros(vec![n]),
            threshold: Tensor::filled(vec![n], 1.0),
        }
    }

    #[test]
    fn decompose_lif_builds_reset_triangle() {
        let g = io_chain("n", lif_params(2), 2);
        let d = decompose(&g, &[Kind::Lif].into_iter().collect()).unwrap();
        assert_eq!(d.len(), 5);
        assert!(d.node(&id("n.li")).is_some());
        assert!(d.node(&id("n.spike")).is_some());
        assert!(d.node(&id("n.reset")).is_some());
        assert!(d
            .edges()
            .iter()
            .any(|e| e.source.node == id("n.reset") && e.target.port == PORT_RESET));
        assert!(d.validate().is_empty(), "{:?}", d.validate());
        // feedback weight is -theta
        let PrimitiveParams::Linear { weight } = &d.node(&id("n.reset")).unwrap().params else {
            panic!()
        };
        assert_eq!(weight.data(), &[-1.0, -1.0]);
    }

    #[test]
    fn decompose_without_higher_order_is_identity() {
        let g = io_chain("s", PrimitiveParams::Scale { scale: Tensor::vector(&[2.0]) }, 1);
        let d = decompose(&g, &[Kind::Lif, Kind::If, Kind::CubaLif].into_iter().collect()).unwrap();
        assert_eq!(g, d);
    }

    #[test]
    fn decompose_cuba_is_chain_then_lif_expansion() {
        let params = PrimitiveParams::CubaLif {
            tau_syn: Tensor::vector(&[2.0]),
            tau_mem: Tensor::vector(&[4.0]),
            r: Tensor::vector(&[1.0]),
            v_leak: Tensor::vector(&[0.0]),
            w_in: Tensor::vector(&[1.0]),
            threshold: Tensor::vector(&[1.0]),
        };
        let g = io_chain("n", params, 1);
        // only cuba in the kind set: three nodes before the lif's own expansion
        let once = decompose(&g, &[Kind::CubaLif].into_iter().collect()).unwrap();
        assert_eq!(once.len(), 5);
        assert!(once.node(&id("n.syn")).is_some());
        assert!(once.node(&id("n.w")).is_some());
        assert!(once.node(&id("n.lif")).is_some());
        // with lif included the chain's lif expands in turn
        let full =
            decompose(&g, &[Kind::CubaLif, Kind::Lif].into_iter().collect()).unwrap();
        assert_eq!(full.len(), 7);
        assert!(full.validate().is_empty());
    }

    #[test]
    fn recompose_inverts_decompose() {
        let g = io_chain("n", lif_params(3), 3);
        let kinds: BTreeSet<Kind> = [Kind::Lif].into_iter().collect();
        let d = decompose(&g, &kinds).unwrap();
        let r = recompose(&d, &kinds).unwrap();
        assert_eq!(g, r);
    }

    #[test]
    fn recompose_guard_rejects_mismatched_feedback() {
        let g = io_chain("n", lif_params(1), 1);
        let d = decompose(&g, &[Kind::Lif].into_iter().collect()).unwrap();
        // perturb the feedback weight beyond the guard tolerance
        let mut nodes: BTreeMap<NodeId, Node> =
            d.nodes().map(|n| (n.id.clone(), n.clone())).collect();
        nodes.get_mut(&id("n.reset")).unwrap().params =
            PrimitiveParams::Linear { weight: Tensor::vector(&[-0.9]) };
        let tampered = Graph::from_parts(
            nodes,
            d.edges().to_vec(),
            d.metadata().clone(),
            d.version().to_string(),
        );
        let r = recompose(&tampered, &[Kind::Lif].into_iter().collect()).unwrap();
        assert_eq!(r, tampered);
    }

    #[test]
    fn recurrent_block_annotation() {
        let g = Graph::builder()
            .add("in", PrimitiveParams::Input { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .add("pop", lif_params(1))
            .unwrap()
            .add("w_rec", PrimitiveParams::Linear { weight: Tensor::vector(&[0.3]) })
            .unwrap()
            .add("out", PrimitiveParams::Output { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .wire("in", "pop")
            .unwrap()
            .wire("pop", "w_rec")
            .unwrap()
            .wire("w_rec", "pop")
            .unwrap()
            .wire("pop", "out")
            .unwrap()
            .build();
        let annotated = annotate_recurrent_blocks(&g);
        assert_eq!(
            annotated.metadata().get("recurrent_block.pop").map(String::as_str),
            Some("w_rec")
        );
        assert!(annotated.same_structure(&g));
    }

    #[test]
    fn simplify_affine_examples() {
        let zero_bias = io_chain(
            "a",
            PrimitiveParams::Affine {
                weight: Tensor::vector(&[2.0]),
                bias: Tensor::vector(&[0.0]),
            },
            1,
        );
        let s = simplify_affine(&zero_bias);
        assert_eq!(s.node(&id("a")).unwrap().kind(), Kind::Linear);
        // idempotent
        assert_eq!(simplify_affine(&s), s);
        // tiny but nonzero bias is untouched
        let tiny = io_chain(
            "a",
            PrimitiveParams::Affine {
                weight: Tensor::vector(&[2.0]),
                bias: Tensor::vector(&[1e-300]),
            },
            1,
        );
        assert_eq!(simplify_affine(&tiny), tiny);
    }

    #[test]
    fn quantize_golden_values() {
        let (ints, scale) = quantize_tensor(&Tensor::vector(&[0.5, -1.0, 1.0]), 8);
        assert_eq!(scale, 1.0 / 127.0);
        assert_eq!(ints, vec![64, -127, 127]);

        let (zeros, s0) = quantize_tensor(&Tensor::vector(&[0.0, 0.0]), 8);
        assert_eq!(s0, 1.0);
        assert_eq!(zeros, vec![0, 0]);

        let (two_bit, s2) = quantize_tensor(&Tensor::vector(&[1.0, -1.0]), 2);
        assert_eq!(s2, 1.0);
        assert_eq!(two_bit, vec![1, -1]);
    }

    #[test]
    fn quantize_error_bounded_by_half_scale() {
        let w = Tensor::vector(&[0.013, -0.77, 0.4401, 0.12, -0.9999, 0.31]);
        let (ints, scale) = quantize_tensor(&w, 8);
        for (i, &orig) in w.data().iter().enumerate() {
            let err = (ints[i] as f64 * scale - orig).abs();
            assert!(err <= scale / 2.0 + 1e-18, "err {err} scale {scale}");
        }
    }

    #[test]
    fn quantize_pass_annotates_graph() {
        let g = io_chain(
            "lin",
            PrimitiveParams::Linear { weight: Tensor::vector(&[0.5]) },
            1,
        );
        let (qg, quants) = quantize(&g, 8).unwrap();
        assert_eq!(quants.len(), 1);
        assert_eq!(quants[0].ints, vec![127]);
        assert!(qg.metadata().contains_key("quant.lin.weight"));
        assert!(quantize(&g, 1).is_err());
        assert!(quantize(&g, 33).is_err());
    }

    #[test]
    fn builtin_profiles_parse_and_check() {
        for name in BUILTIN_PROFILES {
            let p = builtin_profile(name).unwrap();
            assert_eq!(p.name, name);
            p.check().unwrap();
        }
        assert!(builtin_profile("nope").is_none());
        let xylo = builtin_profile("xylo").unwrap();
        assert_eq!(xylo.max_fan_in, Some(63));
        assert_eq!(xylo.max_neurons, Some(1000));
        assert!(xylo.notes.contains("63"));
    }

    #[test]
    fn constraint_check_reports_unsupported_kind() {
        let g = io_chain("l", lif_params(1), 1);
        let xylo = builtin_profile("xylo").unwrap();
        let report = check_constraints(&g, &xylo, None, false).unwrap();
        assert!(!report.compatible);
        assert!(report
            .violations
            .iter()
            .any(|v| v.constraint.contains("kind `lif` not supported")));
    }

    #[test]
    fn zero_bias_affine_needs_rewrites_for_linear_only_profile() {
        let g = io_chain(
            "a",
            PrimitiveParams::Affine {
                weight: Tensor::vector(&[2.0]),
                bias: Tensor::vector(&[0.0]),
            },
            1,
        );
        let profile = PlatformProfile {
            name: "linear_only".into(),
            max_neurons: None,
            max_fan_in: None,
            max_fan_out: None,
            supported_kinds: ["input", "output", "linear"]
                .into_iter()
                .map(String::from)
                .collect(),
            weight_bits: 8,
            state_bits: 16,
            state_representation: StateRepresentation::Fixed,
            reset_modes: ["subtractive".to_string()].into_iter().collect(),
            dialect: None,
            notes: String::new(),
        };
        let plain = check_constraints(&g, &profile, None, false).unwrap();
        assert!(!plain.compatible);
        let rewritten = check_constraints(&g, &profile, None, true).unwrap();
        assert!(rewritten.compatible, "{:?}", rewritten.violations);
        assert!(rewritten.applied_rewrites.contains(&"simplify_affine".to_string()));
    }

    #[test]
    fn translate_for_xylo_substitutes_one_step_synapse() {
        let g = Graph::builder()
            .add("in", PrimitiveParams::Input { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .add("w", PrimitiveParams::Linear { weight: Tensor::vector(&[1.0]) })
            .unwrap()
            .add("n", lif_params(1))
            .unwrap()
            .add("out", PrimitiveParams::Output { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .wire("in", "w")
            .unwrap()
            .wire("w", "n")
            .unwrap()
            .wire("n", "out")
            .unwrap()
            .build();
        let xylo = builtin_profile("xylo").unwrap();
        let (lowered, cfg, applied) = translate_for_profile(&g, &xylo, 1.0).unwrap();
        assert_eq!(lowered.node(&id("n")).unwrap().kind(), Kind::CubaLif);
        let PrimitiveParams::CubaLif { tau_syn, .. } = &lowered.node(&id("n")).unwrap().params
        else {
            panic!()
        };
        assert_eq!(tau_syn.get(0), 1.0);
        assert!(matches!(cfg.decay, crate::dialects::Decay::Bitshift { .. }));
        assert!(matches!(cfg.numeric, Numeric::Fixed { state_bits: 16, weight_bits: 8, .. }));
        assert!(applied.iter().any(|a| a.contains("lif_to_cuba_lif")));
    }

    #[test]
    fn translate_surfaces_unsatisfiable_leak() {
        let params = PrimitiveParams::Lif {
            tau: Tensor::vector(&[4.0]),
            r: Tensor::vector(&[1.0]),
            v_leak: Tensor::vector(&[0.5]),
            threshold: Tensor::vector(&[1.0]),
        };
        let g = io_chain("n", params, 1);
        let loihi = builtin_profile("loihi2").unwrap();
        assert!(matches!(
            translate_for_profile(&g, &loihi, 1.0),
            Err(Error::UnsatisfiableConstraint(_))
        ));
    }

    #[test]
    fn translate_leaves_compatible_graph_unchanged() {
        let g = io_chain("n", lif_params(1), 1);
        let sp2 = builtin_profile("spinnaker2").unwrap();
        let (lowered, cfg, _) = translate_for_profile(&g, &sp2, 0.001).unwrap();
        assert!(lowered.same_structure(&g));
        assert_eq!(cfg.decay, crate::dialects::Decay::ExponentialEuler);
        assert_eq!(cfg.numeric, Numeric::Float64);
    }
}

#[cfg(test)]
mod rewrite_tests {
    use super::*;
    use crate::core::graph::Shape;

    #[test]
    fn raising_recovers_support_for_higher_order_only_platforms() {
        // a decomposed neuron against a platform that only has monolithic
        // kinds: raw check fails, the recompose rewrite makes it pass
        let g = Graph::builder()
            .add("in", PrimitiveParams::Input { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .add(
                "n",
                PrimitiveParams::Lif {
                    tau: Tensor::vector(&[4.0]),
                    r: Tensor::vector(&[1.0]),
                    v_leak: Tensor::vector(&[0.0]),
                    threshold: Tensor::vector(&[1.0]),
                },
            )
            .unwrap()
            .add("out", PrimitiveParams::Output { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .wire("in", "n")
            .unwrap()
            .wire("n", "out")
            .unwrap()
            .build();
        let flat = decompose(&g, &[Kind::Lif].into_iter().collect()).unwrap();
        let sp2 = builtin_profile("spinnaker2").unwrap();
        let raw = check_constraints(&flat, &sp2, None, false).unwrap();
        assert!(!raw.compatible);
        let raised = check_constraints(&flat, &sp2, None, true).unwrap();
        assert!(raised.compatible, "{:?}", raised.violations);
        assert!(raised.applied_rewrites.iter().any(|r| r == "recompose"));
        assert!(raised.rewritten.as_ref().unwrap().same_structure(&g));
    }

    #[test]
    fn reset_mode_checked_against_profile_when_config_given() {
        let loihi = builtin_profile("loihi2").unwrap();
        let g = Graph::builder()
            .add("in", PrimitiveParams::Input { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .add(
                "n",
                PrimitiveParams::Lif {
                    tau: Tensor::vector(&[4.0]),
                    r: Tensor::vector(&[1.0]),
                    v_leak: Tensor::vector(&[0.0]),
                    threshold: Tensor::vector(&[1.0]),
                },
            )
            .unwrap()
            .add("out", PrimitiveParams::Output { shape: Shape::new(vec![1]).unwrap() })
            .unwrap()
            .wire("in", "n")
            .unwrap()
            .wire("n", "out")
            .unwrap()
            .build();
        let subtractive = crate::dialects::DialectConfig::forward_euler(1.0);
        let report = check_constraints(&g, &loihi, Some(&subtractive), false).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| v.constraint.contains("reset mode `subtractive`")));
        let hard = crate::dialects::DialectConfig {
            reset: crate::dialects::Reset::Hard,
            ..crate::dialects::DialectConfig::forward_euler(1.0)
        };
        let report = check_constraints(&g, &loihi, Some(&hard), false).unwrap();
        assert!(report.compatible, "{:?}", report.violations);
    }
}
