//! Deterministic discrete-time execution of a graph under a dialect.
//!
//! Forward edges deliver same-step values. Cycle-closing back edges deliver
//! the previous step's source output (zeros at the first step). Edges into a
//! `reset` port are excluded from scheduling and deliver same-step values to
//! the target's stored state after every node has evaluated.

mod io;
mod reference;

pub use io::{read_input_csv, trace_to_csv, trace_to_value, write_input_csv};
pub use reference::{run_reference_ode, ReferenceSeries};

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use petgraph::graph::DiGraph;

use crate::core::graph::{Edge, Graph, Node, NodeId};
use crate::core::tensor::Tensor;
use crate::dialects::{
    apply_reset_value, int_range, step_cuba_lif, step_integrator, step_li, step_lif, CubaState,
    DialectConfig, MembraneState, Numeric,
};
use crate::error::{Error, Result};
use crate::primitives::{port_signature, stateless_apply, Kind, PrimitiveParams, PORT_INPUT, PORT_RESET};

/// Per-input-node time series; all series share one step count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InputStream {
    streams: BTreeMap<NodeId, Vec<Vec<f64>>>,
}

impl InputStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set the series for one input node; rows are flattened row-major.
    pub fn set(mut self, node: &str, rows: Vec<Vec<f64>>) -> Result<Self> {
        self.streams.insert(NodeId::new(node)?, rows);
        Ok(self)
    }

    /// Constant-valued streams for every input node of the graph.
    pub fn constant(graph: &Graph, value: f64, steps: usize) -> Result<Self> {
        let mut s = InputStream::new();
        for node in graph.nodes() {
            if let PrimitiveParams::Input { shape } = &node.params {
                let row = vec![value; shape.size()];
                s.streams.insert(node.id.clone(), vec![row; steps]);
            }
        }
        Ok(s)
    }

    pub fn steps(&self) -> usize {
        self.streams.values().map(|rows| rows.len()).next().unwrap_or(0)
    }

    pub fn get(&self, node: &NodeId) -> Option<&Vec<Vec<f64>>> {
        self.streams.get(node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.streams.keys()
    }

    fn check(&self, graph: &Graph) -> Result<usize> {
        let mut steps = None;
        for node in graph.nodes() {
            if let PrimitiveParams::Input { shape } = &node.params {
                let rows = self.streams.get(&node.id).ok_or_else(|| {
                    Error::InvalidParameter(format!("no input stream for node `{}`", node.id))
                })?;
                match steps {
                    None => steps = Some(rows.len()),
                    Some(t) if t != rows.len() => {
                        return Err(Error::LengthMismatch { left: t, right: rows.len() })
                    }
                    _ => {}
                }
                if let Some(row) = rows.iter().find(|r| r.len() != shape.size()) {
                    return Err(Error::ShapeMismatch(format!(
                        "input row for `{}` has {} values, expected {}",
                        node.id,
                        row.len(),
                        shape.size()
                    )));
                }
            }
        }
        steps.ok_or_else(|| Error::InvalidParameter("graph has no input nodes".into()))
    }
}

/// Evaluation order plus the cycle-closing edges that carry one-step delays.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub order: Vec<NodeId>,
    pub back_edges: BTreeSet<Edge>,
}

/// Compute the evaluation schedule.
///
/// Back edges are found by a deterministic depth-first traversal entering
/// from the graph's sources, so a recurrence is delayed where the cycle
/// closes; feedforward chains inside a loop keep same-step delivery. Any
/// cycle visiting only stateless nodes is rejected.
pub fn build_schedule(graph: &Graph) -> Result<Schedule> {
    let diags = graph.validate();
    if let Some(first) = diags.first() {
        return Err(Error::InvalidGraph(format!("graph failed validation: {first}")));
    }
    let ids: Vec<NodeId> = graph.node_ids().cloned().collect();
    let index: BTreeMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (id, i)).collect();

    // A cycle must pass through state, a delay, or a reset port: any cycle
    // among stateless nodes alone cannot be evaluated.
    stateless_cycle_check(graph, &ids, &index)?;

    // Sorted non-reset adjacency and in-degrees.
    let mut adjacency: Vec<Vec<(usize, &Edge)>> = vec![Vec::new(); ids.len()];
    let mut indegree = vec![0usize; ids.len()];
    for edge in graph.edges() {
        if Graph::is_reset_edge(edge) {
            continue;
        }
        let (Some(&s), Some(&t)) = (index.get(&edge.source.node), index.get(&edge.target.node))
        else {
            return Err(Error::UnknownNode(edge.source.node.to_string()));
        };
        adjacency[s].push((t, edge));
        indegree[t] += 1;
    }
    for out in adjacency.iter_mut() {
        out.sort_by(|a, b| a.1.cmp(b.1));
    }

    // Iterative DFS; an edge reaching a node on the current stack closes a
    // cycle and becomes a back edge. Sources first, then leftovers, both in
    // lexicographic order.
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let mut color = vec![Color::White; ids.len()];
    let mut back_edges: BTreeSet<Edge> = BTreeSet::new();
    let roots: Vec<usize> = (0..ids.len())
        .filter(|&i| indegree[i] == 0)
        .chain(0..ids.len())
        .collect();
    for root in roots {
        if color[root] != Color::White {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        color[root] = Color::Gray;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < adjacency[node].len() {
                let (succ, edge) = adjacency[node][*next];
                *next += 1;
                match color[succ] {
                    Color::Gray => {
                        back_edges.insert(edge.clone());
                    }
                    Color::White => {
                        color[succ] = Color::Gray;
                        stack.push((succ, 0));
                    }
                    Color::Black => {}
                }
            } else {
                color[node] = Color::Black;
                stack.pop();
            }
        }
    }

    // Kahn's algorithm over the residual, lexicographic tie-break.
    let mut indegree: BTreeMap<&NodeId, usize> = ids.iter().map(|id| (id, 0)).collect();
    let mut adjacency: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for edge in graph.edges() {
        if Graph::is_reset_edge(edge) || back_edges.contains(edge) {
            continue;
        }
        let (src, _) = index.get_key_value(&edge.source.node).unwrap();
        let (dst, _) = index.get_key_value(&edge.target.node).unwrap();
        adjacency.entry(src).or_default().push(dst);
        *indegree.get_mut(dst).unwrap() += 1;
    }
    let mut ready: BTreeSet<&NodeId> =
        indegree.iter().filter(|(_, &d)| d == 0).map(|(id, _)| *id).collect();
    let mut order = Vec::with_capacity(ids.len());
    while let Some(&next) = ready.iter().next() {
        ready.remove(next);
        order.push(next.clone());
        if let Some(succs) = adjacency.get(next) {
            for succ in succs {
                let d = indegree.get_mut(succ).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(succ);
                }
            }
        }
    }
    debug_assert_eq!(order.len(), ids.len(), "residual graph must be acyclic");
    Ok(Schedule { order, back_edges })
}

/// Reject cycles that visit only stateless nodes (reset edges excluded).
fn stateless_cycle_check(
    graph: &Graph,
    ids: &[NodeId],
    index: &BTreeMap<&NodeId, usize>,
) -> Result<()> {
    let mut pg = DiGraph::<usize, ()>::new();
    let pg_nodes: Vec<_> = (0..ids.len()).map(|i| pg.add_node(i)).collect();
    let stateless =
        |id: &NodeId| -> bool { !graph.node(id).unwrap().kind().is_stateful() };
    let mut self_loops = BTreeSet::new();
    for edge in graph.edges() {
        if Graph::is_reset_edge(edge) {
            continue;
        }
        if stateless(&edge.source.node) && stateless(&edge.target.node) {
            let s = index[&edge.source.node];
            let t = index[&edge.target.node];
            pg.add_edge(pg_nodes[s], pg_nodes[t], ());
            if s == t {
                self_loops.insert(s);
            }
        }
    }
    for comp in petgraph::algo::tarjan_scc(&pg) {
        let cyclic = comp.len() > 1 || self_loops.contains(&pg[comp[0]]);
        if cyclic {
            let mut members: Vec<String> =
                comp.iter().map(|n| ids[pg[*n]].to_string()).collect();
            members.sort();
            return Err(Error::CycleWithoutState(members));
        }
    }
    Ok(())
}

/// Which node series a run records; output node events are always kept.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    OutputsOnly,
    All,
    Nodes(BTreeSet<NodeId>),
}

impl Record {
    pub fn nodes(ids: &[&str]) -> Result<Record> {
        let mut set = BTreeSet::new();
        for id in ids {
            set.insert(NodeId::new(*id)?);
        }
        Ok(Record::Nodes(set))
    }

    fn selects(&self, node: &Node) -> bool {
        node.kind() == Kind::Output
            || match self {
                Record::OutputsOnly => false,
                Record::All => true,
                Record::Nodes(set) => set.contains(&node.id),
            }
    }
}

/// Recorded series for one node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeTrace {
    /// One row per timestep of the node's emitted output.
    pub outputs: Vec<Vec<f64>>,
    /// One row per timestep per state variable (`v`, and `u` where present).
    pub states: BTreeMap<String, Vec<Vec<f64>>>,
    /// Saturation events in fixed numeric mode.
    pub overflow: u64,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub dt: f64,
    pub steps: usize,
    pub dialect: String,
    pub nodes: BTreeMap<NodeId, NodeTrace>,
}

enum NodeState {
    Stateless,
    /// Non-spiking membrane (Integrator, LI).
    Membrane(Tensor),
    /// Spiking membrane (IF, LIF).
    Spiking(MembraneState),
    Cuba(CubaState),
    DelayLine { ring: VecDeque<Vec<f64>>, steps: Vec<usize> },
    /// Standalone Spike under a nonzero emission delay.
    SpikeQueue(VecDeque<Vec<f64>>),
}

struct NodeRuntime<'g> {
    node: &'g Node,
    state: NodeState,
    /// Dims of the `input` port when the node has one.
    in_dims: Option<Vec<usize>>,
    reset_len: usize,
    out_len: usize,
    overflow: u64,
}

/// Execute the graph for the full input stream length.
pub fn run(
    graph: &Graph,
    cfg: &DialectConfig,
    inputs: &InputStream,
    record: &Record,
) -> Result<SimulationTrace> {
    cfg.check()?;
    let schedule = build_schedule(graph)?;
    let steps = inputs.check(graph)?;
    let fixed = matches!(cfg.numeric, Numeric::Fixed { .. });

    let mut runtimes: BTreeMap<NodeId, NodeRuntime> = BTreeMap::new();
    for node in graph.nodes() {
        let sig = port_signature(&node.params)?;
        let in_dims = sig.input_shape(PORT_INPUT).map(|s| s.dims().to_vec());
        let reset_len = sig.input_shape(PORT_RESET).map(|s| s.size()).unwrap_or(0);
        let out_len = sig.outputs.first().map(|(_, s)| s.size()).unwrap_or(0);
        runtimes.insert(
            node.id.clone(),
            NodeRuntime {
                node,
                state: init_state(node, cfg)?,
                in_dims,
                reset_len,
                out_len,
                overflow: 0,
            },
        );
    }

    // Incoming non-reset edges per (node, port), reset edges per node, in
    // canonical edge order.
    let mut input_edges: BTreeMap<NodeId, Vec<&Edge>> = BTreeMap::new();
    let mut reset_edges: BTreeMap<NodeId, Vec<&Edge>> = BTreeMap::new();
    for edge in graph.edges() {
        if Graph::is_reset_edge(edge) {
            reset_edges.entry(edge.target.node.clone()).or_default().push(edge);
        } else {
            input_edges.entry(edge.target.node.clone()).or_default().push(edge);
        }
    }

    let mut prev: BTreeMap<NodeId, Vec<f64>> = graph
        .nodes()
        .map(|n| (n.id.clone(), vec![0.0; runtimes[&n.id].out_len]))
        .collect();
    let mut cur = prev.clone();

    let mut trace = SimulationTrace {
        dt: cfg.dt,
        steps,
        dialect: cfg.describe(),
        nodes: BTreeMap::new(),
    };
    for node in graph.nodes() {
        if record.selects(node) {
            trace.nodes.insert(node.id.clone(), NodeTrace::default());
        }
    }

    for t in 0..steps {
        for id in &schedule.order {
            // Element-wise sum over incoming edges; zeros when unconnected.
            let len = {
                let rt = &runtimes[id];
                rt.in_dims.as_ref().map(|d| d.iter().product()).unwrap_or(0)
            };
            let mut gathered = vec![0.0; len];
            let mut gather_overflow = 0u64;
            if let Some(edges) = input_edges.get(id) {
                for edge in edges {
                    let source = if schedule.back_edges.contains(*edge) {
                        &prev[&edge.source.node]
                    } else {
                        &cur[&edge.source.node]
                    };
                    for (a, &b) in gathered.iter_mut().zip(source.iter()) {
                        *a += b;
                    }
                }
            }
            if fixed {
                quantize_row(&mut gathered, &cfg.numeric, &mut gather_overflow);
            }

            let rt = runtimes.get_mut(id).unwrap();
            rt.overflow += gather_overflow;
            let out = eval_node(rt, cfg, inputs, t, gathered, fixed)?;
            cur.insert(id.clone(), out);
        }

        // Same-step reset delivery to stored state.
        for (id, edges) in &reset_edges {
            let rt = runtimes.get_mut(id).unwrap();
            let mut arriving = vec![0.0; rt.reset_len];
            for edge in edges {
                let source = &cur[&edge.source.node];
                for (a, &b) in arriving.iter_mut().zip(source.iter()) {
                    *a += b;
                }
            }
            let membrane: &mut Tensor = match &mut rt.state {
                NodeState::Membrane(v) => v,
                NodeState::Spiking(state) => &mut state.v,
                NodeState::Cuba(state) => &mut state.v,
                _ => continue,
            };
            let data: Vec<f64> = membrane
                .data()
                .iter()
                .zip(arriving.iter())
                .map(|(&v, &r)| apply_reset_value(&cfg.reset, v, r))
                .collect();
            *membrane = Tensor::new(membrane.shape().to_vec(), data)?;
        }

        for (id, node_trace) in trace.nodes.iter_mut() {
            node_trace.outputs.push(cur[id].clone());
            match &runtimes[id].state {
                NodeState::Membrane(v) => {
                    node_trace.states.entry("v".into()).or_default().push(v.data().to_vec());
                }
                NodeState::Spiking(state) => {
                    node_trace
                        .states
                        .entry("v".into())
                        .or_default()
                        .push(state.v.data().to_vec());
                }
                NodeState::Cuba(state) => {
                    node_trace.states.entry("u".into()).or_default().push(state.u.data().to_vec());
                    node_trace.states.entry("v".into()).or_default().push(state.v.data().to_vec());
                }
                _ => {}
            }
        }

        std::mem::swap(&mut prev, &mut cur);
    }

    for (id, node_trace) in trace.nodes.iter_mut() {
        node_trace.overflow = runtimes[id].overflow;
    }
    Ok(trace)
}

fn eval_node(
    rt: &mut NodeRuntime,
    cfg: &DialectConfig,
    inputs: &InputStream,
    t: usize,
    gathered: Vec<f64>,
    fixed: bool,
) -> Result<Vec<f64>> {
    let input_tensor = |gathered: Vec<f64>, dims: &Option<Vec<usize>>| -> Result<Tensor> {
        Tensor::new(dims.clone().expect("node has an input port"), gathered)
    };
    match &mut rt.state {
        NodeState::Stateless => match &rt.node.params {
            PrimitiveParams::Input { .. } => {
                let mut row = inputs.get(&rt.node.id).unwrap()[t].clone();
                if fixed {
                    quantize_row(&mut row, &cfg.numeric, &mut rt.overflow);
                }
                Ok(row)
            }
            PrimitiveParams::Output { .. } => Ok(gathered),
            params => {
                let input = input_tensor(gathered, &rt.in_dims)?;
                let mut row = stateless_apply(params, &input)?.data().to_vec();
                if fixed {
                    quantize_row(&mut row, &cfg.numeric, &mut rt.overflow);
                }
                Ok(row)
            }
        },
        NodeState::SpikeQueue(queue) => {
            let input = input_tensor(gathered, &rt.in_dims)?;
            let crossings = stateless_apply(&rt.node.params, &input)?.data().to_vec();
            queue.push_back(crossings);
            Ok(queue.pop_front().expect("queue seeded"))
        }
        NodeState::DelayLine { ring, steps } => {
            ring.push_back(gathered);
            let newest = ring.len() - 1;
            let out = steps
                .iter()
                .enumerate()
                .map(|(e, &k)| ring[newest - k][e])
                .collect();
            ring.pop_front();
            Ok(out)
        }
        NodeState::Membrane(v) => {
            let input = input_tensor(gathered, &rt.in_dims)?;
            let (v_next, ov) = match &rt.node.params {
                PrimitiveParams::Li { .. } => step_li(&rt.node.params, cfg, v, &input)?,
                _ => step_integrator(&rt.node.params, cfg, v, &input)?,
            };
            rt.overflow += ov;
            let out = v_next.data().to_vec();
            *v = v_next;
            Ok(out)
        }
        NodeState::Spiking(state) => {
            let input = input_tensor(gathered, &rt.in_dims)?;
            let (next, ev) = step_lif(&rt.node.params, cfg, state, &input)?;
            rt.overflow += ev.overflow;
            *state = next;
            Ok(ev.emitted.data().to_vec())
        }
        NodeState::Cuba(state) => {
            let input = input_tensor(gathered, &rt.in_dims)?;
            let (next, ev) = step_cuba_lif(&rt.node.params, cfg, state, &input)?;
            rt.overflow += ev.overflow;
            *state = next;
            Ok(ev.emitted.data().to_vec())
        }
    }
}

fn quantize_row(row: &mut [f64], numeric: &Numeric, overflow: &mut u64) {
    let Numeric::Fixed { accumulator_bits, .. } = numeric else { return };
    let (lo, hi) = int_range(*accumulator_bits);
    for v in row.iter_mut() {
        let r = v.round_ties_even();
        *v = if r < lo as f64 {
            *overflow += 1;
            lo as f64
        } else if r > hi as f64 {
            *overflow += 1;
            hi as f64
        } else {
            r
        };
    }
}

fn init_state(node: &Node, cfg: &DialectConfig) -> Result<NodeState> {
    let explicit = |name: &str| node.initial_state.get(name).cloned();
    let quantized = |t: Tensor| -> Tensor {
        if matches!(cfg.numeric, Numeric::Fixed { .. }) {
            t.map(|v| v.round_ties_even())
        } else {
            t
        }
    };
    Ok(match &node.params {
        PrimitiveParams::Integrator { r } => {
            let v = explicit("v").unwrap_or_else(|| Tensor::zeros(r.shape().to_vec()));
            NodeState::Membrane(quantized(v))
        }
        PrimitiveParams::Li { v_leak, .. } => {
            let v = explicit("v").unwrap_or_else(|| v_leak.clone());
            NodeState::Membrane(quantized(v))
        }
        PrimitiveParams::If { r, .. } => {
            let v = explicit("v").unwrap_or_else(|| Tensor::zeros(r.shape().to_vec()));
            NodeState::Spiking(MembraneState::new(quantized(v), cfg))
        }
        PrimitiveParams::Lif { v_leak, .. } => {
            let v = explicit("v").unwrap_or_else(|| v_leak.clone());
            NodeState::Spiking(MembraneState::new(quantized(v), cfg))
        }
        PrimitiveParams::CubaLif { v_leak, .. } => {
            let u = explicit("u").unwrap_or_else(|| Tensor::zeros(v_leak.shape().to_vec()));
            let v = explicit("v").unwrap_or_else(|| v_leak.clone());
            NodeState::Cuba(CubaState::new(quantized(u), quantized(v), cfg))
        }
        PrimitiveParams::Delay { delay } => {
            let steps: Vec<usize> = delay
                .data()
                .iter()
                .map(|&d| (d / cfg.dt).round() as usize)
                .collect();
            let max = steps.iter().copied().max().unwrap_or(0);
            // Preseed with `max` zero rows; each step pushes the current row
            // before reading, so index `newest - k` stays in range.
            let ring: VecDeque<Vec<f64>> = (0..max).map(|_| vec![0.0; delay.len()]).collect();
            NodeState::DelayLine { ring, steps }
        }
        PrimitiveParams::Spike { threshold } if cfg.spike_delay_steps > 0 => {
            let queue = (0..cfg.spike_delay_steps)
                .map(|_| vec![0.0; threshold.len()])
                .collect();
            NodeState::SpikeQueue(queue)
        }
        _ => NodeState::Stateless,
    })
}
