#![allow(dead_code)]

//! Shared builders for integration tests: small graphs, random graph
//! generation, and event-train helpers.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use nir::core::graph::{Graph, NodeId, Shape};
use nir::core::Tensor;
use nir::engine::{InputStream, SimulationTrace};
use nir::primitives::PrimitiveParams;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn id(s: &str) -> NodeId {
    NodeId::new(s).unwrap()
}

pub fn shape(dims: &[usize]) -> Shape {
    Shape::new(dims.to_vec()).unwrap()
}

pub fn input_node(n: usize) -> PrimitiveParams {
    PrimitiveParams::Input { shape: shape(&[n]) }
}

pub fn output_node(n: usize) -> PrimitiveParams {
    PrimitiveParams::Output { shape: shape(&[n]) }
}

pub fn lif_node(n: usize, tau: f64, r: f64, v_leak: f64, theta: f64) -> PrimitiveParams {
    PrimitiveParams::Lif {
        tau: Tensor::filled(vec![n], tau),
        r: Tensor::filled(vec![n], r),
        v_leak: Tensor::filled(vec![n], v_leak),
        threshold: Tensor::filled(vec![n], theta),
    }
}

/// `input -> lif -> output`, all width 1.
pub fn single_lif_graph(tau: f64, r: f64, v_leak: f64, theta: f64) -> Graph {
    Graph::builder()
        .add("in", input_node(1))
        .unwrap()
        .add("lif1", lif_node(1, tau, r, v_leak, theta))
        .unwrap()
        .add("out", output_node(1))
        .unwrap()
        .wire("in", "lif1")
        .unwrap()
        .wire("lif1", "out")
        .unwrap()
        .build()
}

/// Binary event train as an input stream for the given node.
pub fn event_stream(node: &str, events: &[f64]) -> InputStream {
    InputStream::new()
        .set(node, events.iter().map(|&e| vec![e]).collect())
        .unwrap()
}

/// Flattened single-element event series of a recorded node.
pub fn events_of(trace: &SimulationTrace, node: &str) -> Vec<f64> {
    trace.nodes[&id(node)].outputs.iter().map(|r| r[0]).collect()
}

/// Times of nonzero events.
pub fn fire_times(events: &[f64]) -> Vec<usize> {
    events
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(t, _)| t)
        .collect()
}

/// A random valid graph over the primitive catalogue: one input, a layered
/// body with occasional skip and recurrent connections, one output. Every
/// node shares one width so edges always type-check.
pub fn random_graph(rng: &mut ChaCha8Rng, max_mid: usize, dt: f64) -> Graph {
    let width = rng.random_range(1..=3usize);
    let mid_count = rng.random_range(1..=max_mid.max(1));
    let mut builder = Graph::builder().add("in", input_node(width)).unwrap();
    let mut spiking: Vec<String> = Vec::new();
    let mut names: Vec<String> = vec!["in".to_string()];

    let tensor = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Tensor {
        Tensor::new(vec![width], (0..width).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
    };

    for k in 0..mid_count {
        let name = format!("n{k}");
        let choice = rng.random_range(0..9u32);
        let params = match choice {
            0 => PrimitiveParams::Scale { scale: tensor(rng, -1.2, 1.2) },
            1 => PrimitiveParams::Linear { weight: tensor(rng, -1.0, 1.0) },
            2 => PrimitiveParams::Affine {
                weight: tensor(rng, -1.0, 1.0),
                bias: tensor(rng, -0.3, 0.3),
            },
            3 => {
                let steps = rng.random_range(0..3u32);
                PrimitiveParams::Delay {
                    delay: Tensor::filled(vec![width], steps as f64 * dt),
                }
            }
            4 => PrimitiveParams::Li {
                tau: tensor(rng, 2.0 * dt, 20.0 * dt),
                r: tensor(rng, 0.5, 2.0),
                v_leak: tensor(rng, -0.2, 0.4),
            },
            5 => PrimitiveParams::Spike { threshold: tensor(rng, 0.4, 1.5) },
            6 => PrimitiveParams::If {
                r: tensor(rng, 0.5, 2.0),
                threshold: tensor(rng, 0.5, 2.0),
            },
            7 => PrimitiveParams::Lif {
                tau: tensor(rng, 2.0 * dt, 20.0 * dt),
                r: tensor(rng, 0.5, 2.0),
                v_leak: tensor(rng, -0.2, 0.4),
                threshold: tensor(rng, 0.5, 2.0),
            },
            _ => PrimitiveParams::CubaLif {
                tau_syn: tensor(rng, 2.0 * dt, 10.0 * dt),
                tau_mem: tensor(rng, 2.0 * dt, 20.0 * dt),
                r: tensor(rng, 0.5, 2.0),
                v_leak: tensor(rng, -0.2, 0.4),
                w_in: tensor(rng, 0.5, 2.0),
                threshold: tensor(rng, 0.5, 2.0),
            },
        };
        if matches!(choice, 6..=8) {
            spiking.push(name.clone());
        }
        builder = builder.add(&name, params).unwrap();
        // feed from a random earlier node, plus an occasional extra edge
        let feeder = names[rng.random_range(0..names.len())].clone();
        builder = builder.wire(&feeder, &name).unwrap();
        if names.len() > 1 && rng.random_bool(0.25) {
            let extra = names[rng.random_range(0..names.len())].clone();
            if extra != feeder {
                builder = builder.wire(&extra, &name).unwrap();
            }
        }
        names.push(name);
    }

    // guarantee at least one higher-order node so decomposition has work
    if spiking.is_empty() {
        let name = "hx".to_string();
        builder = builder
            .add(
                &name,
                PrimitiveParams::Lif {
                    tau: Tensor::filled(vec![width], 8.0 * dt),
                    r: Tensor::filled(vec![width], 1.0),
                    v_leak: Tensor::zeros(vec![width]),
                    threshold: Tensor::filled(vec![width], 0.8),
                },
            )
            .unwrap();
        let feeder = names[rng.random_range(0..names.len())].clone();
        builder = builder.wire(&feeder, &name).unwrap();
        spiking.push(name.clone());
        names.push(name);
    }

    // occasional direct recurrence through a linear map
    if rng.random_bool(0.3) {
        let target = spiking[rng.random_range(0..spiking.len())].clone();
        builder = builder
            .add("w_rec", PrimitiveParams::Linear { weight: tensor(rng, -0.5, 0.5) })
            .unwrap()
            .wire(&target, "w_rec")
            .unwrap()
            .wire("w_rec", &target)
            .unwrap();
    }

    let tail = spiking.last().cloned().unwrap();
    builder = builder
        .add("out", output_node(width))
        .unwrap()
        .wire(&tail, "out")
        .unwrap();
    let g = builder.build();
    debug_assert!(g.validate().is_empty(), "{:?}", g.validate());
    g
}

/// Random event-count input rows for every input node of a graph.
pub fn random_inputs(rng: &mut ChaCha8Rng, graph: &Graph, steps: usize) -> InputStream {
    let mut stream = InputStream::new();
    for node in graph.nodes() {
        if let PrimitiveParams::Input { shape } = &node.params {
            let rows: Vec<Vec<f64>> = (0..steps)
                .map(|_| {
                    (0..shape.size())
                        .map(|_| if rng.random_bool(0.3) { rng.random_range(1..=2) as f64 } else { 0.0 })
                        .collect()
                })
                .collect();
            stream = stream.set(node.id.as_str(), rows).unwrap();
        }
    }
    stream
}

/// Kinds set helper.
pub fn kinds(list: &[nir::Kind]) -> BTreeSet<nir::Kind> {
    list.iter().copied().collect()
}
