//! CSV and JSON encodings of input streams and traces.
//!
//! CSV columns are named `node.port[index]`; a bare `node[index]` is accepted
//! on input. One row per timestep.

use std::collections::BTreeMap;

use serde_json::{Map, Number, Value};

use crate::core::graph::{Graph, NodeId};
use crate::engine::{InputStream, SimulationTrace};
use crate::error::{Error, Result};
use crate::primitives::PrimitiveParams;

/// Render a trace as CSV: a time column followed by output and state series
/// of every recorded node in lexicographic order.
pub fn trace_to_csv(trace: &SimulationTrace) -> String {
    let mut header = vec!["time".to_string()];
    for (id, node) in &trace.nodes {
        for i in 0..row_len(&node.outputs) {
            header.push(format!("{id}.output[{i}]"));
        }
        for (state, rows) in &node.states {
            for i in 0..row_len(rows) {
                header.push(format!("{id}.{state}[{i}]"));
            }
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for t in 0..trace.steps {
        let mut row = vec![t.to_string()];
        for node in trace.nodes.values() {
            if let Some(r) = node.outputs.get(t) {
                row.extend(r.iter().map(|v| v.to_string()));
            }
            for rows in node.states.values() {
                if let Some(r) = rows.get(t) {
                    row.extend(r.iter().map(|v| v.to_string()));
                }
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn row_len(rows: &[Vec<f64>]) -> usize {
    rows.first().map(|r| r.len()).unwrap_or(0)
}

/// Trace as a canonical JSON value.
pub fn trace_to_value(trace: &SimulationTrace) -> Value {
    let mut nodes = Map::new();
    for (id, node) in &trace.nodes {
        let mut m = Map::new();
        m.insert("outputs".into(), rows_value(&node.outputs));
        let mut states = Map::new();
        for (name, rows) in &node.states {
            states.insert(name.clone(), rows_value(rows));
        }
        m.insert("states".into(), Value::Object(states));
        m.insert("overflow".into(), Value::Number(node.overflow.into()));
        nodes.insert(id.to_string(), Value::Object(m));
    }
    let mut root = Map::new();
    root.insert("dialect".into(), Value::String(trace.dialect.clone()));
    root.insert(
        "dt".into(),
        Value::Number(Number::from_f64(trace.dt).expect("dt is finite")),
    );
    root.insert("steps".into(), Value::Number((trace.steps as u64).into()));
    root.insert("nodes".into(), Value::Object(nodes));
    Value::Object(root)
}

fn rows_value(rows: &[Vec<f64>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                Value::Array(
                    r.iter()
                        .map(|&v| Value::Number(Number::from_f64(v).expect("trace value finite")))
                        .collect(),
                )
            })
            .collect(),
    )
}

/// Input stream as CSV with `node.output[index]` columns.
pub fn write_input_csv(graph: &Graph, stream: &InputStream) -> Result<String> {
    let mut columns: Vec<(NodeId, usize)> = Vec::new();
    for node in graph.nodes() {
        if let PrimitiveParams::Input { shape } = &node.params {
            for i in 0..shape.size() {
                columns.push((node.id.clone(), i));
            }
        }
    }
    let mut header = vec!["time".to_string()];
    header.extend(columns.iter().map(|(id, i)| format!("{id}.output[{i}]")));
    let mut out = header.join(",");
    out.push('\n');
    for t in 0..stream.steps() {
        let mut row = vec![t.to_string()];
        for (id, i) in &columns {
            let rows = stream
                .get(id)
                .ok_or_else(|| Error::UnknownNode(id.to_string()))?;
            row.push(rows[t][*i].to_string());
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Parse an input CSV against the graph's input nodes.
pub fn read_input_csv(graph: &Graph, text: &str) -> Result<InputStream> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse { location: "line 1".into(), message: "empty csv".into() })?;

    // (input node, element index) per data column; None for the time column.
    let mut mapping: Vec<Option<(NodeId, usize)>> = Vec::new();
    let mut sizes: BTreeMap<NodeId, usize> = BTreeMap::new();
    for node in graph.nodes() {
        if let PrimitiveParams::Input { shape } = &node.params {
            sizes.insert(node.id.clone(), shape.size());
        }
    }
    for (c, raw) in header.split(',').enumerate() {
        let name = raw.trim();
        if name == "time" {
            mapping.push(None);
            continue;
        }
        let (base, index) = split_indexed(name).ok_or_else(|| Error::Parse {
            location: format!("header column {}", c + 1),
            message: format!("expected `node[index]` or `node.port[index]`, got `{name}`"),
        })?;
        let id = resolve_input_column(&sizes, base).ok_or_else(|| Error::Parse {
            location: format!("header column {}", c + 1),
            message: format!("`{base}` does not name an input node"),
        })?;
        if index >= sizes[&id] {
            return Err(Error::Parse {
                location: format!("header column {}", c + 1),
                message: format!("index {index} out of range for `{id}`"),
            });
        }
        mapping.push(Some((id, index)));
    }

    let mut rows: BTreeMap<NodeId, Vec<Vec<f64>>> = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != mapping.len() {
            return Err(Error::Parse {
                location: format!("line {}", lineno + 2),
                message: format!("expected {} fields, got {}", mapping.len(), fields.len()),
            });
        }
        for (id, size) in &sizes {
            rows.entry(id.clone()).or_default().push(vec![0.0; *size]);
        }
        for (field, slot) in fields.iter().zip(mapping.iter()) {
            if let Some((id, index)) = slot {
                let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    location: format!("line {}", lineno + 2),
                    message: format!("`{field}` is not a number"),
                })?;
                rows.get_mut(id).unwrap()[lineno][*index] = value;
            }
        }
    }

    let mut stream = InputStream::new();
    for (id, series) in rows {
        stream = stream.set(id.as_str(), series)?;
    }
    Ok(stream)
}

/// Split `name[3]` into (`name`, 3).
fn split_indexed(name: &str) -> Option<(&str, usize)> {
    let open = name.rfind('[')?;
    let close = name.rfind(']')?;
    if close != name.len() - 1 || open + 1 >= close {
        return None;
    }
    let index: usize = name[open + 1..close].parse().ok()?;
    Some((&name[..open], index))
}

/// Match a column base against input node ids: an exact id first, then
/// `id.port` split at the last dot with the default `output` port.
fn resolve_input_column(sizes: &BTreeMap<NodeId, usize>, base: &str) -> Option<NodeId> {
    if let Ok(id) = NodeId::new(base) {
        if sizes.contains_key(&id) {
            return Some(id);
        }
    }
    let dot = base.rfind('.')?;
    let (node, port) = (&base[..dot], &base[dot + 1..]);
    if port != "output" {
        return None;
    }
    let id = NodeId::new(node).ok()?;
    sizes.contains_key(&id).then_some(id)
}
