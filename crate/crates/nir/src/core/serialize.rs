//! Canonical JSON serialization of graphs.
//!
//! The format is UTF-8 JSON with lexicographically sorted keys, floats
//! rendered as shortest round-trip decimals, and tensors stored row-major as
//! nested arrays next to an explicit shape. Equal graphs therefore produce
//! byte-identical files. See `docs/format.md` for the schema.

use std::collections::BTreeMap;

use serde_json::{json, Map, Number, Value};

use crate::core::graph::{Edge, Endpoint, Graph, Node, NodeId, Shape, FORMAT_VERSION};
use crate::core::tensor::Tensor;
use crate::error::{Error, Result};
use crate::primitives::{Kind, PrimitiveParams};

/// Serialize a valid graph into canonical bytes.
pub fn serialize(graph: &Graph) -> Result<Vec<u8>> {
    let diags = graph.validate();
    if !diags.is_empty() {
        return Err(Error::InvalidGraph(format!(
            "serialize requires a valid graph; first diagnostic: {}",
            diags[0]
        )));
    }
    let value = to_value(graph)?;
    Ok(serde_json::to_vec(&value).expect("canonical value is always serializable"))
}

/// Graph as a canonical `serde_json::Value` (keys sorted by the Value map).
pub fn to_value(graph: &Graph) -> Result<Value> {
    let mut root = Map::new();
    let edges: Vec<Value> = graph
        .edges()
        .iter()
        .map(|e| {
            json!([
                [e.source.node.as_str(), e.source.port],
                [e.target.node.as_str(), e.target.port]
            ])
        })
        .collect();
    root.insert("edges".into(), Value::Array(edges));
    if !graph.metadata().is_empty() {
        let meta: Map<String, Value> = graph
            .metadata()
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        root.insert("metadata".into(), Value::Object(meta));
    }
    root.insert("nir_version".into(), Value::String(graph.version().to_string()));
    let mut nodes = Map::new();
    for node in graph.nodes() {
        nodes.insert(node.id.to_string(), node_to_value(node)?);
    }
    root.insert("nodes".into(), Value::Object(nodes));
    Ok(Value::Object(root))
}

/// Parse canonical (or hand-written) bytes back into a graph.
pub fn deserialize(bytes: &[u8]) -> Result<Graph> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    from_value(&value)
}

pub fn from_value(value: &Value) -> Result<Graph> {
    let mut path = PathTracker::default();
    let root = expect_object(value, &path)?;
    check_keys(root, &["edges", "metadata", "nir_version", "nodes"], &path)?;

    let version_val = required(root, "nir_version", &path)?;
    let version = expect_string(version_val, &path.with("nir_version"))?;
    if version != FORMAT_VERSION {
        return Err(Error::Version(version.to_string()));
    }

    let mut nodes = BTreeMap::new();
    let nodes_val = required(root, "nodes", &path)?;
    path.push("nodes");
    for (id_str, node_val) in expect_object(nodes_val, &path)? {
        let sub = path.with(id_str);
        let id = NodeId::new(id_str.clone()).map_err(|e| sub.err(e.to_string()))?;
        let node = node_from_value(id, node_val, &sub)?;
        nodes.insert(node.id.clone(), node);
    }
    path.pop();

    let mut edges = Vec::new();
    let edges_val = required(root, "edges", &path)?;
    path.push("edges");
    for (i, edge_val) in expect_array(edges_val, &path)?.iter().enumerate() {
        let sub = path.with(&format!("[{i}]"));
        edges.push(edge_from_value(edge_val, &sub)?);
    }
    path.pop();

    let mut metadata = BTreeMap::new();
    if let Some(meta_val) = root.get("metadata") {
        path.push("metadata");
        for (k, v) in expect_object(meta_val, &path)? {
            metadata.insert(k.clone(), expect_string(v, &path.with(k))?.to_string());
        }
        path.pop();
    }

    Ok(Graph::from_parts(nodes, edges, metadata, version.to_string()))
}

fn node_to_value(node: &Node) -> Result<Value> {
    let mut m = Map::new();
    m.insert("kind".into(), Value::String(node.kind().as_str().into()));
    match &node.params {
        PrimitiveParams::Input { shape } | PrimitiveParams::Output { shape } => {
            m.insert("shape".into(), shape_value(shape));
        }
        PrimitiveParams::Affine { weight, bias } => {
            m.insert("weight".into(), tensor_value(weight)?);
            m.insert("bias".into(), tensor_value(bias)?);
        }
        PrimitiveParams::Linear { weight } => {
            m.insert("weight".into(), tensor_value(weight)?);
        }
        PrimitiveParams::Scale { scale } => {
            m.insert("scale".into(), tensor_value(scale)?);
        }
        PrimitiveParams::Conv { weight, stride, padding, dilation, groups, bias, input_shape } => {
            m.insert("weight".into(), tensor_value(weight)?);
            m.insert("stride".into(), usize_array(stride));
            m.insert("padding".into(), usize_array(padding));
            m.insert("dilation".into(), usize_array(dilation));
            m.insert("groups".into(), Value::Number((*groups as u64).into()));
            m.insert("bias".into(), tensor_value(bias)?);
            if let Some(s) = input_shape {
                m.insert("input_shape".into(), shape_value(s));
            }
        }
        PrimitiveParams::Delay { delay } => {
            m.insert("delay".into(), tensor_value(delay)?);
        }
        PrimitiveParams::Flatten { input_shape, start_dim, end_dim } => {
            m.insert("input_shape".into(), shape_value(input_shape));
            m.insert("start_dim".into(), Value::Number((*start_dim as u64).into()));
            m.insert("end_dim".into(), Value::Number((*end_dim as u64).into()));
        }
        PrimitiveParams::Integrator { r } => {
            m.insert("r".into(), tensor_value(r)?);
        }
        PrimitiveParams::Li { tau, r, v_leak } => {
            m.insert("tau".into(), tensor_value(tau)?);
            m.insert("r".into(), tensor_value(r)?);
            m.insert("v_leak".into(), tensor_value(v_leak)?);
        }
        PrimitiveParams::Spike { threshold } => {
            m.insert("threshold".into(), tensor_value(threshold)?);
        }
        PrimitiveParams::If { r, threshold } => {
            m.insert("r".into(), tensor_value(r)?);
            m.insert("threshold".into(), tensor_value(threshold)?);
        }
        PrimitiveParams::Lif { tau, r, v_leak, threshold } => {
            m.insert("tau".into(), tensor_value(tau)?);
            m.insert("r".into(), tensor_value(r)?);
            m.insert("v_leak".into(), tensor_value(v_leak)?);
            m.insert("threshold".into(), tensor_value(threshold)?);
        }
        PrimitiveParams::CubaLif { tau_syn, tau_mem, r, v_leak, w_in, threshold } => {
            m.insert("tau_syn".into(), tensor_value(tau_syn)?);
            m.insert("tau_mem".into(), tensor_value(tau_mem)?);
            m.insert("r".into(), tensor_value(r)?);
            m.insert("v_leak".into(), tensor_value(v_leak)?);
            m.insert("w_in".into(), tensor_value(w_in)?);
            m.insert("threshold".into(), tensor_value(threshold)?);
        }
    }
    if !node.initial_state.is_empty() {
        let mut st = Map::new();
        for (name, tensor) in &node.initial_state {
            st.insert(name.clone(), tensor_value(tensor)?);
        }
        m.insert("initial_state".into(), Value::Object(st));
    }
    Ok(Value::Object(m))
}

fn node_from_value(id: NodeId, value: &Value, path: &PathTracker) -> Result<Node> {
    let obj = expect_object(value, path)?;
    let kind_str = expect_string(required(obj, "kind", path)?, &path.with("kind"))?;
    let kind = Kind::from_str(kind_str)
        .ok_or_else(|| path.with("kind").err(format!("unknown kind `{kind_str}`")))?;

    let tensor = |key: &str| -> Result<Tensor> {
        tensor_from_value(required(obj, key, path)?, &path.with(key))
    };
    let shape = |key: &str| -> Result<Shape> {
        shape_from_value(required(obj, key, path)?, &path.with(key))
    };
    let uint = |key: &str| -> Result<usize> {
        expect_uint(required(obj, key, path)?, &path.with(key))
    };
    let uint_vec = |key: &str| -> Result<Vec<usize>> {
        let arr = expect_array(required(obj, key, path)?, &path.with(key))?;
        arr.iter()
            .enumerate()
            .map(|(i, v)| expect_uint(v, &path.with(&format!("{key}[{i}]"))))
            .collect()
    };

    let base_keys: &[&str] = &["initial_state", "kind"];
    let params = match kind {
        Kind::Input => {
            check_keys_with(obj, &["shape"], base_keys, path)?;
            PrimitiveParams::Input { shape: shape("shape")? }
        }
        Kind::Output => {
            check_keys_with(obj, &["shape"], base_keys, path)?;
            PrimitiveParams::Output { shape: shape("shape")? }
        }
        Kind::Affine => {
            check_keys_with(obj, &["bias", "weight"], base_keys, path)?;
            PrimitiveParams::Affine { weight: tensor("weight")?, bias: tensor("bias")? }
        }
        Kind::Linear => {
            check_keys_with(obj, &["weight"], base_keys, path)?;
            PrimitiveParams::Linear { weight: tensor("weight")? }
        }
        Kind::Scale => {
            check_keys_with(obj, &["scale"], base_keys, path)?;
            PrimitiveParams::Scale { scale: tensor("scale")? }
        }
        Kind::Conv => {
            check_keys_with(
                obj,
                &["bias", "dilation", "groups", "input_shape", "padding", "stride", "weight"],
                base_keys,
                path,
            )?;
            PrimitiveParams::Conv {
                weight: tensor("weight")?,
                stride: uint_vec("stride")?,
                padding: uint_vec("padding")?,
                dilation: uint_vec("dilation")?,
                groups: uint("groups")?,
                bias: tensor("bias")?,
                input_shape: match obj.get("input_shape") {
                    Some(v) => Some(shape_from_value(v, &path.with("input_shape"))?),
                    None => None,
                },
            }
        }
        Kind::Delay => {
            check_keys_with(obj, &["delay"], base_keys, path)?;
            PrimitiveParams::Delay { delay: tensor("delay")? }
        }
        Kind::Flatten => {
            check_keys_with(obj, &["end_dim", "input_shape", "start_dim"], base_keys, path)?;
            PrimitiveParams::Flatten {
                input_shape: shape("input_shape")?,
                start_dim: uint("start_dim")?,
                end_dim: uint("end_dim")?,
            }
        }
        Kind::Integrator => {
            check_keys_with(obj, &["r"], base_keys, path)?;
            PrimitiveParams::Integrator { r: tensor("r")? }
        }
        Kind::Li => {
            check_keys_with(obj, &["r", "tau", "v_leak"], base_keys, path)?;
            PrimitiveParams::Li { tau: tensor("tau")?, r: tensor("r")?, v_leak: tensor("v_leak")? }
        }
        Kind::Spike => {
            check_keys_with(obj, &["threshold"], base_keys, path)?;
            PrimitiveParams::Spike { threshold: tensor("threshold")? }
        }
        Kind::If => {
            check_keys_with(obj, &["r", "threshold"], base_keys, path)?;
            PrimitiveParams::If { r: tensor("r")?, threshold: tensor("threshold")? }
        }
        Kind::Lif => {
            check_keys_with(obj, &["r", "tau", "threshold", "v_leak"], base_keys, path)?;
            PrimitiveParams::Lif {
                tau: tensor("tau")?,
                r: tensor("r")?,
                v_leak: tensor("v_leak")?,
                threshold: tensor("threshold")?,
            }
        }
        Kind::CubaLif => {
            check_keys_with(
                obj,
                &["r", "tau_mem", "tau_syn", "threshold", "v_leak", "w_in"],
                base_keys,
                path,
            )?;
            PrimitiveParams::CubaLif {
                tau_syn: tensor("tau_syn")?,
                tau_mem: tensor("tau_mem")?,
                r: tensor("r")?,
                v_leak: tensor("v_leak")?,
                w_in: tensor("w_in")?,
                threshold: tensor("threshold")?,
            }
        }
    };

    let mut initial_state = BTreeMap::new();
    if let Some(st) = obj.get("initial_state") {
        let sub = path.with("initial_state");
        for (name, v) in expect_object(st, &sub)? {
            initial_state.insert(name.clone(), tensor_from_value(v, &sub.with(name))?);
        }
    }
    Ok(Node { id, params, initial_state })
}

fn edge_from_value(value: &Value, path: &PathTracker) -> Result<Edge> {
    let pair = expect_array(value, path)?;
    if pair.len() != 2 {
        return Err(path.err("edge must be a [source, target] pair"));
    }
    let endpoint = |v: &Value, which: &str| -> Result<Endpoint> {
        let sub = path.with(which);
        let arr = expect_array(v, &sub)?;
        if arr.len() != 2 {
            return Err(sub.err("endpoint must be a [node, port] pair"));
        }
        let node = NodeId::new(expect_string(&arr[0], &sub)?.to_string())
            .map_err(|e| sub.err(e.to_string()))?;
        let port = expect_string(&arr[1], &sub)?.to_string();
        if port.is_empty() {
            return Err(sub.err("port name must be non-empty"));
        }
        Ok(Endpoint { node, port })
    };
    Ok(Edge {
        source: endpoint(&pair[0], "source")?,
        target: endpoint(&pair[1], "target")?,
    })
}

fn shape_value(shape: &Shape) -> Value {
    Value::Array(
        shape
            .dims()
            .iter()
            .map(|&d| Value::Number((d as u64).into()))
            .collect(),
    )
}

fn usize_array(values: &[usize]) -> Value {
    Value::Array(values.iter().map(|&v| Value::Number((v as u64).into())).collect())
}

fn tensor_value(tensor: &Tensor) -> Result<Value> {
    let mut m = Map::new();
    m.insert("data".into(), nest(tensor.shape(), tensor.data())?);
    m.insert("shape".into(), usize_array(tensor.shape()));
    Ok(Value::Object(m))
}

/// Row-major data rendered as nested arrays following the shape.
fn nest(shape: &[usize], data: &[f64]) -> Result<Value> {
    if shape.len() == 1 {
        let mut out = Vec::with_capacity(data.len());
        for &v in data {
            let n = Number::from_f64(v).ok_or_else(|| {
                Error::InvalidParameter("non-finite value cannot be serialized".into())
            })?;
            out.push(Value::Number(n));
        }
        return Ok(Value::Array(out));
    }
    let chunk = data.len() / shape[0];
    let mut out = Vec::with_capacity(shape[0]);
    for i in 0..shape[0] {
        out.push(nest(&shape[1..], &data[i * chunk..(i + 1) * chunk])?);
    }
    Ok(Value::Array(out))
}

fn tensor_from_value(value: &Value, path: &PathTracker) -> Result<Tensor> {
    let obj = expect_object(value, path)?;
    check_keys(obj, &["data", "shape"], path)?;
    let shape_arr = expect_array(required(obj, "shape", path)?, &path.with("shape"))?;
    let shape: Vec<usize> = shape_arr
        .iter()
        .enumerate()
        .map(|(i, v)| expect_uint(v, &path.with(&format!("shape[{i}]"))))
        .collect::<Result<_>>()?;
    let mut data = Vec::new();
    unnest(
        required(obj, "data", path)?,
        &shape,
        &mut data,
        &path.with("data"),
    )?;
    Tensor::new(shape, data).map_err(|e| path.err(e.to_string()))
}

fn unnest(value: &Value, shape: &[usize], out: &mut Vec<f64>, path: &PathTracker) -> Result<()> {
    let arr = expect_array(value, path)?;
    if shape.is_empty() {
        return Err(path.err("tensor shape must be non-empty"));
    }
    if arr.len() != shape[0] {
        return Err(path.err(format!(
            "expected {} entries at this nesting level, got {}",
            shape[0],
            arr.len()
        )));
    }
    for (i, v) in arr.iter().enumerate() {
        let sub = path.with(&format!("[{i}]"));
        if shape.len() == 1 {
            let n = v
                .as_f64()
                .ok_or_else(|| sub.err("expected a number"))?;
            out.push(n);
        } else {
            unnest(v, &shape[1..], out, &sub)?;
        }
    }
    Ok(())
}

fn shape_from_value(value: &Value, path: &PathTracker) -> Result<Shape> {
    let arr = expect_array(value, path)?;
    let dims: Vec<usize> = arr
        .iter()
        .enumerate()
        .map(|(i, v)| expect_uint(v, &path.with(&format!("[{i}]"))))
        .collect::<Result<_>>()?;
    Shape::new(dims).map_err(|e| path.err(e.to_string()))
}

// -- low-level helpers with location tracking ------------------------------

#[derive(Default, Clone)]
struct PathTracker {
    segments: Vec<String>,
}

impl PathTracker {
    fn push(&mut self, seg: &str) {
        self.segments.push(seg.to_string());
    }

    fn pop(&mut self) {
        self.segments.pop();
    }

    fn with(&self, seg: &str) -> PathTracker {
        let mut p = self.clone();
        p.push(seg);
        p
    }

    fn location(&self) -> String {
        if self.segments.is_empty() {
            "$".to_string()
        } else {
            self.segments.join(".")
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { location: self.location(), message: message.into() }
    }
}

fn expect_object<'a>(value: &'a Value, path: &PathTracker) -> Result<&'a Map<String, Value>> {
    value.as_object().ok_or_else(|| path.err("expected an object"))
}

fn expect_array<'a>(value: &'a Value, path: &PathTracker) -> Result<&'a Vec<Value>> {
    value.as_array().ok_or_else(|| path.err("expected an array"))
}

fn expect_string<'a>(value: &'a Value, path: &PathTracker) -> Result<&'a str> {
    value.as_str().ok_or_else(|| path.err("expected a string"))
}

fn expect_uint(value: &Value, path: &PathTracker) -> Result<usize> {
    value
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| path.err("expected a non-negative integer"))
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str, path: &PathTracker) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| path.err(format!("missing required key `{key}`")))
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], path: &PathTracker) -> Result<()> {
    check_keys_with(obj, allowed, &[], path)
}

fn check_keys_with(
    obj: &Map<String, Value>,
    allowed: &[&str],
    also: &[&str],
    path: &PathTracker,
) -> Result<()> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) && !also.contains(&key.as_str()) {
            return Err(path.err(format!("unknown key `{key}`")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::graph::Shape;

    fn lif_graph() -> Graph {
        Graph::builder()
            .add("in", PrimitiveParams::Input { shape: Shape::new(vec![2]).unwrap() })
            .unwrap()
            .add(
                "lif",
                PrimitiveParams::Lif {
                    tau: Tensor::vector(&[1.0, 2.0]),
                    r: Tensor::vector(&[1.0, 1.5]),
                    v_leak: Tensor::vector(&[0.0, 0.25]),
                    threshold: Tensor::vector(&[1.0, 1.0]),
                },
            )
            .unwrap()
            .add("out", PrimitiveParams::Output { shape: Shape::new(vec![2]).unwrap() })
            .unwrap()
            .wire("in", "lif")
            .unwrap()
            .wire("lif", "out")
            .unwrap()
            .build()
    }

    #[test]
    fn round_trip_identity() {
        let g = lif_graph();
        let bytes = serialize(&g).unwrap();
        let back = deserialize(&bytes).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn canonical_fixpoint() {
        let g = lif_graph();
        let once = serialize(&g).unwrap();
        let twice = serialize(&deserialize(&once).unwrap()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn unknown_version_is_rejected() {
        let g = lif_graph();
        let text = String::from_utf8(serialize(&g).unwrap()).unwrap();
        let bumped = text.replace("\"nir_version\":\"1.0\"", "\"nir_version\":\"99.0\"");
        assert!(matches!(deserialize(bumped.as_bytes()), Err(Error::Version(v)) if v == "99.0"));
    }

    #[test]
    fn parse_error_carries_location() {
        let g = lif_graph();
        let text = String::from_utf8(serialize(&g).unwrap()).unwrap();
        let broken = text.replace("\"kind\":\"lif\"", "\"kind\":\"zap\"");
        match deserialize(broken.as_bytes()) {
            Err(Error::Parse { location, message }) => {
                assert!(location.contains("nodes.lif"), "{location}");
                assert!(message.contains("zap"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn keys_are_sorted_in_output() {
        let bytes = serialize(&lif_graph()).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let edges_pos = text.find("\"edges\"").unwrap();
        let version_pos = text.find("\"nir_version\"").unwrap();
        let nodes_pos = text.find("\"nodes\"").unwrap();
        assert!(edges_pos < version_pos && version_pos < nodes_pos);
        // tensor objects render data before shape
        assert!(text.contains("\"tau\":{\"data\":"), "{text}");
    }

    #[test]
    fn duplicate_edges_surface_in_validation() {
        let g = lif_graph();
        let text = String::from_utf8(serialize(&g).unwrap()).unwrap();
        let edge = "[[\"in\",\"output\"],[\"lif\",\"input\"]]";
        let doubled = text.replace(edge, &format!("{edge},{edge}"));
        let parsed = deserialize(doubled.as_bytes()).unwrap();
        let diags = parsed.validate();
        assert!(diags.iter().any(|d| d.message.contains("duplicate edge")), "{diags:?}");
    }

    #[test]
    fn malformed_json_reports_position() {
        match deserialize(b"{\"nodes\": ") {
            Err(Error::Parse { location, .. }) => assert!(location.contains("line")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
