//! Cross-dialect divergence measurement: time-averaged rate vectors, cosine
//! similarity, event-train alignment, and report emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};

use crate::core::graph::{Graph, NodeId};
use crate::dialects::DialectConfig;
use crate::engine::{run, InputStream, Record, SimulationTrace};
use crate::error::{Error, Result};

/// Per-element time-averaged event rate (events per step) over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector(Vec<f64>);

impl RateVector {
    pub fn from_raw(values: Vec<f64>) -> Self {
        RateVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Average the recorded output events of `node`, excluding the first
    /// `burn_in` steps.
    pub fn from_trace(trace: &SimulationTrace, node: &NodeId, burn_in: usize) -> Result<Self> {
        let series = trace
            .nodes
            .get(node)
            .ok_or_else(|| Error::UnknownNode(node.to_string()))?;
        let window = &series.outputs[burn_in.min(series.outputs.len())..];
        if window.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "no recorded steps for `{node}` after burn-in {burn_in}"
            )));
        }
        let n = window[0].len();
        let mut sums = vec![0.0; n];
        for row in window {
            for (s, &v) in sums.iter_mut().zip(row.iter()) {
                *s += v;
            }
        }
        let steps = window.len() as f64;
        Ok(RateVector(sums.into_iter().map(|s| s / steps).collect()))
    }
}

/// Cosine similarity of two rate vectors. Two silent vectors score 1
/// (identical behavior); one silent vector scores 0.
pub fn cosine_similarity(r1: &RateVector, r2: &RateVector) -> Result<f64> {
    if r1.0.len() != r2.0.len() {
        return Err(Error::LengthMismatch { left: r1.0.len(), right: r2.0.len() });
    }
    if r1.0 == r2.0 {
        // identical behavior scores exactly 1, including two silent vectors
        return Ok(1.0);
    }
    let dot: f64 = r1.0.iter().zip(&r2.0).map(|(a, b)| a * b).sum();
    let n1: f64 = r1.0.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n2: f64 = r2.0.iter().map(|b| b * b).sum::<f64>().sqrt();
    match (n1 == 0.0, n2 == 0.0) {
        (true, true) => Ok(1.0),
        (true, false) | (false, true) => Ok(0.0),
        _ => Ok(dot / (n1 * n2)),
    }
}

/// Alignment summary of two event series.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainComparison {
    pub count_a: f64,
    pub count_b: f64,
    /// Shift applied to `b` that maximizes coincidence with `a`; positive
    /// values advance `b`, undoing a delay.
    pub best_shift: i64,
    pub exact_match_at_shift: bool,
}

/// Compare two event series of equal length, searching shifts in
/// `[-max_shift, max_shift]`. Ties prefer the smallest magnitude, then the
/// smaller shift.
pub fn spike_train_compare(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    max_shift: usize,
) -> Result<TrainComparison> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let total = |series: &[Vec<f64>]| series.iter().flat_map(|r| r.iter()).sum::<f64>();
    let t_len = a.len() as i64;
    let shifted = |series: &[Vec<f64>], t: i64, k: i64, e: usize| -> f64 {
        let idx = t + k;
        if idx < 0 || idx >= t_len {
            0.0
        } else {
            series[idx as usize].get(e).copied().unwrap_or(0.0)
        }
    };

    let k_range: Vec<i64> = (-(max_shift as i64)..=max_shift as i64).collect();
    let mut best = (0i64, f64::NEG_INFINITY);
    for &k in &k_range {
        let mut align = 0.0;
        for (t, row) in a.iter().enumerate() {
            for (e, &av) in row.iter().enumerate() {
                if av != 0.0 {
                    align += av * shifted(b, t as i64, k, e);
                }
            }
        }
        let better = align > best.1
            || (align == best.1 && (k.abs() < best.0.abs() || (k.abs() == best.0.abs() && k < best.0)));
        if better {
            best = (k, align);
        }
    }
    let k = best.0;
    let mut exact = true;
    'outer: for (t, row) in a.iter().enumerate() {
        for (e, &av) in row.iter().enumerate() {
            if av != shifted(b, t as i64, k, e) {
                exact = false;
                break 'outer;
            }
        }
    }
    Ok(TrainComparison {
        count_a: total(a),
        count_b: total(b),
        best_shift: k,
        exact_match_at_shift: exact,
    })
}

/// Pairwise similarity over a labelled set of traces.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Full cross-dialect comparison result.
#[derive(Debug, Clone, PartialEq)]
pub struct DialectComparison {
    pub node: NodeId,
    pub burn_in: usize,
    pub matrix: ComparisonMatrix,
    /// Event-train alignment per (label_a, label_b) pair, a < b.
    pub pairwise: BTreeMap<(String, String), TrainComparison>,
    pub traces: BTreeMap<String, SimulationTrace>,
}

/// Run the graph once per dialect, compute the rate vectors of `node`, and
/// fill the similarity matrix. Assembly order is fixed by the label order
/// given.
pub fn compare_dialects(
    graph: &Graph,
    inputs: &InputStream,
    dialects: &[(String, DialectConfig)],
    node: &NodeId,
    burn_in: usize,
    max_shift: usize,
) -> Result<DialectComparison> {
    if dialects.is_empty() {
        return Err(Error::InvalidParameter("at least one dialect required".into()));
    }
    let record = Record::Nodes([node.clone()].into_iter().collect());
    let mut traces = BTreeMap::new();
    let mut rates = Vec::new();
    for (label, cfg) in dialects {
        let trace = run(graph, cfg, inputs, &record)?;
        rates.push(RateVector::from_trace(&trace, node, burn_in)?);
        traces.insert(label.clone(), trace);
    }

    let n = dialects.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let s = cosine_similarity(&rates[i], &rates[j])?;
            values[i][j] = s;
            values[j][i] = s;
        }
    }

    let mut pairwise = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = &traces[&dialects[i].0].nodes[node].outputs;
            let b = &traces[&dialects[j].0].nodes[node].outputs;
            pairwise.insert(
                (dialects[i].0.clone(), dialects[j].0.clone()),
                spike_train_compare(a, b, max_shift)?,
            );
        }
    }

    Ok(DialectComparison {
        node: node.clone(),
        burn_in,
        matrix: ComparisonMatrix {
            labels: dialects.iter().map(|(l, _)| l.clone()).collect(),
            values,
        },
        pairwise,
        traces,
    })
}

/// Write the comparison artifacts: a CSV matrix, a JSON summary, and a
/// static SVG with the event raster and membrane traces. Skips the SVG when
/// nothing was recorded. Returns the files written.
pub fn emit_report(cmp: &DialectComparison, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let summary_path = dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_vec(&summary_value(cmp)).unwrap())?;
    written.push(summary_path);

    let any_rows = cmp
        .traces
        .values()
        .any(|t| t.nodes.get(&cmp.node).is_some_and(|n| !n.outputs.is_empty()));
    if !any_rows {
        return Ok(written);
    }

    let matrix_path = dir.join("matrix.csv");
    std::fs::write(&matrix_path, matrix_csv(&cmp.matrix))?;
    written.push(matrix_path);

    let svg_path = dir.join("figure.svg");
    std::fs::write(&svg_path, render_svg(cmp))?;
    written.push(svg_path);
    Ok(written)
}

fn matrix_csv(matrix: &ComparisonMatrix) -> String {
    let mut out = String::from("dialect");
    for label in &matrix.labels {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for (label, row) in matrix.labels.iter().zip(&matrix.values) {
        out.push_str(label);
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

fn summary_value(cmp: &DialectComparison) -> Value {
    let mut root = Map::new();
    root.insert("node".into(), Value::String(cmp.node.to_string()));
    root.insert("burn_in".into(), Value::Number((cmp.burn_in as u64).into()));
    root.insert(
        "labels".into(),
        Value::Array(cmp.matrix.labels.iter().map(|l| Value::String(l.clone())).collect()),
    );
    root.insert(
        "matrix".into(),
        Value::Array(
            cmp.matrix
                .values
                .iter()
                .map(|row| {
                    Value::Array(
                        row.iter()
                            .map(|&v| Value::Number(Number::from_f64(v).expect("finite")))
                            .collect(),
                    )
                })
                .collect(),
        ),
    );
    let mut pairs = Map::new();
    for ((a, b), t) in &cmp.pairwise {
        let mut m = Map::new();
        m.insert("count_a".into(), Value::Number(Number::from_f64(t.count_a).unwrap()));
        m.insert("count_b".into(), Value::Number(Number::from_f64(t.count_b).unwrap()));
        m.insert("best_shift".into(), Value::Number(t.best_shift.into()));
        m.insert("exact_match_at_shift".into(), Value::Bool(t.exact_match_at_shift));
        pairs.insert(format!("{a}|{b}"), Value::Object(m));
    }
    root.insert("pairwise".into(), Value::Object(pairs));
    Value::Object(root)
}

/// Hand-emitted SVG: one raster row of event ticks per dialect, membrane
/// line plots underneath when state series were recorded.
fn render_svg(cmp: &DialectComparison) -> String {
    const WIDTH: f64 = 640.0;
    const ROW: f64 = 24.0;
    const PLOT_H: f64 = 120.0;
    const LEFT: f64 = 120.0;

    let steps = cmp.traces.values().map(|t| t.steps).max().unwrap_or(1).max(1);
    let x = |t: usize| LEFT + (WIDTH - LEFT - 10.0) * (t as f64 / steps as f64);

    let labels = &cmp.matrix.labels;
    let raster_h = ROW * labels.len() as f64;
    let any_state = cmp
        .traces
        .values()
        .any(|t| t.nodes.get(&cmp.node).is_some_and(|n| n.states.contains_key("v")));
    let total_h = 40.0 + raster_h + if any_state { PLOT_H + 30.0 } else { 0.0 };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{total_h}\" viewBox=\"0 0 {WIDTH} {total_h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{LEFT}\" y=\"16\" font-family=\"monospace\" font-size=\"12\">events: {}</text>\n",
        cmp.node
    ));

    for (row, label) in labels.iter().enumerate() {
        let y = 30.0 + ROW * row as f64;
        svg.push_str(&format!(
            "<text x=\"4\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\">{label}</text>\n",
            y + 12.0
        ));
        if let Some(trace) = cmp.traces.get(label) {
            if let Some(node) = trace.nodes.get(&cmp.node) {
                for (t, rowv) in node.outputs.iter().enumerate() {
                    if rowv.iter().any(|&v| v != 0.0) {
                        svg.push_str(&format!(
                            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"black\" stroke-width=\"1\"/>\n",
                            x(t),
                            y + 3.0,
                            y + ROW - 6.0
                        ));
                    }
                }
            }
        }
    }

    if any_state {
        let top = 40.0 + raster_h + 10.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for trace in cmp.traces.values() {
            if let Some(rows) = trace.nodes.get(&cmp.node).and_then(|n| n.states.get("v")) {
                for r in rows {
                    for &v in r {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
        }
        if lo >= hi {
            hi = lo + 1.0;
        }
        let y_of = |v: f64| top + PLOT_H - PLOT_H * (v - lo) / (hi - lo);
        let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];
        for (i, label) in labels.iter().enumerate() {
            let Some(rows) = cmp
                .traces
                .get(label)
                .and_then(|t| t.nodes.get(&cmp.node))
                .and_then(|n| n.states.get("v"))
            else {
                continue;
            };
            let pts: Vec<String> = rows
                .iter()
                .enumerate()
                .map(|(t, r)| format!("{:.2},{:.2}", x(t), y_of(r.first().copied().unwrap_or(0.0))))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\"/>\n",
                pts.join(" "),
                colors[i % colors.len()]
            ));
        }
        svg.push_str(&format!(
            "<text x=\"4\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\">membrane</text>\n",
            top + PLOT_H / 2.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(v: &[f64]) -> RateVector {
        RateVector(v.to_vec())
    }

    #[test]
    #[allow(clippy::approx_constant)] // documented golden value
    fn cosine_goldens() {
        let r = rv(&[0.2, 0.5, 0.1]);
        assert_eq!(cosine_similarity(&r, &r).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&rv(&[1.0, 0.0]), &rv(&[0.0, 1.0])).unwrap(), 0.0);
        let s = cosine_similarity(&rv(&[1.0, 0.0]), &rv(&[1.0, 1.0])).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((s - 0.707107).abs() < 1e-6);
    }

    #[test]
    fn cosine_zero_vector_conventions() {
        assert_eq!(cosine_similarity(&rv(&[0.0, 0.0]), &rv(&[0.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&rv(&[0.0, 0.0]), &rv(&[1.0, 0.0])).unwrap(), 0.0);
        assert!(matches!(
            cosine_similarity(&rv(&[1.0]), &rv(&[1.0, 2.0])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn cosine_is_scale_invariant() {
        let r1 = rv(&[0.25, 0.03, 0.99, 0.4]);
        let r2 = rv(&[0.11, 0.62, 0.05, 0.33]);
        let base = cosine_similarity(&r1, &r2).unwrap();
        for alpha in [0.001, 0.5, 7.0, 1234.5] {
            let scaled = rv(&r1.0.iter().map(|v| v * alpha).collect::<Vec<_>>());
            assert!((cosine_similarity(&scaled, &r2).unwrap() - base).abs() < 1e-12);
        }
    }

    fn train(events: &[usize], len: usize) -> Vec<Vec<f64>> {
        (0..len)
            .map(|t| vec![if events.contains(&t) { 1.0 } else { 0.0 }])
            .collect()
    }

    #[test]
    fn identical_trains_align_at_zero() {
        let a = train(&[2, 5, 9, 14], 20);
        let c = spike_train_compare(&a, &a, 5).unwrap();
        assert_eq!(c.count_a, 4.0);
        assert_eq!(c.count_b, 4.0);
        assert_eq!(c.best_shift, 0);
        assert!(c.exact_match_at_shift);
    }

    #[test]
    fn delayed_train_aligns_at_its_delay() {
        let a = train(&[2, 5, 9, 14], 20);
        let b = train(&[3, 6, 10, 15], 20);
        let c = spike_train_compare(&a, &b, 5).unwrap();
        assert_eq!(c.best_shift, 1);
        assert!(c.exact_match_at_shift);
    }

    #[test]
    fn disjoint_trains_never_match_exactly() {
        let a = train(&[0, 8], 16);
        let b = train(&[4, 12], 16);
        for k in 0..3usize {
            let c = spike_train_compare(&a, &b, k).unwrap();
            assert!(!c.exact_match_at_shift, "k={k}");
        }
    }

    #[test]
    fn shift_recovery_over_window() {
        let a = train(&[3, 4, 9, 11, 17], 32);
        for k in -5i64..=5 {
            let b: Vec<Vec<f64>> = (0..32)
                .map(|t| {
                    let src = t as i64 - k;
                    if (0..32).contains(&src) { a[src as usize].clone() } else { vec![0.0] }
                })
                .collect();
            let c = spike_train_compare(&a, &b, 5).unwrap();
            assert_eq!(c.best_shift, k, "k={k}");
        }
    }
}
