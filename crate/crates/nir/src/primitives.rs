//! Parameter bundles and declared semantics for every computational primitive.
//!
//! Each primitive declares a transformation of continuous-time signals. The
//! stateless kinds are pure functions of their input; the stateful kinds carry
//! first-order ODE dynamics plus an optional threshold jump, which the
//! discretization dialects turn into concrete update rules.

use crate::core::graph::Shape;
use crate::core::tensor::Tensor;
use crate::error::{Error, Result};

/// Distinguished port names.
pub const PORT_INPUT: &str = "input";
pub const PORT_OUTPUT: &str = "output";
pub const PORT_RESET: &str = "reset";

/// Primitive kind tags, with their exact serialized names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Input,
    Output,
    Affine,
    Linear,
    Scale,
    Conv,
    Delay,
    Flatten,
    Integrator,
    Li,
    Spike,
    If,
    Lif,
    CubaLif,
}

impl Kind {
    pub const ALL: [Kind; 14] = [
        Kind::Input,
        Kind::Output,
        Kind::Affine,
        Kind::Linear,
        Kind::Scale,
        Kind::Conv,
        Kind::Delay,
        Kind::Flatten,
        Kind::Integrator,
        Kind::Li,
        Kind::Spike,
        Kind::If,
        Kind::Lif,
        Kind::CubaLif,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Input => "input",
            Kind::Output => "output",
            Kind::Affine => "affine",
            Kind::Linear => "linear",
            Kind::Scale => "scale",
            Kind::Conv => "conv",
            Kind::Delay => "delay",
            Kind::Flatten => "flatten",
            Kind::Integrator => "integrator",
            Kind::Li => "li",
            Kind::Spike => "spike",
            Kind::If => "if",
            Kind::Lif => "lif",
            Kind::CubaLif => "cuba_lif",
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(s: &str) -> Option<Kind> {
        Kind::ALL.iter().copied().find(|k| k.as_str() == s)
    }

    /// Stateful neuron kinds carry per-element state and expose a reset port.
    pub fn is_stateful_neuron(self) -> bool {
        matches!(self, Kind::Integrator | Kind::Li | Kind::If | Kind::Lif | Kind::CubaLif)
    }

    /// Kinds that emit threshold events.
    pub fn is_spiking(self) -> bool {
        matches!(self, Kind::Spike | Kind::If | Kind::Lif | Kind::CubaLif)
    }

    /// Kinds the engine must buffer state for (neurons plus Delay).
    pub fn is_stateful(self) -> bool {
        self.is_stateful_neuron() || self == Kind::Delay
    }

    /// Higher-order kinds defined as compositions of lower-level primitives.
    pub fn is_higher_order(self) -> bool {
        matches!(self, Kind::If | Kind::Lif | Kind::CubaLif)
    }
}

/// Parameter bundle for one node; the tag selects the primitive kind.
#[derive(Debug, Clone, PartialEq)]
pub enum PrimitiveParams {
    Input {
        shape: Shape,
    },
    Output {
        shape: Shape,
    },
    /// `W i + b`. Rank-2 weights act as a matrix on rank-1 signals; rank-1
    /// weights act elementwise.
    Affine {
        weight: Tensor,
        bias: Tensor,
    },
    /// `W i`, same rank rules as Affine.
    Linear {
        weight: Tensor,
    },
    /// Elementwise `s i`.
    Scale {
        scale: Tensor,
    },
    /// Cross-correlation with stride, padding, dilation and groups.
    /// `input_shape` is filled in by shape inference when not given.
    Conv {
        weight: Tensor,
        stride: Vec<usize>,
        padding: Vec<usize>,
        dilation: Vec<usize>,
        groups: usize,
        bias: Tensor,
        input_shape: Option<Shape>,
    },
    /// `i(t - tau)` with per-element delays in seconds.
    Delay {
        delay: Tensor,
    },
    Flatten {
        input_shape: Shape,
        start_dim: usize,
        end_dim: usize,
    },
    /// `v' = R i`.
    Integrator {
        r: Tensor,
    },
    /// `tau v' = (v_leak - v) + R i`.
    Li {
        tau: Tensor,
        r: Tensor,
        v_leak: Tensor,
    },
    /// Event where `i >= threshold`.
    Spike {
        threshold: Tensor,
    },
    If {
        r: Tensor,
        threshold: Tensor,
    },
    Lif {
        tau: Tensor,
        r: Tensor,
        v_leak: Tensor,
        threshold: Tensor,
    },
    /// Synapse `tau_syn u' = -u + w_in i` feeding membrane
    /// `tau_mem v' = (v_leak - v) + R u`.
    CubaLif {
        tau_syn: Tensor,
        tau_mem: Tensor,
        r: Tensor,
        v_leak: Tensor,
        w_in: Tensor,
        threshold: Tensor,
    },
}

/// Declared ports of a node.
#[derive(Debug, Clone, PartialEq)]
pub struct PortSignature {
    pub inputs: Vec<(String, Shape)>,
    pub outputs: Vec<(String, Shape)>,
}

impl PortSignature {
    pub fn input_shape(&self, name: &str) -> Option<&Shape> {
        self.inputs.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn output_shape(&self, name: &str) -> Option<&Shape> {
        self.outputs.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

impl PrimitiveParams {
    pub fn kind(&self) -> Kind {
        match self {
            PrimitiveParams::Input { .. } => Kind::Input,
            PrimitiveParams::Output { .. } => Kind::Output,
            PrimitiveParams::Affine { .. } => Kind::Affine,
            PrimitiveParams::Linear { .. } => Kind::Linear,
            PrimitiveParams::Scale { .. } => Kind::Scale,
            PrimitiveParams::Conv { .. } => Kind::Conv,
            PrimitiveParams::Delay { .. } => Kind::Delay,
            PrimitiveParams::Flatten { .. } => Kind::Flatten,
            PrimitiveParams::Integrator { .. } => Kind::Integrator,
            PrimitiveParams::Li { .. } => Kind::Li,
            PrimitiveParams::Spike { .. } => Kind::Spike,
            PrimitiveParams::If { .. } => Kind::If,
            PrimitiveParams::Lif { .. } => Kind::Lif,
            PrimitiveParams::CubaLif { .. } => Kind::CubaLif,
        }
    }

    /// Per-element parameter tensors of stateful and spike kinds. Used to
    /// check that they all share one shape.
    pub fn element_tensors(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            PrimitiveParams::Integrator { r } => vec![("r", r)],
            PrimitiveParams::Li { tau, r, v_leak } => {
                vec![("tau", tau), ("r", r), ("v_leak", v_leak)]
            }
            PrimitiveParams::Spike { threshold } => vec![("threshold", threshold)],
            PrimitiveParams::If { r, threshold } => vec![("r", r), ("threshold", threshold)],
            PrimitiveParams::Lif { tau, r, v_leak, threshold } => vec![
                ("tau", tau),
                ("r", r),
                ("v_leak", v_leak),
                ("threshold", threshold),
            ],
            PrimitiveParams::CubaLif { tau_syn, tau_mem, r, v_leak, w_in, threshold } => vec![
                ("tau_syn", tau_syn),
                ("tau_mem", tau_mem),
                ("r", r),
                ("v_leak", v_leak),
                ("w_in", w_in),
                ("threshold", threshold),
            ],
            PrimitiveParams::Delay { delay } => vec![("delay", delay)],
            _ => vec![],
        }
    }

    /// Validation messages for this bundle; empty when the parameters satisfy
    /// every declared invariant.
    pub fn check(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut finite = |name: &str, t: &Tensor| {
            if !t.all_finite() {
                errs.push(format!("{name} contains non-finite values"));
            }
        };
        match self {
            PrimitiveParams::Input { shape } | PrimitiveParams::Output { shape } => {
                if let Err(e) = shape.check() {
                    errs.push(e.to_string());
                }
            }
            PrimitiveParams::Affine { weight, bias } => {
                finite("weight", weight);
                finite("bias", bias);
                match weight.rank() {
                    1 => {
                        if bias.shape() != weight.shape() {
                            errs.push("elementwise affine bias must match weight shape".into());
                        }
                    }
                    2 => {
                        if bias.shape() != [weight.shape()[0]] {
                            errs.push("affine bias must match the weight's output rows".into());
                        }
                    }
                    r => errs.push(format!("affine weight rank {r} unsupported (1 or 2)")),
                }
            }
            PrimitiveParams::Linear { weight } => {
                finite("weight", weight);
                if !matches!(weight.rank(), 1 | 2) {
                    errs.push(format!("linear weight rank {} unsupported (1 or 2)", weight.rank()));
                }
            }
            PrimitiveParams::Scale { scale } => finite("scale", scale),
            PrimitiveParams::Conv { weight, stride, padding, dilation, groups, bias, input_shape } => {
                finite("weight", weight);
                finite("bias", bias);
                if weight.rank() < 3 {
                    errs.push("conv weight must have rank >= 3 (c_out, c_in, kernel...)".into());
                } else {
                    let spatial = weight.rank() - 2;
                    let c_out = weight.shape()[0];
                    let c_in = weight.shape()[1];
                    if *groups == 0 {
                        errs.push("conv groups must be >= 1".into());
                    } else if c_out % groups != 0 {
                        errs.push("conv output channels must divide by groups".into());
                    }
                    for (name, v) in [("stride", stride), ("padding", padding), ("dilation", dilation)] {
                        if v.len() != spatial {
                            errs.push(format!("conv {name} must have {spatial} entries"));
                        }
                    }
                    if stride.contains(&0) {
                        errs.push("conv stride entries must be >= 1".into());
                    }
                    if dilation.contains(&0) {
                        errs.push("conv dilation entries must be >= 1".into());
                    }
                    if bias.shape() != [c_out] {
                        errs.push("conv bias must have one entry per output channel".into());
                    }
                    if let Some(shape) = input_shape {
                        if let Err(e) = shape.check() {
                            errs.push(e.to_string());
                        } else if shape.dims().len() != spatial + 1 {
                            errs.push("conv input shape rank must be channels + kernel rank".into());
                        } else if shape.dims()[0] != c_in * groups {
                            errs.push(format!(
                                "conv input channels {} must equal c_in * groups = {}",
                                shape.dims()[0],
                                c_in * groups
                            ));
                        }
                    }
                }
            }
            PrimitiveParams::Delay { delay } => {
                finite("delay", delay);
                if delay.data().iter().any(|&d| d < 0.0) {
                    errs.push("delay must be non-negative".into());
                }
            }
            PrimitiveParams::Flatten { input_shape, start_dim, end_dim } => {
                if let Err(e) = input_shape.check() {
                    errs.push(e.to_string());
                }
                let rank = input_shape.dims().len();
                if start_dim > end_dim || *end_dim >= rank {
                    errs.push(format!(
                        "flatten dims {start_dim}..={end_dim} out of range for rank {rank}"
                    ));
                }
            }
            PrimitiveParams::Integrator { r } => finite("r", r),
            PrimitiveParams::Li { tau, r, v_leak } => {
                finite("tau", tau);
                finite("r", r);
                finite("v_leak", v_leak);
                if tau.data().iter().any(|&t| t <= 0.0) {
                    errs.push("tau must be strictly positive".into());
                }
            }
            PrimitiveParams::Spike { threshold } => finite("threshold", threshold),
            PrimitiveParams::If { r, threshold } => {
                finite("r", r);
                finite("threshold", threshold);
            }
            PrimitiveParams::Lif { tau, r, v_leak, threshold } => {
                finite("tau", tau);
                finite("r", r);
                finite("v_leak", v_leak);
                finite("threshold", threshold);
                if tau.data().iter().any(|&t| t <= 0.0) {
                    errs.push("tau must be strictly positive".into());
                }
            }
            PrimitiveParams::CubaLif { tau_syn, tau_mem, r, v_leak, w_in, threshold } => {
                finite("tau_syn", tau_syn);
                finite("tau_mem", tau_mem);
                finite("r", r);
                finite("v_leak", v_leak);
                finite("w_in", w_in);
                finite("threshold", threshold);
                if tau_syn.data().iter().any(|&t| t <= 0.0) {
                    errs.push("tau_syn must be strictly positive".into());
                }
                if tau_mem.data().iter().any(|&t| t <= 0.0) {
                    errs.push("tau_mem must be strictly positive".into());
                }
            }
        }
        let elems = self.element_tensors();
        if let Some((first_name, first)) = elems.first() {
            for (name, t) in &elems[1..] {
                if t.shape() != first.shape() {
                    errs.push(format!(
                        "per-element tensors disagree: {first_name} {:?} vs {name} {:?}",
                        first.shape(),
                        t.shape()
                    ));
                }
            }
        }
        errs
    }
}

/// Derive the declared ports of a parameter bundle.
///
/// Stateful neuron kinds expose `input` and `reset` inputs and one `output`.
/// Errors only when the bundle is incompletely specified (a Conv whose input
/// shape has not been inferred yet).
pub fn port_signature(params: &PrimitiveParams) -> Result<PortSignature> {
    let sig = |ins: Vec<(String, Shape)>, outs: Vec<(String, Shape)>| PortSignature {
        inputs: ins,
        outputs: outs,
    };
    let one_in = |s: Shape| vec![(PORT_INPUT.to_string(), s)];
    let one_out = |s: Shape| vec![(PORT_OUTPUT.to_string(), s)];
    Ok(match params {
        PrimitiveParams::Input { shape } => sig(vec![], one_out(shape.clone())),
        PrimitiveParams::Output { shape } => sig(one_in(shape.clone()), vec![]),
        PrimitiveParams::Affine { weight, .. } | PrimitiveParams::Linear { weight } => {
            let (in_shape, out_shape) = match weight.rank() {
                2 => (
                    Shape::new(vec![weight.shape()[1]])?,
                    Shape::new(vec![weight.shape()[0]])?,
                ),
                _ => (
                    Shape::new(weight.shape().to_vec())?,
                    Shape::new(weight.shape().to_vec())?,
                ),
            };
            sig(one_in(in_shape), one_out(out_shape))
        }
        PrimitiveParams::Scale { scale } => {
            let s = Shape::new(scale.shape().to_vec())?;
            sig(one_in(s.clone()), one_out(s))
        }
        PrimitiveParams::Conv { input_shape, .. } => {
            let input_shape = input_shape.clone().ok_or_else(|| {
                Error::InvalidParameter(
                    "conv input shape not set; run shape inference first".into(),
                )
            })?;
            let out = conv_output_shape(params, &input_shape)?;
            sig(one_in(input_shape), one_out(out))
        }
        PrimitiveParams::Delay { delay } => {
            let s = Shape::new(delay.shape().to_vec())?;
            sig(one_in(s.clone()), one_out(s))
        }
        PrimitiveParams::Flatten { input_shape, start_dim, end_dim } => {
            let out = flatten_output_shape(input_shape, *start_dim, *end_dim)?;
            sig(one_in(input_shape.clone()), one_out(out))
        }
        PrimitiveParams::Spike { threshold } => {
            let s = Shape::new(threshold.shape().to_vec())?;
            sig(one_in(s.clone()), one_out(s))
        }
        _ => {
            // Stateful neuron kinds: per-element shape shared by all tensors.
            let elems = params.element_tensors();
            let s = Shape::new(elems[0].1.shape().to_vec())?;
            sig(
                vec![
                    (PORT_INPUT.to_string(), s.clone()),
                    (PORT_RESET.to_string(), s.clone()),
                ],
                one_out(s),
            )
        }
    })
}

/// Output shape of a Flatten over `input_shape`, collapsing `start..=end`.
pub fn flatten_output_shape(input_shape: &Shape, start: usize, end: usize) -> Result<Shape> {
    let dims = input_shape.dims();
    if start > end || end >= dims.len() {
        return Err(Error::InvalidParameter(format!(
            "flatten dims {start}..={end} out of range for rank {}",
            dims.len()
        )));
    }
    let mut out = Vec::with_capacity(dims.len() - (end - start));
    out.extend_from_slice(&dims[..start]);
    out.push(dims[start..=end].iter().product());
    out.extend_from_slice(&dims[end + 1..]);
    Shape::new(out)
}

/// Output shape of a Conv over the given input shape.
pub fn conv_output_shape(params: &PrimitiveParams, input_shape: &Shape) -> Result<Shape> {
    let PrimitiveParams::Conv { weight, stride, padding, dilation, groups, .. } = params else {
        return Err(Error::InvalidParameter("not a conv bundle".into()));
    };
    let spatial = weight.rank() - 2;
    let dims = input_shape.dims();
    if dims.len() != spatial + 1 {
        return Err(Error::ShapeMismatch(format!(
            "conv input rank {} incompatible with kernel rank {spatial}",
            dims.len()
        )));
    }
    let c_in = weight.shape()[1];
    if dims[0] != c_in * groups {
        return Err(Error::ShapeMismatch(format!(
            "conv input channels {} != c_in * groups = {}",
            dims[0],
            c_in * groups
        )));
    }
    let mut out = vec![weight.shape()[0]];
    for axis in 0..spatial {
        let k = weight.shape()[2 + axis];
        let span = dilation[axis] * (k - 1) + 1;
        let padded = dims[1 + axis] + 2 * padding[axis];
        if padded < span {
            return Err(Error::ShapeMismatch(format!(
                "conv kernel span {span} exceeds padded extent {padded} on axis {axis}"
            )));
        }
        out.push((padded - span) / stride[axis] + 1);
    }
    Shape::new(out)
}

/// Right-hand side of the declared ODE for state-bearing kinds.
///
/// `state` carries one tensor per state variable (synaptic current first for
/// CuBa-LIF); the result has the same arity.
pub fn continuous_rhs(
    params: &PrimitiveParams,
    state: &[&Tensor],
    input: &Tensor,
) -> Result<Vec<Tensor>> {
    let expect_state = |n: usize| -> Result<()> {
        if state.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} state tensors, got {}",
                state.len()
            )));
        }
        Ok(())
    };
    match params {
        PrimitiveParams::Integrator { r } | PrimitiveParams::If { r, .. } => {
            expect_state(1)?;
            Ok(vec![r.zip_map(input, |r, i| r * i)?])
        }
        PrimitiveParams::Li { tau, r, v_leak } | PrimitiveParams::Lif { tau, r, v_leak, .. } => {
            expect_state(1)?;
            let v = state[0];
            let mut dv = Vec::with_capacity(v.len());
            check_same_shape(v, tau)?;
            check_same_shape(input, tau)?;
            for idx in 0..v.len() {
                dv.push(
                    ((v_leak.get(idx) - v.get(idx)) + r.get(idx) * input.get(idx)) / tau.get(idx),
                );
            }
            Ok(vec![Tensor::new(v.shape().to_vec(), dv)?])
        }
        PrimitiveParams::CubaLif { tau_syn, tau_mem, r, v_leak, w_in, .. } => {
            expect_state(2)?;
            let (u, v) = (state[0], state[1]);
            check_same_shape(u, tau_syn)?;
            check_same_shape(v, tau_syn)?;
            check_same_shape(input, tau_syn)?;
            let mut du = Vec::with_capacity(u.len());
            let mut dv = Vec::with_capacity(v.len());
            for idx in 0..u.len() {
                du.push((-u.get(idx) + w_in.get(idx) * input.get(idx)) / tau_syn.get(idx));
                dv.push(
                    ((v_leak.get(idx) - v.get(idx)) + r.get(idx) * u.get(idx)) / tau_mem.get(idx),
                );
            }
            Ok(vec![
                Tensor::new(u.shape().to_vec(), du)?,
                Tensor::new(v.shape().to_vec(), dv)?,
            ])
        }
        other => Err(Error::NonOdeKind(other.kind().as_str().into())),
    }
}

fn check_same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Apply a stateless primitive to one input sample.
pub fn stateless_apply(params: &PrimitiveParams, input: &Tensor) -> Result<Tensor> {
    match params {
        PrimitiveParams::Affine { weight, bias } => {
            let wi = linear_apply(weight, input)?;
            wi.zip_map(bias, |a, b| a + b)
        }
        PrimitiveParams::Linear { weight } => linear_apply(weight, input),
        PrimitiveParams::Scale { scale } => scale.zip_map(input, |s, i| s * i),
        PrimitiveParams::Conv { .. } => conv_apply(params, input),
        PrimitiveParams::Flatten { input_shape, start_dim, end_dim } => {
            if input.shape() != input_shape.dims() {
                return Err(Error::ShapeMismatch(format!(
                    "flatten input {:?} != declared {:?}",
                    input.shape(),
                    input_shape.dims()
                )));
            }
            let out = flatten_output_shape(input_shape, *start_dim, *end_dim)?;
            Tensor::new(out.dims().to_vec(), input.data().to_vec())
        }
        PrimitiveParams::Spike { threshold } => {
            threshold.zip_map(input, |th, i| if i >= th { 1.0 } else { 0.0 })
        }
        other => Err(Error::NonStatelessKind(other.kind().as_str().into())),
    }
}

fn linear_apply(weight: &Tensor, input: &Tensor) -> Result<Tensor> {
    match weight.rank() {
        2 => {
            let (rows, cols) = (weight.shape()[0], weight.shape()[1]);
            if input.shape() != [cols] {
                return Err(Error::ShapeMismatch(format!(
                    "matrix {rows}x{cols} applied to input {:?}",
                    input.shape()
                )));
            }
            let mut out = Vec::with_capacity(rows);
            for row in 0..rows {
                let mut acc = 0.0;
                for col in 0..cols {
                    acc += weight.get(row * cols + col) * input.get(col);
                }
                out.push(acc);
            }
            Tensor::new(vec![rows], out)
        }
        _ => weight.zip_map(input, |w, i| w * i),
    }
}

fn conv_apply(params: &PrimitiveParams, input: &Tensor) -> Result<Tensor> {
    let PrimitiveParams::Conv { weight, stride, padding, dilation, groups, bias, .. } = params
    else {
        unreachable!()
    };
    let input_shape = Shape::new(input.shape().to_vec())?;
    let out_shape = conv_output_shape(params, &input_shape)?;
    let spatial = weight.rank() - 2;
    let c_in = weight.shape()[1];
    let c_out = weight.shape()[0];
    let c_out_per_group = c_out / groups;
    let in_spatial = &input.shape()[1..];
    let out_spatial = &out_shape.dims()[1..];
    let kernel_spatial = &weight.shape()[2..];

    let in_strides = row_major_strides(input.shape());
    let w_strides = row_major_strides(weight.shape());
    let mut out = vec![0.0; out_shape.dims().iter().product()];

    let mut out_pos = vec![0usize; spatial];
    let mut ker_pos = vec![0usize; spatial];
    let mut out_flat = 0usize;
    for oc in 0..c_out {
        let group = oc / c_out_per_group;
        out_pos.iter_mut().for_each(|p| *p = 0);
        loop {
            let mut acc = bias.get(oc);
            for ic in 0..c_in {
                let in_channel = group * c_in + ic;
                ker_pos.iter_mut().for_each(|p| *p = 0);
                loop {
                    // Input coordinate for this kernel tap; skip taps landing
                    // in the zero padding.
                    let mut in_flat = in_channel * in_strides[0];
                    let mut inside = true;
                    for axis in 0..spatial {
                        let coord = (out_pos[axis] * stride[axis] + ker_pos[axis] * dilation[axis])
                            as isize
                            - padding[axis] as isize;
                        if coord < 0 || coord as usize >= in_spatial[axis] {
                            inside = false;
                            break;
                        }
                        in_flat += coord as usize * in_strides[1 + axis];
                    }
                    if inside {
                        let mut w_flat = oc * w_strides[0] + ic * w_strides[1];
                        for axis in 0..spatial {
                            w_flat += ker_pos[axis] * w_strides[2 + axis];
                        }
                        acc += weight.get(w_flat) * input.get(in_flat);
                    }
                    if !advance(&mut ker_pos, kernel_spatial) {
                        break;
                    }
                }
            }
            out[out_flat] = acc;
            out_flat += 1;
            if !advance(&mut out_pos, out_spatial) {
                break;
            }
        }
    }
    Tensor::new(out_shape.dims().to_vec(), out)
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

/// Odometer increment over a multi-index; false when it wraps to zero.
fn advance(pos: &mut [usize], extents: &[usize]) -> bool {
    for axis in (0..pos.len()).rev() {
        pos[axis] += 1;
        if pos[axis] < extents[axis] {
            return true;
        }
        pos[axis] = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(dims: &[usize]) -> Shape {
        Shape::new(dims.to_vec()).unwrap()
    }

    #[test]
    fn lif_signature_has_input_reset_output() {
        let params = PrimitiveParams::Lif {
            tau: Tensor::filled(vec![4], 1.0),
            r: Tensor::filled(vec![4], 1.0),
            v_leak: Tensor::zeros(vec![4]),
            threshold: Tensor::filled(vec![4], 1.0),
        };
        let sig = port_signature(&params).unwrap();
        assert_eq!(sig.inputs.len(), 2);
        assert_eq!(sig.input_shape(PORT_INPUT).unwrap().dims(), &[4]);
        assert_eq!(sig.input_shape(PORT_RESET).unwrap().dims(), &[4]);
        assert_eq!(sig.output_shape(PORT_OUTPUT).unwrap().dims(), &[4]);
    }

    #[test]
    fn affine_matrix_signature() {
        let params = PrimitiveParams::Affine {
            weight: Tensor::matrix(3, 2, vec![1.0; 6]).unwrap(),
            bias: Tensor::zeros(vec![3]),
        };
        let sig = port_signature(&params).unwrap();
        assert_eq!(sig.input_shape(PORT_INPUT).unwrap().dims(), &[2]);
        assert_eq!(sig.output_shape(PORT_OUTPUT).unwrap().dims(), &[3]);
    }

    #[test]
    fn input_signature_has_no_inputs() {
        let params = PrimitiveParams::Input { shape: shape(&[5]) };
        let sig = port_signature(&params).unwrap();
        assert!(sig.inputs.is_empty());
        assert_eq!(sig.output_shape(PORT_OUTPUT).unwrap().dims(), &[5]);
    }

    #[test]
    fn li_rhs_matches_declared_equation() {
        // v = 0, v_leak = 0, R = 1, tau = 2, i = 1 gives dv = 0.5
        let params = PrimitiveParams::Li {
            tau: Tensor::vector(&[2.0]),
            r: Tensor::vector(&[1.0]),
            v_leak: Tensor::vector(&[0.0]),
        };
        let v = Tensor::vector(&[0.0]);
        let dv = continuous_rhs(&params, &[&v], &Tensor::vector(&[1.0])).unwrap();
        assert_eq!(dv[0].get(0), 0.5);
    }

    #[test]
    fn integrator_rhs_scales_by_r() {
        let params = PrimitiveParams::Integrator { r: Tensor::vector(&[2.0]) };
        let v = Tensor::vector(&[0.0]);
        let dv = continuous_rhs(&params, &[&v], &Tensor::vector(&[3.0])).unwrap();
        assert_eq!(dv[0].get(0), 6.0);
    }

    #[test]
    fn li_equilibrium_has_zero_derivative() {
        let params = PrimitiveParams::Li {
            tau: Tensor::vector(&[3.0]),
            r: Tensor::vector(&[2.0]),
            v_leak: Tensor::vector(&[0.5]),
        };
        // v = v_leak + R*i is the fixed point.
        let v = Tensor::vector(&[0.5 + 2.0 * 1.5]);
        let dv = continuous_rhs(&params, &[&v], &Tensor::vector(&[1.5])).unwrap();
        assert_eq!(dv[0].get(0), 0.0);
    }

    #[test]
    fn rhs_rejects_stateless_kinds() {
        let params = PrimitiveParams::Scale { scale: Tensor::vector(&[1.0]) };
        let v = Tensor::vector(&[0.0]);
        assert!(matches!(
            continuous_rhs(&params, &[&v], &Tensor::vector(&[1.0])),
            Err(Error::NonOdeKind(_))
        ));
    }

    #[test]
    fn affine_apply_golden() {
        let params = PrimitiveParams::Affine {
            weight: Tensor::matrix(1, 1, vec![2.0]).unwrap(),
            bias: Tensor::vector(&[1.0]),
        };
        let out = stateless_apply(&params, &Tensor::vector(&[3.0])).unwrap();
        assert_eq!(out.data(), &[7.0]);
    }

    #[test]
    fn spike_thresholds_at_geq() {
        let params = PrimitiveParams::Spike { threshold: Tensor::vector(&[1.0, 1.0]) };
        let out = stateless_apply(&params, &Tensor::vector(&[1.5, 0.5])).unwrap();
        assert_eq!(out.data(), &[1.0, 0.0]);
        // exact threshold fires
        let at = stateless_apply(&params, &Tensor::vector(&[1.0, 1.0])).unwrap();
        assert_eq!(at.data(), &[1.0, 1.0]);
    }

    #[test]
    fn unit_scale_is_identity() {
        let params = PrimitiveParams::Scale { scale: Tensor::vector(&[1.0, 1.0]) };
        let input = Tensor::vector(&[0.25, -3.5]);
        let out = stateless_apply(&params, &input).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn linear_equals_affine_with_zero_bias() {
        let w = Tensor::matrix(2, 3, vec![0.5, -1.0, 2.0, 0.0, 3.5, -0.25]).unwrap();
        let linear = PrimitiveParams::Linear { weight: w.clone() };
        let affine = PrimitiveParams::Affine { weight: w, bias: Tensor::zeros(vec![2]) };
        let input = Tensor::vector(&[1.25, -0.5, 3.0]);
        assert_eq!(
            stateless_apply(&linear, &input).unwrap(),
            stateless_apply(&affine, &input).unwrap()
        );
    }

    #[test]
    fn flatten_collapses_middle_dims() {
        let params = PrimitiveParams::Flatten {
            input_shape: shape(&[2, 3, 4]),
            start_dim: 1,
            end_dim: 2,
        };
        let sig = port_signature(&params).unwrap();
        assert_eq!(sig.output_shape(PORT_OUTPUT).unwrap().dims(), &[2, 12]);
    }

    #[test]
    fn conv_output_shape_same_padding() {
        let params = PrimitiveParams::Conv {
            weight: Tensor::zeros(vec![4, 1, 3, 3]),
            stride: vec![1, 1],
            padding: vec![1, 1],
            dilation: vec![1, 1],
            groups: 1,
            bias: Tensor::zeros(vec![4]),
            input_shape: Some(shape(&[1, 8, 8])),
        };
        let sig = port_signature(&params).unwrap();
        assert_eq!(sig.output_shape(PORT_OUTPUT).unwrap().dims(), &[4, 8, 8]);
    }

    #[test]
    fn one_by_one_conv_equals_per_pixel_linear() {
        // 1x1 kernel, unit stride, zero padding, one group.
        let w = vec![0.5, -1.5, 2.0, 0.25, 1.0, -0.75]; // c_out=3, c_in=2
        let params = PrimitiveParams::Conv {
            weight: Tensor::new(vec![3, 2, 1, 1], w.clone()).unwrap(),
            stride: vec![1, 1],
            padding: vec![0, 0],
            dilation: vec![1, 1],
            groups: 1,
            bias: Tensor::zeros(vec![3]),
            input_shape: Some(shape(&[2, 2, 2])),
        };
        let input =
            Tensor::new(vec![2, 2, 2], vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 2.5, -2.0]).unwrap();
        let out = conv_apply(&params, &input).unwrap();
        let matrix = PrimitiveParams::Linear {
            weight: Tensor::matrix(3, 2, w).unwrap(),
        };
        for pix in 0..4 {
            let per_pixel = Tensor::vector(&[input.get(pix), input.get(4 + pix)]);
            let expected = stateless_apply(&matrix, &per_pixel).unwrap();
            for oc in 0..3 {
                assert_eq!(out.get(oc * 4 + pix), expected.get(oc));
            }
        }
    }

    #[test]
    fn grouped_conv_separates_channels() {
        // groups=2 with one input channel per group: each output channel
        // sees only its own group's input
        let params = PrimitiveParams::Conv {
            weight: Tensor::new(vec![2, 1, 1, 1], vec![3.0, -2.0]).unwrap(),
            stride: vec![1, 1],
            padding: vec![0, 0],
            dilation: vec![1, 1],
            groups: 2,
            bias: Tensor::vector(&[0.5, 0.25]),
            input_shape: Some(shape(&[2, 1, 1])),
        };
        let input = Tensor::new(vec![2, 1, 1], vec![4.0, 7.0]).unwrap();
        let out = stateless_apply(&params, &input).unwrap();
        assert_eq!(out.data(), &[3.0 * 4.0 + 0.5, -2.0 * 7.0 + 0.25]);
    }

    #[test]
    fn li_rhs_is_affine_in_state_and_input() {
        // Superposition: f(a*x1 + b*x2) - f(0) == a*(f(x1)-f(0)) + b*(f(x2)-f(0)).
        let params = PrimitiveParams::Li {
            tau: Tensor::vector(&[1.7]),
            r: Tensor::vector(&[2.3]),
            v_leak: Tensor::vector(&[0.4]),
        };
        let f = |v: f64, i: f64| {
            let vt = Tensor::vector(&[v]);
            continuous_rhs(&params, &[&vt], &Tensor::vector(&[i])).unwrap()[0].get(0)
        };
        let f0 = f(0.0, 0.0);
        let cases = [(0.3, -1.2), (-0.9, 0.7), (2.2, 3.1)];
        for (v1, i1) in cases {
            for (v2, i2) in cases {
                let (a, b) = (1.5, -0.25);
                let lhs = f(a * v1 + b * v2, a * i1 + b * i2) - f0;
                let rhs = a * (f(v1, i1) - f0) + b * (f(v2, i2) - f0);
                assert!((lhs - rhs).abs() < 1e-12, "lhs {lhs} rhs {rhs}");
            }
        }
    }
}
