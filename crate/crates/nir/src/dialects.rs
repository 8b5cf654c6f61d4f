//! Discretization dialects: integrator choice, reset discretization,
//! threshold ordering, spike emission delay, and numeric representation,
//! plus the parameter translations that map continuous parameters onto each
//! backend's native update rule. See `docs/dialects.md` for the catalogue.

use std::collections::VecDeque;

use crate::core::tensor::Tensor;
use crate::error::{Error, Result};
use crate::primitives::PrimitiveParams;

/// How membrane and synapse decay is discretized.
#[derive(Debug, Clone, PartialEq)]
pub enum Decay {
    /// `v' = (1 - dt/tau) v + (dt/tau) v_leak + (dt/tau) R i`
    ForwardEuler,
    /// `v' = a v + (1-a) v_leak + (1-a) R i` with `a = exp(-dt/tau)`, so the
    /// constant-input fixed point matches the exact solution's asymptote.
    ExponentialEuler,
    /// Integer right-shift decay with a unit-decay floor. Shift counts are
    /// derived per element from `tau` when not set explicitly.
    Bitshift { d_mem: Option<u32>, d_syn: Option<u32> },
}

/// Post-spike state update.
#[derive(Debug, Clone, PartialEq)]
pub enum Reset {
    /// State jumps to zero.
    Hard,
    /// State keeps the overshoot residue: `v - theta_reset`. `None` uses the
    /// node's own threshold per element.
    Subtractive { theta_reset: Option<f64> },
}

/// When the firing condition is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdOrder {
    /// Check after the full membrane update.
    PostUpdate,
    /// Check after integrating the input but before the leak is applied to
    /// the integrated value, which reaches threshold earlier.
    PreLeak,
}

/// Numeric representation of states and weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Numeric {
    Float64,
    Fixed {
        state_bits: u32,
        weight_bits: u32,
        accumulator_bits: u32,
    },
}

/// A complete discretization policy.
#[derive(Debug, Clone, PartialEq)]
pub struct DialectConfig {
    /// Timestep in seconds.
    pub dt: f64,
    pub decay: Decay,
    pub reset: Reset,
    pub threshold_order: ThresholdOrder,
    /// Emitted events are the threshold crossings of this many steps earlier.
    pub spike_delay_steps: usize,
    pub numeric: Numeric,
}

impl DialectConfig {
    pub fn forward_euler(dt: f64) -> Self {
        DialectConfig {
            dt,
            decay: Decay::ForwardEuler,
            reset: Reset::Subtractive { theta_reset: None },
            threshold_order: ThresholdOrder::PostUpdate,
            spike_delay_steps: 0,
            numeric: Numeric::Float64,
        }
    }

    pub fn exponential_euler(dt: f64) -> Self {
        DialectConfig { decay: Decay::ExponentialEuler, ..Self::forward_euler(dt) }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if matches!(self.decay, Decay::Bitshift { .. }) && !matches!(self.numeric, Numeric::Fixed { .. })
        {
            return Err(Error::InvalidParameter(
                "bitshift decay requires fixed numeric representation".into(),
            ));
        }
        Ok(())
    }

    /// Compact descriptor recorded into traces.
    pub fn describe(&self) -> String {
        let decay = match &self.decay {
            Decay::ForwardEuler => "forward_euler".to_string(),
            Decay::ExponentialEuler => "exponential_euler".to_string(),
            Decay::Bitshift { d_mem, d_syn } => format!(
                "bitshift(d_mem={},d_syn={})",
                d_mem.map_or("auto".into(), |d| d.to_string()),
                d_syn.map_or("auto".into(), |d| d.to_string())
            ),
        };
        let reset = match &self.reset {
            Reset::Hard => "hard".to_string(),
            Reset::Subtractive { theta_reset: None } => "subtractive".to_string(),
            Reset::Subtractive { theta_reset: Some(t) } => format!("subtractive({t})"),
        };
        let order = match self.threshold_order {
            ThresholdOrder::PostUpdate => "post_update",
            ThresholdOrder::PreLeak => "pre_leak",
        };
        let numeric = match &self.numeric {
            Numeric::Float64 => "float64".to_string(),
            Numeric::Fixed { state_bits, weight_bits, accumulator_bits } => {
                format!("fixed({state_bits},{weight_bits},{accumulator_bits})")
            }
        };
        format!("{decay}/{order}/{reset}/delay{}/{numeric}", self.spike_delay_steps)
    }
}

/// Signed range of a two's-complement width.
pub fn int_range(bits: u32) -> (i64, i64) {
    let hi = (1i64 << (bits - 1)) - 1;
    (-hi - 1, hi)
}

/// Round to integer and saturate to `bits`; counts saturations.
fn quantize_state(numeric: &Numeric, v: f64, overflow: &mut u64) -> f64 {
    match numeric {
        Numeric::Float64 => v,
        Numeric::Fixed { state_bits, .. } => {
            let (lo, hi) = int_range(*state_bits);
            let r = v.round_ties_even();
            if r < lo as f64 {
                *overflow += 1;
                lo as f64
            } else if r > hi as f64 {
                *overflow += 1;
                hi as f64
            } else {
                r
            }
        }
    }
}

/// One right-shift decay step with the unit-decay floor, applied to the
/// magnitude with the sign restored so states decay toward zero from both
/// sides and zero is a fixed point.
pub fn bitshift_decay(value: i64, shift: u32) -> i64 {
    if value == 0 {
        return 0;
    }
    let mag = value.unsigned_abs();
    let dec = mag >> shift.min(63);
    let new_mag = if dec > 0 { mag - dec } else { mag - 1 };
    if value < 0 {
        -(new_mag as i64)
    } else {
        new_mag as i64
    }
}

/// Shift count approximating `log2(tau/dt)`, clamped to `[0, state_bits-1]`.
pub fn xylo_decay_shift(tau: f64, dt: f64, state_bits: u32) -> Result<u32> {
    if dt <= 0.0 || tau <= 0.0 {
        return Err(Error::InvalidParameter("tau and dt must be positive".into()));
    }
    let d = (tau / dt).log2().round();
    let max = (state_bits - 1) as f64;
    Ok(d.clamp(0.0, max) as u32)
}

// -- membrane update primitives ---------------------------------------------

/// Leak factor, leak-source coupling and input coupling for one element.
/// Forward Euler: `(1-dt/tau, dt/tau, dt/tau)`; exponential:
/// `(a, 1-a, 1-a)` with `a = exp(-dt/tau)`.
fn decay_coeffs(decay: &Decay, dt: f64, tau: f64) -> (f64, f64, f64) {
    match decay {
        Decay::ForwardEuler => {
            let lam = dt / tau;
            (1.0 - lam, lam, lam)
        }
        Decay::ExponentialEuler | Decay::Bitshift { .. } => {
            let a = (-dt / tau).exp();
            (a, 1.0 - a, 1.0 - a)
        }
    }
}

/// Leaky membrane update for one element: returns `(v_full, input_term)`.
fn li_update(decay: &Decay, dt: f64, tau: f64, r: f64, v_leak: f64, v: f64, i: f64) -> (f64, f64) {
    let (keep, leak, gain) = decay_coeffs(decay, dt, tau);
    let term = (gain * r) * i;
    (keep * v + leak * v_leak + term, term)
}

/// Integrator update for one element; no leak, both Euler flavors coincide.
fn integrator_update(dt: f64, r: f64, v: f64, i: f64) -> (f64, f64) {
    let term = (dt * r) * i;
    (v + term, term)
}

/// Value a reset port delivers for crossings `s` under a reset mode:
/// the subtractive feedback weight `-theta_reset` applied to the event, or
/// the event itself as a marker for hard resets.
pub fn reset_feedback(reset: &Reset, theta_thr: f64, s: f64) -> f64 {
    match reset {
        Reset::Subtractive { theta_reset } => (-theta_reset.unwrap_or(theta_thr)) * s,
        Reset::Hard => s,
    }
}

/// Apply an arriving reset value to one state element. Subtractive resets
/// add the (negatively weighted) arriving value; hard resets zero the
/// element whenever anything nonzero arrives.
pub fn apply_reset_value(reset: &Reset, v: f64, arriving: f64) -> f64 {
    match reset {
        Reset::Subtractive { .. } => v + arriving,
        Reset::Hard => {
            if arriving != 0.0 {
                0.0
            } else {
                v
            }
        }
    }
}

// -- stateful step functions -------------------------------------------------

/// State of a single-membrane node (Integrator, LI, IF, LIF), including the
/// queue of crossings pending emission under a spike delay.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneState {
    pub v: Tensor,
    queued: VecDeque<Tensor>,
}

impl MembraneState {
    pub fn new(v: Tensor, cfg: &DialectConfig) -> Self {
        let queued = (0..cfg.spike_delay_steps)
            .map(|_| Tensor::zeros(v.shape().to_vec()))
            .collect();
        MembraneState { v, queued }
    }
}

/// State of a CuBa-LIF node: synaptic current and membrane.
#[derive(Debug, Clone, PartialEq)]
pub struct CubaState {
    pub u: Tensor,
    pub v: Tensor,
    queued: VecDeque<Tensor>,
}

impl CubaState {
    pub fn new(u: Tensor, v: Tensor, cfg: &DialectConfig) -> Self {
        let queued = (0..cfg.spike_delay_steps)
            .map(|_| Tensor::zeros(v.shape().to_vec()))
            .collect();
        CubaState { u, v, queued }
    }
}

/// Result of one stateful step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEvents {
    /// Events emitted this step (crossings of `spike_delay_steps` ago).
    pub emitted: Tensor,
    /// Saturation count in fixed mode.
    pub overflow: u64,
}

fn push_emission(queued: &mut VecDeque<Tensor>, crossings: Tensor, delay: usize) -> Tensor {
    if delay == 0 {
        return crossings;
    }
    queued.push_back(crossings);
    queued.pop_front().expect("queue seeded with `delay` entries")
}

/// One leaky-integrator step (no threshold). Returns the new state; the
/// pre-reset membrane is the node's output signal.
pub fn step_li(
    params: &PrimitiveParams,
    cfg: &DialectConfig,
    v: &Tensor,
    input: &Tensor,
) -> Result<(Tensor, u64)> {
    let PrimitiveParams::Li { tau, r, v_leak } = params else {
        return Err(Error::InvalidParameter("step_li expects li parameters".into()));
    };
    li_membrane_step(tau, r, v_leak, cfg, v, input)
}

fn li_membrane_step(
    tau: &Tensor,
    r: &Tensor,
    v_leak: &Tensor,
    cfg: &DialectConfig,
    v: &Tensor,
    input: &Tensor,
) -> Result<(Tensor, u64)> {
    expect_shape(v, input)?;
    expect_shape(v, tau)?;
    let mut overflow = 0;
    let mut out = Vec::with_capacity(v.len());
    if let Decay::Bitshift { d_mem, .. } = &cfg.decay {
        let Numeric::Fixed { state_bits, .. } = cfg.numeric else { unreachable!() };
        for e in 0..v.len() {
            let d = resolve_shift(*d_mem, tau.get(e), cfg.dt, state_bits)?;
            let decayed = bitshift_decay(v.get(e) as i64, d);
            let coupled = (r.get(e).round_ties_even() as i64)
                .saturating_mul(input.get(e).round_ties_even() as i64);
            out.push(sat_state(decayed.saturating_add(coupled), state_bits, &mut overflow));
        }
    } else {
        for e in 0..v.len() {
            let (v_full, _) = li_update(
                &cfg.decay,
                cfg.dt,
                tau.get(e),
                r.get(e),
                v_leak.get(e),
                v.get(e),
                input.get(e),
            );
            out.push(quantize_state(&cfg.numeric, v_full, &mut overflow));
        }
    }
    Ok((Tensor::new(v.shape().to_vec(), out)?, overflow))
}

/// One integrator step (no threshold).
pub fn step_integrator(
    params: &PrimitiveParams,
    cfg: &DialectConfig,
    v: &Tensor,
    input: &Tensor,
) -> Result<(Tensor, u64)> {
    let PrimitiveParams::Integrator { r } = params else {
        return Err(Error::InvalidParameter("step_integrator expects integrator parameters".into()));
    };
    integrator_membrane_step(r, cfg, v, input)
}

fn integrator_membrane_step(
    r: &Tensor,
    cfg: &DialectConfig,
    v: &Tensor,
    input: &Tensor,
) -> Result<(Tensor, u64)> {
    expect_shape(v, input)?;
    let mut overflow = 0;
    let mut out = Vec::with_capacity(v.len());
    for e in 0..v.len() {
        let (v_full, _) = integrator_update(cfg.dt, r.get(e), v.get(e), input.get(e));
        out.push(quantize_state(&cfg.numeric, v_full, &mut overflow));
    }
    Ok((Tensor::new(v.shape().to_vec(), out)?, overflow))
}

/// One LIF step: membrane update, threshold check per the configured
/// ordering, reset, and delayed emission.
pub fn step_lif(
    params: &PrimitiveParams,
    cfg: &DialectConfig,
    state: &MembraneState,
    input: &Tensor,
) -> Result<(MembraneState, StepEvents)> {
    let (tau, r, v_leak, threshold, leaky) = match params {
        PrimitiveParams::Lif { tau, r, v_leak, threshold } => {
            (Some(tau), r, Some(v_leak), threshold, true)
        }
        PrimitiveParams::If { r, threshold } => (None, r, None, threshold, false),
        _ => return Err(Error::InvalidParameter("step_lif expects lif or if parameters".into())),
    };
    expect_shape(&state.v, input)?;
    let mut overflow = 0;
    let n = state.v.len();
    let mut v_next = Vec::with_capacity(n);
    let mut crossings = Vec::with_capacity(n);

    if let Decay::Bitshift { d_mem, .. } = &cfg.decay {
        let Numeric::Fixed { state_bits, .. } = cfg.numeric else { unreachable!() };
        for e in 0..n {
            let tau_e = tau.map(|t| t.get(e)).unwrap_or(cfg.dt);
            let d = resolve_shift(*d_mem, tau_e, cfg.dt, state_bits)?;
            let decayed = bitshift_decay(state.v.get(e) as i64, d);
            let coupled = (r.get(e).round_ties_even() as i64)
                .saturating_mul(input.get(e).round_ties_even() as i64);
            let v_full = sat_state(decayed.saturating_add(coupled), state_bits, &mut overflow);
            let theta = threshold.get(e).round_ties_even();
            let s = if v_full >= theta { 1.0 } else { 0.0 };
            let after = integer_reset(&cfg.reset, v_full, theta, s);
            v_next.push(after);
            crossings.push(s);
        }
    } else {
        for e in 0..n {
            let (v_full, term) = if leaky {
                li_update(
                    &cfg.decay,
                    cfg.dt,
                    tau.unwrap().get(e),
                    r.get(e),
                    v_leak.unwrap().get(e),
                    state.v.get(e),
                    input.get(e),
                )
            } else {
                integrator_update(cfg.dt, r.get(e), state.v.get(e), input.get(e))
            };
            let v_full = quantize_state(&cfg.numeric, v_full, &mut overflow);
            let check = match cfg.threshold_order {
                ThresholdOrder::PostUpdate => v_full,
                ThresholdOrder::PreLeak => state.v.get(e) + term,
            };
            let theta = threshold.get(e);
            let s = if check >= theta { 1.0 } else { 0.0 };
            let fb = reset_feedback(&cfg.reset, theta, s);
            v_next.push(apply_reset_value(&cfg.reset, v_full, fb));
            crossings.push(s);
        }
    }

    let crossings = Tensor::new(state.v.shape().to_vec(), crossings)?;
    let mut queued = state.queued.clone();
    let emitted = push_emission(&mut queued, crossings, cfg.spike_delay_steps);
    Ok((
        MembraneState { v: Tensor::new(state.v.shape().to_vec(), v_next)?, queued },
        StepEvents { emitted, overflow },
    ))
}

fn integer_reset(reset: &Reset, v: f64, theta: f64, s: f64) -> f64 {
    if s == 0.0 {
        return v;
    }
    match reset {
        Reset::Hard => 0.0,
        Reset::Subtractive { theta_reset } => v - theta_reset.unwrap_or(theta).round_ties_even(),
    }
}

/// One CuBa-LIF step: synapse update feeding the membrane within the same
/// step, threshold, reset, delayed emission.
pub fn step_cuba_lif(
    params: &PrimitiveParams,
    cfg: &DialectConfig,
    state: &CubaState,
    input: &Tensor,
) -> Result<(CubaState, StepEvents)> {
    let PrimitiveParams::CubaLif { tau_syn, tau_mem, r, v_leak, w_in, threshold } = params else {
        return Err(Error::InvalidParameter("step_cuba_lif expects cuba_lif parameters".into()));
    };
    expect_shape(&state.v, input)?;
    let mut overflow = 0;
    let n = state.v.len();
    let mut u_next = Vec::with_capacity(n);
    let mut v_next = Vec::with_capacity(n);
    let mut crossings = Vec::with_capacity(n);

    if let Decay::Bitshift { d_mem, d_syn } = &cfg.decay {
        let Numeric::Fixed { state_bits, .. } = cfg.numeric else { unreachable!() };
        for e in 0..n {
            let ds = resolve_shift(*d_syn, tau_syn.get(e), cfg.dt, state_bits)?;
            let dm = resolve_shift(*d_mem, tau_mem.get(e), cfg.dt, state_bits)?;
            // Synapse: accumulate input, then shift-decay.
            let w = w_in.get(e).round_ties_even() as i64;
            let drive = w.saturating_mul(input.get(e).round_ties_even() as i64);
            let u_acc =
                sat_int((state.u.get(e) as i64).saturating_add(drive), state_bits, &mut overflow);
            let u_new = bitshift_decay(u_acc, ds);
            // Membrane: shift-decay, then add the fresh synaptic current.
            let vm = bitshift_decay(state.v.get(e) as i64, dm);
            let coupled = (r.get(e).round_ties_even() as i64).saturating_mul(u_new);
            let v_full = sat_int(vm.saturating_add(coupled), state_bits, &mut overflow) as f64;
            let theta = threshold.get(e).round_ties_even();
            let s = if v_full >= theta { 1.0 } else { 0.0 };
            v_next.push(integer_reset(&cfg.reset, v_full, theta, s));
            u_next.push(u_new as f64);
            crossings.push(s);
        }
    } else {
        for e in 0..n {
            // Synapse is an LI with r = w_in and zero leak potential.
            let (u_full, _) = li_update(
                &cfg.decay,
                cfg.dt,
                tau_syn.get(e),
                w_in.get(e),
                0.0,
                state.u.get(e),
                input.get(e),
            );
            let u_full = quantize_state(&cfg.numeric, u_full, &mut overflow);
            // Membrane driven by the same-step synaptic current.
            let (v_full, term) = li_update(
                &cfg.decay,
                cfg.dt,
                tau_mem.get(e),
                r.get(e),
                v_leak.get(e),
                state.v.get(e),
                u_full,
            );
            let v_full = quantize_state(&cfg.numeric, v_full, &mut overflow);
            let check = match cfg.threshold_order {
                ThresholdOrder::PostUpdate => v_full,
                ThresholdOrder::PreLeak => state.v.get(e) + term,
            };
            let theta = threshold.get(e);
            let s = if check >= theta { 1.0 } else { 0.0 };
            let fb = reset_feedback(&cfg.reset, theta, s);
            v_next.push(apply_reset_value(&cfg.reset, v_full, fb));
            u_next.push(u_full);
            crossings.push(s);
        }
    }

    let crossings = Tensor::new(state.v.shape().to_vec(), crossings)?;
    let mut queued = state.queued.clone();
    let emitted = push_emission(&mut queued, crossings, cfg.spike_delay_steps);
    Ok((
        CubaState {
            u: Tensor::new(state.u.shape().to_vec(), u_next)?,
            v: Tensor::new(state.v.shape().to_vec(), v_next)?,
            queued,
        },
        StepEvents { emitted, overflow },
    ))
}

/// Integer CuBa-LIF / LIF step on plain integer vectors. Thin adapter over
/// the same shift-decay path used by the engine.
pub fn step_bitshift(
    params: &PrimitiveParams,
    cfg: &DialectConfig,
    state: &[Vec<i64>],
    input: &[i64],
) -> Result<(Vec<Vec<i64>>, Vec<i64>)> {
    cfg.check()?;
    if !matches!(cfg.decay, Decay::Bitshift { .. }) {
        return Err(Error::InvalidParameter("step_bitshift requires a bitshift decay config".into()));
    }
    let to_tensor = |v: &[i64]| {
        Tensor::new(vec![v.len()], v.iter().map(|&x| x as f64).collect())
    };
    let input_t = to_tensor(input)?;
    match params {
        PrimitiveParams::CubaLif { .. } => {
            if state.len() != 2 {
                return Err(Error::ShapeMismatch("cuba state is [u, v]".into()));
            }
            let st = CubaState::new(to_tensor(&state[0])?, to_tensor(&state[1])?, cfg);
            let (next, ev) = step_cuba_lif(params, cfg, &st, &input_t)?;
            Ok((
                vec![
                    next.u.data().iter().map(|&x| x as i64).collect(),
                    next.v.data().iter().map(|&x| x as i64).collect(),
                ],
                ev.emitted.data().iter().map(|&x| x as i64).collect(),
            ))
        }
        PrimitiveParams::Lif { .. } | PrimitiveParams::If { .. } => {
            if state.len() != 1 {
                return Err(Error::ShapeMismatch("lif state is [v]".into()));
            }
            let st = MembraneState::new(to_tensor(&state[0])?, cfg);
            let (next, ev) = step_lif(params, cfg, &st, &input_t)?;
            Ok((
                vec![next.v.data().iter().map(|&x| x as i64).collect()],
                ev.emitted.data().iter().map(|&x| x as i64).collect(),
            ))
        }
        other => Err(Error::InvalidParameter(format!(
            "step_bitshift does not apply to kind `{}`",
            other.kind().as_str()
        ))),
    }
}

fn resolve_shift(explicit: Option<u32>, tau: f64, dt: f64, state_bits: u32) -> Result<u32> {
    match explicit {
        Some(d) => Ok(d),
        None => xylo_decay_shift(tau, dt, state_bits),
    }
}

fn sat_int(v: i64, state_bits: u32, overflow: &mut u64) -> i64 {
    let (lo, hi) = int_range(state_bits);
    if v < lo {
        *overflow += 1;
        lo
    } else if v > hi {
        *overflow += 1;
        hi
    } else {
        v
    }
}

fn sat_state(v: i64, state_bits: u32, overflow: &mut u64) -> f64 {
    sat_int(v, state_bits, overflow) as f64
}

fn expect_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "state shape {:?} vs tensor shape {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

// -- exact solution -----------------------------------------------------------

/// Closed-form membrane of the leaky integrator under constant input,
/// satisfying `v(0) = v0` and `v(inf) = v_leak + R i0`:
/// `v(t) = v_leak + R i0 (1 - e^(-t/tau)) + (v0 - v_leak) e^(-t/tau)`.
pub fn lif_exact(tau: f64, r: f64, v_leak: f64, v0: f64, i0: f64, t: f64) -> f64 {
    let decay = (-t / tau).exp();
    v_leak + r * i0 * (1.0 - decay) + (v0 - v_leak) * decay
}

// -- backend parameter translations -------------------------------------------

/// Translated parameters for a backend whose update rule is
/// `v(t) = alpha v(t-1) + i(t) + i_offset` with threshold `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatedLif {
    pub alpha_decay: f64,
    /// Synaptic decay factor for the CuBa variant.
    pub alpha_syn: Option<f64>,
    pub theta: f64,
    pub i_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinnakerMode {
    ExpEuler,
    FwdEuler,
}

/// Map a scalar LIF parameterization onto the `alpha/theta/i_offset` form.
pub fn translate_spinnaker2_lif(
    tau: f64,
    r: f64,
    theta_thr: f64,
    v_leak: f64,
    i_bias: f64,
    dt: f64,
    mode: SpinnakerMode,
) -> Result<TranslatedLif> {
    if r == 0.0 {
        return Err(Error::DivisionByZero("translate_spinnaker2_lif: r = 0".into()));
    }
    if dt == 0.0 {
        return Err(Error::DivisionByZero("translate_spinnaker2_lif: dt = 0".into()));
    }
    let (alpha, theta) = match mode {
        SpinnakerMode::ExpEuler => {
            let alpha = (-dt / tau).exp();
            let denom = (1.0 - alpha) * r;
            if denom == 0.0 {
                return Err(Error::DivisionByZero("translate_spinnaker2_lif: (1-alpha) r = 0".into()));
            }
            (alpha, theta_thr / denom)
        }
        SpinnakerMode::FwdEuler => (1.0 - dt / tau, theta_thr * (tau / (dt * r))),
    };
    Ok(TranslatedLif {
        alpha_decay: alpha,
        alpha_syn: None,
        theta,
        i_offset: v_leak / r + i_bias,
    })
}

/// CuBa-LIF variant of the translation.
#[allow(clippy::too_many_arguments)]
pub fn translate_spinnaker2_cuba(
    tau_syn: f64,
    tau_mem: f64,
    r: f64,
    w_in: f64,
    theta_thr: f64,
    v_leak: f64,
    i_bias: f64,
    dt: f64,
    mode: SpinnakerMode,
) -> Result<TranslatedLif> {
    if r == 0.0 || w_in == 0.0 {
        return Err(Error::DivisionByZero("translate_spinnaker2_cuba: r or w_in = 0".into()));
    }
    if dt == 0.0 {
        return Err(Error::DivisionByZero("translate_spinnaker2_cuba: dt = 0".into()));
    }
    match mode {
        SpinnakerMode::ExpEuler => {
            let alpha_mem = (-dt / tau_mem).exp();
            let alpha_syn = (-dt / tau_syn).exp();
            let mem_gain = (1.0 - alpha_mem) * r;
            let syn_gain = (1.0 - alpha_syn) * w_in;
            if mem_gain == 0.0 || syn_gain == 0.0 {
                return Err(Error::DivisionByZero("translate_spinnaker2_cuba: zero gain".into()));
            }
            Ok(TranslatedLif {
                alpha_decay: alpha_mem,
                alpha_syn: Some(alpha_syn),
                theta: theta_thr / (mem_gain * syn_gain),
                i_offset: v_leak / r / syn_gain + i_bias / (1.0 - alpha_syn),
            })
        }
        SpinnakerMode::FwdEuler => Ok(TranslatedLif {
            alpha_decay: 1.0 - dt / tau_mem,
            alpha_syn: Some(1.0 - dt / tau_syn),
            theta: theta_thr * (tau_mem / (dt * r)) * (tau_syn / (dt * w_in)),
            i_offset: v_leak / r * (tau_syn / (dt * w_in)) + i_bias * (dt / tau_syn),
        }),
    }
}

/// One step of the translated `alpha/theta` recursion; the independent route
/// used to check translation soundness spike-for-spike.
pub fn step_translated_lif(t: &TranslatedLif, reset: &Reset, v: f64, i: f64) -> (f64, bool) {
    let v_full = t.alpha_decay * v + i + t.i_offset;
    let spike = v_full >= t.theta;
    let v_next = if spike {
        match reset {
            Reset::Hard => 0.0,
            Reset::Subtractive { .. } => v_full - t.theta,
        }
    } else {
        v_full
    };
    (v_next, spike)
}

/// One step of the translated CuBa recursion.
pub fn step_translated_cuba(
    t: &TranslatedLif,
    reset: &Reset,
    u: f64,
    v: f64,
    i: f64,
) -> (f64, f64, bool) {
    let alpha_syn = t.alpha_syn.expect("cuba translation carries alpha_syn");
    let u_full = alpha_syn * u + i;
    let v_full = t.alpha_decay * v + u_full + t.i_offset;
    let spike = v_full >= t.theta;
    let v_next = if spike {
        match reset {
            Reset::Hard => 0.0,
            Reset::Subtractive { .. } => v_full - t.theta,
        }
    } else {
        v_full
    };
    (u_full, v_next, spike)
}

// -- named dialects -----------------------------------------------------------

/// Backends with a documented discretization policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NamedDialect {
    Norse,
    Snntorch,
    LavaDl,
    RockpoolSinabs,
    Spinnaker2ExpEuler,
    Spinnaker2FwdEuler,
    Nengo,
    Xylo,
}

impl NamedDialect {
    pub const ALL: [NamedDialect; 8] = [
        NamedDialect::Norse,
        NamedDialect::Snntorch,
        NamedDialect::LavaDl,
        NamedDialect::RockpoolSinabs,
        NamedDialect::Spinnaker2ExpEuler,
        NamedDialect::Spinnaker2FwdEuler,
        NamedDialect::Nengo,
        NamedDialect::Xylo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NamedDialect::Norse => "norse",
            NamedDialect::Snntorch => "snntorch",
            NamedDialect::LavaDl => "lava_dl",
            NamedDialect::RockpoolSinabs => "rockpool_sinabs",
            NamedDialect::Spinnaker2ExpEuler => "spinnaker2_exp_euler",
            NamedDialect::Spinnaker2FwdEuler => "spinnaker2_fwd_euler",
            NamedDialect::Nengo => "nengo",
            NamedDialect::Xylo => "xylo",
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(s: &str) -> Option<NamedDialect> {
        NamedDialect::ALL.iter().copied().find(|d| d.as_str() == s)
    }
}

/// The discretization policy a named backend induces.
pub fn named_config(name: NamedDialect, dt: f64) -> DialectConfig {
    match name {
        NamedDialect::Norse | NamedDialect::Snntorch => DialectConfig::forward_euler(dt),
        NamedDialect::LavaDl => DialectConfig {
            spike_delay_steps: 1,
            ..DialectConfig::forward_euler(dt)
        },
        NamedDialect::RockpoolSinabs => DialectConfig {
            threshold_order: ThresholdOrder::PreLeak,
            ..DialectConfig::exponential_euler(dt)
        },
        NamedDialect::Spinnaker2ExpEuler | NamedDialect::Nengo => {
            DialectConfig::exponential_euler(dt)
        }
        NamedDialect::Spinnaker2FwdEuler => DialectConfig::forward_euler(dt),
        NamedDialect::Xylo => DialectConfig {
            decay: Decay::Bitshift { d_mem: None, d_syn: None },
            numeric: Numeric::Fixed { state_bits: 16, weight_bits: 8, accumulator_bits: 32 },
            ..DialectConfig::forward_euler(dt)
        },
    }
}

/// Dialect config plus the auxiliary rescalings a backend needs to realize
/// the same update, and the residual non-equivalences that remain.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTranslation {
    pub config: DialectConfig,
    /// Per-element factor the backend must apply to incoming signals.
    pub input_scale: Option<Tensor>,
    /// Per-element effective threshold replacing the declared one.
    pub threshold: Option<Tensor>,
    pub i_offset: Option<Tensor>,
    pub notes: Vec<String>,
}

/// Translate a LIF or CuBa-LIF parameterization for a named backend.
///
/// Fails with `UnsatisfiableConstraint` when the backend requires
/// `v_leak dt/tau = 0` and the parameters break it.
pub fn translate_named(
    params: &PrimitiveParams,
    name: NamedDialect,
    dt: f64,
) -> Result<NamedTranslation> {
    let config = named_config(name, dt);
    let mut notes = Vec::new();
    let scale_tensor = |f: &dyn Fn(usize) -> f64, n: usize, shape: &[usize]| -> Result<Tensor> {
        Tensor::new(shape.to_vec(), (0..n).map(f).collect())
    };

    match params {
        PrimitiveParams::Lif { tau, r, v_leak, threshold } => {
            let n = tau.len();
            let shape = tau.shape();
            match name {
                NamedDialect::Norse => {
                    // Norse has no resistance; scale the input by R.
                    let scale = scale_tensor(&|e| r.get(e), n, shape)?;
                    Ok(NamedTranslation {
                        config,
                        input_scale: Some(scale),
                        threshold: None,
                        i_offset: None,
                        notes,
                    })
                }
                NamedDialect::Snntorch | NamedDialect::LavaDl => {
                    require_zero_leak_coupling(v_leak, tau, dt, name)?;
                    let scale = scale_tensor(&|e| r.get(e) * dt / tau.get(e), n, shape)?;
                    if name == NamedDialect::LavaDl {
                        notes.push("events are emitted one step after the crossing".into());
                    }
                    Ok(NamedTranslation {
                        config,
                        input_scale: Some(scale),
                        threshold: None,
                        i_offset: None,
                        notes,
                    })
                }
                NamedDialect::RockpoolSinabs => {
                    notes.push(
                        "threshold is checked on the integrated value before the leak update"
                            .into(),
                    );
                    let scale =
                        scale_tensor(&|e| (1.0 - (-dt / tau.get(e)).exp()) * r.get(e), n, shape)?;
                    Ok(NamedTranslation {
                        config,
                        input_scale: Some(scale),
                        threshold: None,
                        i_offset: None,
                        notes,
                    })
                }
                NamedDialect::Spinnaker2ExpEuler
                | NamedDialect::Spinnaker2FwdEuler
                | NamedDialect::Nengo => {
                    let mode = if name == NamedDialect::Spinnaker2FwdEuler {
                        SpinnakerMode::FwdEuler
                    } else {
                        SpinnakerMode::ExpEuler
                    };
                    let mut thetas = Vec::with_capacity(n);
                    let mut offsets = Vec::with_capacity(n);
                    for e in 0..n {
                        let t = translate_spinnaker2_lif(
                            tau.get(e),
                            r.get(e),
                            threshold.get(e),
                            v_leak.get(e),
                            0.0,
                            dt,
                            mode,
                        )?;
                        thetas.push(t.theta);
                        offsets.push(t.i_offset);
                    }
                    let mut input_scale = None;
                    if name == NamedDialect::Nengo {
                        notes.push(
                            "fixed unit threshold; per-neuron input gain 1/theta compensates"
                                .into(),
                        );
                        input_scale =
                            Some(scale_tensor(&|e| 1.0 / thetas[e], n, shape)?);
                    }
                    Ok(NamedTranslation {
                        config,
                        input_scale,
                        threshold: Some(Tensor::new(shape.to_vec(), thetas)?),
                        i_offset: Some(Tensor::new(shape.to_vec(), offsets)?),
                        notes,
                    })
                }
                NamedDialect::Xylo => {
                    Err(Error::UnsatisfiableConstraint(
                        "xylo supports only the current-based model; lower lif to cuba_lif first"
                            .into(),
                    ))
                }
            }
        }
        PrimitiveParams::CubaLif { tau_syn, tau_mem, r, v_leak, w_in, threshold } => {
            let n = tau_mem.len();
            let shape = tau_mem.shape();
            match name {
                NamedDialect::Snntorch | NamedDialect::LavaDl => {
                    require_zero_leak_coupling(v_leak, tau_mem, dt, name)?;
                    let scale =
                        scale_tensor(&|e| w_in.get(e) * dt / tau_syn.get(e), n, shape)?;
                    let theta =
                        scale_tensor(&|e| threshold.get(e) / (r.get(e) * dt / tau_mem.get(e)), n, shape)?;
                    if name == NamedDialect::LavaDl {
                        notes.push("events are emitted one step after the crossing".into());
                    }
                    notes.push("membrane coupling folded into the threshold".into());
                    Ok(NamedTranslation {
                        config,
                        input_scale: Some(scale),
                        threshold: Some(theta),
                        i_offset: None,
                        notes,
                    })
                }
                NamedDialect::Norse => {
                    let scale = scale_tensor(&|e| w_in.get(e), n, shape)?;
                    let theta = scale_tensor(&|e| threshold.get(e) / r.get(e), n, shape)?;
                    notes.push("resistance folded into the threshold".into());
                    Ok(NamedTranslation {
                        config,
                        input_scale: Some(scale),
                        threshold: Some(theta),
                        i_offset: None,
                        notes,
                    })
                }
                NamedDialect::RockpoolSinabs => {
                    notes.push(
                        "threshold is checked on the integrated value before the leak update"
                            .into(),
                    );
                    let scale = scale_tensor(
                        &|e| (1.0 - (-dt / tau_syn.get(e)).exp()) * w_in.get(e),
                        n,
                        shape,
                    )?;
                    Ok(NamedTranslation {
                        config,
                        input_scale: Some(scale),
                        threshold: None,
                        i_offset: None,
                        notes,
                    })
                }
                NamedDialect::Spinnaker2ExpEuler
                | NamedDialect::Spinnaker2FwdEuler
                | NamedDialect::Nengo => {
                    let mode = if name == NamedDialect::Spinnaker2FwdEuler {
                        SpinnakerMode::FwdEuler
                    } else {
                        SpinnakerMode::ExpEuler
                    };
                    let mut thetas = Vec::with_capacity(n);
                    let mut offsets = Vec::with_capacity(n);
                    for e in 0..n {
                        let t = translate_spinnaker2_cuba(
                            tau_syn.get(e),
                            tau_mem.get(e),
                            r.get(e),
                            w_in.get(e),
                            threshold.get(e),
                            v_leak.get(e),
                            0.0,
                            dt,
                            mode,
                        )?;
                        thetas.push(t.theta);
                        offsets.push(t.i_offset);
                    }
                    notes.push("bias integration into i_offset is not exact".into());
                    Ok(NamedTranslation {
                        config,
                        input_scale: None,
                        threshold: Some(Tensor::new(shape.to_vec(), thetas)?),
                        i_offset: Some(Tensor::new(shape.to_vec(), offsets)?),
                        notes,
                    })
                }
                NamedDialect::Xylo => {
                    let Numeric::Fixed { state_bits, .. } = config.numeric else { unreachable!() };
                    let mut d_mems = Vec::with_capacity(n);
                    let mut d_syns = Vec::with_capacity(n);
                    for e in 0..n {
                        d_mems.push(xylo_decay_shift(tau_mem.get(e), dt, state_bits)?);
                        d_syns.push(xylo_decay_shift(tau_syn.get(e), dt, state_bits)?);
                    }
                    let uniform = |v: &[u32]| v.windows(2).all(|w| w[0] == w[1]);
                    let config = DialectConfig {
                        decay: Decay::Bitshift {
                            d_mem: uniform(&d_mems).then(|| d_mems[0]),
                            d_syn: uniform(&d_syns).then(|| d_syns[0]),
                        },
                        ..config
                    };
                    notes.push("integer shift decay with a unit-decay floor".into());
                    let theta =
                        scale_tensor(&|e| threshold.get(e).round_ties_even(), n, shape)?;
                    Ok(NamedTranslation {
                        config,
                        input_scale: None,
                        threshold: Some(theta),
                        i_offset: None,
                        notes,
                    })
                }
            }
        }
        other => Err(Error::InvalidParameter(format!(
            "translate_named applies to lif or cuba_lif, got `{}`",
            other.kind().as_str()
        ))),
    }
}

fn require_zero_leak_coupling(
    v_leak: &Tensor,
    tau: &Tensor,
    dt: f64,
    name: NamedDialect,
) -> Result<()> {
    for e in 0..v_leak.len() {
        if v_leak.get(e) * dt / tau.get(e) != 0.0 {
            return Err(Error::UnsatisfiableConstraint(format!(
                "{} requires v_leak dt/tau = 0, got v_leak = {} at element {e}",
                name.as_str(),
                v_leak.get(e)
            )));
        }
    }
    Ok(())
}
