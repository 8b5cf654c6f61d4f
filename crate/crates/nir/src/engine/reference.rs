//! High-resolution explicit integration of a single node's smooth dynamics,
//! used as the oracle in convergence tests. Threshold jumps are not applied;
//! this is the subthreshold ground truth.

use std::collections::BTreeMap;

use crate::core::tensor::Tensor;
use crate::error::{Error, Result};
use crate::primitives::{continuous_rhs, PrimitiveParams};

/// Dense state series at resolution `dt / refine`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSeries {
    pub dt_fine: f64,
    /// Row `k` is the state at time `k * dt_fine`; row 0 is the initial
    /// state, so the series has `steps * refine + 1` rows.
    pub states: BTreeMap<String, Vec<Vec<f64>>>,
}

impl ReferenceSeries {
    /// State value at the end of coarse step `n` (time `(n+1) * dt`).
    pub fn at_coarse_step(&self, name: &str, refine: usize, n: usize) -> Option<&Vec<f64>> {
        self.states.get(name)?.get((n + 1) * refine)
    }
}

/// Integrate one ODE-bearing node with explicit Euler at `dt / refine`,
/// holding each coarse input row constant across its fine substeps.
pub fn run_reference_ode(
    params: &PrimitiveParams,
    inputs: &[Vec<f64>],
    dt: f64,
    refine: usize,
) -> Result<ReferenceSeries> {
    if refine < 100 {
        return Err(Error::InvalidParameter(format!(
            "reference integration requires refine >= 100, got {refine}"
        )));
    }
    if dt <= 0.0 {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let dt_fine = dt / refine as f64;

    let (names, mut state): (Vec<&str>, Vec<Tensor>) = match params {
        PrimitiveParams::Integrator { r } | PrimitiveParams::If { r, .. } => {
            (vec!["v"], vec![Tensor::zeros(r.shape().to_vec())])
        }
        PrimitiveParams::Li { v_leak, .. } | PrimitiveParams::Lif { v_leak, .. } => {
            (vec!["v"], vec![v_leak.clone()])
        }
        PrimitiveParams::CubaLif { v_leak, .. } => (
            vec!["u", "v"],
            vec![Tensor::zeros(v_leak.shape().to_vec()), v_leak.clone()],
        ),
        other => return Err(Error::NonOdeKind(other.kind().as_str().into())),
    };

    let mut series: BTreeMap<String, Vec<Vec<f64>>> = names
        .iter()
        .map(|n| (n.to_string(), vec![]))
        .collect();
    for (name, s) in names.iter().zip(state.iter()) {
        series.get_mut(*name).unwrap().push(s.data().to_vec());
    }

    for row in inputs {
        let input = Tensor::new(state[0].shape().to_vec(), row.clone())?;
        for _ in 0..refine {
            let refs: Vec<&Tensor> = state.iter().collect();
            let derivs = continuous_rhs(params, &refs, &input)?;
            for (s, d) in state.iter_mut().zip(derivs.iter()) {
                *s = s.zip_map(d, |x, dx| x + dt_fine * dx)?;
            }
            for (name, s) in names.iter().zip(state.iter()) {
                series.get_mut(*name).unwrap().push(s.data().to_vec());
            }
        }
    }
    Ok(ReferenceSeries { dt_fine, states: series })
}
