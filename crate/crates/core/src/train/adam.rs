use crate::error::{Error, Result};
use crate::model::{Gradients, ParameterSet};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: ParameterSet,
    pub second: ParameterSet,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &ParameterSet) -> Self {
        AdamState {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients or results
/// and leaves `params` untouched in that case.
pub fn adam_step(
    params: &mut ParameterSet,
    grads: &Gradients,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<()> {
    if let Some((name, _, _)) = grads.tensors().into_iter().find(|t| t.2.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite(format!("gradient of {name} is not finite")));
    }
    let step = state.step + 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);
    let mut updated = params.clone();
    let g_all = grads.tensors();
    let mut m_all = state.first.clone();
    let mut v_all = state.second.clone();
    for (((p, (_, _, g)), m), v) in updated
        .tensors_mut()
        .into_iter()
        .zip(g_all)
        .zip(m_all.tensors_mut())
        .zip(v_all.tensors_mut())
    {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    }
    if !updated.all_finite() {
        return Err(Error::NonFinite(format!("Adam step {step} produced non-finite parameters")));
    }
    *params = updated;
    state.first = m_all;
    state.second = v_all;
    state.step = step;
    Ok(())
}
