use crate::model::ParamStore;
use crate::tensor::Float;

use super::TrainError;

pub const ADAM_BETA1: Float = 0.9;
pub const ADAM_BETA2: Float = 0.999;
pub const ADAM_EPSILON: Float = 1e-8;

/// First and second moment buffers aligned with a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct AdamState {
    pub beta1: Float,
    pub beta2: Float,
    pub eps: Float,
    step: u64,
    m: Vec<Vec<Float>>,
    v: Vec<Vec<Float>>,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        Self::with_hyper(params, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON)
    }

    pub fn with_hyper(params: &ParamStore, beta1: Float, beta2: Float, eps: Float) -> Self {
        let zeros: Vec<Vec<Float>> = params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, index: usize) -> &[Float] {
        &self.m[index]
    }

    pub fn second_moment(&self, index: usize) -> &[Float] {
        &self.v[index]
    }
}

/// One bias-corrected Adam update. `grads[i]` is the flat gradient of the
/// i-th parameter in store order.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &[Vec<Float>],
    state: &mut AdamState,
    lr: Float,
) -> Result<(), TrainError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(TrainError::GradientCount {
            expected: params.len(),
            got: grads.len(),
        });
    }
    let ids: Vec<_> = params.ids().collect();
    for (i, id) in ids.iter().enumerate() {
        let n = params.value(*id).len();
        if grads[i].len() != n || state.m[i].len() != n {
            return Err(TrainError::GradientShape {
                name: params.name(*id).to_string(),
                expected: n,
                got: grads[i].len(),
            });
        }
        if let Some(j) = grads[i].iter().position(|g| !g.is_finite()) {
            return Err(TrainError::NonFinite {
                epoch: 0,
                batch: 0,
                detail: format!("gradient of {}[{j}] is {}", params.name(*id), grads[i][j]),
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, id) in ids.into_iter().enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let theta = params.value_mut(id).data_mut();
        for (j, &g) in grads[i].iter().enumerate() {
            m[j] = b1 * m[j] + (1.0 - b1) * g;
            v[j] = b2 * v[j] + (1.0 - b2) * g * g;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            theta[j] -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
