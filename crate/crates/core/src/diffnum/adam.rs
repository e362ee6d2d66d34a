use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{DiffError, Gradients, ParamStore};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates per parameter, plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|(_, _, t)| vec![0.0; t.len()])
                .collect::<Vec<_>>()
        };
        AdamState {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, index: usize) -> &[f64] {
        &self.m[index]
    }

    pub fn second_moment(&self, index: usize) -> &[f64] {
        &self.v[index]
    }
}

/// One bias-corrected Adam update. Nothing is modified when an error is
/// returned.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &Gradients,
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<(), DiffError> {
    if !(config.lr >= 0.0) {
        return Err(DiffError::NegativeLearningRate(config.lr));
    }
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(DiffError::LayoutMismatch);
    }
    for (id, g) in grads.iter() {
        if g.shape() != params.get(id).shape() {
            return Err(DiffError::LayoutMismatch);
        }
        if !g.is_finite() {
            return Err(DiffError::NonFiniteGradient(params.name(id).to_string()));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - math::powi(config.beta1, t);
    let bc2 = 1.0 - math::powi(config.beta2, t);
    for (id, g) in grads.iter() {
        let (m, v) = (&mut state.m[id.index()], &mut state.v[id.index()]);
        let p = params.get_mut(id).data_mut();
        for (((pi, &gi), mi), vi) in p
            .iter_mut()
            .zip(g.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = config.beta1 * *mi + (1.0 - config.beta1) * gi;
            *vi = config.beta2 * *vi + (1.0 - config.beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *pi -= config.lr * m_hat / (math::sqrt(v_hat) + config.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnum::{Shape, Tensor};

    fn store_with(values: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::vector(values.to_vec())).unwrap();
        s
    }

    fn grads_with(store: &ParamStore, values: &[f64]) -> Gradients {
        let mut g = Gradients::zeros_like(store);
        let id = store.find("w").unwrap();
        g.get_mut(id).data_mut().copy_from_slice(values);
        g
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut store = store_with(&[0.3, -1.2]);
        let before = store.clone();
        let grads = grads_with(&store, &[0.5, -2.0]);
        let mut state = AdamState::new(&store);
        let cfg = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        adam_step(&mut store, &grads, &mut state, &cfg).unwrap();
        assert!(store.bit_identical(&before));
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut store = store_with(&[1.0]);
        let mut state = AdamState::new(&store);
        let cfg = AdamConfig::default();
        let g = grads_with(&store, &[1.0]);
        adam_step(&mut store, &g, &mut state, &cfg).unwrap();
        let after_first = store.get(store.find("w").unwrap()).data()[0];
        let m1 = state.first_moment(0)[0];
        let v1 = state.second_moment(0)[0];
        let g = grads_with(&store, &[0.0]);
        adam_step(&mut store, &g, &mut state, &cfg).unwrap();
        assert!((state.first_moment(0)[0] - 0.9 * m1).abs() < 1e-15);
        assert!((state.second_moment(0)[0] - 0.999 * v1).abs() < 1e-15);
        // moments are non-zero so the parameter still moves; with a zero moment it would not
        let mut fresh = store_with(&[2.0]);
        let mut fresh_state = AdamState::new(&fresh);
        let g = grads_with(&fresh, &[0.0]);
        adam_step(&mut fresh, &g, &mut fresh_state, &cfg).unwrap();
        assert_eq!(fresh.get(fresh.find("w").unwrap()).data()[0], 2.0);
        assert!(after_first < 1.0);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        for &g in &[0.37, -4.0, 1e-3] {
            let mut store = store_with(&[0.0]);
            let mut state = AdamState::new(&store);
            let cfg = AdamConfig::default();
            let grads = grads_with(&store, &[g]);
            adam_step(&mut store, &grads, &mut state, &cfg).unwrap();
            let expected = -cfg.lr * g / (g.abs() + cfg.eps);
            let got = store.get(store.find("w").unwrap()).data()[0];
            assert!((got - expected).abs() < 1e-15, "g={g}: {got} vs {expected}");
            assert!((got + cfg.lr * g.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn nan_gradient_is_rejected_without_update() {
        let mut store = store_with(&[1.0, 2.0]);
        let before = store.clone();
        let mut state = AdamState::new(&store);
        let err = adam_step(
            &mut store,
            &grads_with(&before, &[0.1, f64::NAN]),
            &mut state,
            &AdamConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, DiffError::NonFiniteGradient(ref n) if n == "w"));
        assert!(store.bit_identical(&before));
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn step_counter_increments_by_one() {
        let mut store = ParamStore::new();
        store.add("a", Tensor::zeros(Shape::matrix(2, 2))).unwrap();
        let grads = Gradients::zeros_like(&store);
        let mut state = AdamState::new(&store);
        for k in 1..=5 {
            adam_step(&mut store, &grads, &mut state, &AdamConfig::default()).unwrap();
            assert_eq!(state.step_count(), k);
        }
    }
}
