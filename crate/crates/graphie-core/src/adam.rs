//! Adam optimizer with bias correction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::tensor::{Scalar, Tensor};

/// Per-parameter moment estimates plus the shared step counter.
pub struct AdamState<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
    /// Completed steps; incremented by exactly 1 per [`adam_step`].
    pub t: u64,
    moments: BTreeMap<String, (Tensor<F>, Tensor<F>)>,
}

impl<F: Scalar> AdamState<F> {
    /// Defaults: lr 0.001, beta1 0.9, beta2 0.999, epsilon 1e-8.
    pub fn new() -> Self {
        Self::with_lr(F::from_f64(0.001))
    }

    pub fn with_lr(lr: F) -> Self {
        AdamState {
            lr,
            beta1: F::from_f64(0.9),
            beta2: F::from_f64(0.999),
            epsilon: F::from_f64(1e-8),
            t: 0,
            moments: BTreeMap::new(),
        }
    }
}

impl<F: Scalar> Default for AdamState<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// One bias-corrected Adam update from the accumulated gradients.
/// Gradients are zeroed afterwards.
pub fn adam_step<F: Scalar>(store: &mut ParameterStore<F>, state: &mut AdamState<F>) -> Result<()> {
    let t = state
        .t
        .checked_add(1)
        .ok_or_else(|| Error::NonFinite("adam step counter overflow".into()))?;
    state.t = t;
    let bc1 = F::one() - state.beta1.powi(t as i32);
    let bc2 = F::one() - state.beta2.powi(t as i32);

    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        let grad = store.grad(&name)?.clone();
        let (m, v) = state.moments.entry(name.clone()).or_insert_with(|| {
            (
                Tensor::zeros(grad.shape().to_vec()),
                Tensor::zeros(grad.shape().to_vec()),
            )
        });
        if m.shape() != grad.shape() {
            return Err(Error::shape(
                "adam_step",
                format!("moment {:?} vs grad {:?} for '{name}'", m.shape(), grad.shape()),
            ));
        }
        let value = store.get_mut(&name)?;
        let one = F::one();
        for ((pv, &g), (mv, vv)) in value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
        {
            *mv = state.beta1 * *mv + (one - state.beta1) * g;
            *vv = state.beta2 * *vv + (one - state.beta2) * g * g;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv = *pv - state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
            if !pv.is_finite() || !mv.is_finite() || !vv.is_finite() {
                return Err(Error::NonFinite(format!("adam_step on '{name}'")));
            }
        }
    }
    store.zero_grads();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent hand-unrolled Adam recurrence for a single scalar.
    fn unrolled(theta0: f64, grads: &[f64]) -> f64 {
        let (lr, b1, b2, eps) = (0.001, 0.9, 0.999, 1e-8);
        let (mut th, mut m, mut v) = (theta0, 0.0, 0.0);
        for (i, &g) in grads.iter().enumerate() {
            let t = (i + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            th -= lr * mh / (vh.sqrt() + eps);
        }
        th
    }

    fn scalar_store(theta: f64) -> ParameterStore<f64> {
        let mut s = ParameterStore::new();
        s.register("theta", Tensor::scalar(theta)).unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut s = scalar_store(0.75);
        let mut st = AdamState::new();
        adam_step(&mut s, &mut st).unwrap();
        assert_eq!(s.get("theta").unwrap().data(), &[0.75]);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_matches_hand_unrolled_recurrence() {
        let mut s = scalar_store(0.0);
        s.accumulate_grad("theta", &Tensor::scalar(1.0)).unwrap();
        let mut st = AdamState::new();
        adam_step(&mut s, &mut st).unwrap();
        let got = s.get("theta").unwrap().data()[0];
        assert!((got - unrolled(0.0, &[1.0])).abs() < 1e-15);
        assert!((got + 0.001).abs() < 1e-9, "theta should be ~ -0.001, got {got}");
        // gradients zeroed afterwards
        assert_eq!(s.grad("theta").unwrap().data(), &[0.0]);
    }

    #[test]
    fn two_steps_match_hand_unrolled_recurrence() {
        let mut s = scalar_store(0.0);
        let mut st = AdamState::new();
        for _ in 0..2 {
            s.accumulate_grad("theta", &Tensor::scalar(1.0)).unwrap();
            adam_step(&mut s, &mut st).unwrap();
        }
        let got = s.get("theta").unwrap().data()[0];
        assert!((got - unrolled(0.0, &[1.0, 1.0])).abs() < 1e-12);
        assert_eq!(st.t, 2);
    }

    proptest! {
        #[test]
        fn zero_grad_identity_for_any_value(theta in -10.0f64..10.0, steps in 1usize..5) {
            let mut s = scalar_store(theta);
            let mut st = AdamState::new();
            for _ in 0..steps {
                adam_step(&mut s, &mut st).unwrap();
            }
            prop_assert_eq!(s.get("theta").unwrap().data(), &[theta]);
        }

        #[test]
        fn random_gradient_sequences_match_oracle(
            theta in -2.0f64..2.0,
            grads in proptest::collection::vec(-3.0f64..3.0, 1..6),
        ) {
            let mut s = scalar_store(theta);
            let mut st = AdamState::new();
            for &g in &grads {
                s.accumulate_grad("theta", &Tensor::scalar(g)).unwrap();
                adam_step(&mut s, &mut st).unwrap();
            }
            let got = s.get("theta").unwrap().data()[0];
            prop_assert!((got - unrolled(theta, &grads)).abs() < 1e-12);
        }
    }
}
