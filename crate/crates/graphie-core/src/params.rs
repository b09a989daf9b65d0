//! Named trainable parameters with gradient accumulators.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::tensor::{Scalar, Tensor};

struct Entry<F> {
    value: Tensor<F>,
    grad: Tensor<F>,
}

/// Map from hierarchical name to value tensor plus a same-shape
/// gradient accumulator. Iteration order is sorted by name, which keeps
/// optimizer updates and serialization deterministic.
pub struct ParameterStore<F> {
    entries: BTreeMap<String, Entry<F>>,
}

impl<F: Scalar> Default for ParameterStore<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> ParameterStore<F> {
    pub fn new() -> Self {
        ParameterStore {
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, value: Tensor<F>) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::Contract(format!("duplicate parameter '{name}'")));
        }
        let grad = Tensor::zeros(value.shape().to_vec());
        self.entries.insert(name.to_string(), Entry { value, grad });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<F>> {
        self.entries
            .get(name)
            .map(|e| &e.value)
            .ok_or_else(|| Error::Contract(format!("unknown parameter '{name}'")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<F>> {
        self.entries
            .get_mut(name)
            .map(|e| &mut e.value)
            .ok_or_else(|| Error::Contract(format!("unknown parameter '{name}'")))
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor<F>> {
        self.entries
            .get(name)
            .map(|e| &e.grad)
            .ok_or_else(|| Error::Contract(format!("unknown parameter '{name}'")))
    }

    /// Adds `delta` into the gradient accumulator of `name`.
    pub fn accumulate_grad(&mut self, name: &str, delta: &Tensor<F>) -> Result<()> {
        let e = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter '{name}'")))?;
        if e.grad.shape() != delta.shape() {
            return Err(Error::shape(
                "accumulate_grad",
                format!("{:?} vs {:?} for '{name}'", e.grad.shape(), delta.shape()),
            ));
        }
        for (g, &d) in e.grad.data_mut().iter_mut().zip(delta.data()) {
            *g += d;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for e in self.entries.values_mut() {
            for g in e.grad.data_mut() {
                *g = F::zero();
            }
        }
    }

    /// Visits (name, value, grad) in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<F>, &Tensor<F>)> {
        self.entries
            .iter()
            .map(|(n, e)| (n.as_str(), &e.value, &e.grad))
    }

    /// Deep copy of the parameter values (grads reset to zero).
    pub fn snapshot(&self) -> ParameterStore<F> {
        let mut out = ParameterStore::new();
        for (n, e) in &self.entries {
            out.entries.insert(
                n.clone(),
                Entry {
                    value: e.value.clone(),
                    grad: Tensor::zeros(e.value.shape().to_vec()),
                },
            );
        }
        out
    }

    pub fn cast<G: Scalar>(&self) -> ParameterStore<G> {
        let mut out = ParameterStore::new();
        for (n, e) in &self.entries {
            out.entries.insert(
                n.clone(),
                Entry {
                    value: e.value.cast::<G>(),
                    grad: Tensor::zeros(e.value.shape().to_vec()),
                },
            );
        }
        out
    }

    pub fn total_coords(&self) -> usize {
        self.entries.values().map(|e| e.value.numel()).sum()
    }
}

/// Glorot-uniform matrix: entries in +-sqrt(6/(fan_in+fan_out)) with
/// the convention that `rows` is fan_out and `cols` fan_in.
pub fn glorot_matrix<F: Scalar>(rows: usize, cols: usize, rng: &mut Stream) -> Tensor<F> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| F::from_f64(rng.uniform(-bound, bound)))
        .collect();
    Tensor::matrix(rows, cols, data).expect("finite by construction")
}

/// Uniform matrix in +-bound; used for embedding tables.
pub fn uniform_matrix<F: Scalar>(rows: usize, cols: usize, bound: f64, rng: &mut Stream) -> Tensor<F> {
    let data = (0..rows * cols)
        .map(|_| F::from_f64(rng.uniform(-bound, bound)))
        .collect();
    Tensor::matrix(rows, cols, data).expect("finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;

    #[test]
    fn register_rejects_duplicates() {
        let mut s: ParameterStore<f64> = ParameterStore::new();
        s.register("a", Tensor::scalar(1.0)).unwrap();
        assert!(s.register("a", Tensor::scalar(2.0)).is_err());
    }

    #[test]
    fn grads_start_zero_and_accumulate() {
        let mut s: ParameterStore<f64> = ParameterStore::new();
        s.register("w", Tensor::vector(vec![1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(s.grad("w").unwrap().data(), &[0.0, 0.0]);
        let d = Tensor::vector(vec![0.5, 0.5]).unwrap();
        s.accumulate_grad("w", &d).unwrap();
        s.accumulate_grad("w", &d).unwrap();
        assert_eq!(s.grad("w").unwrap().data(), &[1.0, 1.0]);
        s.zero_grads();
        assert_eq!(s.grad("w").unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn glorot_respects_bound() {
        let mut rng = Stream::new(1, Purpose::Init);
        let m: Tensor<f64> = glorot_matrix(8, 8, &mut rng);
        let bound = (6.0 / 16.0f64).sqrt();
        assert!(m.data().iter().all(|v| v.abs() <= bound));
    }
}
