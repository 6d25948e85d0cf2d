use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;

/// Handle to a tensor inside a [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Entry {
    name: String,
    value: Tensor,
    #[serde(skip)]
    grad: Option<Tensor>,
}

/// Named trainable tensors with a gradient buffer of identical shape each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterStore {
    seed: u64,
    entries: Vec<Entry>,
}

impl ParameterStore {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            entries: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let grad = Tensor::zeros(value.shape());
        self.entries.push(Entry {
            name: name.into(),
            value,
            grad: Some(grad),
        });
        ParamId(self.entries.len() - 1)
    }

    /// He-style uniform initialization: `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
    pub fn add_he_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let count: usize = shape.iter().product();
        let values = (0..count)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let t = Tensor::new(shape.to_vec(), values).expect("count matches shape");
        self.add(name, t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        self.entries[id.0]
            .grad
            .as_ref()
            .expect("gradient buffers exist after construction or zero_grad")
    }

    pub(crate) fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        let e = &mut self.entries[id.0];
        e.grad.get_or_insert_with(|| Tensor::zeros(e.value.shape()))
    }

    /// Resets every gradient buffer to zero (creating missing buffers, e.g.
    /// after deserialization).
    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            match &mut e.grad {
                Some(g) => g.fill(0.0),
                None => e.grad = Some(Tensor::zeros(e.value.shape())),
            }
        }
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Copies values from `other`, which must have the same layout.
    pub fn copy_values_from(&mut self, other: &ParameterStore) {
        debug_assert_eq!(self.entries.len(), other.entries.len());
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.value.values_mut().copy_from_slice(b.value.values());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradients_track_shapes_and_reset_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParameterStore::new(7);
        let w = store.add_he_uniform("w", &[4, 3], 4, &mut rng);
        assert_eq!(store.grad(w).shape(), &[4, 3]);
        store.grad_mut(w).fill(2.0);
        store.zero_grad();
        assert!(store.grad(w).values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn he_uniform_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParameterStore::new(1);
        let w = store.add_he_uniform("w", &[50, 20], 6, &mut rng);
        assert!(store.value(w).values().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn deserialized_store_regains_gradients() {
        let mut store = ParameterStore::new(3);
        let b = store.add("b", Tensor::row(vec![1.0, 2.0]));
        let json = serde_json::to_string(&store).unwrap();
        let mut back: ParameterStore = serde_json::from_str(&json).unwrap();
        back.zero_grad();
        assert_eq!(back.grad(b).shape(), &[1, 2]);
        assert_eq!(back.value(b), store.value(b));
    }
}
