use std::collections::BTreeMap;

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a registered parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: BTreeMap<String, usize>,
    seed: u64,
}

impl ModelParams {
    pub fn new(seed: u64) -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            index: BTreeMap::new(),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Registers a tensor; every name may be registered once.
    pub fn register(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Usage(format!("parameter `{name}` registered twice")));
        }
        let id = self.tensors.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(ParamId(id))
    }

    /// Registers a tensor initialized uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn register_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        fan_in: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
        self.register(name, Tensor::new(shape, values)?)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Flattened view `(param, offset)` of scalar index `k`, in registration order.
    pub fn locate(&self, mut k: usize) -> Option<(ParamId, usize)> {
        for (i, t) in self.tensors.iter().enumerate() {
            if k < t.len() {
                return Some((ParamId(i), k));
            }
            k -= t.len();
        }
        None
    }

    /// Stores gradients (one per parameter, in registration order) into the
    /// tensors' gradient slots.
    pub fn set_grads(&mut self, grads: Vec<Vec<f64>>) -> Result<()> {
        if grads.len() != self.tensors.len() {
            return Err(Error::Usage(format!(
                "{} gradients for {} parameters",
                grads.len(),
                self.tensors.len()
            )));
        }
        for (t, g) in self.tensors.iter_mut().zip(grads) {
            t.set_grad(g)?;
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        for t in &mut self.tensors {
            t.clear_grad();
        }
    }
}
