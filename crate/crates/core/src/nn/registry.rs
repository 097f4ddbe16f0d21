use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};

/// Index of a parameter inside a [`ParamRegistry`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// How a parameter is filled by [`ParamRegistry::init_params`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `±gain·sqrt(3 / fan_in)`, i.e. variance `gain² / fan_in`.
    FanIn { fan_in: usize, gain: f64 },
    Zeros,
    Ones,
}

/// Ordered, uniquely named parameter collection. Registration order is the
/// iteration order everywhere (initialisation, optimizer, checkpoints).
#[derive(Clone, Debug, Default)]
pub struct ParamRegistry {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    inits: Vec<Init>,
    index: HashMap<String, usize>,
}

impl ParamRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, shape: &[usize], init: Init) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Invalid(format!("duplicate parameter name {name}")));
        }
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(match init {
            Init::Ones => Tensor::full(shape, 1.0),
            _ => Tensor::zeros(shape),
        });
        self.inits.push(init);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count.
    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    /// Replaces a tensor's value, keeping its shape.
    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        if value.shape() != self.tensors[id.0].shape() {
            return Err(crate::error::shape_err("ParamRegistry::set", self.tensors[id.0].shape(), value.shape()));
        }
        self.tensors[id.0] = value;
        Ok(())
    }

    /// Fills every parameter from its [`Init`] using one seeded stream.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (t, init) in self.tensors.iter_mut().zip(&self.inits) {
            match *init {
                Init::FanIn { fan_in, gain } => {
                    let bound = gain * (3.0 / fan_in as f64).sqrt();
                    for v in t.data_mut() {
                        *v = if bound > 0.0 { rng.gen_range(-bound..bound) } else { 0.0 };
                    }
                }
                Init::Zeros => t.data_mut().fill(0.0),
                Init::Ones => t.data_mut().fill(1.0),
            }
        }
    }

    /// Zeroes every parameter whose name starts with `prefix`.
    pub fn zero_prefix(&mut self, prefix: &str) -> usize {
        let mut n = 0;
        for (name, t) in self.names.iter().zip(self.tensors.iter_mut()) {
            if name.starts_with(prefix) {
                t.data_mut().fill(0.0);
                n += 1;
            }
        }
        n
    }

    /// Enters every parameter into `graph` as a leaf.
    pub fn bind(&self, graph: &mut Graph) -> ParamVars {
        ParamVars {
            vars: self.tensors.iter().map(|t| graph.param(t.clone())).collect(),
        }
    }
}

/// Graph variables for a bound registry, indexed by [`ParamId`].
#[derive(Clone, Debug)]
pub struct ParamVars {
    vars: Vec<Var>,
}

impl ParamVars {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn all(&self) -> &[Var] {
        &self.vars
    }

    /// Wraps externally created variables, one per registry entry.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self { vars }
    }

    /// Gradients of all bound parameters after `graph.backward`.
    pub fn grads(&self, graph: &Graph) -> Vec<Tensor> {
        self.vars.iter().map(|&v| graph.grad(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamRegistry {
        let mut r = ParamRegistry::new();
        r.register("a.w", &[64, 64], Init::FanIn { fan_in: 64, gain: 1.0 }).unwrap();
        r.register("a.b", &[64], Init::Zeros).unwrap();
        r.register("ln.g", &[8], Init::Ones).unwrap();
        r
    }

    #[test]
    fn names_are_unique() {
        let mut r = sample();
        assert!(r.register("a.w", &[1], Init::Zeros).is_err());
    }

    #[test]
    fn same_seed_same_values_different_seed_differs() {
        let (mut a, mut b, mut c) = (sample(), sample(), sample());
        a.init_params(7);
        b.init_params(7);
        c.init_params(8);
        assert_eq!(a.tensors(), b.tensors());
        assert_ne!(a.tensors()[0], c.tensors()[0]);
    }

    #[test]
    fn fan_in_variance_is_one_over_fan_in() {
        let mut r = sample();
        r.init_params(3);
        let d = r.tensors()[0].data();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64;
        let target = 1.0 / 64.0;
        assert!(var > target / 2.0 && var < target * 2.0, "variance {var}");
        assert_eq!(r.tensors()[1].data(), &[0.0; 64][..]);
        assert_eq!(r.tensors()[2].data(), &[1.0; 8][..]);
    }

    #[test]
    fn order_is_registration_order() {
        let r = sample();
        assert_eq!(r.names(), &["a.w", "a.b", "ln.g"]);
        assert_eq!(r.id("ln.g"), Some(ParamId(2)));
    }
}
