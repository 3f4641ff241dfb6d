//! Named, trainable parameters and their initialization.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{config_err, Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct Parameter<T: Scalar = f32> {
    pub value: Tensor<T>,
    pub gradient: Tensor<T>,
    pub trainable: bool,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let gradient = Tensor::zeros(value.dims());
        Self {
            value,
            gradient,
            trainable: true,
        }
    }

    pub fn zero_grad(&mut self) {
        self.gradient
            .data_mut()
            .iter_mut()
            .for_each(|g| *g = T::zero());
    }
}

/// Draws `N(mean, std)` values from a ChaCha8 stream seeded with `seed`.
pub fn param_init_normal<T: Scalar>(
    dims: &[usize],
    mean: f64,
    std: f64,
    seed: u64,
) -> Result<Parameter<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Parameter::new(normal_tensor(dims, mean, std, &mut rng)?))
}

pub(crate) fn normal_tensor<T: Scalar>(
    dims: &[usize],
    mean: f64,
    std: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor<T>> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::Domain(format!("std must be positive, got {std}")));
    }
    let dist = Normal::new(mean, std).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(Tensor::from_fn(dims, |_| T::cst(dist.sample(rng))))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Flat registry of parameters keyed by hierarchical names such as
/// `enc0.block1.attn.qkv.weight`. Registration order is stable.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T: Scalar = f32> {
    names: Vec<String>,
    params: Vec<Parameter<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, value: Tensor<T>) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(config_err!("duplicate parameter name {name}"));
        }
        let id = self.params.len();
        self.names.push(name.to_string());
        self.params.push(Parameter::new(value));
        self.index.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter<T>> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Parameter<T>> {
        self.index.get(name).map(|&i| &mut self.params[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Parameter<T>)> {
        self.params
            .iter()
            .enumerate()
            .map(move |(i, p)| (ParamId(i), self.names[i].as_str(), p))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = (&str, &mut Parameter<T>)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.params.iter_mut())
    }

    /// Total number of scalar values.
    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    value: p.value.cast(),
                    gradient: p.gradient.cast(),
                    trainable: p.trainable,
                })
                .collect(),
            index: self.index.clone(),
        }
    }
}

/// Standard deviation rule for normally drawn weights.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum InitScale {
    /// The same deviation for every tensor.
    Fixed(f64),
    /// `1/sqrt(fan_in)`, where fan-in is the product of all but the first
    /// dimension.
    FanIn,
}

impl InitScale {
    pub fn std_for(self, dims: &[usize]) -> f64 {
        match self {
            InitScale::Fixed(std) => std,
            InitScale::FanIn => 1.0 / (dims.iter().skip(1).product::<usize>().max(1) as f64).sqrt(),
        }
    }
}

/// Registers parameters under a name prefix while drawing initial values
/// from one deterministic stream.
pub struct ParamBuilder<'s, T: Scalar> {
    store: &'s mut ParamStore<T>,
    rng: ChaCha8Rng,
    scale: InitScale,
    prefix: Vec<String>,
}

impl<'s, T: Scalar> ParamBuilder<'s, T> {
    pub fn new(store: &'s mut ParamStore<T>, seed: u64, std: f64) -> Self {
        Self::with_scale(store, seed, InitScale::Fixed(std))
    }

    pub fn with_scale(store: &'s mut ParamStore<T>, seed: u64, scale: InitScale) -> Self {
        Self {
            store,
            rng: ChaCha8Rng::seed_from_u64(seed),
            scale,
            prefix: Vec::new(),
        }
    }

    pub fn push(&mut self, scope: impl Into<String>) {
        self.prefix.push(scope.into());
    }

    pub fn pop(&mut self) {
        self.prefix.pop();
    }

    /// Runs `f` inside a named scope.
    pub fn scope<R>(
        &mut self,
        scope: impl Into<String>,
        f: impl FnOnce(&mut Self) -> Result<R>,
    ) -> Result<R> {
        self.push(scope);
        let out = f(self);
        self.pop();
        out
    }

    fn full_name(&self, leaf: &str) -> String {
        let mut s = self.prefix.join(".");
        if !s.is_empty() {
            s.push('.');
        }
        s.push_str(leaf);
        s
    }

    pub fn normal(&mut self, leaf: &str, dims: &[usize]) -> Result<ParamId> {
        let t = normal_tensor(dims, 0.0, self.scale.std_for(dims), &mut self.rng)?;
        let name = self.full_name(leaf);
        self.store.insert(&name, t)
    }

    pub fn zeros(&mut self, leaf: &str, dims: &[usize]) -> Result<ParamId> {
        let name = self.full_name(leaf);
        self.store.insert(&name, Tensor::zeros(dims))
    }

    pub fn ones(&mut self, leaf: &str, dims: &[usize]) -> Result<ParamId> {
        let name = self.full_name(leaf);
        self.store.insert(&name, Tensor::full(dims, T::one()))
    }
}
