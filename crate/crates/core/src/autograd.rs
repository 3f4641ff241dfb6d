//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation of one forward evaluation together
//! with a closure computing the vector-Jacobian product for its inputs.
//! [`Graph::backward`] replays the tape in reverse. A graph is built per
//! evaluation and is never shared between threads.

use std::collections::HashMap;

use crate::param::{ParamId, ParamStore};
use crate::tensor::{Scalar, Tensor};

/// Handle to a value recorded on a [`Graph`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Arguments handed to a backward closure.
pub struct BackwardCtx<'b, T: Scalar> {
    /// Gradient of the loss with respect to this node's output.
    pub grad: &'b Tensor<T>,
    /// This node's forward value.
    pub out: &'b Tensor<T>,
    /// Forward values of the inputs, in recording order.
    pub inputs: &'b [&'b Tensor<T>],
    /// Whether each input needs a gradient; closures may skip the others.
    pub needs: &'b [bool],
}

type BackwardFn<'a, T> = Box<dyn Fn(&BackwardCtx<'_, T>) -> Vec<Option<Tensor<T>>> + 'a>;

struct Node<'a, T: Scalar> {
    value: Tensor<T>,
    inputs: Vec<Var>,
    requires_grad: bool,
    backward: Option<BackwardFn<'a, T>>,
}

pub struct Graph<'a, T: Scalar> {
    nodes: Vec<Node<'a, T>>,
    store: Option<&'a ParamStore<T>>,
    param_vars: HashMap<ParamId, Var>,
}

impl<'a, T: Scalar> Default for Graph<'a, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, T: Scalar> Graph<'a, T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            store: None,
            param_vars: HashMap::new(),
        }
    }

    /// A graph that can bind parameters from `store` via [`Graph::param`].
    pub fn with_params(store: &'a ParamStore<T>) -> Self {
        Self {
            nodes: Vec::new(),
            store: Some(store),
            param_vars: HashMap::new(),
        }
    }

    fn push_leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            inputs: Vec::new(),
            requires_grad,
            backward: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, false)
    }

    /// A leaf whose gradient is reported by [`Graph::backward`].
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, true)
    }

    /// Binds a stored parameter; repeated calls return the same variable.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let store = self
            .store
            .expect("graph was created without a parameter store");
        let p = store.get(id);
        let v = self.push_leaf(p.value.clone(), p.trainable);
        self.param_vars.insert(id, v);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an operation. `backward` must return one entry per input,
    /// each either `None` or a tensor with the input's dims.
    pub fn record<F>(&mut self, value: Tensor<T>, inputs: &[Var], backward: F) -> Var
    where
        F: Fn(&BackwardCtx<'_, T>) -> Vec<Option<Tensor<T>>> + 'a,
    {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            inputs: inputs.to_vec(),
            requires_grad,
            backward: requires_grad.then(|| Box::new(backward) as BackwardFn<'a, T>),
        });
        Var(self.nodes.len() - 1)
    }

    /// Propagates `seed` (default: ones) from `output` back to every leaf.
    pub fn backward_with(&self, output: Var, seed: Tensor<T>) -> Gradients<T> {
        assert_eq!(seed.dims(), self.value(output).dims(), "seed dims");
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);
        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            let Some(backward) = &node.backward else {
                continue;
            };
            let Some(grad) = grads[i].take() else {
                continue;
            };
            let inputs: Vec<&Tensor<T>> =
                node.inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            let needs: Vec<bool> = node
                .inputs
                .iter()
                .map(|v| self.nodes[v.0].requires_grad)
                .collect();
            let ctx = BackwardCtx {
                grad: &grad,
                out: &node.value,
                inputs: &inputs,
                needs: &needs,
            };
            let input_grads = backward(&ctx);
            debug_assert_eq!(input_grads.len(), node.inputs.len());
            for (v, g) in node.inputs.iter().zip(input_grads) {
                let Some(g) = g else { continue };
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                debug_assert_eq!(g.dims(), self.nodes[v.0].value.dims());
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        // Only leaves keep their gradients.
        for (i, node) in self.nodes.iter().enumerate() {
            if node.backward.is_some() {
                grads[i] = None;
            }
        }
        Gradients {
            grads,
            params: self.param_vars.iter().map(|(&p, &v)| (p, v)).collect(),
        }
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, output: Var) -> Gradients<T> {
        let seed = Tensor::full(self.value(output).dims(), T::one());
        self.backward_with(output, seed)
    }
}

/// Leaf gradients produced by [`Graph::backward`].
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<Tensor<T>>>,
    params: Vec<(ParamId, Var)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, zeros when nothing flowed into it.
    pub fn wrt(&self, v: Var, dims: &[usize]) -> Tensor<T> {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(dims))
    }

    /// Adds every bound parameter's gradient into `store`.
    pub fn accumulate_into(&self, store: &mut ParamStore<T>) {
        let mut params = self.params.clone();
        params.sort_by_key(|(id, _)| *id);
        for (id, v) in params {
            if let Some(g) = self.get(v) {
                store.get_mut(id).gradient.add_assign(g);
            }
        }
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params
            .iter()
            .find(|(p, _)| *p == id)
            .and_then(|&(_, v)| self.get(v))
    }
}
