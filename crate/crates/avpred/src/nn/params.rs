use std::cell::RefCell;
use std::rc::Rc;

use autodiff::Tensor;
use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Mutable slot holding the current value of a named parameter or buffer.
/// The tensor inside is immutable; updates replace it.
#[derive(Clone)]
pub struct Param {
    name: Rc<str>,
    learnable: bool,
    slot: Rc<RefCell<Tensor>>,
}

impl Param {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn learnable(&self) -> bool {
        self.learnable
    }

    /// Current value (cheap clone of the handle).
    pub fn value(&self) -> Tensor {
        self.slot.borrow().clone()
    }

    pub fn set(&self, t: Tensor) {
        debug_assert_eq!(t.shape(), self.slot.borrow().shape());
        *self.slot.borrow_mut() = t;
    }

    pub fn shape(&self) -> Vec<usize> {
        self.slot.borrow().shape().to_vec()
    }

    pub fn numel(&self) -> usize {
        self.slot.borrow().numel()
    }
}

/// Ordered, named registry of all weights and buffers of a model stage.
/// Insertion order is construction order, which is fixed, so the census
/// is stable across runs.
#[derive(Default)]
pub struct ParamSet {
    entries: IndexMap<String, Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, init: Tensor, learnable: bool) -> Param {
        assert!(
            !self.entries.contains_key(name),
            "duplicate parameter name {name}"
        );
        let value = if learnable { init.to_param() } else { init.detach() };
        let p = Param {
            name: Rc::from(name),
            learnable,
            slot: Rc::new(RefCell::new(value)),
        };
        self.entries.insert(name.to_string(), p.clone());
        p
    }

    pub fn get(&self, name: &str) -> Result<&Param> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.entries.values()
    }

    pub fn learnable(&self) -> impl Iterator<Item = &Param> {
        self.entries.values().filter(|p| p.learnable)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn zero_grads(&self) {
        for p in self.entries.values() {
            p.slot.borrow().zero_grad();
        }
    }

    /// Total scalar count across learnable parameters.
    pub fn learnable_numel(&self) -> usize {
        self.learnable().map(|p| p.numel()).sum()
    }

    /// Flat snapshot of every entry's data, in registry order.
    pub fn snapshot(&self) -> Vec<(String, Vec<f64>)> {
        self.entries
            .values()
            .map(|p| (p.name().to_string(), p.value().data().to_vec()))
            .collect()
    }
}

/// Uniform init in ±1/sqrt(fan_in); biases start at zero unless stated.
pub fn uniform_init(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(data, shape).expect("init tensor")
}
