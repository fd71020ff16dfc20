use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{AdError, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Identity of a tensor value, used to route gradients on the tape.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct TensorId(u64);

fn fresh_id() -> TensorId {
    TensorId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
}

struct Inner {
    id: TensorId,
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    /// Leaves are tensors not produced by a tape operation; only leaves
    /// receive gradients in their `grad` slot.
    is_leaf: bool,
    grad: RefCell<Option<Vec<f64>>>,
}

/// Dense row-major f64 tensor. Immutable after creation except for the
/// gradient slot, which a single backward pass accumulates into.
///
/// Cloning is cheap (shared storage); a clone is the same logical value.
#[derive(Clone)]
pub struct Tensor(Rc<Inner>);

impl Tensor {
    fn build(data: Vec<f64>, shape: &[usize], requires_grad: bool, is_leaf: bool) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(AdError::DimError {
                op: "tensor",
                msg: format!("shape {:?} implies {} elements, got {}", shape, numel, data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(AdError::NonFinite { op: "tensor" });
        }
        Ok(Tensor(Rc::new(Inner {
            id: fresh_id(),
            shape: shape.to_vec(),
            data,
            requires_grad,
            is_leaf,
            grad: RefCell::new(None),
        })))
    }

    /// Constant leaf tensor (no gradient tracking).
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        Self::build(data, shape, false, true)
    }

    /// Leaf tensor that accumulates a gradient during backward.
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        Self::build(data, shape, true, true)
    }

    /// Output of a recorded operation. Not a leaf.
    pub(crate) fn op_result(data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor(Rc::new(Inner {
            id: fresh_id(),
            shape,
            data,
            requires_grad,
            is_leaf: false,
            grad: RefCell::new(None),
        }))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::build(vec![0.0; n], shape, false, true).expect("zeros")
    }

    pub fn full(shape: &[usize], v: f64) -> Result<Self> {
        let n = shape.iter().product();
        Self::build(vec![v; n], shape, false, true)
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::build(vec![v], &[1], false, true)
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Result<Self> {
        let n: usize = shape.iter().product();
        Self::build((0..n).map(|i| f(i)).collect(), shape, false, true)
    }

    pub fn id(&self) -> TensorId {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.is_leaf
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape());
        self.0.data[0]
    }

    /// Copy of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    /// Remove and return the accumulated gradient.
    pub fn take_grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow_mut().take()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, contribution: &[f64]) {
        debug_assert_eq!(contribution.len(), self.numel());
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                for (gi, ci) in g.iter_mut().zip(contribution) {
                    *gi += ci;
                }
            }
            None => *slot = Some(contribution.to_vec()),
        }
    }

    /// Fresh constant tensor with the same data (drops grad tracking).
    pub fn detach(&self) -> Tensor {
        Tensor::new(self.0.data.clone(), &self.0.shape).expect("detach")
    }

    /// Fresh parameter tensor with the same data.
    pub fn to_param(&self) -> Tensor {
        Tensor::param(self.0.data.clone(), &self.0.shape).expect("to_param")
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("data", &self.0.data)
            .finish()
    }
}
