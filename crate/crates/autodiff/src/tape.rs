use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use crate::error::{AdError, Result};
use crate::tensor::{Tensor, TensorId};

type BackwardFn = Box<dyn Fn(&[f64], &mut Gradients)>;

struct Node {
    out: TensorId,
    backward: BackwardFn,
}

/// Wengert list recording forward operations for one reverse sweep.
///
/// Operations are methods on the tape; when no input requires a gradient
/// (or the tape was built with `no_grad`) nothing is recorded. Backward
/// may run exactly once per recording.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    recording: bool,
    consumed: Cell<bool>,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            recording: true,
            consumed: Cell::new(false),
        }
    }

    /// Tape that executes forward math without recording; outputs do not
    /// require gradients.
    pub fn no_grad() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            recording: false,
            consumed: Cell::new(false),
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    pub(crate) fn wants_grad(&self, inputs: &[&Tensor]) -> bool {
        self.recording && inputs.iter().any(|t| t.requires_grad())
    }

    pub(crate) fn push(&self, out: TensorId, backward: impl Fn(&[f64], &mut Gradients) + 'static) {
        self.nodes.borrow_mut().push(Node {
            out,
            backward: Box::new(backward),
        });
    }

    /// Reverse sweep from a scalar loss. Every reachable `requires_grad`
    /// leaf accumulates its gradient; the returned store also reports
    /// zeros for unreachable leaves.
    pub fn backward(&self, loss: &Tensor) -> Result<Gradients> {
        if loss.numel() != 1 {
            return Err(AdError::NonScalarLoss { numel: loss.numel() });
        }
        if self.consumed.replace(true) {
            return Err(AdError::BackwardConsumed);
        }
        let mut grads = Gradients::default();
        grads.inner.insert(loss.id(), vec![1.0]);
        let nodes = self.nodes.borrow();
        for node in nodes.iter().rev() {
            // All consumers of this output were recorded later, so its
            // gradient is complete; drop the entry once used.
            if let Some(gout) = grads.inner.remove(&node.out) {
                (node.backward)(&gout, &mut grads);
            }
        }
        Ok(grads)
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

/// Gradient store for a single backward sweep. Leaf gradients are mirrored
/// into each leaf tensor's grad slot.
#[derive(Default)]
pub struct Gradients {
    inner: HashMap<TensorId, Vec<f64>>,
}

impl Gradients {
    /// Accumulate a contribution for one input of a node.
    pub fn accumulate(&mut self, t: &Tensor, contribution: Vec<f64>) {
        debug_assert_eq!(contribution.len(), t.numel());
        if !t.requires_grad() {
            return;
        }
        if t.is_leaf() {
            t.accumulate_grad(&contribution);
        } else {
            match self.inner.get_mut(&t.id()) {
                Some(g) => {
                    for (gi, ci) in g.iter_mut().zip(&contribution) {
                        *gi += ci;
                    }
                }
                None => {
                    self.inner.insert(t.id(), contribution);
                }
            }
        }
    }

    /// Gradient of a leaf, zeros if it was unreachable from the loss.
    pub fn of(&self, t: &Tensor) -> Vec<f64> {
        t.grad().unwrap_or_else(|| vec![0.0; t.numel()])
    }
}

/// Shared helper for operation outputs: propagates requires_grad and
/// enforces the finite-values invariant.
pub(crate) fn op_output(
    op: &'static str,
    tape: &Tape,
    inputs: &[&Tensor],
    data: Vec<f64>,
    shape: Vec<usize>,
) -> Result<Tensor> {
    if !data.iter().all(|v| v.is_finite()) {
        return Err(AdError::NonFinite { op });
    }
    let rg = tape.wants_grad(inputs);
    Ok(Tensor::op_result(data, shape, rg))
}
