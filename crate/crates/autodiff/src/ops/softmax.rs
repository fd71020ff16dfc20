use crate::error::{AdError, Result};
use crate::tape::{op_output, Tape};
use crate::tensor::Tensor;

/// Iterate a shape as outer × axis × inner.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, n, inner)
}

impl Tape {
    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&self, x: &Tensor, axis: usize) -> Result<Tensor> {
        if axis >= x.shape().len() {
            return Err(AdError::DimError {
                op: "softmax",
                msg: format!("axis {} out of range for shape {:?}", axis, x.shape()),
            });
        }
        if x.shape()[axis] == 0 {
            return Err(AdError::DimError {
                op: "softmax",
                msg: format!("empty axis {} in shape {:?}", axis, x.shape()),
            });
        }
        let (outer, n, inner) = axis_split(x.shape(), axis);
        let xs = x.data();
        let mut data = vec![0.0; xs.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| (o * n + j) * inner + i;
                let mut mx = f64::NEG_INFINITY;
                for j in 0..n {
                    mx = mx.max(xs[at(j)]);
                }
                let mut sum = 0.0;
                for j in 0..n {
                    let e = (xs[at(j)] - mx).exp();
                    data[at(j)] = e;
                    sum += e;
                }
                for j in 0..n {
                    data[at(j)] /= sum;
                }
            }
        }
        let out = op_output("softmax", self, &[x], data, x.shape().to_vec())?;
        if self.wants_grad(&[x]) {
            let (x, y) = (x.clone(), out.clone());
            self.push(out.id(), move |g, store| {
                let ys = y.data();
                let mut gx = vec![0.0; ys.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| (o * n + j) * inner + i;
                        let mut dot = 0.0;
                        for j in 0..n {
                            dot += g[at(j)] * ys[at(j)];
                        }
                        for j in 0..n {
                            gx[at(j)] = ys[at(j)] * (g[at(j)] - dot);
                        }
                    }
                }
                store.accumulate(&x, gx);
            });
        }
        Ok(out)
    }
}
