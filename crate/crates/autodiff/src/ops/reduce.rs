use crate::error::{AdError, Result};
use crate::tape::{op_output, Tape};
use crate::tensor::Tensor;

impl Tape {
    pub fn sum_all(&self, x: &Tensor) -> Result<Tensor> {
        let s: f64 = x.data().iter().sum();
        let out = op_output("sum", self, &[x], vec![s], vec![1])?;
        if self.wants_grad(&[x]) {
            let x = x.clone();
            self.push(out.id(), move |g, store| {
                store.accumulate(&x, vec![g[0]; x.numel()]);
            });
        }
        Ok(out)
    }

    pub fn mean_all(&self, x: &Tensor) -> Result<Tensor> {
        let n = x.numel() as f64;
        let s: f64 = x.data().iter().sum::<f64>() / n;
        let out = op_output("mean", self, &[x], vec![s], vec![1])?;
        if self.wants_grad(&[x]) {
            let x = x.clone();
            self.push(out.id(), move |g, store| {
                store.accumulate(&x, vec![g[0] / n; x.numel()]);
            });
        }
        Ok(out)
    }

    /// Sum along one axis, removing it from the shape.
    pub fn sum_axis(&self, x: &Tensor, axis: usize) -> Result<Tensor> {
        let shape = x.shape();
        if axis >= shape.len() {
            return Err(AdError::DimError {
                op: "sum_axis",
                msg: format!("axis {} out of range for shape {:?}", axis, shape),
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let n = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let xs = x.data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..n {
                let base = (o * n + j) * inner;
                for i in 0..inner {
                    data[o * inner + i] += xs[base + i];
                }
            }
        }
        let mut new_shape: Vec<usize> = shape[..axis].to_vec();
        new_shape.extend_from_slice(&shape[axis + 1..]);
        if new_shape.is_empty() {
            new_shape.push(1);
        }
        let out = op_output("sum_axis", self, &[x], data, new_shape)?;
        if self.wants_grad(&[x]) {
            let x = x.clone();
            self.push(out.id(), move |g, store| {
                let mut gx = vec![0.0; x.numel()];
                for o in 0..outer {
                    for j in 0..n {
                        let base = (o * n + j) * inner;
                        gx[base..base + inner].copy_from_slice(&g[o * inner..(o + 1) * inner]);
                    }
                }
                store.accumulate(&x, gx);
            });
        }
        Ok(out)
    }

    /// Mean squared error between same-shape tensors; scalar output.
    pub fn mse(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.shape() != b.shape() {
            return Err(AdError::ShapeMismatch {
                op: "mse",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let n = a.numel() as f64;
        let s: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / n;
        let out = op_output("mse", self, &[a, b], vec![s], vec![1])?;
        if self.wants_grad(&[a, b]) {
            let (a, b) = (a.clone(), b.clone());
            self.push(out.id(), move |g, store| {
                let scale = 2.0 * g[0] / n;
                if a.requires_grad() {
                    store.accumulate(
                        &a,
                        a.data()
                            .iter()
                            .zip(b.data())
                            .map(|(x, y)| scale * (x - y))
                            .collect(),
                    );
                }
                if b.requires_grad() {
                    store.accumulate(
                        &b,
                        a.data()
                            .iter()
                            .zip(b.data())
                            .map(|(x, y)| scale * (y - x))
                            .collect(),
                    );
                }
            });
        }
        Ok(out)
    }
}
