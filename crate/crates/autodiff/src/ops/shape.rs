use crate::error::{AdError, Result};
use crate::tape::{op_output, Tape};
use crate::tensor::Tensor;

fn outer_inner(shape: &[usize], axis: usize) -> (usize, usize) {
    (
        shape[..axis].iter().product(),
        shape[axis + 1..].iter().product(),
    )
}

impl Tape {
    pub fn reshape(&self, x: &Tensor, new_shape: &[usize]) -> Result<Tensor> {
        let n: usize = new_shape.iter().product();
        if n != x.numel() {
            return Err(AdError::DimError {
                op: "reshape",
                msg: format!("cannot view {:?} as {:?}", x.shape(), new_shape),
            });
        }
        let out = op_output("reshape", self, &[x], x.data().to_vec(), new_shape.to_vec())?;
        if self.wants_grad(&[x]) {
            let x = x.clone();
            self.push(out.id(), move |g, store| {
                store.accumulate(&x, g.to_vec());
            });
        }
        Ok(out)
    }

    pub fn concat(&self, xs: &[&Tensor], axis: usize) -> Result<Tensor> {
        if xs.is_empty() {
            return Err(AdError::DimError {
                op: "concat",
                msg: "no inputs".into(),
            });
        }
        let first = xs[0].shape();
        if axis >= first.len() {
            return Err(AdError::DimError {
                op: "concat",
                msg: format!("axis {} out of range for shape {:?}", axis, first),
            });
        }
        for t in &xs[1..] {
            let s = t.shape();
            let off_axis_match = s.len() == first.len()
                && s.iter()
                    .zip(first)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !off_axis_match {
                return Err(AdError::ShapeMismatch {
                    op: "concat",
                    lhs: first.to_vec(),
                    rhs: s.to_vec(),
                });
            }
        }
        let total_axis: usize = xs.iter().map(|t| t.shape()[axis]).sum();
        let mut shape = first.to_vec();
        shape[axis] = total_axis;
        let (outer, inner) = outer_inner(&shape, axis);
        let mut data = vec![0.0; outer * total_axis * inner];
        let mut offset = 0;
        for t in xs {
            let n = t.shape()[axis];
            let src = t.data();
            for o in 0..outer {
                let dst_base = (o * total_axis + offset) * inner;
                let src_base = o * n * inner;
                data[dst_base..dst_base + n * inner]
                    .copy_from_slice(&src[src_base..src_base + n * inner]);
            }
            offset += n;
        }
        let inputs: Vec<&Tensor> = xs.to_vec();
        let out = op_output("concat", self, &inputs, data, shape)?;
        if self.wants_grad(&inputs) {
            let parts: Vec<Tensor> = xs.iter().map(|t| (*t).clone()).collect();
            self.push(out.id(), move |g, store| {
                let mut offset = 0;
                for t in &parts {
                    let n = t.shape()[axis];
                    if t.requires_grad() {
                        let mut gt = vec![0.0; t.numel()];
                        for o in 0..outer {
                            let src_base = (o * total_axis + offset) * inner;
                            let dst_base = o * n * inner;
                            gt[dst_base..dst_base + n * inner]
                                .copy_from_slice(&g[src_base..src_base + n * inner]);
                        }
                        store.accumulate(t, gt);
                    }
                    offset += n;
                }
            });
        }
        Ok(out)
    }

    /// Contiguous range [start, end) along `axis`.
    pub fn slice_axis(&self, x: &Tensor, axis: usize, start: usize, end: usize) -> Result<Tensor> {
        let shape = x.shape();
        if axis >= shape.len() || start >= end || end > shape[axis] {
            return Err(AdError::DimError {
                op: "slice",
                msg: format!(
                    "range {}..{} on axis {} invalid for shape {:?}",
                    start, end, axis, shape
                ),
            });
        }
        let n_axis = shape[axis];
        let taken = end - start;
        let (outer, inner) = outer_inner(shape, axis);
        let mut new_shape = shape.to_vec();
        new_shape[axis] = taken;
        let src = x.data();
        let mut data = vec![0.0; outer * taken * inner];
        for o in 0..outer {
            let src_base = (o * n_axis + start) * inner;
            let dst_base = o * taken * inner;
            data[dst_base..dst_base + taken * inner]
                .copy_from_slice(&src[src_base..src_base + taken * inner]);
        }
        let out = op_output("slice", self, &[x], data, new_shape)?;
        if self.wants_grad(&[x]) {
            let x = x.clone();
            self.push(out.id(), move |g, store| {
                let mut gx = vec![0.0; x.numel()];
                for o in 0..outer {
                    let dst_base = (o * n_axis + start) * inner;
                    let src_base = o * taken * inner;
                    gx[dst_base..dst_base + taken * inner]
                        .copy_from_slice(&g[src_base..src_base + taken * inner]);
                }
                store.accumulate(&x, gx);
            });
        }
        Ok(out)
    }
}
