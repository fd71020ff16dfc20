use crate::error::{AdError, Result};
use crate::kernels::{mm, mm_nt, mm_tn, transpose};
use crate::tape::{op_output, Tape};
use crate::tensor::Tensor;

fn dims2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(AdError::DimError {
            op,
            msg: format!("expected a 2-d tensor, got shape {:?}", s),
        }),
    }
}

impl Tape {
    /// a[m,k] · b[k,n] -> [m,n]
    pub fn matmul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let (m, k) = dims2("matmul", a)?;
        let (k2, n) = dims2("matmul", b)?;
        if k != k2 {
            return Err(AdError::ShapeMismatch {
                op: "matmul",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let data = mm(a.data(), b.data(), m, k, n);
        let out = op_output("matmul", self, &[a, b], data, vec![m, n])?;
        if self.wants_grad(&[a, b]) {
            let (a, b) = (a.clone(), b.clone());
            self.push(out.id(), move |g, store| {
                if a.requires_grad() {
                    store.accumulate(&a, mm_nt(g, b.data(), m, n, k));
                }
                if b.requires_grad() {
                    store.accumulate(&b, mm_tn(a.data(), g, k, m, n));
                }
            });
        }
        Ok(out)
    }

    pub fn transpose2d(&self, a: &Tensor) -> Result<Tensor> {
        let (m, n) = dims2("transpose", a)?;
        let data = transpose(a.data(), m, n);
        let out = op_output("transpose", self, &[a], data, vec![n, m])?;
        if self.wants_grad(&[a]) {
            let a = a.clone();
            self.push(out.id(), move |g, store| {
                store.accumulate(&a, transpose(g, n, m));
            });
        }
        Ok(out)
    }

    /// x[B,n] · w[m,n]ᵀ + b[m] -> [B,m]
    pub fn linear(&self, x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
        let (bsz, n) = dims2("linear", x)?;
        let (m, n2) = dims2("linear", w)?;
        if n != n2 {
            return Err(AdError::ShapeMismatch {
                op: "linear",
                lhs: x.shape().to_vec(),
                rhs: w.shape().to_vec(),
            });
        }
        if b.shape() != [m] {
            return Err(AdError::ShapeMismatch {
                op: "linear",
                lhs: w.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let mut data = mm_nt(x.data(), w.data(), bsz, n, m);
        for row in data.chunks_mut(m) {
            for (v, bias) in row.iter_mut().zip(b.data()) {
                *v += bias;
            }
        }
        let out = op_output("linear", self, &[x, w, b], data, vec![bsz, m])?;
        if self.wants_grad(&[x, w, b]) {
            let (x, w, b) = (x.clone(), w.clone(), b.clone());
            self.push(out.id(), move |g, store| {
                if x.requires_grad() {
                    store.accumulate(&x, mm(g, w.data(), bsz, m, n));
                }
                if w.requires_grad() {
                    store.accumulate(&w, mm_tn(g, x.data(), m, bsz, n));
                }
                if b.requires_grad() {
                    let mut gb = vec![0.0; m];
                    for row in g.chunks(m) {
                        for (acc, v) in gb.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    store.accumulate(&b, gb);
                }
            });
        }
        Ok(out)
    }
}
