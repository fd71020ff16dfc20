use crate::error::{AdError, Result};
use crate::tape::{op_output, Tape};
use crate::tensor::Tensor;

fn hw(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize)> {
    let s = t.shape();
    if s.len() < 2 {
        return Err(AdError::DimError {
            op,
            msg: format!("expected at least 2 dims, got {:?}", s),
        });
    }
    let h = s[s.len() - 2];
    let w = s[s.len() - 1];
    let lead: usize = s[..s.len() - 2].iter().product();
    Ok((lead, h, w))
}

impl Tape {
    /// Forward difference along the last axis with replicate edge
    /// (last column is zero). Same shape as the input.
    pub fn diff_x(&self, x: &Tensor) -> Result<Tensor> {
        let (lead, h, w) = hw("diff_x", x)?;
        let xs = x.data();
        let mut data = vec![0.0; xs.len()];
        for l in 0..lead * h {
            let base = l * w;
            for j in 0..w - 1 {
                data[base + j] = xs[base + j + 1] - xs[base + j];
            }
        }
        let out = op_output("diff_x", self, &[x], data, x.shape().to_vec())?;
        if self.wants_grad(&[x]) {
            let x = x.clone();
            self.push(out.id(), move |g, store| {
                let mut gx = vec![0.0; x.numel()];
                for l in 0..lead * h {
                    let base = l * w;
                    for j in 0..w - 1 {
                        gx[base + j] -= g[base + j];
                        gx[base + j + 1] += g[base + j];
                    }
                }
                store.accumulate(&x, gx);
            });
        }
        Ok(out)
    }

    /// Forward difference along the second-to-last axis with replicate edge.
    pub fn diff_y(&self, x: &Tensor) -> Result<Tensor> {
        let (lead, h, w) = hw("diff_y", x)?;
        let xs = x.data();
        let mut data = vec![0.0; xs.len()];
        for l in 0..lead {
            let base = l * h * w;
            for i in 0..h - 1 {
                for j in 0..w {
                    data[base + i * w + j] = xs[base + (i + 1) * w + j] - xs[base + i * w + j];
                }
            }
        }
        let out = op_output("diff_y", self, &[x], data, x.shape().to_vec())?;
        if self.wants_grad(&[x]) {
            let x = x.clone();
            self.push(out.id(), move |g, store| {
                let mut gx = vec![0.0; x.numel()];
                for l in 0..lead {
                    let base = l * h * w;
                    for i in 0..h - 1 {
                        for j in 0..w {
                            gx[base + i * w + j] -= g[base + i * w + j];
                            gx[base + (i + 1) * w + j] += g[base + i * w + j];
                        }
                    }
                }
                store.accumulate(&x, gx);
            });
        }
        Ok(out)
    }

    /// Channel-wise affine: y[b,c,·] = gamma[b,c] · x[b,c,·] + beta[b,c].
    pub fn film(&self, x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<Tensor> {
        let (bsz, c, h, w) = match x.shape() {
            [a, b, c, d] => (*a, *b, *c, *d),
            s => {
                return Err(AdError::DimError {
                    op: "film",
                    msg: format!("expected a 4-d tensor, got shape {:?}", s),
                })
            }
        };
        if gamma.shape() != [bsz, c] || beta.shape() != [bsz, c] {
            return Err(AdError::ShapeMismatch {
                op: "film",
                lhs: x.shape().to_vec(),
                rhs: gamma.shape().to_vec(),
            });
        }
        let spatial = h * w;
        let xs = x.data();
        let mut data = vec![0.0; xs.len()];
        for bc in 0..bsz * c {
            let (gm, bt) = (gamma.data()[bc], beta.data()[bc]);
            for i in 0..spatial {
                data[bc * spatial + i] = gm * xs[bc * spatial + i] + bt;
            }
        }
        let out = op_output("film", self, &[x, gamma, beta], data, x.shape().to_vec())?;
        if self.wants_grad(&[x, gamma, beta]) {
            let (x, gamma, beta) = (x.clone(), gamma.clone(), beta.clone());
            self.push(out.id(), move |g, store| {
                if x.requires_grad() {
                    let mut gx = vec![0.0; x.numel()];
                    for bc in 0..bsz * c {
                        let gm = gamma.data()[bc];
                        for i in 0..spatial {
                            gx[bc * spatial + i] = gm * g[bc * spatial + i];
                        }
                    }
                    store.accumulate(&x, gx);
                }
                if gamma.requires_grad() {
                    let xs = x.data();
                    let mut gg = vec![0.0; bsz * c];
                    for bc in 0..bsz * c {
                        let mut s = 0.0;
                        for i in 0..spatial {
                            s += g[bc * spatial + i] * xs[bc * spatial + i];
                        }
                        gg[bc] = s;
                    }
                    store.accumulate(&gamma, gg);
                }
                if beta.requires_grad() {
                    let gb = (0..bsz * c)
                        .map(|bc| g[bc * spatial..(bc + 1) * spatial].iter().sum())
                        .collect();
                    store.accumulate(&beta, gb);
                }
            });
        }
        Ok(out)
    }
}
