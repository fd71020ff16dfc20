use crate::error::{AdError, Result};
use crate::tape::{op_output, Tape};
use crate::tensor::Tensor;

impl Tape {
    /// Non-overlapping max pooling (kernel = stride = k). Ties route the
    /// gradient to the first element in scan order.
    pub fn max_pool2d(&self, x: &Tensor, k: usize) -> Result<Tensor> {
        let (bsz, c, h, w) = match x.shape() {
            [a, b, c, d] => (*a, *b, *c, *d),
            s => {
                return Err(AdError::DimError {
                    op: "max_pool2d",
                    msg: format!("expected a 4-d tensor, got shape {:?}", s),
                })
            }
        };
        if k == 0 || h % k != 0 || w % k != 0 {
            return Err(AdError::DimError {
                op: "max_pool2d",
                msg: format!("spatial dims {}x{} not divisible by window {}", h, w, k),
            });
        }
        let (oh, ow) = (h / k, w / k);
        let xs = x.data();
        let mut data = vec![0.0; bsz * c * oh * ow];
        let mut argmax = vec![0usize; bsz * c * oh * ow];
        for bc in 0..bsz * c {
            let src = &xs[bc * h * w..(bc + 1) * h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = 0;
                    for dy in 0..k {
                        for dx in 0..k {
                            let idx = (oy * k + dy) * w + (ox * k + dx);
                            if src[idx] > best {
                                best = src[idx];
                                best_i = idx;
                            }
                        }
                    }
                    data[bc * oh * ow + oy * ow + ox] = best;
                    argmax[bc * oh * ow + oy * ow + ox] = bc * h * w + best_i;
                }
            }
        }
        let out = op_output("max_pool2d", self, &[x], data, vec![bsz, c, oh, ow])?;
        if self.wants_grad(&[x]) {
            let x = x.clone();
            self.push(out.id(), move |g, store| {
                let mut gx = vec![0.0; x.numel()];
                for (gi, &src_idx) in g.iter().zip(&argmax) {
                    gx[src_idx] += gi;
                }
                store.accumulate(&x, gx);
            });
        }
        Ok(out)
    }

    /// Mean over the spatial extent: [B,C,H,W] -> [B,C].
    pub fn global_avg_pool(&self, x: &Tensor) -> Result<Tensor> {
        let (bsz, c, h, w) = match x.shape() {
            [a, b, c, d] => (*a, *b, *c, *d),
            s => {
                return Err(AdError::DimError {
                    op: "global_avg_pool",
                    msg: format!("expected a 4-d tensor, got shape {:?}", s),
                })
            }
        };
        let spatial = h * w;
        let xs = x.data();
        let data: Vec<f64> = (0..bsz * c)
            .map(|bc| xs[bc * spatial..(bc + 1) * spatial].iter().sum::<f64>() / spatial as f64)
            .collect();
        let out = op_output("global_avg_pool", self, &[x], data, vec![bsz, c])?;
        if self.wants_grad(&[x]) {
            let x = x.clone();
            self.push(out.id(), move |g, store| {
                let mut gx = vec![0.0; x.numel()];
                for bc in 0..bsz * c {
                    let gv = g[bc] / spatial as f64;
                    for v in &mut gx[bc * spatial..(bc + 1) * spatial] {
                        *v = gv;
                    }
                }
                store.accumulate(&x, gx);
            });
        }
        Ok(out)
    }
}
