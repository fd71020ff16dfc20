use crate::error::{AdError, Result};
use crate::tape::{op_output, Tape};
use crate::tensor::Tensor;

/// Per-channel statistics produced by a training-mode batch norm, used by
/// the caller to update running averages.
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance (for running-average updates).
    pub var: Vec<f64>,
}

impl Tape {
    /// Channel-wise batch normalization over x[B,C,...], ε = 1e-5.
    ///
    /// Training mode normalizes by batch statistics and returns them;
    /// inference mode normalizes by the provided running statistics.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm(
        &self,
        x: &Tensor,
        gamma: &Tensor,
        beta: &Tensor,
        running_mean: &Tensor,
        running_var: &Tensor,
        training: bool,
        eps: f64,
    ) -> Result<(Tensor, Option<BatchStats>)> {
        let shape = x.shape();
        if shape.len() < 2 {
            return Err(AdError::DimError {
                op: "batch_norm",
                msg: format!("expected at least 2 dims, got {:?}", shape),
            });
        }
        let (bsz, c) = (shape[0], shape[1]);
        let spatial: usize = shape[2..].iter().product();
        if gamma.shape() != [c] || beta.shape() != [c] {
            return Err(AdError::ShapeMismatch {
                op: "batch_norm",
                lhs: shape.to_vec(),
                rhs: gamma.shape().to_vec(),
            });
        }
        let n = bsz * spatial;
        let xs = x.data();
        let per = move |b: usize, ch: usize| (b * c + ch) * spatial;

        let (mean, var_b) = if training {
            if n <= 1 {
                return Err(AdError::DegenerateStats { op: "batch_norm", n });
            }
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for ch in 0..c {
                let mut s = 0.0;
                for b in 0..bsz {
                    let base = per(b, ch);
                    s += xs[base..base + spatial].iter().sum::<f64>();
                }
                let m = s / n as f64;
                let mut v = 0.0;
                for b in 0..bsz {
                    let base = per(b, ch);
                    for &xv in &xs[base..base + spatial] {
                        let d = xv - m;
                        v += d * d;
                    }
                }
                mean[ch] = m;
                var[ch] = v / n as f64;
            }
            (mean, var)
        } else {
            (running_mean.data().to_vec(), running_var.data().to_vec())
        };

        let inv_std: Vec<f64> = var_b.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut data = vec![0.0; xs.len()];
        for b in 0..bsz {
            for ch in 0..c {
                let base = per(b, ch);
                let (m, is) = (mean[ch], inv_std[ch]);
                let (gm, bt) = (gamma.data()[ch], beta.data()[ch]);
                for i in 0..spatial {
                    data[base + i] = gm * (xs[base + i] - m) * is + bt;
                }
            }
        }
        let out = op_output("batch_norm", self, &[x, gamma, beta], data, shape.to_vec())?;

        if self.wants_grad(&[x, gamma, beta]) {
            let (x, gamma, beta) = (x.clone(), gamma.clone(), beta.clone());
            let (mean_c, inv_std_c) = (mean.clone(), inv_std.clone());
            self.push(out.id(), move |g, store| {
                let xs = x.data();
                // Reductions shared by every input gradient.
                let mut sum_g = vec![0.0; c];
                let mut sum_gx = vec![0.0; c];
                for b in 0..bsz {
                    for ch in 0..c {
                        let base = per(b, ch);
                        for i in 0..spatial {
                            let xhat = (xs[base + i] - mean_c[ch]) * inv_std_c[ch];
                            sum_g[ch] += g[base + i];
                            sum_gx[ch] += g[base + i] * xhat;
                        }
                    }
                }
                if x.requires_grad() {
                    let mut gx = vec![0.0; xs.len()];
                    for b in 0..bsz {
                        for ch in 0..c {
                            let base = per(b, ch);
                            let scale = gamma.data()[ch] * inv_std_c[ch];
                            for i in 0..spatial {
                                let xhat = (xs[base + i] - mean_c[ch]) * inv_std_c[ch];
                                gx[base + i] = if training {
                                    scale
                                        * (g[base + i]
                                            - sum_g[ch] / n as f64
                                            - xhat * sum_gx[ch] / n as f64)
                                } else {
                                    scale * g[base + i]
                                };
                            }
                        }
                    }
                    store.accumulate(&x, gx);
                }
                if gamma.requires_grad() {
                    store.accumulate(&gamma, sum_gx.clone());
                }
                if beta.requires_grad() {
                    store.accumulate(&beta, sum_g.clone());
                }
            });
        }

        let stats = if training {
            let unbias = n as f64 / (n as f64 - 1.0);
            Some(BatchStats {
                mean,
                var: var_b.iter().map(|v| v * unbias).collect(),
            })
        } else {
            None
        };
        Ok((out, stats))
    }
}
