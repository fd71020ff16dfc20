use crate::error::{AdError, Result};
use crate::kernels::{col2im, im2col, mm, mm_nt, mm_tn};
use crate::tape::{op_output, Tape};
use crate::tensor::Tensor;

fn dims4(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize, usize)> {
    match t.shape() {
        [a, b, c, d] => Ok((*a, *b, *c, *d)),
        s => Err(AdError::DimError {
            op,
            msg: format!("expected a 4-d tensor, got shape {:?}", s),
        }),
    }
}

fn conv_out(op: &'static str, h: usize, k: usize, stride: usize, p: usize) -> Result<usize> {
    let padded = h + 2 * p;
    if k > padded {
        return Err(AdError::DimError {
            op,
            msg: format!("kernel {} exceeds padded input {}", k, padded),
        });
    }
    if stride == 0 {
        return Err(AdError::DimError {
            op,
            msg: "stride must be >= 1".into(),
        });
    }
    Ok((padded - k) / stride + 1)
}

impl Tape {
    /// Cross-correlation: x[B,Cin,H,W] ⋆ w[Cout,Cin,kh,kw] + b[Cout].
    pub fn conv2d(
        &self,
        x: &Tensor,
        w: &Tensor,
        b: &Tensor,
        stride: usize,
        padding: (usize, usize),
    ) -> Result<Tensor> {
        let (bsz, cin, h, wd) = dims4("conv2d", x)?;
        let (cout, cin2, kh, kw) = dims4("conv2d", w)?;
        if cin != cin2 || b.shape() != [cout] {
            return Err(AdError::ShapeMismatch {
                op: "conv2d",
                lhs: x.shape().to_vec(),
                rhs: w.shape().to_vec(),
            });
        }
        let (ph, pw) = padding;
        let oh = conv_out("conv2d", h, kh, stride, ph)?;
        let ow = conv_out("conv2d", wd, kw, stride, pw)?;
        let ckk = cin * kh * kw;
        let (isz, osz) = (cin * h * wd, cout * oh * ow);
        let mut data = vec![0.0; bsz * osz];
        for bi in 0..bsz {
            let col = im2col(
                &x.data()[bi * isz..(bi + 1) * isz],
                cin,
                h,
                wd,
                kh,
                kw,
                stride,
                ph,
                pw,
                oh,
                ow,
            );
            let o = mm(w.data(), &col, cout, ckk, oh * ow);
            let dst = &mut data[bi * osz..(bi + 1) * osz];
            for co in 0..cout {
                let bias = b.data()[co];
                for (d, v) in dst[co * oh * ow..(co + 1) * oh * ow]
                    .iter_mut()
                    .zip(&o[co * oh * ow..(co + 1) * oh * ow])
                {
                    *d = v + bias;
                }
            }
        }
        let out = op_output("conv2d", self, &[x, w, b], data, vec![bsz, cout, oh, ow])?;
        if self.wants_grad(&[x, w, b]) {
            let (x, w, b) = (x.clone(), w.clone(), b.clone());
            self.push(out.id(), move |g, store| {
                let mut gw = vec![0.0; w.numel()];
                let mut gx = vec![0.0; x.numel()];
                for bi in 0..bsz {
                    let gb_slice = &g[bi * osz..(bi + 1) * osz];
                    if w.requires_grad() {
                        let col = im2col(
                            &x.data()[bi * isz..(bi + 1) * isz],
                            cin,
                            h,
                            wd,
                            kh,
                            kw,
                            stride,
                            ph,
                            pw,
                            oh,
                            ow,
                        );
                        let dw = mm_nt(gb_slice, &col, cout, oh * ow, ckk);
                        for (acc, v) in gw.iter_mut().zip(&dw) {
                            *acc += v;
                        }
                    }
                    if x.requires_grad() {
                        let dcol = mm_tn(w.data(), gb_slice, ckk, cout, oh * ow);
                        let dx = col2im(&dcol, cin, h, wd, kh, kw, stride, ph, pw, oh, ow);
                        for (acc, v) in gx[bi * isz..(bi + 1) * isz].iter_mut().zip(&dx) {
                            *acc += v;
                        }
                    }
                }
                if w.requires_grad() {
                    store.accumulate(&w, gw);
                }
                if x.requires_grad() {
                    store.accumulate(&x, gx);
                }
                if b.requires_grad() {
                    let mut gbias = vec![0.0; cout];
                    for bi in 0..bsz {
                        for co in 0..cout {
                            let base = bi * osz + co * oh * ow;
                            gbias[co] += g[base..base + oh * ow].iter().sum::<f64>();
                        }
                    }
                    store.accumulate(&b, gbias);
                }
            });
        }
        Ok(out)
    }

    /// Transposed convolution: x[B,Cin,H,W], w[Cin,Cout,kh,kw] + b[Cout].
    /// Forward equals the input-gradient pass of `conv2d` with the same kernel.
    pub fn deconv2d(
        &self,
        x: &Tensor,
        w: &Tensor,
        b: &Tensor,
        stride: usize,
        padding: (usize, usize),
    ) -> Result<Tensor> {
        let (bsz, cin, h, wd) = dims4("deconv2d", x)?;
        let (cin2, cout, kh, kw) = dims4("deconv2d", w)?;
        if cin != cin2 || b.shape() != [cout] {
            return Err(AdError::ShapeMismatch {
                op: "deconv2d",
                lhs: x.shape().to_vec(),
                rhs: w.shape().to_vec(),
            });
        }
        let (ph, pw) = padding;
        if stride == 0 {
            return Err(AdError::DimError {
                op: "deconv2d",
                msg: "stride must be >= 1".into(),
            });
        }
        let oh_i = ((h - 1) * stride + kh) as isize - 2 * ph as isize;
        let ow_i = ((wd - 1) * stride + kw) as isize - 2 * pw as isize;
        if oh_i < 1 || ow_i < 1 {
            return Err(AdError::DimError {
                op: "deconv2d",
                msg: format!("output would be empty for input {:?}", x.shape()),
            });
        }
        let (oh, ow) = (oh_i as usize, ow_i as usize);
        let ckk = cout * kh * kw;
        let (isz, osz) = (cin * h * wd, cout * oh * ow);
        let mut data = vec![0.0; bsz * osz];
        for bi in 0..bsz {
            // wᵀ[CoKK,Cin] · x[Cin,HW] scattered onto the output grid.
            let col = mm_tn(w.data(), &x.data()[bi * isz..(bi + 1) * isz], ckk, cin, h * wd);
            let o = col2im(&col, cout, oh, ow, kh, kw, stride, ph, pw, h, wd);
            let dst = &mut data[bi * osz..(bi + 1) * osz];
            for co in 0..cout {
                let bias = b.data()[co];
                for (d, v) in dst[co * oh * ow..(co + 1) * oh * ow]
                    .iter_mut()
                    .zip(&o[co * oh * ow..(co + 1) * oh * ow])
                {
                    *d = v + bias;
                }
            }
        }
        let out = op_output("deconv2d", self, &[x, w, b], data, vec![bsz, cout, oh, ow])?;
        if self.wants_grad(&[x, w, b]) {
            let (x, w, b) = (x.clone(), w.clone(), b.clone());
            self.push(out.id(), move |g, store| {
                let mut gw = vec![0.0; w.numel()];
                let mut gx = vec![0.0; x.numel()];
                for bi in 0..bsz {
                    let gcol = im2col(
                        &g[bi * osz..(bi + 1) * osz],
                        cout,
                        oh,
                        ow,
                        kh,
                        kw,
                        stride,
                        ph,
                        pw,
                        h,
                        wd,
                    );
                    if x.requires_grad() {
                        let dx = mm(w.data(), &gcol, cin, ckk, h * wd);
                        for (acc, v) in gx[bi * isz..(bi + 1) * isz].iter_mut().zip(&dx) {
                            *acc += v;
                        }
                    }
                    if w.requires_grad() {
                        let dw = mm_nt(
                            &x.data()[bi * isz..(bi + 1) * isz],
                            &gcol,
                            cin,
                            h * wd,
                            ckk,
                        );
                        for (acc, v) in gw.iter_mut().zip(&dw) {
                            *acc += v;
                        }
                    }
                }
                if x.requires_grad() {
                    store.accumulate(&x, gx);
                }
                if w.requires_grad() {
                    store.accumulate(&w, gw);
                }
                if b.requires_grad() {
                    let mut gbias = vec![0.0; cout];
                    for bi in 0..bsz {
                        for co in 0..cout {
                            let base = bi * osz + co * oh * ow;
                            gbias[co] += g[base..base + oh * ow].iter().sum::<f64>();
                        }
                    }
                    store.accumulate(&b, gbias);
                }
            });
        }
        Ok(out)
    }
}
