use crate::error::{AdError, Result};
use crate::tape::{op_output, Tape};
use crate::tensor::Tensor;

impl Tape {
    /// Bilinear interpolation of src[B,C,H,W] at absolute pixel coordinates
    /// coords[B,2,H,W] (channel 0 = x, channel 1 = y). Out-of-bounds
    /// coordinates clamp to the border; the coordinate gradient is zero
    /// where clamping is active.
    pub fn bilinear_sample(&self, src: &Tensor, coords: &Tensor) -> Result<Tensor> {
        let (bsz, c, h, w) = match src.shape() {
            [a, b, c, d] => (*a, *b, *c, *d),
            s => {
                return Err(AdError::DimError {
                    op: "bilinear_sample",
                    msg: format!("expected 4-d source, got shape {:?}", s),
                })
            }
        };
        if coords.shape() != [bsz, 2, h, w] {
            return Err(AdError::ShapeMismatch {
                op: "bilinear_sample",
                lhs: src.shape().to_vec(),
                rhs: coords.shape().to_vec(),
            });
        }
        let spatial = h * w;
        let (ss, cs) = (src.data(), coords.data());
        let mut data = vec![0.0; bsz * c * spatial];
        let corners = move |xc: f64, yc: f64| {
            let x0 = xc.floor() as usize;
            let y0 = yc.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = xc - x0 as f64;
            let fy = yc - y0 as f64;
            (x0, y0, x1, y1, fx, fy)
        };
        for b in 0..bsz {
            let cx = &cs[b * 2 * spatial..b * 2 * spatial + spatial];
            let cy = &cs[b * 2 * spatial + spatial..b * 2 * spatial + 2 * spatial];
            for p in 0..spatial {
                let xc = cx[p].clamp(0.0, (w - 1) as f64);
                let yc = cy[p].clamp(0.0, (h - 1) as f64);
                let (x0, y0, x1, y1, fx, fy) = corners(xc, yc);
                for ch in 0..c {
                    let plane = &ss[(b * c + ch) * spatial..(b * c + ch + 1) * spatial];
                    let v00 = plane[y0 * w + x0];
                    let v01 = plane[y0 * w + x1];
                    let v10 = plane[y1 * w + x0];
                    let v11 = plane[y1 * w + x1];
                    data[(b * c + ch) * spatial + p] = (1.0 - fy)
                        * ((1.0 - fx) * v00 + fx * v01)
                        + fy * ((1.0 - fx) * v10 + fx * v11);
                }
            }
        }
        let out = op_output(
            "bilinear_sample",
            self,
            &[src, coords],
            data,
            vec![bsz, c, h, w],
        )?;
        if self.wants_grad(&[src, coords]) {
            let (src, coords) = (src.clone(), coords.clone());
            self.push(out.id(), move |g, store| {
                let (ss, cs) = (src.data(), coords.data());
                let mut gsrc = vec![0.0; src.numel()];
                let mut gcoords = vec![0.0; coords.numel()];
                for b in 0..bsz {
                    let cx = &cs[b * 2 * spatial..b * 2 * spatial + spatial];
                    let cy = &cs[b * 2 * spatial + spatial..b * 2 * spatial + 2 * spatial];
                    for p in 0..spatial {
                        let inside_x = cx[p] > 0.0 && cx[p] < (w - 1) as f64;
                        let inside_y = cy[p] > 0.0 && cy[p] < (h - 1) as f64;
                        let xc = cx[p].clamp(0.0, (w - 1) as f64);
                        let yc = cy[p].clamp(0.0, (h - 1) as f64);
                        let (x0, y0, x1, y1, fx, fy) = corners(xc, yc);
                        let mut gx_acc = 0.0;
                        let mut gy_acc = 0.0;
                        for ch in 0..c {
                            let go = g[(b * c + ch) * spatial + p];
                            if go == 0.0 {
                                continue;
                            }
                            let base = (b * c + ch) * spatial;
                            let plane = &ss[base..base + spatial];
                            let gp = &mut gsrc[base..base + spatial];
                            gp[y0 * w + x0] += go * (1.0 - fy) * (1.0 - fx);
                            gp[y0 * w + x1] += go * (1.0 - fy) * fx;
                            gp[y1 * w + x0] += go * fy * (1.0 - fx);
                            gp[y1 * w + x1] += go * fy * fx;
                            let v00 = plane[y0 * w + x0];
                            let v01 = plane[y0 * w + x1];
                            let v10 = plane[y1 * w + x0];
                            let v11 = plane[y1 * w + x1];
                            gx_acc += go * ((1.0 - fy) * (v01 - v00) + fy * (v11 - v10));
                            gy_acc += go * ((1.0 - fx) * (v10 - v00) + fx * (v11 - v01));
                        }
                        if inside_x {
                            gcoords[b * 2 * spatial + p] = gx_acc;
                        }
                        if inside_y {
                            gcoords[b * 2 * spatial + spatial + p] = gy_acc;
                        }
                    }
                }
                if src.requires_grad() {
                    store.accumulate(&src, gsrc);
                }
                if coords.requires_grad() {
                    store.accumulate(&coords, gcoords);
                }
            });
        }
        Ok(out)
    }
}
