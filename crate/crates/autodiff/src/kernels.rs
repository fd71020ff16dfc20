//! Raw f64 matrix/convolution kernels shared by forward and backward paths.
//!
//! All parallel loops split the output into disjoint row blocks with a fixed
//! per-element accumulation order, so results are bit-identical regardless of
//! thread count.

use rayon::prelude::*;

const PAR_FLOP_THRESHOLD: usize = 1 << 17;

/// c[m,n] = a[m,k] · b[k,n]
pub fn mm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0; m * n];
    let row = |ci: &mut [f64], i: usize| {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in ci.iter_mut().zip(brow) {
                *cv += aip * bv;
            }
        }
    };
    if m * k * n >= PAR_FLOP_THRESHOLD && m > 1 {
        c.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, ci)| row(ci, i));
    } else {
        for (i, ci) in c.chunks_mut(n).enumerate() {
            row(ci, i);
        }
    }
    c
}

/// c[m,n] = a[m,k] · b[n,k]ᵀ  (dot-product form)
pub fn mm_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut c = vec![0.0; m * n];
    let row = |ci: &mut [f64], i: usize| {
        let arow = &a[i * k..(i + 1) * k];
        for (j, cv) in ci.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for (av, bv) in arow.iter().zip(brow) {
                s += av * bv;
            }
            *cv = s;
        }
    };
    if m * k * n >= PAR_FLOP_THRESHOLD && m > 1 {
        c.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, ci)| row(ci, i));
    } else {
        for (i, ci) in c.chunks_mut(n).enumerate() {
            row(ci, i);
        }
    }
    c
}

/// c[m,n] = a[k,m]ᵀ · b[k,n]
pub fn mm_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    let at = transpose(a, k, m);
    mm(&at, b, m, k, n)
}

/// out[n,m] from a[m,n]
pub fn transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

/// Patch matrix for one image: col[(ci·kh+u)·kw+v, oy·ow+ox] =
/// x[ci, oy·s−ph+u, ox·s−pw+v], zero outside the padded input.
#[allow(clippy::too_many_arguments)]
pub fn im2col(
    x: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    let mut col = vec![0.0; cin * kh * kw * oh * ow];
    for ci in 0..cin {
        let xc = &x[ci * h * w..(ci + 1) * h * w];
        for u in 0..kh {
            for v in 0..kw {
                let r = ((ci * kh + u) * kw + v) * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * stride + u) as isize - ph as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let xrow = &xc[iy as usize * w..(iy as usize + 1) * w];
                    let crow = r + oy * ow;
                    for ox in 0..ow {
                        let ix = (ox * stride + v) as isize - pw as isize;
                        if ix >= 0 && ix < w as isize {
                            col[crow + ox] = xrow[ix as usize];
                        }
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of `im2col`: scatter-add patch values back onto the image.
#[allow(clippy::too_many_arguments)]
pub fn col2im(
    col: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    let mut x = vec![0.0; cin * h * w];
    for ci in 0..cin {
        let xc = &mut x[ci * h * w..(ci + 1) * h * w];
        for u in 0..kh {
            for v in 0..kw {
                let r = ((ci * kh + u) * kw + v) * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * stride + u) as isize - ph as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let crow = r + oy * ow;
                    for ox in 0..ow {
                        let ix = (ox * stride + v) as isize - pw as isize;
                        if ix >= 0 && ix < w as isize {
                            xc[iy as usize * w + ix as usize] += col[crow + ox];
                        }
                    }
                }
            }
        }
    }
    x
}
