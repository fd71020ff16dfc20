//! Frame and flow quality metrics.

use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
pub const PSNR_CAP_DB: f64 = 100.0;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Valid-mode separable Gaussian filtering of an HxW plane.
fn gauss_filter(x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let k = gaussian_kernel();
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for ox in 0..ow {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * x[y * w + ox + i];
            }
            tmp[y * ow + ox] = s;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for oy in 0..oh {
        for ox in 0..ow {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * tmp[(oy + i) * ow + ox];
            }
            out[oy * ow + ox] = s;
        }
    }
    out
}

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5) and the
/// standard constants for a unit dynamic range; mean over channels and
/// valid window positions.
pub fn ssim(a: &[f64], b: &[f64], channels: usize, h: usize, w: usize) -> Result<f64> {
    if a.len() != b.len() || a.len() != channels * h * w {
        return Err(Error::Eval(format!(
            "ssim shape mismatch: {} vs {} (expected {}x{}x{})",
            a.len(),
            b.len(),
            channels,
            h,
            w
        )));
    }
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Eval(format!(
            "frame {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let plane = h * w;
    let mut total = 0.0;
    for c in 0..channels {
        let ap = &a[c * plane..(c + 1) * plane];
        let bp = &b[c * plane..(c + 1) * plane];
        let mu_a = gauss_filter(ap, h, w);
        let mu_b = gauss_filter(bp, h, w);
        let aa: Vec<f64> = ap.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = bp.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = ap.iter().zip(bp).map(|(x, y)| x * y).collect();
        let mu_aa = gauss_filter(&aa, h, w);
        let mu_bb = gauss_filter(&bb, h, w);
        let mu_ab = gauss_filter(&ab, h, w);
        let mut acc = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = mu_aa[i] - ma * ma;
            let vb = mu_bb[i] - mb * mb;
            let cov = mu_ab[i] - ma * mb;
            acc += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
        }
        total += acc / mu_a.len() as f64;
    }
    Ok(total / channels as f64)
}

/// Peak signal-to-noise ratio in dB for unit-range frames; identical
/// frames report the 100 dB cap so sequence means stay finite.
pub fn psnr(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Eval(format!(
            "psnr shape mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mse = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
}

/// Average endpoint error between two 2xHxW flow fields: mean Euclidean
/// norm of the per-pixel flow difference.
pub fn aepe(fa: &[f64], fb: &[f64], h: usize, w: usize) -> Result<f64> {
    let plane = h * w;
    if fa.len() != 2 * plane || fb.len() != 2 * plane {
        return Err(Error::Eval(format!(
            "aepe shape mismatch: {} vs {} (expected 2x{h}x{w})",
            fa.len(),
            fb.len()
        )));
    }
    let mut acc = 0.0;
    for p in 0..plane {
        let dx = fa[p] - fb[p];
        let dy = fa[plane + p] - fb[plane + p];
        acc += (dx * dx + dy * dy).sqrt();
    }
    Ok(acc / plane as f64)
}
