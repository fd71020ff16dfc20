//! Rollout evaluation: per-frame SSIM/PSNR/AEPE against ground truth,
//! with raw-warp numbers alongside for the refinement comparison.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{read_dataset, Sequence};
use crate::error::{Error, Result};
use crate::metrics::{aepe, psnr, ssim};
use crate::model::{predict_rollout, Car, Mme, SeqBatch};
use crate::train::{build_car, build_mme, load_checkpoint, read_meta};

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct FrameMetrics {
    /// 1-based frame index within the sequence.
    pub frame: usize,
    pub ssim: f64,
    pub psnr: f64,
    pub aepe: f64,
    pub warp_ssim: f64,
    pub warp_psnr: f64,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct EvalReport {
    pub split: String,
    pub mme_checkpoint: String,
    pub car_checkpoint: String,
    pub samples: usize,
    pub k_seen: usize,
    pub horizon: usize,
    pub per_frame: Vec<FrameMetrics>,
    pub mean_ssim: f64,
    pub mean_psnr: f64,
    pub mean_aepe: f64,
    pub mean_warp_ssim: f64,
    pub mean_warp_psnr: f64,
}

impl EvalReport {
    /// Fixed-width per-frame table plus the means row.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            "frame", "ssim", "psnr", "aepe", "warp_ssim", "warp_psnr"
        ));
        for f in &self.per_frame {
            out.push_str(&format!(
                "{:>6} {:>10.4} {:>10.2} {:>10.4} {:>10.4} {:>10.2}\n",
                f.frame, f.ssim, f.psnr, f.aepe, f.warp_ssim, f.warp_psnr
            ));
        }
        out.push_str(&format!(
            "{:>6} {:>10.4} {:>10.2} {:>10.4} {:>10.4} {:>10.2}\n",
            "mean",
            self.mean_ssim,
            self.mean_psnr,
            self.mean_aepe,
            self.mean_warp_ssim,
            self.mean_warp_psnr
        ));
        out
    }
}

/// Evaluate trained models over a dataset with `horizon` predicted frames
/// per sequence (defaults to the full T-K).
pub fn evaluate_models(
    mme: &Mme,
    car: &Car,
    dataset: &[Sequence],
    horizon: Option<usize>,
    split: &str,
) -> Result<EvalReport> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::Eval("empty dataset".into()))?;
    let spec = &first.spec;
    let k = spec.k_seen;
    let horizon = horizon.unwrap_or(spec.t_total - k);
    if k + horizon > spec.t_total {
        return Err(Error::Eval(format!(
            "horizon {horizon} exceeds available frames (T={}, K={k})",
            spec.t_total
        )));
    }
    let (c, h, w) = (spec.channels, spec.height, spec.width);
    let plane = h * w;
    let mut acc = vec![[0.0f64; 5]; horizon];
    for seq in dataset {
        let batch = SeqBatch::new(&[seq])?;
        let roll = predict_rollout(mme, car, &batch, horizon)?;
        for i in 0..horizon {
            let t = k + i;
            let gt = seq.frame(t);
            let pred = roll.refined[i].data();
            let warped = roll.warped_raw[i].data();
            let flow_hat = roll.flows[i].data();
            acc[i][0] += ssim(pred, gt, c, h, w)?;
            acc[i][1] += psnr(pred, gt)?;
            acc[i][2] += aepe(&flow_hat[..2 * plane], seq.flow(t), h, w)?;
            acc[i][3] += ssim(warped, gt, c, h, w)?;
            acc[i][4] += psnr(warped, gt)?;
        }
    }
    let n = dataset.len() as f64;
    let per_frame: Vec<FrameMetrics> = acc
        .iter()
        .enumerate()
        .map(|(i, a)| FrameMetrics {
            frame: k + i + 1,
            ssim: a[0] / n,
            psnr: a[1] / n,
            aepe: a[2] / n,
            warp_ssim: a[3] / n,
            warp_psnr: a[4] / n,
        })
        .collect();
    let mean = |f: fn(&FrameMetrics) -> f64| {
        per_frame.iter().map(f).sum::<f64>() / per_frame.len() as f64
    };
    Ok(EvalReport {
        split: split.to_string(),
        mme_checkpoint: String::new(),
        car_checkpoint: String::new(),
        samples: dataset.len(),
        k_seen: k,
        horizon,
        per_frame: per_frame.clone(),
        mean_ssim: mean(|f| f.ssim),
        mean_psnr: mean(|f| f.psnr),
        mean_aepe: mean(|f| f.aepe),
        mean_warp_ssim: mean(|f| f.warp_ssim),
        mean_warp_psnr: mean(|f| f.warp_psnr),
    })
}

/// Load checkpoints, rebuild both stages, and evaluate a dataset directory.
pub fn evaluate_checkpoints(
    data_dir: &Path,
    mme_ckpt: &Path,
    car_ckpt: &Path,
    horizon: Option<usize>,
) -> Result<EvalReport> {
    let dataset = read_dataset(data_dir)?;
    let mme_meta = read_meta(mme_ckpt)?;
    let (mme_ps, mme) = build_mme(&mme_meta.config, &dataset)?;
    load_checkpoint(mme_ckpt, "mme", &mme_ps, None)?;
    let car_meta = read_meta(car_ckpt)?;
    let (car_ps, car) = build_car(&car_meta.config, &dataset)?;
    load_checkpoint(car_ckpt, "car", &car_ps, None)?;
    let split = crate::data::read_manifest(data_dir)?.split;
    let mut report = evaluate_models(&mme, &car, &dataset, horizon, &split)?;
    report.mme_checkpoint = mme_ckpt.display().to_string();
    report.car_checkpoint = car_ckpt.display().to_string();
    Ok(report)
}
