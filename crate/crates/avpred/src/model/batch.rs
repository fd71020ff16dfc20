use autodiff::Tensor;

use crate::data::{Sequence, AUDIO_F, AUDIO_T};
use crate::error::{Error, Result};

/// A batch of same-shape sequences, staged as per-step tensors.
pub struct SeqBatch {
    /// frames[t]: [B, C, H, W]
    pub frames: Vec<Tensor>,
    /// audio[t]: [B, 1, F, Tc]
    pub audio: Vec<Tensor>,
    /// flows[t]: [B, 2, H, W]
    pub flows: Vec<Tensor>,
    pub batch: usize,
    pub t_total: usize,
    pub k_seen: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl SeqBatch {
    pub fn new(seqs: &[&Sequence]) -> Result<SeqBatch> {
        let first = seqs
            .first()
            .ok_or_else(|| Error::Dataset("empty batch".into()))?;
        let spec = &first.spec;
        for s in seqs {
            let sp = &s.spec;
            if (sp.height, sp.width, sp.channels, sp.t_total, sp.k_seen)
                != (
                    spec.height,
                    spec.width,
                    spec.channels,
                    spec.t_total,
                    spec.k_seen,
                )
            {
                return Err(Error::Dataset("mixed shapes within a batch".into()));
            }
        }
        let b = seqs.len();
        let (c, h, w) = (spec.channels, spec.height, spec.width);
        let mut frames = Vec::with_capacity(spec.t_total);
        let mut audio = Vec::with_capacity(spec.t_total);
        let mut flows = Vec::with_capacity(spec.t_total);
        for t in 0..spec.t_total {
            let mut fdata = Vec::with_capacity(b * c * h * w);
            let mut adata = Vec::with_capacity(b * AUDIO_F * AUDIO_T);
            let mut fldata = Vec::with_capacity(b * 2 * h * w);
            for s in seqs {
                fdata.extend_from_slice(s.frame(t));
                adata.extend_from_slice(s.audio_clip(t));
                fldata.extend_from_slice(s.flow(t));
            }
            frames.push(Tensor::new(fdata, &[b, c, h, w]).map_err(Error::Autodiff)?);
            audio.push(Tensor::new(adata, &[b, 1, AUDIO_F, AUDIO_T]).map_err(Error::Autodiff)?);
            flows.push(Tensor::new(fldata, &[b, 2, h, w]).map_err(Error::Autodiff)?);
        }
        Ok(SeqBatch {
            frames,
            audio,
            flows,
            batch: b,
            t_total: spec.t_total,
            k_seen: spec.k_seen,
            channels: c,
            height: h,
            width: w,
        })
    }
}
