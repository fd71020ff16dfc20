//! Stage losses. All reductions are means over elements and predicted
//! frames, so weights stay comparable across resolutions and horizons.

use autodiff::{Tape, Tensor};

use crate::error::{Error, Result};

fn mean_over_frames(tape: &Tape, terms: Vec<Tensor>) -> Result<Tensor> {
    let n = terms.len();
    let mut acc = terms[0].clone();
    for t in &terms[1..] {
        acc = tape.add(&acc, t)?;
    }
    Ok(tape.scale(&acc, 1.0 / n as f64)?)
}

/// Mean over predicted frames of the per-frame MSE between flows.
pub fn loss_flow(tape: &Tape, preds: &[Tensor], gts: &[Tensor]) -> Result<Tensor> {
    if preds.len() != gts.len() || preds.is_empty() {
        return Err(Error::Training(format!(
            "flow loss needs matched non-empty lists, got {} vs {}",
            preds.len(),
            gts.len()
        )));
    }
    let terms = preds
        .iter()
        .zip(gts)
        .map(|(p, g)| Ok(tape.mse(p, g)?))
        .collect::<Result<Vec<_>>>()?;
    mean_over_frames(tape, terms)
}

/// Edge-aware smoothness: per pixel, the L1 norm of the flow's forward
/// differences weighted by exp(-L1 norm of the frame's differences),
/// averaged over pixels and frames. Frames are ground truth (constants).
pub fn loss_smooth(tape: &Tape, preds: &[Tensor], frames: &[Tensor]) -> Result<Tensor> {
    if preds.len() != frames.len() || preds.is_empty() {
        return Err(Error::Training(format!(
            "smoothness loss needs matched non-empty lists, got {} vs {}",
            preds.len(),
            frames.len()
        )));
    }
    let mut terms = Vec::with_capacity(preds.len());
    for (flow, frame) in preds.iter().zip(frames) {
        // Σ over flow channels of |∂x F| + |∂y F|  -> [B,H,W]
        let f_edges = tape.sum_axis(
            &tape.add(&tape.abs(&tape.diff_x(flow)?)?, &tape.abs(&tape.diff_y(flow)?)?)?,
            1,
        )?;
        let v_edges = tape.sum_axis(
            &tape.add(
                &tape.abs(&tape.diff_x(frame)?)?,
                &tape.abs(&tape.diff_y(frame)?)?,
            )?,
            1,
        )?;
        let weight = tape.exp(&tape.neg(&v_edges)?)?;
        terms.push(tape.mean_all(&tape.mul(&f_edges, &weight)?)?);
    }
    mean_over_frames(tape, terms)
}

/// Mean over predicted frames of the per-frame MSE between images.
pub fn loss_image(tape: &Tape, preds: &[Tensor], gts: &[Tensor]) -> Result<Tensor> {
    loss_flow(tape, preds, gts)
}

/// L_MME = L_flow + lambda * L_smooth.
pub fn loss_mme(
    tape: &Tape,
    flow_term: &Tensor,
    smooth_term: &Tensor,
    lambda_smooth: f64,
) -> Result<Tensor> {
    Ok(tape.add(flow_term, &tape.scale(smooth_term, lambda_smooth)?)?)
}
