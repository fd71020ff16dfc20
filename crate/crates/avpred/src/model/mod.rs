//! The two-stage predictor: flow estimation (motion) and context-aware
//! refinement (appearance).

mod batch;
mod car;
mod encoders;
mod mme;

use autodiff::{Tape, Tensor};

pub use batch::SeqBatch;
pub use car::{raw_warp_rollout, Car, CarConfig, CarVariant, ContextEncoder, Unet};
pub use encoders::{AudioEncoder, MotionEncoder, FEAT_CHANNELS};
pub use mme::{
    CondenseBlock, Mme, MmeConfig, MmeMode, MmeState, MotionDecoder, MotionMemory, RecallBlock,
};

use crate::error::Result;

/// Absolute-pixel identity grid [B,2,H,W] (channel 0 = x, channel 1 = y).
pub fn identity_grid(batch: usize, h: usize, w: usize) -> Tensor {
    let mut data = vec![0.0; batch * 2 * h * w];
    for b in 0..batch {
        let base = b * 2 * h * w;
        for y in 0..h {
            for x in 0..w {
                data[base + y * w + x] = x as f64;
                data[base + h * w + y * w + x] = y as f64;
            }
        }
    }
    Tensor::new(data, &[batch, 2, h, w]).expect("identity grid")
}

/// Backward warp: sample `frame` at p + flow(p) with border clamping.
pub fn warp(tape: &Tape, frame: &Tensor, flow: &Tensor) -> Result<Tensor> {
    let shape = flow.shape();
    let (b, h, w) = (shape[0], shape[2], shape[3]);
    let grid = identity_grid(b, h, w);
    let coords = tape.add(&grid, flow)?;
    Ok(tape.bilinear_sample(frame, &coords)?)
}

/// Full-system prediction: MME flows (closed loop over its own warps)
/// feeding CAR refinement (closed loop over its own outputs).
pub struct Rollout {
    pub flows: Vec<Tensor>,
    pub refined: Vec<Tensor>,
    pub warped_raw: Vec<Tensor>,
}

pub fn predict_rollout(
    mme: &Mme,
    car: &Car,
    batch: &SeqBatch,
    horizon: usize,
) -> Result<Rollout> {
    let tape = Tape::no_grad();
    let flows = mme.rollout(&tape, batch, horizon, false)?;
    let refined = car.rollout(&tape, batch, &flows, false)?;
    let warped_raw = raw_warp_rollout(&tape, batch, &flows)?;
    Ok(Rollout {
        flows,
        refined,
        warped_raw,
    })
}
