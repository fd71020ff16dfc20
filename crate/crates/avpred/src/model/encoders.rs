//! Motion and audio feature encoders shared by both model stages.

use autodiff::{Tape, Tensor};
use rand_chacha::ChaCha8Rng;

use crate::data::{AUDIO_F, AUDIO_T};
use crate::error::{Error, Result};
use crate::nn::{BatchNorm2d, Conv2d, ParamSet};

pub const FEAT_CHANNELS: usize = 128;

/// Four 4x4/stride-2 convolutions over [flow, frame]; channels
/// {64, 64, 128, 128}; BN + leaky ReLU after each except the last,
/// which ends in BN + tanh. Spatial extent shrinks 16x.
pub struct MotionEncoder {
    convs: Vec<Conv2d>,
    norms: Vec<BatchNorm2d>,
}

impl MotionEncoder {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        frame_channels: usize,
    ) -> Self {
        let widths = [64, 64, 128, FEAT_CHANNELS];
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        let mut cin = 2 + frame_channels;
        for (i, &cout) in widths.iter().enumerate() {
            convs.push(Conv2d::new(
                ps,
                rng,
                &format!("{name}.conv{i}"),
                cin,
                cout,
                (4, 4),
                2,
                (1, 1),
            ));
            norms.push(BatchNorm2d::new(ps, &format!("{name}.bn{i}"), cout));
            cin = cout;
        }
        MotionEncoder { convs, norms }
    }

    /// flow [B,2,H,W] and frame [B,C,H,W] -> features [B,128,H/16,W/16].
    pub fn forward(&self, tape: &Tape, frame: &Tensor, flow: &Tensor, train: bool) -> Result<Tensor> {
        let mut x = tape.concat(&[flow, frame], 1)?;
        let last = self.convs.len() - 1;
        for (i, (conv, norm)) in self.convs.iter().zip(&self.norms).enumerate() {
            x = conv.forward(tape, &x)?;
            x = norm.forward(tape, &x, train)?;
            x = if i == last {
                tape.tanh(&x)?
            } else {
                tape.leaky_relu(&x)?
            };
        }
        Ok(x)
    }
}

/// Smallest zero padding that keeps the kernel within the padded input
/// while halving "same-ish".
fn pad_for(in_dim: usize, k: usize) -> usize {
    if in_dim >= k {
        usize::from(k > 2)
    } else {
        (k - in_dim).div_ceil(2)
    }
}

/// Five convolutions over the spectrogram (4x4 then a final 2x2), channels
/// {64, 128, 256, 512, 128}; BN + leaky ReLU except the last (BN + tanh).
/// Any residual spatial extent is averaged away, yielding [B,128].
pub struct AudioEncoder {
    convs: Vec<Conv2d>,
    norms: Vec<BatchNorm2d>,
}

impl AudioEncoder {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str) -> Result<Self> {
        let widths = [64, 128, 256, 512, FEAT_CHANNELS];
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        let mut cin = 1;
        let (mut fh, mut fw) = (AUDIO_F, AUDIO_T);
        for (i, &cout) in widths.iter().enumerate() {
            let k = if i < 4 { 4 } else { 2 };
            let ph = pad_for(fh, k);
            let pw = pad_for(fw, k);
            let next_h = (fh + 2 * ph).checked_sub(k).map(|v| v / 2 + 1);
            let next_w = (fw + 2 * pw).checked_sub(k).map(|v| v / 2 + 1);
            match (next_h, next_w) {
                (Some(nh), Some(nw)) if nh >= 1 && nw >= 1 => {
                    fh = nh;
                    fw = nw;
                }
                _ => {
                    return Err(Error::Config(format!(
                        "spectrogram {AUDIO_F}x{AUDIO_T} too small for audio encoder layer {i}"
                    )))
                }
            }
            convs.push(Conv2d::new(
                ps,
                rng,
                &format!("{name}.conv{i}"),
                cin,
                cout,
                (k, k),
                2,
                (ph, pw),
            ));
            norms.push(BatchNorm2d::new(ps, &format!("{name}.bn{i}"), cout));
            cin = cout;
        }
        Ok(AudioEncoder { convs, norms })
    }

    /// spectrogram [B,1,F,Tc] -> [B,128] in (-1,1).
    pub fn forward(&self, tape: &Tape, spec: &Tensor, train: bool) -> Result<Tensor> {
        let mut x = spec.clone();
        let last = self.convs.len() - 1;
        for (i, (conv, norm)) in self.convs.iter().zip(&self.norms).enumerate() {
            x = conv.forward(tape, &x)?;
            x = norm.forward(tape, &x, train)?;
            x = if i == last {
                tape.tanh(&x)?
            } else {
                tape.leaky_relu(&x)?
            };
        }
        Ok(tape.global_avg_pool(&x)?)
    }
}
