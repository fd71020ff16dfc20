//! Context-aware refinement: warp the current frame by the predicted flow,
//! then refine with a U-Net whose decoder levels receive global context
//! features modulated by motion-conditioned channel-wise affines.

use autodiff::{Tape, Tensor};
use rand_chacha::ChaCha8Rng;

use super::batch::SeqBatch;
use super::encoders::{AudioEncoder, MotionEncoder, FEAT_CHANNELS};
use super::warp;
use crate::error::{Error, Result};
use crate::nn::{BatchNorm2d, Conv2d, Deconv2d, Linear, ParamSet};

const CONTEXT_CHANNELS: [usize; 4] = [32, 64, 128, 256];

/// Refinement ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CarVariant {
    /// Context features adapted by motion-conditioned affines.
    Full,
    /// Context injected untouched (gamma=1, beta=0 wiring).
    NoAffine,
    /// Decoder context slots fed zeros (plain U-Net refinement).
    NoContext,
}

impl CarVariant {
    pub fn parse(s: &str) -> Result<CarVariant> {
        match s {
            "car" => Ok(CarVariant::Full),
            "no_affine" => Ok(CarVariant::NoAffine),
            "unet" => Ok(CarVariant::NoContext),
            other => Err(Error::Config(format!("unknown car variant '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CarVariant::Full => "car",
            CarVariant::NoAffine => "no_affine",
            CarVariant::NoContext => "unet",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CarConfig {
    pub frame_channels: usize,
    pub height: usize,
    pub width: usize,
    /// Context/U-Net pyramid depth (4 in the full model).
    pub levels: usize,
    pub variant: CarVariant,
    /// Condition the motion feature on the clip aligned with the input
    /// frame (true) or with the predicted frame (false).
    pub audio_aligned: bool,
}

impl CarConfig {
    pub fn new(frame_channels: usize, height: usize, width: usize) -> Self {
        CarConfig {
            frame_channels,
            height,
            width,
            levels: 4,
            variant: CarVariant::Full,
            audio_aligned: true,
        }
    }

    fn channels(&self) -> &[usize] {
        &CONTEXT_CHANNELS[..self.levels]
    }
}

struct ConvBlock {
    convs: Vec<Conv2d>,
    norms: Vec<BatchNorm2d>,
}

impl ConvBlock {
    fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, cin: usize, cout: usize) -> Self {
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        let mut c = cin;
        for i in 0..2 {
            convs.push(Conv2d::new(
                ps,
                rng,
                &format!("{name}.conv{i}"),
                c,
                cout,
                (3, 3),
                1,
                (1, 1),
            ));
            norms.push(BatchNorm2d::new(ps, &format!("{name}.bn{i}"), cout));
            c = cout;
        }
        ConvBlock { convs, norms }
    }

    fn forward(&self, tape: &Tape, x: &Tensor, train: bool) -> Result<Tensor> {
        let mut x = x.clone();
        for (conv, norm) in self.convs.iter().zip(&self.norms) {
            x = conv.forward(tape, &x)?;
            x = norm.forward(tape, &x, train)?;
            x = tape.relu(&x)?;
        }
        Ok(x)
    }
}

/// Shallow pyramid over the last seen frame; per-level features are the
/// block outputs before pooling, so spatial dims halve per level.
pub struct ContextEncoder {
    blocks: Vec<ConvBlock>,
}

impl ContextEncoder {
    fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, cfg: &CarConfig) -> Self {
        let mut blocks = Vec::new();
        let mut cin = cfg.frame_channels;
        for (i, &cout) in cfg.channels().iter().enumerate() {
            blocks.push(ConvBlock::new(ps, rng, &format!("{name}.block{i}"), cin, cout));
            cin = cout;
        }
        ContextEncoder { blocks }
    }

    pub fn forward(&self, tape: &Tape, frame: &Tensor, train: bool) -> Result<Vec<Tensor>> {
        let mut features = Vec::with_capacity(self.blocks.len());
        let mut x = frame.clone();
        for (i, block) in self.blocks.iter().enumerate() {
            let z = block.forward(tape, &x, train)?;
            features.push(z.clone());
            if i + 1 < self.blocks.len() {
                x = tape.max_pool2d(&z, 2)?;
            }
        }
        Ok(features)
    }
}

/// Two-layer heads producing gamma and beta from the motion feature.
/// Final layers start at zero weights with bias 1 (gamma) / 0 (beta), so
/// refinement begins as the identity over context features.
struct FilmHead {
    gamma1: Linear,
    gamma2: Linear,
    beta1: Linear,
    beta2: Linear,
}

impl FilmHead {
    fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, out: usize) -> Self {
        let hidden = FEAT_CHANNELS;
        FilmHead {
            gamma1: Linear::new(ps, rng, &format!("{name}.gamma1"), 2 * FEAT_CHANNELS, hidden),
            gamma2: Linear::new_const_output(ps, &format!("{name}.gamma2"), hidden, out, 1.0),
            beta1: Linear::new(ps, rng, &format!("{name}.beta1"), 2 * FEAT_CHANNELS, hidden),
            beta2: Linear::new_const_output(ps, &format!("{name}.beta2"), hidden, out, 0.0),
        }
    }

    fn forward(&self, tape: &Tape, m: &Tensor) -> Result<(Tensor, Tensor)> {
        let g = self
            .gamma2
            .forward(tape, &tape.leaky_relu(&self.gamma1.forward(tape, m)?)?)?;
        let b = self
            .beta2
            .forward(tape, &tape.leaky_relu(&self.beta1.forward(tape, m)?)?)?;
        Ok((g, b))
    }
}

struct UnetDecoderLevel {
    up: Deconv2d,
    block: ConvBlock,
}

/// Symmetric encoder/decoder with skip connections; every decoder level
/// concatenates the upsampled features, the encoder skip, and the adapted
/// context map at that resolution. Sigmoid output keeps frames in [0,1].
pub struct Unet {
    enc: Vec<ConvBlock>,
    bottleneck: ConvBlock,
    dec: Vec<UnetDecoderLevel>,
    head: Conv2d,
}

impl Unet {
    fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, cfg: &CarConfig) -> Self {
        let ch = cfg.channels();
        let mut enc = Vec::new();
        let mut cin = cfg.frame_channels;
        for (i, &cout) in ch.iter().enumerate() {
            enc.push(ConvBlock::new(ps, rng, &format!("{name}.enc{i}"), cin, cout));
            cin = cout;
        }
        let deepest = *ch.last().expect("levels >= 1");
        let bottleneck = ConvBlock::new(ps, rng, &format!("{name}.mid"), deepest, deepest);
        let mut dec = Vec::new();
        let mut up_in = deepest;
        for i in (0..ch.len()).rev() {
            let out = (ch[i] / 2).max(32);
            let up = Deconv2d::new(
                ps,
                rng,
                &format!("{name}.up{i}"),
                up_in,
                up_in,
                (2, 2),
                2,
                (0, 0),
            );
            let block = ConvBlock::new(
                ps,
                rng,
                &format!("{name}.dec{i}"),
                up_in + 2 * ch[i],
                out,
            );
            dec.push(UnetDecoderLevel { up, block });
            up_in = out;
        }
        let head = Conv2d::new(
            ps,
            rng,
            &format!("{name}.head"),
            up_in,
            cfg.frame_channels,
            (3, 3),
            1,
            (1, 1),
        );
        Unet {
            enc,
            bottleneck,
            dec,
            head,
        }
    }

    fn forward(
        &self,
        tape: &Tape,
        frame: &Tensor,
        context: &[Tensor],
        train: bool,
    ) -> Result<Tensor> {
        let mut skips = Vec::with_capacity(self.enc.len());
        let mut x = frame.clone();
        for block in &self.enc {
            let z = block.forward(tape, &x, train)?;
            skips.push(z.clone());
            x = tape.max_pool2d(&z, 2)?;
        }
        x = self.bottleneck.forward(tape, &x, train)?;
        for (d, level) in self.dec.iter().enumerate() {
            let i = self.enc.len() - 1 - d;
            let up = level.up.forward(tape, &x)?;
            if context[i].shape() != skips[i].shape() {
                return Err(Error::Training(format!(
                    "context level {i} shape {:?} does not match decoder resolution {:?}",
                    context[i].shape(),
                    skips[i].shape()
                )));
            }
            let cat = tape.concat(&[&up, &skips[i], &context[i]], 1)?;
            x = level.block.forward(tape, &cat, train)?;
        }
        let logits = self.head.forward(tape, &x)?;
        Ok(tape.sigmoid(&logits)?)
    }
}

pub struct Car {
    pub cfg: CarConfig,
    context_enc: ContextEncoder,
    unet: Unet,
    film: Vec<FilmHead>,
    motion_enc: MotionEncoder,
    audio_enc: AudioEncoder,
}

impl Car {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, cfg: CarConfig) -> Result<Self> {
        if cfg.levels == 0 || cfg.levels > CONTEXT_CHANNELS.len() {
            return Err(Error::Config(format!(
                "levels must be 1..={}, got {}",
                CONTEXT_CHANNELS.len(),
                cfg.levels
            )));
        }
        let div = 1 << cfg.levels;
        if cfg.height % div != 0 || cfg.width % div != 0 {
            return Err(Error::Config(format!(
                "frame size {}x{} must be divisible by {div} for {} levels",
                cfg.height, cfg.width, cfg.levels
            )));
        }
        let context_enc = ContextEncoder::new(ps, rng, "car.context_enc", &cfg);
        let unet = Unet::new(ps, rng, "car.unet", &cfg);
        let film = cfg
            .channels()
            .iter()
            .enumerate()
            .map(|(i, &c)| FilmHead::new(ps, rng, &format!("car.film{i}"), c))
            .collect();
        let motion_enc = MotionEncoder::new(ps, rng, "car.motion_enc", cfg.frame_channels);
        let audio_enc = AudioEncoder::new(ps, rng, "car.audio_enc")?;
        Ok(Car {
            cfg,
            context_enc,
            unet,
            film,
            motion_enc,
            audio_enc,
        })
    }

    /// Global context from the last seen frame, reused for every step.
    pub fn encode_context(&self, tape: &Tape, v_k: &Tensor, train: bool) -> Result<Vec<Tensor>> {
        self.context_enc.forward(tape, v_k, train)
    }

    /// Pooled motion-encoder output concatenated with the audio feature:
    /// a [B, 256] conditioning vector.
    pub fn motion_feature(
        &self,
        tape: &Tape,
        frame: &Tensor,
        flow: &Tensor,
        audio: &Tensor,
        train: bool,
    ) -> Result<Tensor> {
        let xm = self.motion_enc.forward(tape, frame, flow, train)?;
        let pooled = tape.global_avg_pool(&xm)?;
        let xa = self.audio_enc.forward(tape, audio, train)?;
        Ok(tape.concat(&[&pooled, &xa], 1)?)
    }

    pub fn film_params(&self, tape: &Tape, m: &Tensor, level: usize) -> Result<(Tensor, Tensor)> {
        let head = self
            .film
            .get(level)
            .ok_or_else(|| Error::Training(format!("unknown context level {level}")))?;
        head.forward(tape, m)
    }

    fn adapt_context(
        &self,
        tape: &Tape,
        context: &[Tensor],
        m: Option<&Tensor>,
    ) -> Result<Vec<Tensor>> {
        match self.cfg.variant {
            CarVariant::NoContext => Ok(context
                .iter()
                .map(|z| Tensor::zeros(z.shape()))
                .collect()),
            CarVariant::NoAffine => Ok(context.to_vec()),
            CarVariant::Full => {
                let m = m.expect("motion feature required for the full variant");
                let mut adapted = Vec::with_capacity(context.len());
                for (i, z) in context.iter().enumerate() {
                    let (gamma, beta) = self.film_params(tape, m, i)?;
                    adapted.push(tape.film(z, &gamma, &beta)?);
                }
                Ok(adapted)
            }
        }
    }

    /// One refinement step: warp the current frame by the predicted flow,
    /// adapt the context, refine with the U-Net.
    pub fn step(
        &self,
        tape: &Tape,
        frame: &Tensor,
        flow: &Tensor,
        audio: &Tensor,
        context: &[Tensor],
        train: bool,
    ) -> Result<Tensor> {
        let warped = warp(tape, frame, flow)?;
        let m = if self.cfg.variant == CarVariant::Full {
            Some(self.motion_feature(tape, frame, flow, audio, train)?)
        } else {
            None
        };
        let adapted = self.adapt_context(tape, context, m.as_ref())?;
        self.unet.forward(tape, &warped, &adapted, train)
    }

    /// Closed-loop refinement over precomputed flows: the step for frame
    /// s consumes the previous refined output (ground truth for s = K).
    pub fn rollout(
        &self,
        tape: &Tape,
        batch: &SeqBatch,
        flows: &[Tensor],
        train: bool,
    ) -> Result<Vec<Tensor>> {
        let k = batch.k_seen;
        let horizon = flows.len();
        if horizon == 0 || k + horizon > batch.t_total {
            return Err(Error::Training(format!(
                "flow count {} does not fit T={} K={}",
                horizon, batch.t_total, k
            )));
        }
        let context = self.encode_context(tape, &batch.frames[k - 1], train)?;
        let mut out = Vec::with_capacity(horizon);
        let mut prev = batch.frames[k - 1].clone();
        for (step, flow) in flows.iter().enumerate() {
            let s = k + step;
            let clip = if self.cfg.audio_aligned {
                &batch.audio[s - 1]
            } else {
                &batch.audio[s]
            };
            let refined = self.step(tape, &prev, flow, clip, &context, train)?;
            out.push(refined.clone());
            prev = refined;
        }
        Ok(out)
    }
}

/// Recurrent warping without refinement, for the ablation baseline.
pub fn raw_warp_rollout(tape: &Tape, batch: &SeqBatch, flows: &[Tensor]) -> Result<Vec<Tensor>> {
    let k = batch.k_seen;
    let mut out = Vec::with_capacity(flows.len());
    let mut prev = batch.frames[k - 1].clone();
    for flow in flows {
        let warped = warp(tape, &prev, flow)?;
        out.push(warped.clone());
        prev = warped;
    }
    Ok(out)
}
