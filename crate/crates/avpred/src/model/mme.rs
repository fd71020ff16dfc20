//! Multimodal motion estimation: recurrent backward-flow prediction from
//! the current frame/flow pair and the audio stream, with an append-only
//! audio motion memory read through Condense and Recall attention.

use autodiff::{Tape, Tensor};
use rand_chacha::ChaCha8Rng;

use super::batch::SeqBatch;
use super::encoders::{AudioEncoder, MotionEncoder, FEAT_CHANNELS};
use super::warp;
use crate::error::{Error, Result};
use crate::nn::{BatchNorm2d, Conv2d, ConvLstmCell, Deconv2d, Linear, ParamSet};

/// Ablation wiring for the flow predictor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmeMode {
    /// Condense the memory, then recall.
    Full,
    /// Recall over the raw (uncondensed) memory.
    RecallRaw,
    /// No audio path at all.
    VisualOnly,
}

impl MmeMode {
    pub fn parse(s: &str) -> Result<MmeMode> {
        match s {
            "mme" => Ok(MmeMode::Full),
            "v_recall" => Ok(MmeMode::RecallRaw),
            "v" => Ok(MmeMode::VisualOnly),
            other => Err(Error::Config(format!("unknown mme mode '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MmeMode::Full => "mme",
            MmeMode::RecallRaw => "v_recall",
            MmeMode::VisualOnly => "v",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MmeConfig {
    pub frame_channels: usize,
    pub height: usize,
    pub width: usize,
    pub lstm_layers: usize,
    pub mode: MmeMode,
}

impl MmeConfig {
    pub fn new(frame_channels: usize, height: usize, width: usize) -> Self {
        MmeConfig {
            frame_channels,
            height,
            width,
            lstm_layers: 4,
            mode: MmeMode::Full,
        }
    }
}

/// Append-only store of per-step audio feature vectors for one sample.
#[derive(Default, Clone)]
pub struct MotionMemory {
    entries: Vec<Tensor>,
}

impl MotionMemory {
    pub fn append(&mut self, x_a: Tensor) -> Result<()> {
        if x_a.shape() != [1, FEAT_CHANNELS] {
            return Err(Error::Training(format!(
                "memory entry must be [1,{FEAT_CHANNELS}], got {:?}",
                x_a.shape()
            )));
        }
        self.entries.push(x_a);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Tensor] {
        &self.entries
    }

    pub fn newest(&self) -> Option<&Tensor> {
        self.entries.last()
    }
}

/// Self-attention over the full memory; the last output row added to the
/// newest entry forms the condensed memory.
pub struct CondenseBlock {
    q: Linear,
    k: Linear,
    v: Linear,
}

impl CondenseBlock {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str) -> Self {
        CondenseBlock {
            q: Linear::new(ps, rng, &format!("{name}.q"), FEAT_CHANNELS, FEAT_CHANNELS),
            k: Linear::new(ps, rng, &format!("{name}.k"), FEAT_CHANNELS, FEAT_CHANNELS),
            v: Linear::new(ps, rng, &format!("{name}.v"), FEAT_CHANNELS, FEAT_CHANNELS),
        }
    }

    /// [1,c] condensed summary of a non-empty memory.
    pub fn forward(&self, tape: &Tape, memory: &MotionMemory) -> Result<Tensor> {
        let newest = memory
            .newest()
            .ok_or_else(|| Error::Training("condense on empty memory".into()))?;
        let refs: Vec<&Tensor> = memory.entries().iter().collect();
        let stacked = tape.concat(&refs, 0)?;
        let n = memory.len();
        let q = self.q.forward(tape, &stacked)?;
        let k = self.k.forward(tape, &stacked)?;
        let v = self.v.forward(tape, &stacked)?;
        let scores = tape.matmul(&q, &tape.transpose2d(&k)?)?;
        let attn = tape.softmax(&scores, 1)?;
        let mixed = tape.matmul(&attn, &v)?;
        let last = tape.slice_axis(&mixed, 0, n - 1, n)?;
        Ok(tape.add(newest, &last)?)
    }
}

/// Cross-attention where flattened visual features query an audio memory
/// matrix; the result is added residually to the visual features.
pub struct RecallBlock {
    q_conv: Conv2d,
    k: Linear,
    v: Linear,
}

impl RecallBlock {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str) -> Self {
        RecallBlock {
            q_conv: Conv2d::new(
                ps,
                rng,
                &format!("{name}.q"),
                FEAT_CHANNELS,
                FEAT_CHANNELS,
                (1, 1),
                1,
                (0, 0),
            ),
            k: Linear::new(ps, rng, &format!("{name}.k"), FEAT_CHANNELS, FEAT_CHANNELS),
            v: Linear::new(ps, rng, &format!("{name}.v"), FEAT_CHANNELS, FEAT_CHANNELS),
        }
    }

    /// x_v [1,c,h,w] queries mem [n,c]; returns x_v + attention output.
    pub fn forward(&self, tape: &Tape, x_v: &Tensor, mem: &Tensor) -> Result<Tensor> {
        let (c, h, w) = match x_v.shape() {
            [1, c, h, w] => (*c, *h, *w),
            s => {
                return Err(Error::Training(format!(
                    "recall expects a single-sample [1,c,h,w] map, got {s:?}"
                )))
            }
        };
        let l = h * w;
        let q_map = self.q_conv.forward(tape, x_v)?;
        // [1,c,h,w] -> [l,c]
        let q = tape.transpose2d(&tape.reshape(&q_map, &[c, l])?)?;
        let k = self.k.forward(tape, mem)?;
        let v = self.v.forward(tape, mem)?;
        let scores = tape.matmul(&q, &tape.transpose2d(&k)?)?;
        let attn = tape.softmax(&scores, 1)?;
        let mixed = tape.matmul(&attn, &v)?;
        let back = tape.reshape(&tape.transpose2d(&mixed)?, &[1, c, h, w])?;
        Ok(tape.add(x_v, &back)?)
    }
}

/// Four 4x4/stride-2 transposed convolutions, channels {128, 64, 64, 2};
/// BN + leaky ReLU between layers, linear output.
pub struct MotionDecoder {
    deconvs: Vec<Deconv2d>,
    norms: Vec<BatchNorm2d>,
}

impl MotionDecoder {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str) -> Self {
        let widths = [128, 64, 64, 2];
        let mut deconvs = Vec::new();
        let mut norms = Vec::new();
        let mut cin = FEAT_CHANNELS;
        for (i, &cout) in widths.iter().enumerate() {
            deconvs.push(Deconv2d::new(
                ps,
                rng,
                &format!("{name}.deconv{i}"),
                cin,
                cout,
                (4, 4),
                2,
                (1, 1),
            ));
            if i + 1 < widths.len() {
                norms.push(BatchNorm2d::new(ps, &format!("{name}.bn{i}"), cout));
            }
            cin = cout;
        }
        MotionDecoder { deconvs, norms }
    }

    pub fn forward(&self, tape: &Tape, h: &Tensor, train: bool) -> Result<Tensor> {
        let mut x = h.clone();
        for (i, deconv) in self.deconvs.iter().enumerate() {
            x = deconv.forward(tape, &x)?;
            if let Some(norm) = self.norms.get(i) {
                x = norm.forward(tape, &x, train)?;
                x = tape.leaky_relu(&x)?;
            }
        }
        Ok(x)
    }
}

/// Recurrent state: per-layer hidden/cell maps plus one motion memory per
/// batch sample.
pub struct MmeState {
    pub hidden: Vec<Tensor>,
    pub cell: Vec<Tensor>,
    pub memory: Vec<MotionMemory>,
}

pub struct Mme {
    pub cfg: MmeConfig,
    motion_enc: MotionEncoder,
    audio_enc: AudioEncoder,
    condense: CondenseBlock,
    recall: RecallBlock,
    lstm: Vec<ConvLstmCell>,
    decoder: MotionDecoder,
}

impl Mme {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, cfg: MmeConfig) -> Result<Self> {
        if cfg.height % 16 != 0 || cfg.width % 16 != 0 {
            return Err(Error::Config(format!(
                "frame size {}x{} must be divisible by 16",
                cfg.height, cfg.width
            )));
        }
        if cfg.lstm_layers == 0 {
            return Err(Error::Config("need at least one ConvLSTM layer".into()));
        }
        let motion_enc = MotionEncoder::new(ps, rng, "mme.motion_enc", cfg.frame_channels);
        let audio_enc = AudioEncoder::new(ps, rng, "mme.audio_enc")?;
        let condense = CondenseBlock::new(ps, rng, "mme.condense");
        let recall = RecallBlock::new(ps, rng, "mme.recall");
        let lstm = (0..cfg.lstm_layers)
            .map(|i| {
                ConvLstmCell::new(
                    ps,
                    rng,
                    &format!("mme.lstm{i}"),
                    FEAT_CHANNELS,
                    FEAT_CHANNELS,
                )
            })
            .collect();
        let decoder = MotionDecoder::new(ps, rng, "mme.decoder");
        Ok(Mme {
            cfg,
            motion_enc,
            audio_enc,
            condense,
            recall,
            lstm,
            decoder,
        })
    }

    pub fn feat_dims(&self) -> (usize, usize) {
        (self.cfg.height / 16, self.cfg.width / 16)
    }

    pub fn init_state(&self, batch: usize) -> MmeState {
        let (fh, fw) = self.feat_dims();
        let zero = || Tensor::zeros(&[batch, FEAT_CHANNELS, fh, fw]);
        MmeState {
            hidden: (0..self.cfg.lstm_layers).map(|_| zero()).collect(),
            cell: (0..self.cfg.lstm_layers).map(|_| zero()).collect(),
            memory: vec![MotionMemory::default(); batch],
        }
    }

    fn audio_update(
        &self,
        tape: &Tape,
        audio: &Tensor,
        state: &mut MmeState,
        train: bool,
    ) -> Result<()> {
        let x_a = self.audio_enc.forward(tape, audio, train)?;
        for (b, mem) in state.memory.iter_mut().enumerate() {
            mem.append(tape.slice_axis(&x_a, 0, b, b + 1)?)?;
        }
        Ok(())
    }

    /// Mix audio memory into the visual feature map per the active mode.
    fn enhance(&self, tape: &Tape, x_v: &Tensor, state: &MmeState) -> Result<Tensor> {
        match self.cfg.mode {
            MmeMode::VisualOnly => Ok(x_v.clone()),
            MmeMode::RecallRaw | MmeMode::Full => {
                let batch = x_v.shape()[0];
                let mut parts = Vec::with_capacity(batch);
                for b in 0..batch {
                    let sample = tape.slice_axis(x_v, 0, b, b + 1)?;
                    let mem = &state.memory[b];
                    let mem_matrix = if self.cfg.mode == MmeMode::Full {
                        self.condense.forward(tape, mem)?
                    } else {
                        let refs: Vec<&Tensor> = mem.entries().iter().collect();
                        tape.concat(&refs, 0)?
                    };
                    parts.push(self.recall.forward(tape, &sample, &mem_matrix)?);
                }
                let refs: Vec<&Tensor> = parts.iter().collect();
                Ok(tape.concat(&refs, 0)?)
            }
        }
    }

    /// One recurrent step: consume (V_t, F_t, A_{t+1}), update the state,
    /// and (when `want_flow`) decode the next backward flow.
    pub fn step(
        &self,
        tape: &Tape,
        frame: &Tensor,
        flow: &Tensor,
        audio_next: Option<&Tensor>,
        state: &mut MmeState,
        train: bool,
        want_flow: bool,
    ) -> Result<Option<Tensor>> {
        if self.cfg.mode != MmeMode::VisualOnly {
            let audio = audio_next
                .ok_or_else(|| Error::Training("audio clip required in this mode".into()))?;
            self.audio_update(tape, audio, state, train)?;
        }
        let x_v = self.motion_enc.forward(tape, frame, flow, train)?;
        let enhanced = self.enhance(tape, &x_v, state)?;
        let mut input = enhanced;
        for (i, cell) in self.lstm.iter().enumerate() {
            let (h, c) = cell.step(tape, &input, &state.hidden[i], &state.cell[i])?;
            state.hidden[i] = h.clone();
            state.cell[i] = c;
            input = h;
        }
        if want_flow {
            let top = state.hidden.last().expect("lstm layers");
            Ok(Some(self.decoder.forward(tape, top, train)?))
        } else {
            Ok(None)
        }
    }

    /// Teacher-forced warm-up over the K seen frames, then closed-loop
    /// prediction feeding back its own (unrefined) warps. Returns
    /// `horizon` flows for frames K .. K+horizon-1.
    pub fn rollout(
        &self,
        tape: &Tape,
        batch: &SeqBatch,
        horizon: usize,
        train: bool,
    ) -> Result<Vec<Tensor>> {
        let k = batch.k_seen;
        if horizon == 0 || k + horizon > batch.t_total {
            return Err(Error::Training(format!(
                "horizon {} does not fit T={} K={}",
                horizon, batch.t_total, k
            )));
        }
        let mut state = self.init_state(batch.batch);
        let mut preds: Vec<Tensor> = Vec::with_capacity(horizon);
        let mut chain_frame: Option<Tensor> = None;
        for t in 0..k + horizon - 1 {
            let (frame, flow);
            if t < k {
                frame = batch.frames[t].clone();
                flow = batch.flows[t].clone();
            } else {
                let f_hat = preds.last().expect("closed loop starts after a prediction");
                let prev = if t == k {
                    batch.frames[k - 1].clone()
                } else {
                    chain_frame.clone().expect("chain frame")
                };
                frame = warp(tape, &prev, f_hat)?;
                chain_frame = Some(frame.clone());
                flow = f_hat.clone();
            }
            let want = t + 1 >= k;
            let out = self.step(
                tape,
                &frame,
                &flow,
                Some(&batch.audio[t + 1]),
                &mut state,
                train,
                want,
            )?;
            if let Some(f) = out {
                preds.push(f);
            }
        }
        Ok(preds)
    }
}
