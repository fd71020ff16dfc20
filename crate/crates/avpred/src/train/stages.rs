use std::path::Path;

use autodiff::Tape;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::checkpoint;
use super::config::TrainConfig;
use super::loss::{loss_flow, loss_image, loss_mme, loss_smooth};
use crate::data::Sequence;
use crate::error::{Error, Result};
use crate::model::{Car, CarConfig, CarVariant, Mme, MmeConfig, MmeMode, SeqBatch};
use crate::nn::ParamSet;

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct StepLoss {
    pub total: f64,
    pub flow: Option<f64>,
    pub smooth: Option<f64>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct EpochStats {
    pub epoch: usize,
    pub steps: Vec<StepLoss>,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

pub type History = Vec<EpochStats>;

/// Deterministic per-epoch sample order.
fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A_0F0F_F0F0 ^ (epoch as u64) << 17);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Batch index groups. A singleton batch is duplicated: batch statistics
/// and the mean loss/gradient over two copies equal the single-sample
/// values, while batch norm keeps more than one value per channel.
fn batches<'a>(
    dataset: &'a [Sequence],
    order: &[usize],
    batch_size: usize,
) -> Vec<Vec<&'a Sequence>> {
    order
        .chunks(batch_size)
        .map(|chunk| {
            let mut group: Vec<&Sequence> = chunk.iter().map(|&i| &dataset[i]).collect();
            if group.len() == 1 {
                group.push(group[0]);
            }
            group
        })
        .collect()
}

fn check_dataset(dataset: &[Sequence], horizon: usize) -> Result<()> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::Training("empty dataset".into()))?;
    let spec = &first.spec;
    if spec.k_seen + horizon > spec.t_total {
        return Err(Error::Training(format!(
            "horizon {horizon} does not fit K={} T={}",
            spec.k_seen, spec.t_total
        )));
    }
    Ok(())
}

pub struct Stage1Output {
    pub params: ParamSet,
    pub mme: Mme,
    pub history: History,
}

/// Build the flow predictor for a dataset/config pair.
pub fn build_mme(config: &TrainConfig, dataset: &[Sequence]) -> Result<(ParamSet, Mme)> {
    let spec = &dataset
        .first()
        .ok_or_else(|| Error::Training("empty dataset".into()))?
        .spec;
    let mut cfg = MmeConfig::new(spec.channels, spec.height, spec.width);
    cfg.mode = MmeMode::parse(&config.mme_mode)?;
    let mut ps = ParamSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mme = Mme::new(&mut ps, &mut rng, cfg)?;
    Ok((ps, mme))
}

pub fn build_car(config: &TrainConfig, dataset: &[Sequence]) -> Result<(ParamSet, Car)> {
    let spec = &dataset
        .first()
        .ok_or_else(|| Error::Training("empty dataset".into()))?
        .spec;
    let mut cfg = CarConfig::new(spec.channels, spec.height, spec.width);
    cfg.variant = CarVariant::parse(&config.car_variant)?;
    cfg.audio_aligned = config.car_audio_aligned;
    let mut ps = ParamSet::new();
    // Offset keeps stage-2 initial weights distinct from stage 1 at the
    // same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x0C0A_11ED));
    let car = Car::new(&mut ps, &mut rng, cfg)?;
    Ok((ps, car))
}

fn stage1_losses(
    tape: &Tape,
    mme: &Mme,
    batch: &SeqBatch,
    horizon: usize,
    train: bool,
) -> Result<(autodiff::Tensor, autodiff::Tensor)> {
    let preds = mme.rollout(tape, batch, horizon, train)?;
    let k = batch.k_seen;
    let gt_flows: Vec<_> = (0..horizon).map(|i| batch.flows[k + i].clone()).collect();
    let gt_frames: Vec<_> = (0..horizon).map(|i| batch.frames[k + i].clone()).collect();
    let lf = loss_flow(tape, &preds, &gt_flows)?;
    let ls = loss_smooth(tape, &preds, &gt_frames)?;
    Ok((lf, ls))
}

/// Stage 1: optimize the flow predictor on L_flow + lambda * L_smooth with
/// teacher-forced warm-up and closed-loop prediction.
pub fn train_stage1(
    dataset: &[Sequence],
    val: Option<&[Sequence]>,
    config: &TrainConfig,
    out_dir: Option<&Path>,
    resume: Option<&Path>,
) -> Result<Stage1Output> {
    config.validate()?;
    let horizon = config.effective_horizon();
    check_dataset(dataset, horizon)?;
    let (ps, mme) = build_mme(config, dataset)?;
    let mut adam = Adam::new(
        config.lr_mme,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_eps,
    );
    let mut start_epoch = 0;
    if let Some(dir) = resume {
        let meta = checkpoint::load(dir, "mme", &ps, Some(&mut adam))?;
        start_epoch = meta.epochs_done;
    }
    let batch_size = config.effective_batch_size();
    let mut history = Vec::new();
    for epoch in start_epoch..config.epochs {
        let order = epoch_order(config.seed, epoch, dataset.len());
        let mut steps = Vec::new();
        for group in batches(dataset, &order, batch_size) {
            let batch = SeqBatch::new(&group)?;
            let tape = Tape::new();
            let (lf, ls) = stage1_losses(&tape, &mme, &batch, horizon, true)?;
            let total = loss_mme(&tape, &lf, &ls, config.lambda_smooth)?;
            tape.backward(&total)?;
            adam.step(&ps, config.grad_clip)?;
            steps.push(StepLoss {
                total: total.item(),
                flow: Some(lf.item()),
                smooth: Some(ls.item()),
            });
        }
        let train_loss = steps.iter().map(|s| s.total).sum::<f64>() / steps.len() as f64;
        let val_loss = match val {
            Some(vset) => Some(eval_stage1_loss(&mme, vset, config)?),
            None => None,
        };
        history.push(EpochStats {
            epoch,
            steps,
            train_loss,
            val_loss,
        });
        if let Some(dir) = out_dir {
            checkpoint::save(dir, "mme", &ps, Some(&adam), config, epoch + 1)?;
        }
    }
    Ok(Stage1Output {
        params: ps,
        mme,
        history,
    })
}

/// Held-out stage-1 loss under inference-mode normalization.
pub fn eval_stage1_loss(mme: &Mme, dataset: &[Sequence], config: &TrainConfig) -> Result<f64> {
    let horizon = config.effective_horizon();
    check_dataset(dataset, horizon)?;
    let batch_size = config.effective_batch_size();
    let order: Vec<usize> = (0..dataset.len()).collect();
    let mut total = 0.0;
    let mut count = 0;
    for group in batches(dataset, &order, batch_size) {
        let batch = SeqBatch::new(&group)?;
        let tape = Tape::no_grad();
        let (lf, ls) = stage1_losses(&tape, mme, &batch, horizon, false)?;
        let l = loss_mme(&tape, &lf, &ls, config.lambda_smooth)?;
        total += l.item();
        count += 1;
    }
    Ok(total / count as f64)
}

pub struct Stage2Output {
    pub params: ParamSet,
    pub car: Car,
    pub history: History,
}

/// Stage 2: freeze the flow predictor and optimize refinement on the image
/// reconstruction loss. Flows are computed under a non-recording tape, so
/// no gradient can reach (or alter) stage-1 parameters; bitwise freezing is
/// asserted before returning.
pub fn train_stage2(
    dataset: &[Sequence],
    val: Option<&[Sequence]>,
    config: &TrainConfig,
    mme_ckpt: &Path,
    out_dir: Option<&Path>,
    resume: Option<&Path>,
) -> Result<Stage2Output> {
    config.validate()?;
    let horizon = config.effective_horizon();
    check_dataset(dataset, horizon)?;

    let mme_meta = checkpoint::read_meta(mme_ckpt)?;
    let (mme_ps, mme) = build_mme(&mme_meta.config, dataset)?;
    checkpoint::load(mme_ckpt, "mme", &mme_ps, None)?;
    let frozen_before = mme_ps.snapshot();

    let (car_ps, car) = build_car(config, dataset)?;
    let mut adam = Adam::new(
        config.lr_car,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_eps,
    );
    let mut start_epoch = 0;
    if let Some(dir) = resume {
        let meta = checkpoint::load(dir, "car", &car_ps, Some(&mut adam))?;
        start_epoch = meta.epochs_done;
    }
    let batch_size = config.effective_batch_size();
    let mut history = Vec::new();
    for epoch in start_epoch..config.epochs {
        let order = epoch_order(config.seed, epoch, dataset.len());
        let mut steps = Vec::new();
        for group in batches(dataset, &order, batch_size) {
            let batch = SeqBatch::new(&group)?;
            let flows = {
                let frozen_tape = Tape::no_grad();
                mme.rollout(&frozen_tape, &batch, horizon, false)?
            };
            let tape = Tape::new();
            let refined = car.rollout(&tape, &batch, &flows, true)?;
            let k = batch.k_seen;
            let gt: Vec<_> = (0..horizon).map(|i| batch.frames[k + i].clone()).collect();
            let lv = loss_image(&tape, &refined, &gt)?;
            tape.backward(&lv)?;
            adam.step(&car_ps, config.grad_clip)?;
            steps.push(StepLoss {
                total: lv.item(),
                flow: None,
                smooth: None,
            });
        }
        let train_loss = steps.iter().map(|s| s.total).sum::<f64>() / steps.len() as f64;
        let val_loss = match val {
            Some(vset) => Some(eval_stage2_loss(&mme, &car, vset, config)?),
            None => None,
        };
        history.push(EpochStats {
            epoch,
            steps,
            train_loss,
            val_loss,
        });
        if let Some(dir) = out_dir {
            checkpoint::save(dir, "car", &car_ps, Some(&adam), config, epoch + 1)?;
        }
    }

    let frozen_after = mme_ps.snapshot();
    for ((name_b, before), (_, after)) in frozen_before.iter().zip(&frozen_after) {
        if before != after {
            return Err(Error::Training(format!(
                "stage-1 parameter {name_b} changed during stage 2"
            )));
        }
    }
    Ok(Stage2Output {
        params: car_ps,
        car,
        history,
    })
}

pub fn eval_stage2_loss(
    mme: &Mme,
    car: &Car,
    dataset: &[Sequence],
    config: &TrainConfig,
) -> Result<f64> {
    let horizon = config.effective_horizon();
    check_dataset(dataset, horizon)?;
    let batch_size = config.effective_batch_size();
    let order: Vec<usize> = (0..dataset.len()).collect();
    let mut total = 0.0;
    let mut count = 0;
    for group in batches(dataset, &order, batch_size) {
        let batch = SeqBatch::new(&group)?;
        let tape = Tape::no_grad();
        let flows = mme.rollout(&tape, &batch, horizon, false)?;
        let refined = car.rollout(&tape, &batch, &flows, false)?;
        let k = batch.k_seen;
        let gt: Vec<_> = (0..horizon).map(|i| batch.frames[k + i].clone()).collect();
        total += loss_image(&tape, &refined, &gt)?.item();
        count += 1;
    }
    Ok(total / count as f64)
}
