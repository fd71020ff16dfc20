//! Finite-difference verification suite covering every primitive at its
//! stated tolerance plus the deep composites (attention, ConvLSTM,
//! U-Net miniature, full flow-predictor step).

use autodiff::{gradient_check, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{generate, SceneSpec, SpriteSpec};
use crate::error::{Error, Result};
use crate::model::{Car, CarConfig, Mme, MmeConfig, SeqBatch};
use crate::nn::{ConvLstmCell, Param, ParamSet};
use crate::train::{loss_flow, loss_image, loss_mme, loss_smooth};

pub struct CheckOutcome {
    pub name: String,
    pub max_rel: f64,
    pub tol: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_rel < self.tol
    }
}

fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), shape).expect("tensor")
}

/// Central finite differences on a deterministic sample of coordinates per
/// input tensor; exact analytic gradients come from one backward pass.
/// Full sweeps are infeasible for whole models, so deep composites verify
/// a seeded coordinate sample instead.
pub fn gradient_check_sampled<F>(
    f: F,
    inputs: &[Tensor],
    eps: f64,
    coords_per_tensor: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&Tape, &[Tensor]) -> Result<Tensor>,
{
    let leaves: Vec<Tensor> = inputs
        .iter()
        .map(|t| t.to_param())
        .collect();
    let tape = Tape::new();
    let loss = f(&tape, &leaves)?;
    if loss.numel() != 1 {
        return Err(Error::Training("loss must be scalar".into()));
    }
    tape.backward(&loss).map_err(Error::Autodiff)?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|l| l.grad().unwrap_or_else(|| vec![0.0; l.numel()]))
        .collect();

    let eval = |probe: &[Tensor]| -> Result<f64> {
        let tape = Tape::no_grad();
        Ok(f(&tape, probe)?.item())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel: f64 = 0.0;
    for (i, input) in inputs.iter().enumerate() {
        let n = input.numel();
        let picks: Vec<usize> = if n <= coords_per_tensor {
            (0..n).collect()
        } else {
            (0..coords_per_tensor).map(|_| rng.gen_range(0..n)).collect()
        };
        for j in picks {
            let mut probe: Vec<Tensor> = inputs.to_vec();
            let mut bumped = input.data().to_vec();
            bumped[j] += eps;
            probe[i] = Tensor::new(bumped.clone(), input.shape()).map_err(Error::Autodiff)?;
            let fp = eval(&probe)?;
            bumped[j] -= 2.0 * eps;
            probe[i] = Tensor::new(bumped, input.shape()).map_err(Error::Autodiff)?;
            let fm = eval(&probe)?;
            let cd = (fp - fm) / (2.0 * eps);
            let a = analytic[i][j];
            let rel = (a - cd).abs() / a.abs().max(cd.abs()).max(1e-8);
            if rel > max_rel && std::env::var("AVPRED_GRADCHECK_DEBUG").is_ok() {
                eprintln!(
                    "worst so far: tensor {i} shape {:?} coord {j}: analytic {a:.6e} cd {cd:.6e} rel {rel:.3e}",
                    input.shape()
                );
            }
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

fn primitive_checks(out: &mut Vec<CheckOutcome>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut push = |name: &str, res: autodiff::Result<f64>, tol: f64| -> Result<()> {
        out.push(CheckOutcome {
            name: name.to_string(),
            max_rel: res.map_err(Error::Autodiff)?,
            tol,
        });
        Ok(())
    };

    let a = randn(&mut rng, &[3, 4]);
    let b = randn(&mut rng, &[4, 2]);
    push(
        "matmul",
        gradient_check(
            |t, xs| {
                let y = t.matmul(&xs[0], &xs[1])?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[a, b],
            1e-5,
        ),
        1e-6,
    )?;

    let x = randn(&mut rng, &[3, 5]);
    push(
        "softmax",
        gradient_check(
            |t, xs| {
                let s = t.softmax(&xs[0], 1)?;
                t.sum_all(&t.mul(&s, &s)?)
            },
            &[x],
            1e-5,
        ),
        1e-6,
    )?;

    let x = randn(&mut rng, &[2, 3, 8, 8]);
    let w = randn(&mut rng, &[4, 3, 4, 4]);
    let bias = randn(&mut rng, &[4]);
    push(
        "conv2d",
        gradient_check(
            |t, xs| {
                let y = t.conv2d(&xs[0], &xs[1], &xs[2], 2, (1, 1))?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[x, w, bias],
            1e-5,
        ),
        1e-5,
    )?;

    let x = randn(&mut rng, &[1, 2, 3, 3]);
    let w = randn(&mut rng, &[2, 3, 4, 4]);
    let bias = randn(&mut rng, &[3]);
    push(
        "deconv2d",
        gradient_check(
            |t, xs| {
                let y = t.deconv2d(&xs[0], &xs[1], &xs[2], 2, (1, 1))?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[x, w, bias],
            1e-5,
        ),
        1e-5,
    )?;

    let x = randn(&mut rng, &[4, 6]);
    let w = randn(&mut rng, &[3, 6]);
    let bias = randn(&mut rng, &[3]);
    push(
        "linear",
        gradient_check(
            |t, xs| {
                let y = t.linear(&xs[0], &xs[1], &xs[2])?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[x, w, bias],
            1e-5,
        ),
        1e-6,
    )?;

    let x = randn(&mut rng, &[3, 2, 2, 2]);
    let gamma = randn(&mut rng, &[2]);
    let beta = randn(&mut rng, &[2]);
    let target = randn(&mut rng, &[3, 2, 2, 2]);
    push(
        "batch_norm",
        gradient_check(
            |t, xs| {
                let (y, _) = t.batch_norm(
                    &xs[0],
                    &xs[1],
                    &xs[2],
                    &Tensor::zeros(&[2]),
                    &Tensor::zeros(&[2]),
                    true,
                    1e-5,
                )?;
                t.mse(&y, &target)
            },
            &[x, gamma, beta],
            1e-5,
        ),
        1e-4,
    )?;

    // Probes clear of activation kinks.
    let x = Tensor::from_fn(&[8], |i| 0.2 + 0.09 * i as f64).expect("probe");
    let xn = Tensor::from_fn(&[8], |i| -0.2 - 0.09 * i as f64).expect("probe");
    push(
        "activations",
        gradient_check(
            |t, xs| {
                let mut acc = t.sum_all(&t.relu(&xs[0])?)?;
                for part in [
                    t.sum_all(&t.leaky_relu(&xs[1])?)?,
                    t.sum_all(&t.tanh(&xs[0])?)?,
                    t.sum_all(&t.sigmoid(&xs[1])?)?,
                ] {
                    acc = t.add(&acc, &part)?;
                }
                Ok(acc)
            },
            &[x, xn],
            1e-6,
        ),
        1e-6,
    )?;

    let x = randn(&mut rng, &[1, 2, 4, 4]);
    push(
        "max_pool2d",
        gradient_check(
            |t, xs| {
                let y = t.max_pool2d(&xs[0], 2)?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[x],
            1e-6,
        ),
        1e-6,
    )?;

    let a = randn(&mut rng, &[2, 2, 3]);
    let b = randn(&mut rng, &[2, 1, 3]);
    push(
        "concat",
        gradient_check(
            |t, xs| {
                let y = t.concat(&[&xs[0], &xs[1]], 1)?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[a, b],
            1e-5,
        ),
        1e-6,
    )?;

    let src = randn(&mut rng, &[1, 2, 5, 5]);
    let coords = Tensor::from_fn(&[1, 2, 5, 5], |i| 0.65 + ((i * 13) % 23) as f64 * 0.137)
        .expect("coords");
    push(
        "bilinear_sample",
        gradient_check(
            |t, xs| {
                let y = t.bilinear_sample(&xs[0], &xs[1])?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[src, coords],
            1e-5,
        ),
        1e-4,
    )?;

    let a = randn(&mut rng, &[2, 3]);
    let b = randn(&mut rng, &[2, 3]);
    push("mse", gradient_check(|t, xs| t.mse(&xs[0], &xs[1]), &[a, b], 1e-5), 1e-6)?;
    Ok(())
}

fn attention_check(out: &mut Vec<CheckOutcome>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mem = randn(&mut rng, &[3, 6]);
    let wq = randn(&mut rng, &[6, 6]);
    let wk = randn(&mut rng, &[6, 6]);
    let wv = randn(&mut rng, &[6, 6]);
    let max_rel = gradient_check(
        |t, xs| {
            let q = t.matmul(&xs[0], &xs[1])?;
            let k = t.matmul(&xs[0], &xs[2])?;
            let v = t.matmul(&xs[0], &xs[3])?;
            let attn = t.softmax(&t.matmul(&q, &t.transpose2d(&k)?)?, 1)?;
            let mixed = t.matmul(&attn, &v)?;
            let last = t.slice_axis(&mixed, 0, 2, 3)?;
            let residual = t.add(&t.slice_axis(&xs[0], 0, 2, 3)?, &last)?;
            t.sum_all(&t.mul(&residual, &residual)?)
        },
        &[mem, wq, wk, wv],
        1e-5,
    )
    .map_err(Error::Autodiff)?;
    out.push(CheckOutcome {
        name: "attention_condense".into(),
        max_rel,
        tol: 1e-6,
    });
    Ok(())
}

fn params_of(ps: &ParamSet) -> (Vec<Param>, Vec<Tensor>) {
    let params: Vec<Param> = ps.learnable().cloned().collect();
    let values = params.iter().map(|p| p.value()).collect();
    (params, values)
}

fn convlstm_check(out: &mut Vec<CheckOutcome>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut ps = ParamSet::new();
    let cell = ConvLstmCell::new(&mut ps, &mut rng, "cell", 3, 4);
    let x0 = randn(&mut rng, &[1, 3, 8, 8]);
    let x1 = randn(&mut rng, &[1, 3, 8, 8]);
    let target = randn(&mut rng, &[1, 4, 8, 8]);
    let (params, values) = params_of(&ps);
    let max_rel = gradient_check_sampled(
        |t, xs| {
            for (p, x) in params.iter().zip(xs) {
                p.set(x.clone());
            }
            let h0 = Tensor::zeros(&[1, 4, 8, 8]);
            let c0 = Tensor::zeros(&[1, 4, 8, 8]);
            let (h1, c1) = cell.step(t, &x0, &h0, &c0)?;
            let (h2, _) = cell.step(t, &x1, &h1, &c1)?;
            Ok(t.mse(&h2, &target)?)
        },
        &values,
        1e-5,
        24,
        999,
    )?;
    out.push(CheckOutcome {
        name: "convlstm_2step".into(),
        max_rel,
        tol: 1e-3,
    });
    Ok(())
}

/// Tiny scene pair for the composite model checks.
fn mini_batch(h: usize, w: usize, t_total: usize, k: usize) -> Result<SeqBatch> {
    let mk = |seed: u64, glyph: u8, pos: (f64, f64), vel: (f64, f64)| SceneSpec {
        height: h,
        width: w,
        channels: 1,
        sprites: vec![SpriteSpec {
            glyph,
            size: 8,
            pos,
            vel,
            tone: 6,
        }],
        t_total,
        k_seen: k,
        seed,
    };
    let s0 = generate(&mk(1, 3, (2.0, 1.0), (2.0, 1.0)))?;
    let s1 = generate(&mk(2, 7, (5.0, 4.0), (-1.0, 2.0)))?;
    SeqBatch::new(&[&s0, &s1])
}

fn mme_step_check(out: &mut Vec<CheckOutcome>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut ps = ParamSet::new();
    let mut cfg = MmeConfig::new(1, 16, 16);
    cfg.lstm_layers = 1;
    let mme = Mme::new(&mut ps, &mut rng, cfg)?;
    let batch = mini_batch(16, 16, 4, 2)?;
    let (params, values) = params_of(&ps);
    let max_rel = gradient_check_sampled(
        |t, xs| {
            for (p, x) in params.iter().zip(xs) {
                p.set(x.clone());
            }
            let preds = mme.rollout(t, &batch, 2, true)?;
            let gt: Vec<_> = (0..2).map(|i| batch.flows[2 + i].clone()).collect();
            let frames: Vec<_> = (0..2).map(|i| batch.frames[2 + i].clone()).collect();
            let lf = loss_flow(t, &preds, &gt)?;
            let ls = loss_smooth(t, &preds, &frames)?;
            loss_mme(t, &lf, &ls, 0.01)
        },
        &values,
        1e-5,
        3,
        1234,
    )?;
    out.push(CheckOutcome {
        name: "mme_full_step".into(),
        max_rel,
        tol: 1e-3,
    });
    Ok(())
}

fn unet_check(out: &mut Vec<CheckOutcome>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut ps = ParamSet::new();
    let mut cfg = CarConfig::new(1, 16, 16);
    cfg.levels = 2;
    let car = Car::new(&mut ps, &mut rng, cfg)?;
    let batch = mini_batch(16, 16, 4, 2)?;
    let flow = randn(&mut rng, &[2, 2, 16, 16]);
    let flow = Tensor::new(
        flow.data().iter().map(|v| v * 0.8).collect(),
        flow.shape(),
    )
    .expect("flow");
    let (params, values) = params_of(&ps);
    let max_rel = gradient_check_sampled(
        |t, xs| {
            for (p, x) in params.iter().zip(xs) {
                p.set(x.clone());
            }
            let refined = car.rollout(t, &batch, &[flow.clone()], true)?;
            let gt = vec![batch.frames[2].clone()];
            loss_image(t, &refined, &gt)
        },
        &values,
        1e-5,
        3,
        4321,
    )?;
    out.push(CheckOutcome {
        name: "unet_car_miniature".into(),
        max_rel,
        tol: 1e-3,
    });
    Ok(())
}

/// Run every check; callers decide how to render outcomes.
pub fn run_suite() -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    primitive_checks(&mut out)?;
    attention_check(&mut out)?;
    convlstm_check(&mut out)?;
    unet_check(&mut out)?;
    mme_step_check(&mut out)?;
    Ok(out)
}

#[cfg(test)]
mod bisect {
    use super::*;

    fn mme_variant(horizon: usize, lambda: f64, mode: crate::model::MmeMode) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut ps = ParamSet::new();
        let mut cfg = MmeConfig::new(1, 16, 16);
        cfg.lstm_layers = 1;
        cfg.mode = mode;
        let mme = Mme::new(&mut ps, &mut rng, cfg).unwrap();
        let batch = mini_batch(16, 16, 4, 2).unwrap();
        let (params, values) = params_of(&ps);
        gradient_check_sampled(
            |t, xs| {
                for (p, x) in params.iter().zip(xs) {
                    p.set(x.clone());
                }
                let preds = mme.rollout(t, &batch, horizon, true)?;
                let gt: Vec<_> = (0..horizon).map(|i| batch.flows[2 + i].clone()).collect();
                let frames: Vec<_> = (0..horizon).map(|i| batch.frames[2 + i].clone()).collect();
                let lf = loss_flow(t, &preds, &gt)?;
                let ls = loss_smooth(t, &preds, &frames)?;
                loss_mme(t, &lf, &ls, lambda)
            },
            &values,
            1e-5,
            3,
            1234,
        )
        .unwrap()
    }

    #[test]
    #[ignore]
    fn bisect_mme() {
        eprintln!("full h2 lam0.01: {:.3e}", mme_variant(2, 0.01, crate::model::MmeMode::Full));
        eprintln!("full h2 lam0:    {:.3e}", mme_variant(2, 0.0, crate::model::MmeMode::Full));
        eprintln!("full h1 lam0.01: {:.3e}", mme_variant(1, 0.01, crate::model::MmeMode::Full));
        eprintln!("full h1 lam0:    {:.3e}", mme_variant(1, 0.0, crate::model::MmeMode::Full));
        eprintln!("vonly h2 lam0:   {:.3e}", mme_variant(2, 0.0, crate::model::MmeMode::VisualOnly));
    }
}
