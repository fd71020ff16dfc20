//! Central finite-difference verification for tape gradients.

use crate::error::{AdError, Result};
use crate::tape::Tape;
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Max relative error between tape gradients and central finite differences,
/// over every coordinate of every input:
/// |analytic − cd| / max(|analytic|, |cd|, 1e-8).
///
/// `f` must be scalar-valued and smooth at the probe point (keep relu-family
/// inputs away from their kinks).
pub fn gradient_check<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&Tape, &[Tensor]) -> Result<Tensor>,
{
    let leaves: Vec<Tensor> = inputs
        .iter()
        .map(|t| Tensor::param(t.data().to_vec(), t.shape()))
        .collect::<Result<_>>()?;
    let tape = Tape::new();
    let loss = f(&tape, &leaves)?;
    if loss.numel() != 1 {
        return Err(AdError::NonScalarLoss {
            numel: loss.numel(),
        });
    }
    tape.backward(&loss)?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|l| l.grad().unwrap_or_else(|| vec![0.0; l.numel()]))
        .collect();

    let eval = |probe: &[Tensor]| -> Result<f64> {
        let tape = Tape::no_grad();
        Ok(f(&tape, probe)?.item())
    };

    let mut max_rel: f64 = 0.0;
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.numel() {
            let mut probe: Vec<Tensor> = inputs.to_vec();
            let mut bumped = input.data().to_vec();
            bumped[j] += eps;
            probe[i] = Tensor::new(bumped.clone(), input.shape())?;
            let fp = eval(&probe)?;
            bumped[j] -= 2.0 * eps;
            probe[i] = Tensor::new(bumped, input.shape())?;
            let fm = eval(&probe)?;
            let cd = (fp - fm) / (2.0 * eps);
            let a = analytic[i][j];
            let rel = (a - cd).abs() / a.abs().max(cd.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}
