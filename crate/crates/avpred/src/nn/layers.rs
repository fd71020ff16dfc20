use autodiff::{Tape, Tensor};
use rand_chacha::ChaCha8Rng;

use super::params::{uniform_init, Param, ParamSet};
use crate::error::Result;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

pub struct Conv2d {
    pub w: Param,
    /// Absent when a batch norm follows (the shift would cancel exactly).
    pub b: Option<Param>,
    pub cout: usize,
    pub stride: usize,
    pub padding: (usize, usize),
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: (usize, usize),
        bias: bool,
    ) -> Self {
        let fan_in = cin * kernel.0 * kernel.1;
        let w = ps.register(
            &format!("{name}.weight"),
            uniform_init(rng, &[cout, cin, kernel.0, kernel.1], fan_in),
            true,
        );
        let b = bias.then(|| ps.register(&format!("{name}.bias"), Tensor::zeros(&[cout]), true));
        Conv2d {
            w,
            b,
            cout,
            stride,
            padding,
        }
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        let bias = match &self.b {
            Some(p) => p.value(),
            None => Tensor::zeros(&[self.cout]),
        };
        Ok(tape.conv2d(x, &self.w.value(), &bias, self.stride, self.padding)?)
    }
}

pub struct Deconv2d {
    pub w: Param,
    pub b: Param,
    pub stride: usize,
    pub padding: (usize, usize),
}

impl Deconv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: (usize, usize),
    ) -> Self {
        let fan_in = cin * kernel.0 * kernel.1;
        let w = ps.register(
            &format!("{name}.weight"),
            uniform_init(rng, &[cin, cout, kernel.0, kernel.1], fan_in),
            true,
        );
        let b = ps.register(&format!("{name}.bias"), Tensor::zeros(&[cout]), true);
        Deconv2d {
            w,
            b,
            stride,
            padding,
        }
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        Ok(tape.deconv2d(x, &self.w.value(), &self.b.value(), self.stride, self.padding)?)
    }
}

pub struct Linear {
    pub w: Param,
    pub b: Param,
}

impl Linear {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_features: usize,
        out_features: usize,
    ) -> Self {
        let w = ps.register(
            &format!("{name}.weight"),
            uniform_init(rng, &[out_features, in_features], in_features),
            true,
        );
        let b = ps.register(&format!("{name}.bias"), Tensor::zeros(&[out_features]), true);
        Linear { w, b }
    }

    /// Same layer with the final-layer zero/constant init used by the
    /// affine-parameter heads (output == bias regardless of input).
    pub fn new_const_output(
        ps: &mut ParamSet,
        name: &str,
        in_features: usize,
        out_features: usize,
        bias_value: f64,
    ) -> Self {
        let w = ps.register(
            &format!("{name}.weight"),
            Tensor::zeros(&[out_features, in_features]),
            true,
        );
        let b = ps.register(
            &format!("{name}.bias"),
            Tensor::full(&[out_features], bias_value).expect("bias"),
            true,
        );
        Linear { w, b }
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        Ok(tape.linear(x, &self.w.value(), &self.b.value())?)
    }
}

pub struct BatchNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Param,
    pub running_var: Param,
}

impl BatchNorm2d {
    pub fn new(ps: &mut ParamSet, name: &str, channels: usize) -> Self {
        BatchNorm2d {
            gamma: ps.register(
                &format!("{name}.gamma"),
                Tensor::full(&[channels], 1.0).expect("gamma"),
                true,
            ),
            beta: ps.register(&format!("{name}.beta"), Tensor::zeros(&[channels]), true),
            running_mean: ps.register(
                &format!("{name}.running_mean"),
                Tensor::zeros(&[channels]),
                false,
            ),
            running_var: ps.register(
                &format!("{name}.running_var"),
                Tensor::full(&[channels], 1.0).expect("var"),
                false,
            ),
        }
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor, training: bool) -> Result<Tensor> {
        let (y, stats) = tape.batch_norm(
            x,
            &self.gamma.value(),
            &self.beta.value(),
            &self.running_mean.value(),
            &self.running_var.value(),
            training,
            BN_EPS,
        )?;
        if let Some(stats) = stats {
            let update = |param: &Param, fresh: &[f64]| {
                let old = param.value();
                let mixed: Vec<f64> = old
                    .data()
                    .iter()
                    .zip(fresh)
                    .map(|(o, n)| (1.0 - BN_MOMENTUM) * o + BN_MOMENTUM * n)
                    .collect();
                param.set(Tensor::new(mixed, old.shape()).expect("running stat"));
            };
            update(&self.running_mean, &stats.mean);
            update(&self.running_var, &stats.var);
        }
        Ok(y)
    }
}

/// ConvLSTM cell: sigmoid input/forget/output gates and tanh candidate,
/// all computed by one 3x3 convolution over [x, h].
pub struct ConvLstmCell {
    gates: Conv2d,
    pub hidden: usize,
}

impl ConvLstmCell {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_channels: usize,
        hidden: usize,
    ) -> Self {
        let gates = Conv2d::new(
            ps,
            rng,
            &format!("{name}.gates"),
            in_channels + hidden,
            4 * hidden,
            (3, 3),
            1,
            (1, 1),
        );
        // Forget gate starts open.
        let mut bias = vec![0.0; 4 * hidden];
        for v in bias.iter_mut().take(2 * hidden).skip(hidden) {
            *v = 1.0;
        }
        gates.b.set(
            Tensor::param(bias, &[4 * hidden]).expect("forget bias"),
        );
        ConvLstmCell { gates, hidden }
    }

    pub fn step(
        &self,
        tape: &Tape,
        x: &Tensor,
        h: &Tensor,
        c: &Tensor,
    ) -> Result<(Tensor, Tensor)> {
        let stacked = tape.concat(&[x, h], 1)?;
        let gates = self.gates.forward(tape, &stacked)?;
        let hid = self.hidden;
        let i = tape.sigmoid(&tape.slice_axis(&gates, 1, 0, hid)?)?;
        let f = tape.sigmoid(&tape.slice_axis(&gates, 1, hid, 2 * hid)?)?;
        let o = tape.sigmoid(&tape.slice_axis(&gates, 1, 2 * hid, 3 * hid)?)?;
        let g = tape.tanh(&tape.slice_axis(&gates, 1, 3 * hid, 4 * hid)?)?;
        let c_next = tape.add(&tape.mul(&f, c)?, &tape.mul(&i, &g)?)?;
        let h_next = tape.mul(&o, &tape.tanh(&c_next)?)?;
        Ok((h_next, c_next))
    }
}
