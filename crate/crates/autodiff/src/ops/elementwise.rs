use crate::error::{AdError, Result};
use crate::tape::{op_output, Tape};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// Negative slope fixed at 0.2.
    LeakyRelu,
    Tanh,
    Sigmoid,
}

pub const LEAKY_SLOPE: f64 = 0.2;

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(AdError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

impl Tape {
    pub fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        same_shape("add", a, b)?;
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
        let out = op_output("add", self, &[a, b], data, a.shape().to_vec())?;
        if self.wants_grad(&[a, b]) {
            let (a, b) = (a.clone(), b.clone());
            self.push(out.id(), move |g, store| {
                store.accumulate(&a, g.to_vec());
                store.accumulate(&b, g.to_vec());
            });
        }
        Ok(out)
    }

    pub fn sub(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        same_shape("sub", a, b)?;
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
        let out = op_output("sub", self, &[a, b], data, a.shape().to_vec())?;
        if self.wants_grad(&[a, b]) {
            let (a, b) = (a.clone(), b.clone());
            self.push(out.id(), move |g, store| {
                store.accumulate(&a, g.to_vec());
                store.accumulate(&b, g.iter().map(|v| -v).collect());
            });
        }
        Ok(out)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        same_shape("mul", a, b)?;
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
        let out = op_output("mul", self, &[a, b], data, a.shape().to_vec())?;
        if self.wants_grad(&[a, b]) {
            let (a, b) = (a.clone(), b.clone());
            self.push(out.id(), move |g, store| {
                if a.requires_grad() {
                    store.accumulate(&a, g.iter().zip(b.data()).map(|(g, y)| g * y).collect());
                }
                if b.requires_grad() {
                    store.accumulate(&b, g.iter().zip(a.data()).map(|(g, x)| g * x).collect());
                }
            });
        }
        Ok(out)
    }

    pub fn neg(&self, a: &Tensor) -> Result<Tensor> {
        self.scale(a, -1.0)
    }

    pub fn scale(&self, a: &Tensor, c: f64) -> Result<Tensor> {
        let data = a.data().iter().map(|x| c * x).collect();
        let out = op_output("scale", self, &[a], data, a.shape().to_vec())?;
        if self.wants_grad(&[a]) {
            let a = a.clone();
            self.push(out.id(), move |g, store| {
                store.accumulate(&a, g.iter().map(|v| c * v).collect());
            });
        }
        Ok(out)
    }

    pub fn abs(&self, a: &Tensor) -> Result<Tensor> {
        let data = a.data().iter().map(|x| x.abs()).collect();
        let out = op_output("abs", self, &[a], data, a.shape().to_vec())?;
        if self.wants_grad(&[a]) {
            let a = a.clone();
            self.push(out.id(), move |g, store| {
                let gx = g
                    .iter()
                    .zip(a.data())
                    .map(|(g, x)| g * x.signum() * f64::from(*x != 0.0))
                    .collect();
                store.accumulate(&a, gx);
            });
        }
        Ok(out)
    }

    pub fn exp(&self, a: &Tensor) -> Result<Tensor> {
        let data: Vec<f64> = a.data().iter().map(|x| x.exp()).collect();
        let out = op_output("exp", self, &[a], data, a.shape().to_vec())?;
        if self.wants_grad(&[a]) {
            let (a, y) = (a.clone(), out.clone());
            self.push(out.id(), move |g, store| {
                store.accumulate(&a, g.iter().zip(y.data()).map(|(g, y)| g * y).collect());
            });
        }
        Ok(out)
    }

    pub fn activation(&self, a: &Tensor, kind: Activation) -> Result<Tensor> {
        let f = |x: f64| -> f64 {
            match kind {
                Activation::Relu => x.max(0.0),
                Activation::LeakyRelu => {
                    if x >= 0.0 {
                        x
                    } else {
                        LEAKY_SLOPE * x
                    }
                }
                Activation::Tanh => x.tanh(),
                Activation::Sigmoid => {
                    // Split form keeps the exponent non-positive.
                    if x >= 0.0 {
                        1.0 / (1.0 + (-x).exp())
                    } else {
                        let e = x.exp();
                        e / (1.0 + e)
                    }
                }
            }
        };
        let data: Vec<f64> = a.data().iter().map(|&x| f(x)).collect();
        let out = op_output("activation", self, &[a], data, a.shape().to_vec())?;
        if self.wants_grad(&[a]) {
            let (a, y) = (a.clone(), out.clone());
            self.push(out.id(), move |g, store| {
                let gx = g
                    .iter()
                    .zip(a.data().iter().zip(y.data()))
                    .map(|(g, (&x, &y))| {
                        let d = match kind {
                            Activation::Relu => f64::from(x > 0.0),
                            Activation::LeakyRelu => {
                                if x >= 0.0 {
                                    1.0
                                } else {
                                    LEAKY_SLOPE
                                }
                            }
                            Activation::Tanh => 1.0 - y * y,
                            Activation::Sigmoid => y * (1.0 - y),
                        };
                        g * d
                    })
                    .collect();
                store.accumulate(&a, gx);
            });
        }
        Ok(out)
    }

    pub fn relu(&self, a: &Tensor) -> Result<Tensor> {
        self.activation(a, Activation::Relu)
    }

    pub fn leaky_relu(&self, a: &Tensor) -> Result<Tensor> {
        self.activation(a, Activation::LeakyRelu)
    }

    pub fn tanh(&self, a: &Tensor) -> Result<Tensor> {
        self.activation(a, Activation::Tanh)
    }

    pub fn sigmoid(&self, a: &Tensor) -> Result<Tensor> {
        self.activation(a, Activation::Sigmoid)
    }
}
