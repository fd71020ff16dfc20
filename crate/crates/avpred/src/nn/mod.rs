//! Parameter registry and layers built on the autodiff tape.

mod layers;
mod params;

pub use layers::{BatchNorm2d, Conv2d, ConvLstmCell, Deconv2d, Linear, BN_EPS, BN_MOMENTUM};
pub use params::{uniform_init, Param, ParamSet};
