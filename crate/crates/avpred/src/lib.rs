//! Audio-conditioned video prediction, decoupled into motion and
//! appearance: a recurrent flow predictor with an audio motion memory
//! (Condense/Recall attention over per-step audio features) and a
//! context-aware refinement stage (flow warping plus a U-Net whose decoder
//! consumes motion-modulated global context features). Ships with a
//! synthetic bouncing-sprite dataset generator whose backward flow is
//! analytically exact, a two-stage trainer, metrics, and a CLI.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradsuite;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod train;
pub mod viz;

pub use error::{Error, Result};
