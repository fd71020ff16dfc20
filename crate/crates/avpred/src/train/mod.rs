//! Two-stage optimization: the flow predictor first, then refinement with
//! the flow predictor frozen.

mod adam;
mod checkpoint;
mod config;
mod loss;
mod stages;

pub use adam::Adam;
pub use checkpoint::{load as load_checkpoint, read_meta, save as save_checkpoint, CheckpointMeta};
pub use config::TrainConfig;
pub use loss::{loss_flow, loss_image, loss_mme, loss_smooth};
pub use stages::{
    build_car, build_mme, eval_stage1_loss, eval_stage2_loss, train_stage1, train_stage2,
    EpochStats, History, Stage1Output, Stage2Output, StepLoss,
};
