use serde::{Deserialize, Serialize};

use crate::data::Profile;
use crate::error::{Error, Result};

fn default_lambda_smooth() -> f64 {
    0.01
}
fn default_lr_mme() -> f64 {
    1e-4
}
fn default_lr_car() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}
fn default_epochs() -> usize {
    50
}
fn default_seed() -> u64 {
    0
}
fn default_profile() -> String {
    "default".into()
}
fn default_mme_mode() -> String {
    "mme".into()
}
fn default_car_variant() -> String {
    "car".into()
}
fn default_true() -> bool {
    true
}
fn default_grad_clip() -> f64 {
    10.0
}

/// Flat training configuration; unknown keys in a config file are errors.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lambda_smooth")]
    pub lambda_smooth: f64,
    #[serde(default = "default_lr_mme")]
    pub lr_mme: f64,
    #[serde(default = "default_lr_car")]
    pub lr_car: f64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
    /// Defaults to 8 (4 on the small profile).
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Dataset directory; the CLI --data flag overrides it.
    #[serde(default)]
    pub data: Option<String>,
    #[serde(default)]
    pub val_data: Option<String>,
    #[serde(default = "default_profile")]
    pub profile: String,
    /// Frames predicted per training rollout; defaults to the profile's
    /// training horizon (15 default, 10 small).
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default = "default_mme_mode")]
    pub mme_mode: String,
    #[serde(default = "default_car_variant")]
    pub car_variant: String,
    /// Eq-as-printed audio indexing for the refinement conditioning.
    #[serde(default = "default_true")]
    pub car_audio_aligned: bool,
    /// Global gradient-norm clip; absent disables clipping.
    #[serde(default = "default_grad_clip_opt")]
    pub grad_clip: Option<f64>,
    /// Stage-1 checkpoint consumed by stage-2 training.
    #[serde(default)]
    pub mme_checkpoint: Option<String>,
}

fn default_grad_clip_opt() -> Option<f64> {
    Some(default_grad_clip())
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_smooth < 0.0 {
            return Err(Error::Config("lambda_smooth must be >= 0".into()));
        }
        if self.lr_mme <= 0.0 || self.lr_car <= 0.0 {
            return Err(Error::Config("learning rates must be > 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if let Some(b) = self.batch_size {
            if b == 0 {
                return Err(Error::Config("batch_size must be >= 1".into()));
            }
        }
        Profile::parse(&self.profile)?;
        crate::model::MmeMode::parse(&self.mme_mode)?;
        crate::model::CarVariant::parse(&self.car_variant)?;
        Ok(())
    }

    pub fn profile(&self) -> Profile {
        Profile::parse(&self.profile).expect("validated")
    }

    pub fn effective_batch_size(&self) -> usize {
        self.batch_size.unwrap_or(match self.profile() {
            Profile::Default => 8,
            Profile::Small => 4,
        })
    }

    pub fn effective_horizon(&self) -> usize {
        self.horizon.unwrap_or(match self.profile() {
            Profile::Default => 15,
            Profile::Small => 10,
        })
    }
}
