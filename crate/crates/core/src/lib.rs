//! Label fusion, clean-up and evaluation for volumetric tumour/cochlea
//! segmentations.
//!
//! The crate fuses softmax outputs of several segmentation models by treating
//! one model's hard labels as noisy and correcting them with another model's
//! probabilities (confident learning), applies connected-component clean-up
//! rules, and scores results with Dice and average symmetric surface distance.
//! It also carries the training losses with analytic gradients and the
//! mean-teacher EMA update as standalone numerical primitives.

pub mod components;
pub mod edt;
pub mod ema;
pub mod error;
pub mod fusion;
pub mod gradcheck;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod nifti;
pub mod postprocess;
pub mod volume;

pub use components::{connected_components, ComponentStats, Components};
pub use ema::{ema_run, ema_update, ParamVector, DEFAULT_DECAY};
pub use error::{Error, Result};
pub use fusion::{
    compute_thresholds, confident_joint, find_label_errors, fuse_chain, fuse_pair, ConfidentJoint,
    ErrorFlags,
};
pub use io::{load_label, load_prob, load_scalar, load_volume, save_volume};
pub use losses::{ce_loss, consistency_loss, dice_loss, seg_loss, LossValue, DEFAULT_DICE_EPS};
pub use metrics::{assd, dice_score, evaluate, extract_surface, MetricsRecord};
pub use postprocess::{keep_largest, postprocess_pipeline, remove_far_vs};
pub use volume::{
    argmax_labels, flip_lr, normalize_intensity, one_hot, resample, Dims, FlipLr, LabelVolume,
    ProbVolume, Resample, ScalarVolume, Spacing, Volume, VolumeKind,
};
