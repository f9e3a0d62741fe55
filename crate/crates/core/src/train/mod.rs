//! The training recipe: parameter groups with differential learning rates,
//! frozen text tower, decoupled-weight-decay optimizer, cosine schedule,
//! the deterministic training loop, checkpointing, and gradient
//! verification.

mod adamw;
mod checkpoint;
mod config;
mod gradcheck;
mod groups;
mod run;
mod schedule;

pub use adamw::{optimizer_step, GroupLr, OptimizerState, BETA1, BETA2, EPS};
pub use checkpoint::{checkpoint_load, checkpoint_save, save_params, Checkpoint, Dtype, TrainMeta};
pub use config::TrainConfig;
pub use gradcheck::{central_difference, grad_check, GradCheckReport};
pub use groups::{group_of, is_norm_param, make_param_groups, GroupKind, ParamGroup};
pub use run::{render_loss_log, steps_per_epoch, train, StepRecord, TrainOptions, TrainOutcome};
pub use schedule::cosine_lr;
