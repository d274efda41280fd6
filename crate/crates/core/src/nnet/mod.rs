//! Minimal fully-connected network engine: forward/backward, losses,
//! optimizers, training loop, gradient checking and parameter files.

mod gradcheck;
mod io;
mod loss;
mod mlp;
mod train;

pub use gradcheck::{gradient_check, GradCheck};
pub use io::{load_params, params_from_bytes, params_to_bytes, save_params, ParamFileError};
pub use loss::{dice_ce_logits, dice_ce_loss, mse_loss, sigmoid, DICE_EPS};
pub use mlp::{Activation, BatchCache, Gradients, MlpParams};
pub use train::{
    evaluate_loss, train, Dataset, EpochLoss, LossKind, Optimizer, OptimizerState, TrainConfig,
    TrainReport, Trained,
};
