//! Composite loss, exact gradients, Adam and the epoch loop.

mod adam;
mod batch;
mod fit;
mod gradcheck;
mod hyper;
mod loss;

pub use adam::{adam_step, AdamState};
pub use batch::{batch_loss, batch_loss_and_grad, draw_pair_samples, training_samples, PairSamples};
pub use fit::{fit, fit_with, initial_params, EpochRecord, FitOutcome};
pub use gradcheck::{check_gradients, relative_error, GradCheck, RELATIVE_FLOOR};
pub use hyper::{ContrastiveLogit, HyperParams};
pub use loss::{bce_loss, contrastive_loss, l2_penalty, LossBreakdown, PROB_EPS};
