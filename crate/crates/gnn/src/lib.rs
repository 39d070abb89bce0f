//! A shallow message-passing network that approximates the variational
//! solvers of `graphvar-core`, with the reverse-mode tape used to train it.

pub mod data;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod tape;
pub mod train;

pub use data::{attach_solver_target, load_instance, prepare_instance, Instance, PipelineConfig};
pub use error::{Error, Result};
pub use eval::{evaluate_relative_error, EvalReport, InstanceEval};
pub use loss::{loss_distill, loss_unsupervised, LossAndGrad};
pub use model::{GnnModel, GraphIndex};
pub use train::{train, EpochLosses, Objective, TrainConfig, TrainOutcome};
