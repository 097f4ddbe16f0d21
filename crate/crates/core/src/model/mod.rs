//! The planner: scene encoder, trajectory policy, latent world model,
//! summarizer and auto-think gate, with their training objective.

mod checkpoint;
mod config;
mod infer;
mod loss;
mod net;
mod train;
mod trajectory;

pub use config::{HyperParams, LatentNorm, ModelConfig, WarmupTarget};
pub use loss::{
    auto_think_loss, auto_think_var, l1_error, l1_error_var, latent_consistency_loss, latent_consistency_var, refinement_gain,
    thinking_flag, total_loss, total_loss_var, trajectory_loss, trajectory_loss_var,
};
pub use net::{FutureX, ENCODER, GATE, POLICY, SEGMENT_ENCODER, SUMMARIZER, WORLD_MODEL};
pub use trajectory::{segment_trajectory, Trajectory, TrajectorySegment};
pub use train::{end_to_end_gradcheck, latent_targets, sample_objective, SampleOutcome, StepMetrics, Trainer, TrainSample, TrajectoryTerm};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use infer::{Inference, InferenceSession, Mode, StageTimings, ThinkDecision, ThinkMode};
