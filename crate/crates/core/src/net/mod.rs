//! Shared convolutional-recurrent extractor, damage classifier and per-source
//! domain discriminators, with hand-written reverse-mode gradients.

mod checkpoint;
mod layers;
mod model;
mod params;

pub use checkpoint::{load_checkpoint, round_to_f32, save_checkpoint, ArrayEntry, CheckpointManifest, CHECKPOINT_FORMAT};
pub use model::{
    classifier_logits, discriminate, evaluate_losses, extract, extract_batch, gradients, grl_backward, grl_forward,
    predict, Batch, ClassPosterior, DomainScore, Objective, SourceBatch,
};
pub use params::{init_params, ConvBlock, NetworkConfig, Param, ParameterStore, N_CLASSES};
