//! Tiny transformer masked language model.

mod checkpoint;
mod model;
pub mod ops;
mod train;

#[cfg(test)]
mod tests;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use model::{ClassifierHead, Dims, LayerParams, Params, TinyMlm, Trace};
pub use train::{
    accuracy, classify, finetune, mlm_loss, mlm_loss_and_grad, train_mlm, Adam, FinetuneResult,
    MlmExample, TrainConfig, TrainReport,
};
