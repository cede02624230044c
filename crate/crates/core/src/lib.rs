//! Shot-gather quality classification with MinceptionNet.
//!
//! A small from-scratch CNN engine (tensors, layers with explicit backward
//! passes, Adam), the four Minception block variants, training and evaluation
//! drivers, and a synthetic seismic gather generator that supplies labeled data.

pub mod blocks;
pub mod checkpoint;
pub mod data;
mod error;
pub mod label;
pub mod layers;
pub mod metrics;
pub mod network;
pub mod pgm;
pub mod split;
pub mod synth;
pub mod tensor;
pub mod training;

pub use blocks::{block_forward, block_param_count, BlockParams, BlockSpec, Variant};
pub use error::{Error, Result};
pub use label::Label;
pub use metrics::{ConfusionMatrix, EvalReport};
pub use network::{build_network, forward, predict, Network, NetworkParams, NetworkSpec, ParamStore};
pub use tensor::Tensor;
pub use training::{Example, TrainConfig, TrainLog};
