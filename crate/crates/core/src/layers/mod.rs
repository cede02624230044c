//! Learnable and fixed layers, each with a forward pass and an explicit
//! reverse-mode backward pass.

mod conv;
mod dense;
mod pool;
mod resample;

pub use conv::{conv2d, conv2d_backward, ConvParams, Padding};
pub use dense::{dense, dense_backward, Activation, DenseParams};
pub use pool::{
    global_average_pool, global_average_pool_backward, maxpool, maxpool_backward, maxpool_output_side,
    PoolIndices, POOL_STRIDE, POOL_WINDOW,
};
pub use resample::{area_downsample, area_downsample_backward, AreaWeights};
