//! Forward and backward kernels for every primitive the networks use.
//!
//! Each kernel is a pure function over [`Tensor`]s. The [`crate::autograd`]
//! tape records which kernel produced a value and calls the matching
//! backward kernel during reverse accumulation.

mod activation;
mod concat;
mod conv;
mod dense;
mod dropout;
pub(crate) mod gemm;
mod pool;
mod upsample;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward, softmax, softmax_backward};
pub use concat::{concat_channels, concat_channels_backward};
pub use conv::{conv2d, conv2d_backward, Conv2dGrads};
pub use dense::{dense, dense_backward, DenseGrads};
pub use dropout::{dropout, DropoutMask, Mode};
pub use pool::{maxpool2d, maxpool2d_backward, Pooled};
pub use upsample::{upsample_bilinear2x, upsample_bilinear2x_backward};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub(crate) fn expect_rank4(op: &'static str, t: &Tensor) -> Result<[usize; 4]> {
    if t.rank() != 4 {
        return Err(Error::shape(
            op,
            format!("expected rank-4 (N, C, H, W), got {:?}", t.shape()),
        ));
    }
    Ok(t.dims4())
}
