//! Reverse-mode automatic differentiation, the Adam optimizer and
//! variational dropout masks.

mod adam;
mod gradcheck;
mod dropout;
pub(crate) mod kernels;
mod params;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{check_gradients, rel_error, GradCheckReport, REL_FLOOR};
pub use dropout::{sample_mask, variational_dropout_mask};
pub use params::{Gradients, ParamId, ParamSet};
pub use tape::{BackwardStats, Tape, Var, SELU_ALPHA, SELU_LAMBDA};
pub use tensor::Tensor;
