//! Two-stage neural domain classification: a character/word BiLSTM
//! shortlister that prunes a domain catalog to a k-best list, and a list-wise
//! BiLSTM reranker that rescores the k candidates with contextual features.
//!
//! All numeric code is generic over [`Scalar`]; the aliases below fix it to
//! `f64`, which is what training and evaluation use.

pub mod autodiff;
pub mod embed_pretrain;
pub mod encoder;
pub mod error;
pub mod hypothesis;
pub mod hyprank;
pub mod nn;
pub mod scalar;
pub mod shortlister;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = autodiff::Tensor<f64>;
pub type ParamSet = autodiff::ParamSet<f64>;
pub type Gradients = autodiff::Gradients<f64>;
pub type Tape<'p> = autodiff::Tape<'p, f64>;
pub type Adam = autodiff::Adam<f64>;
