//! Training, evaluation and artifact handling for the shortlister/reranker
//! pipeline, plus the `hyprank` command-line front end.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod eval;
pub mod par;
pub mod pipeline;
pub mod report;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
pub use eval::{eval_final_accuracy, eval_kbest_accuracy, EvalReport};
pub use pipeline::{train_hyprank, train_reranker, train_shortlister, RerankerModel, ShortlisterModel};
