//! Synthetic data for the two-stage domain classifier: a domain catalog with
//! category proportions and overlap groups, template-sampled utterance splits,
//! simulated NLU signals and user profiles, and their on-disk formats.

pub mod catalog;
pub mod generate;
pub mod io;
pub mod nlu;
mod words;

pub use catalog::{apportion, generate_catalog, Category, DomainCatalog, GeneratorConfig, Regime, SplitSizes};
pub use generate::{generate_utterances, Example, SlotSpan, SplitKind, Splits};
pub use nlu::{domain_index, simulate_nlu_signals, simulate_user_profile, Relation};
