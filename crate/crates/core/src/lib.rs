//! Context-aware recommendation with interpretable contextual effects.
//!
//! Three families of contextual models share one biased matrix-factorization
//! base predictor `P(u, t)`:
//!
//! * [`deviation`]: additive per-dimension rating deviations away from the
//!   all-`na` situation, at global, per-user or per-item granularity.
//! * [`similarity`]: multiplicative similarity `P(u, t) * Sim(c0, c)` with
//!   independent (ICS), latent (LCS) or multidimensional (MCS) context
//!   similarity.
//! * [`cp`]: CP tensor factorization over user, item and one mode per
//!   context dimension.
//!
//! Trained models are interpreted through [`explain`] (top-k similar context
//! situations, learned deviation tables) and compared with the top-N ranking
//! harness in [`eval`].

pub mod cp;
pub mod data;
pub mod deviation;
mod error;
pub mod eval;
pub mod explain;
pub mod metrics;
pub mod mf;
pub mod models;
pub mod persist;
pub mod sgd;
pub mod similarity;
pub mod synth;

pub use crate::data::{
    kfold_split, parse_dataset, write_dataset, ContextSchema, ContextSituation, ContextualRating,
    Dataset, Dimension, ParseOptions, RatingScale, Vocabulary, NA,
};
pub use crate::error::{Error, Result};
pub use crate::mf::{MfParams, TrainConfig};

/// Anything that can score a (user, item, context) triple.
///
/// Users and items are interned indices into the training vocabularies;
/// indices outside the vocabulary are treated as unknown and each model
/// documents its fallback.
pub trait Predictor {
    fn predict(&self, user: u32, item: u32, context: &ContextSituation) -> f64;
}

/// Similarity between two context situations, as learned by a model.
pub trait ContextSimilarity {
    fn context_similarity(&self, a: &ContextSituation, b: &ContextSituation) -> Result<f64>;
}
