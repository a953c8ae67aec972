//! Multi-stage abusive comment classification.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corpus`]: loading, cleaning, transliteration, partitioning and a
//!   synthetic corpus generator with planted label noise.
//! - [`features`]: tokenization, TF-IDF, EMB1 embedding files, PCA,
//!   metadata features and column-block assembly.
//! - [`gbdt`]: a histogram gradient-boosted tree learner with logistic loss.
//! - [`pipeline`]: stratified folds, out-of-fold stacking (pooled and
//!   per-language), pseudo-label iterations and weighted ensembling.
//! - [`evalx`]: metrics, per-language thresholds, label-noise probes and
//!   scatter exports.
//!
//! Data-parallel loops go through [`exec::Execution`]. With the `parallel`
//! feature (on by default) they run on rayon; without it every loop runs
//! sequentially. Results are identical either way.

pub mod corpus;
pub mod evalx;
pub mod exec;
pub mod features;
pub mod gbdt;
pub mod pipeline;

pub use corpus::{CommentRecord, Corpus, LanguageTag, Split};
pub use exec::Execution;
pub use features::{BlockKind, FeatureMatrix};
pub use gbdt::{GbdtModel, GbdtParams};
