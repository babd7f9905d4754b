//! Training-free data valuation for generative models.
//!
//! Each generated sample is matched to its top-k nearest training samples
//! (exactly, or through product-quantized codes), each match is scored with
//! a softmax over negative distances, and the scores are summed per
//! training sample. The `stats` and `transport` modules provide the
//! significance test and exact optimal-transport checks used to validate
//! the resulting values.

pub mod cli;
pub mod distance;
pub mod embedding;
pub mod error;
pub mod kmeans;
pub mod numfmt;
pub mod pq;
pub mod search;
pub mod stats;
pub mod synth;
pub mod transport;
pub mod valuation;

pub use embedding::{load_embeddings, save_embeddings, validate_pair, EmbeddingMatrix, Format};
pub use error::{Error, Result};
pub use pq::{Codebook, PqCodes, PqConfig, PqIndex};
pub use search::{batch_match, MatchResult, MatchTables, Neighbor, TrainingRepr};
pub use stats::{welch_t_test, Alternative, TTestResult};
pub use transport::{exact_wasserstein, TransportResult};
pub use valuation::{aggregate_values, discount_scores, ValuationResult};
