//! Offensive-speech scoring and corpus measurement.
//!
//! The pipeline runs in stages:
//!
//! 1. [`corpus`] parses, filters and samples JSON-lines comment dumps.
//! 2. [`textnorm`] tokenizes, drops stop-words and lemmatizes.
//! 3. [`embedding`] trains a skip-gram word embedding on the normalized corpus.
//! 4. [`hatemodel`] averages lexicon words into a hate vector and scores a
//!    text by the maximum cosine similarity of its tokens to that vector.
//! 5. [`classifier`] turns the score into an Offensive/NotOffensive label with
//!    an entropy-split random forest and carries the evaluation protocol.
//! 6. [`analytics`] aggregates classified comments into timelines, author and
//!    community breakdowns, and cross-community author flows.
//!
//! [`synth`] generates deterministic stand-in data for every stage.

pub mod analytics;
pub mod classifier;
pub mod corpus;
pub mod embedding;
pub mod hatemodel;
pub mod synth;
pub mod textnorm;

pub use classifier::{ForestModel, Label, LabeledSample, Metrics};
pub use corpus::{Category, FilterConfig, RawComment, SubredditTaxonomy, WeekIndex};
pub use embedding::{EmbeddingModel, TrainConfig, Vocabulary};
pub use hatemodel::{HateVector, OffenseScore, OffensiveLexicon};
pub use textnorm::{NormalizerConfig, TokenSequence};

/// Stable 64-bit content hash used for checksums and provenance.
pub fn fingerprint(bytes: &[u8]) -> u64 {
    xxhash_rust::xxh64::xxh64(bytes, 0)
}

/// [`fingerprint`] under a caller-chosen seed.
pub fn fingerprint_seeded(bytes: &[u8], seed: u64) -> u64 {
    xxhash_rust::xxh64::xxh64(bytes, seed)
}

/// Lowercase 16-digit hex form of a [`fingerprint`].
pub fn hex_hash(h: u64) -> String {
    format!("{h:016x}")
}
