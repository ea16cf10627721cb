//! Time-aware topic modeling and narrative summarization for timestamped text.
//!
//! The centerpiece is NOC (narratives over categorical time): an LDA-style
//! topic model in which every topic carries, in addition to its word
//! distribution, a categorical distribution over discrete time slices of the
//! corpus span. Fitting is collapsed Gibbs sampling; the per-topic time
//! distributions are re-estimated from the assigned-token time histogram
//! after each sweep. Because the time factor is categorical, a topic is free
//! to have several bursts of activity ("modes") far apart in time, which a
//! single continuous-time density cannot represent.
//!
//! The crate covers the full pipeline:
//!
//! * [`corpus`] — ingest line-delimited timestamped records, aggregate
//!   conversation cascades into daily pseudo-documents, clean and tokenize,
//!   and assign each document to a time slice.
//! * [`sampler`] — the NOC collapsed Gibbs sampler and its posterior point
//!   estimates.
//! * [`baselines`] — LDA (no time factor) and TOT (continuous Beta time)
//!   reference models under the same corpus and output contracts.
//! * [`metrics`] — PMI topic coherence, Shannon entropy of topic-time
//!   distributions, and the SDT lifetime-attractiveness score.
//! * [`summarizer`] — per-topic extractive summaries: weighted document
//!   sampling, sentence scoring, Jaro-Winkler near-duplicate removal, and
//!   chronological ordering.
//! * [`synth`] — forward-sampled corpora with known ground truth for
//!   recovery testing.
//! * [`model_io`] — the on-disk model directory format shared by all models.

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model_io;
pub mod sampler;
pub mod summarizer;
pub mod synth;
pub mod util;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
