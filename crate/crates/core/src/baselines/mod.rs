//! Baseline models fitted on the same corpus representation: plain LDA and
//! Topics-over-Time with a per-topic Beta density on normalized timestamps.

mod lda;
mod tot;

pub use lda::lda_fit;
pub use tot::{normalized_doc_times, tot_fit, BetaParams, TotFit};
