//! Corpus ingestion and preparation.
//!
//! Raw timestamped records are aggregated into daily pseudo-documents per
//! conversation cascade, cleaned, tokenized, and assigned to time categories
//! on a fixed grid. The produced [`Corpus`] is immutable and shared by every
//! model in this crate.

mod io;
mod pipeline;

pub use io::{load_corpus, save_corpus};
pub use pipeline::{
    aggregate_cascades, build_corpus, entity_filter, ingest, preprocess, tokenize_lossy,
    BuildStats, CleanConfig, CorpusConfig, IngestConfig, IngestStats, PseudoDoc, RawSentence,
};

use std::collections::{HashMap, HashSet};
use std::ops::Range;

use chrono::{DateTime, Duration, Utc};

use crate::{Error, Result};

/// One raw input record (e.g. a single social media post).
#[derive(Debug, Clone)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub timestamp: DateTime<Utc>,
    pub cascade_id: Option<String>,
    pub parent_id: Option<String>,
}

/// One sentence of a document, carrying its own timestamp so summaries can be
/// ordered at sub-document resolution.
#[derive(Debug, Clone)]
pub struct Sentence {
    /// Display text: cleaned of URLs and @-mentions, whitespace collapsed,
    /// original casing preserved.
    pub text: String,
    /// The slice of the parent document's token vector contributed by this
    /// sentence.
    pub token_range: Range<usize>,
    pub timestamp: DateTime<Utc>,
}

/// A tokenized pseudo-document with its time-category assignment.
#[derive(Debug, Clone)]
pub struct Document {
    pub doc_id: usize,
    pub tokens: Vec<u32>,
    pub sentences: Vec<Sentence>,
    /// Day-resolution timestamp (midnight UTC of the aggregation day).
    pub timestamp: DateTime<Utc>,
    pub time_category: usize,
}

/// Bijective term <-> id map plus per-term document frequencies.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    doc_frequency: Vec<u32>,
}

impl Vocabulary {
    /// Build from a term list; ids are assigned in list order.
    pub fn from_terms(terms: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate vocabulary term {t:?}"
                )));
            }
        }
        let n = terms.len();
        Ok(Vocabulary {
            terms,
            index,
            doc_frequency: vec![0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Number of documents containing the term at least once.
    pub fn doc_frequency(&self, id: u32) -> u32 {
        self.doc_frequency[id as usize]
    }

    fn recount_doc_frequencies(&mut self, docs: &[Document]) {
        self.doc_frequency = vec![0; self.terms.len()];
        let mut seen: HashSet<u32> = HashSet::new();
        for doc in docs {
            seen.clear();
            for &t in &doc.tokens {
                if seen.insert(t) {
                    self.doc_frequency[t as usize] += 1;
                }
            }
        }
    }
}

/// Half-open time slicing of the corpus span: category `k` covers
/// `[origin + k*width, origin + (k+1)*width)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeGrid {
    pub origin: DateTime<Utc>,
    pub slice_width_days: u32,
    pub num_slices: usize,
}

impl TimeGrid {
    pub fn new(origin: DateTime<Utc>, slice_width_days: u32, num_slices: usize) -> Result<Self> {
        if slice_width_days == 0 || num_slices == 0 {
            return Err(Error::InvalidArgument(
                "time grid needs positive slice width and at least one slice".into(),
            ));
        }
        Ok(TimeGrid {
            origin,
            slice_width_days,
            num_slices,
        })
    }

    /// Smallest grid anchored at the earliest timestamp's midnight UTC that
    /// covers every timestamp.
    pub fn covering<'a, I>(timestamps: I, slice_width_days: u32) -> Result<Self>
    where
        I: IntoIterator<Item = &'a DateTime<Utc>>,
    {
        let mut min: Option<DateTime<Utc>> = None;
        let mut max: Option<DateTime<Utc>> = None;
        for ts in timestamps {
            min = Some(min.map_or(*ts, |m| m.min(*ts)));
            max = Some(max.map_or(*ts, |m| m.max(*ts)));
        }
        let (min, max) = match (min, max) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::EmptyCorpus),
        };
        let origin = midnight_utc(min);
        let width = Duration::days(i64::from(slice_width_days));
        let span_days = (midnight_utc(max) + Duration::days(1)) - origin;
        let num_slices = span_days.num_days().div_euclid(width.num_days()).max(0) as usize
            + usize::from(span_days.num_days() % width.num_days() != 0);
        TimeGrid::new(origin, slice_width_days, num_slices.max(1))
    }

    pub fn width(&self) -> Duration {
        Duration::days(i64::from(self.slice_width_days))
    }

    /// Category of a timestamp, or `None` when it falls outside the grid.
    pub fn category_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        if ts < self.origin {
            return None;
        }
        let offset = (ts - self.origin).num_seconds();
        let width_secs = self.width().num_seconds();
        let k = (offset / width_secs) as usize;
        (k < self.num_slices).then_some(k)
    }

    /// `[start, end)` bounds of slice `k`.
    pub fn slice_bounds(&self, k: usize) -> (DateTime<Utc>, DateTime<Utc>) {
        let start = self.origin + self.width() * k as i32;
        (start, start + self.width())
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.slice_bounds(self.num_slices - 1).1
    }
}

/// Midnight UTC of the timestamp's calendar day.
pub fn midnight_utc(ts: DateTime<Utc>) -> DateTime<Utc> {
    ts.date_naive()
        .and_hms_opt(0, 0, 0)
        .expect("midnight is a valid time")
        .and_utc()
}

/// An immutable prepared corpus: tokenized documents, vocabulary, time grid.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub docs: Vec<Document>,
    pub vocab: Vocabulary,
    pub grid: TimeGrid,
}

impl Corpus {
    /// Assemble a corpus from already-tokenized parts, validating the basic
    /// invariants and recomputing document frequencies.
    pub fn from_raw_parts(
        docs: Vec<Document>,
        mut vocab: Vocabulary,
        grid: TimeGrid,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let v = vocab.len() as u32;
        for (i, doc) in docs.iter().enumerate() {
            if doc.doc_id != i {
                return Err(Error::InvalidArgument(format!(
                    "document at index {i} has doc_id {}",
                    doc.doc_id
                )));
            }
            if doc.time_category >= grid.num_slices {
                return Err(Error::InvalidArgument(format!(
                    "doc {i}: time_category {} out of range (K = {})",
                    doc.time_category, grid.num_slices
                )));
            }
            if doc.tokens.iter().any(|&t| t >= v) {
                return Err(Error::InvalidArgument(format!(
                    "doc {i}: token id out of vocabulary range"
                )));
            }
        }
        vocab.recount_doc_frequencies(&docs);
        Ok(Corpus { docs, vocab, grid })
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(|d| d.tokens.len()).sum()
    }

    /// Token counts per time category ("user activity" histogram at token
    /// granularity).
    pub fn category_token_histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.grid.num_slices];
        for doc in &self.docs {
            h[doc.time_category] += doc.tokens.len() as u64;
        }
        h
    }

    /// Document ids grouped by time category.
    pub fn docs_by_category(&self) -> Vec<Vec<usize>> {
        let mut by_cat = vec![Vec::new(); self.grid.num_slices];
        for doc in &self.docs {
            by_cat[doc.time_category].push(doc.doc_id);
        }
        by_cat
    }
}
