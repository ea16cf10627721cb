//! Record ingestion, cascade aggregation, text cleaning, and corpus assembly.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::LazyLock;

use chrono::{DateTime, NaiveDate, Utc};
use regex::Regex;
use serde::Deserialize;

use crate::{Error, Result};

use super::{midnight_utc, Corpus, Document, RawRecord, Sentence, TimeGrid, Vocabulary};

static URL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:https?://|www\.|t\.co/)\S*").expect("static regex compiles")
});
static MENTION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"@\w+").expect("static regex compiles"));

/// Common English function words dropped during tokenization. Deliberately a
/// small closed-class list: content-bearing adverbs like "now" stay in.
const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can",
    "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from",
    "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his", "how",
    "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my", "no",
    "nor", "not", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "out", "over",
    "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs",
    "them", "then", "there", "these", "they", "this", "those", "through", "to", "too", "under",
    "until", "up", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who",
    "whom", "why", "will", "with", "would", "you", "your", "yours",
];

/// Returns the built-in stopword list.
pub fn default_stopwords() -> HashSet<String> {
    STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// Text cleaning options shared by tokenization and the language filter.
#[derive(Debug, Clone)]
pub struct CleanConfig {
    pub stopwords: HashSet<String>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            stopwords: default_stopwords(),
        }
    }
}

/// Ingestion window; records outside it are skipped and counted.
#[derive(Debug, Clone, Default)]
pub struct IngestConfig {
    pub window_start: Option<DateTime<Utc>>,
    pub window_end: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub parsed: usize,
    pub skipped: usize,
}

#[derive(Deserialize)]
struct RawLine {
    id: String,
    text: String,
    #[serde(deserialize_with = "deserialize_timestamp")]
    timestamp: DateTime<Utc>,
    #[serde(default)]
    cascade_id: Option<String>,
    #[serde(default)]
    parent_id: Option<String>,
}

/// Accepts either an RFC 3339 string or a unix epoch number (seconds).
fn deserialize_timestamp<'de, D>(de: D) -> std::result::Result<DateTime<Utc>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum TsRepr {
        Epoch(i64),
        Text(String),
    }
    match TsRepr::deserialize(de)? {
        TsRepr::Epoch(secs) => DateTime::<Utc>::from_timestamp(secs, 0)
            .ok_or_else(|| serde::de::Error::custom("epoch timestamp out of range")),
        TsRepr::Text(s) => DateTime::parse_from_rfc3339(&s)
            .map(|dt| dt.with_timezone(&Utc))
            .map_err(serde::de::Error::custom),
    }
}

/// Read JSON-lines records from `path`. Malformed lines, blank or duplicate
/// ids, and records outside the window are skipped and counted, never fatal.
pub fn ingest(path: &Path, config: &IngestConfig) -> Result<(Vec<RawRecord>, IngestStats)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut stats = IngestStats::default();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RawLine = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(_) => {
                stats.skipped += 1;
                continue;
            }
        };
        if parsed.id.trim().is_empty() || !seen_ids.insert(parsed.id.clone()) {
            stats.skipped += 1;
            continue;
        }
        if config.window_start.is_some_and(|s| parsed.timestamp < s)
            || config.window_end.is_some_and(|e| parsed.timestamp >= e)
        {
            stats.skipped += 1;
            continue;
        }
        stats.parsed += 1;
        records.push(RawRecord {
            id: parsed.id,
            text: parsed.text,
            timestamp: parsed.timestamp,
            cascade_id: parsed.cascade_id,
            parent_id: parsed.parent_id,
        });
    }
    Ok((records, stats))
}

/// One sentence of a pseudo-document before tokenization.
#[derive(Debug, Clone)]
pub struct RawSentence {
    /// Cleaned display text: URLs and @-mentions stripped, whitespace
    /// collapsed, casing preserved.
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

/// Aggregation unit: all records of one cascade on one calendar day.
/// Records without a cascade id form singleton pseudo-documents.
#[derive(Debug, Clone)]
pub struct PseudoDoc {
    pub day: NaiveDate,
    pub cascade_key: String,
    pub sentences: Vec<RawSentence>,
}

impl PseudoDoc {
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self.sentences.iter().map(|s| s.text.as_str()).collect();
        parts.join(" ")
    }
}

/// Strip URLs and @-mentions, collapse whitespace, keep casing.
fn clean_display(text: &str) -> String {
    let no_urls = URL_RE.replace_all(text, " ");
    let no_mentions = MENTION_RE.replace_all(&no_urls, " ");
    no_mentions.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Split cleaned text into sentences on `.`/`!`/`?` runs followed by
/// whitespace. Terminal punctuation stays with its sentence.
fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if matches!(bytes[i], b'.' | b'!' | b'?') {
            let mut j = i + 1;
            while j < bytes.len() && matches!(bytes[j], b'.' | b'!' | b'?') {
                j += 1;
            }
            if j >= bytes.len() || bytes[j].is_ascii_whitespace() {
                let sent = text[start..j].trim();
                if !sent.is_empty() {
                    out.push(sent.to_string());
                }
                start = j;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// Group records into daily per-cascade pseudo-documents. Within a group,
/// records are ordered by (timestamp, id); groups come out ordered by
/// (day, cascade key). The result is invariant to input permutation.
pub fn aggregate_cascades(records: &[RawRecord]) -> Vec<PseudoDoc> {
    let mut groups: BTreeMap<(NaiveDate, String), Vec<&RawRecord>> = BTreeMap::new();
    for rec in records {
        let day = rec.timestamp.date_naive();
        let key = match &rec.cascade_id {
            Some(c) => format!("c:{c}"),
            None => format!("s:{}", rec.id),
        };
        groups.entry((day, key)).or_default().push(rec);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((day, cascade_key), mut members) in groups {
        members.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
        let mut sentences = Vec::new();
        for rec in members {
            let cleaned = clean_display(&rec.text);
            for sent in split_sentences(&cleaned) {
                sentences.push(RawSentence {
                    text: sent,
                    timestamp: rec.timestamp,
                });
            }
        }
        out.push(PseudoDoc {
            day,
            cascade_key,
            sentences,
        });
    }
    out
}

/// Lowercased maximal alphanumeric runs of the cleaned text. No stopword
/// removal; this is the shared base tokenizer.
pub fn tokenize_lossy(text: &str) -> Vec<String> {
    clean_display(text)
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

/// Full token cleaning: URLs, @-mentions, and punctuation removed, lowercase,
/// stopwords dropped.
pub fn preprocess(text: &str, config: &CleanConfig) -> Vec<String> {
    tokenize_lossy(text)
        .into_iter()
        .filter(|t| !config.stopwords.contains(t.as_str()))
        .collect()
}

/// Heuristic named-entity detector: any capitalized token that is not
/// sentence-initial and at least two characters long, or any gazetteer hit.
pub fn entity_filter(text: &str, gazetteer: &HashSet<String>) -> bool {
    for sent in split_sentences(&clean_display(text)) {
        for (i, raw) in sent.split_whitespace().enumerate() {
            let word: String = raw.chars().filter(|c| c.is_alphanumeric()).collect();
            if word.is_empty() {
                continue;
            }
            if !gazetteer.is_empty() && gazetteer.contains(&word.to_lowercase()) {
                return true;
            }
            let mut chars = word.chars();
            let first = chars.next().expect("non-empty");
            if i > 0 && first.is_uppercase() && word.chars().count() >= 2 {
                return true;
            }
        }
    }
    false
}

/// Fraction of raw tokens that are English function words; used to drop
/// non-English documents when enabled.
fn function_word_fraction(tokens: &[String], stopwords: &HashSet<String>) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let hits = tokens
        .iter()
        .filter(|t| stopwords.contains(t.as_str()))
        .count();
    hits as f64 / tokens.len() as f64
}

/// Corpus assembly options.
#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub clean: CleanConfig,
    pub slice_width_days: u32,
    /// Documents with fewer retained tokens are dropped.
    pub min_doc_tokens: usize,
    /// Keep only documents that mention a named entity.
    pub entity_filter: bool,
    /// Extra lowercase entity names accepted by the entity filter.
    pub gazetteer: HashSet<String>,
    /// Drop documents whose function-word fraction is below
    /// [`CorpusConfig::LANGUAGE_THRESHOLD`].
    pub language_filter: bool,
}

impl CorpusConfig {
    /// Minimum function-word fraction for a document to count as English.
    pub const LANGUAGE_THRESHOLD: f64 = 0.2;
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            clean: CleanConfig::default(),
            slice_width_days: 14,
            min_doc_tokens: 3,
            entity_filter: true,
            gazetteer: HashSet::new(),
            language_filter: false,
        }
    }
}

/// Documents dropped at each corpus assembly stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub input_docs: usize,
    pub kept: usize,
    pub dropped_entity: usize,
    pub dropped_language: usize,
    pub dropped_short: usize,
}

/// Tokenize pseudo-documents, apply document filters, build the vocabulary,
/// and place every kept document on the time grid.
pub fn build_corpus(
    pseudo_docs: &[PseudoDoc],
    config: &CorpusConfig,
) -> Result<(Corpus, BuildStats)> {
    let mut stats = BuildStats {
        input_docs: pseudo_docs.len(),
        ..BuildStats::default()
    };

    struct Staged<'a> {
        pdoc: &'a PseudoDoc,
        /// Retained token strings per sentence.
        sentence_tokens: Vec<Vec<String>>,
    }

    let mut staged = Vec::new();
    for pdoc in pseudo_docs {
        if config.entity_filter && !entity_filter(&pdoc.text(), &config.gazetteer) {
            stats.dropped_entity += 1;
            continue;
        }
        let raw_tokens: Vec<Vec<String>> = pdoc
            .sentences
            .iter()
            .map(|s| tokenize_lossy(&s.text))
            .collect();
        if config.language_filter {
            let all: Vec<String> = raw_tokens.iter().flatten().cloned().collect();
            if function_word_fraction(&all, &config.clean.stopwords)
                < CorpusConfig::LANGUAGE_THRESHOLD
            {
                stats.dropped_language += 1;
                continue;
            }
        }
        let sentence_tokens: Vec<Vec<String>> = raw_tokens
            .into_iter()
            .map(|ts| {
                ts.into_iter()
                    .filter(|t| !config.clean.stopwords.contains(t.as_str()))
                    .collect()
            })
            .collect();
        let total: usize = sentence_tokens.iter().map(Vec::len).sum();
        if total < config.min_doc_tokens {
            stats.dropped_short += 1;
            continue;
        }
        staged.push(Staged {
            pdoc,
            sentence_tokens,
        });
    }
    stats.kept = staged.len();
    if staged.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut term_set: HashSet<&str> = HashSet::new();
    for s in &staged {
        for sent in &s.sentence_tokens {
            for t in sent {
                term_set.insert(t.as_str());
            }
        }
    }
    let mut terms: Vec<String> = term_set.into_iter().map(str::to_string).collect();
    terms.sort_unstable();
    let vocab = Vocabulary::from_terms(terms)?;

    let day_timestamps = staged
        .iter()
        .map(|s| {
            s.pdoc
                .day
                .and_hms_opt(0, 0, 0)
                .expect("midnight is a valid time")
                .and_utc()
        })
        .collect::<Vec<_>>();
    let grid = TimeGrid::covering(day_timestamps.iter(), config.slice_width_days)?;

    let mut docs = Vec::with_capacity(staged.len());
    for (doc_id, (s, day_ts)) in staged.iter().zip(&day_timestamps).enumerate() {
        let time_category = grid.category_of(*day_ts).ok_or_else(|| {
            Error::InvalidArgument(format!("timestamp {day_ts} outside the time grid"))
        })?;
        let mut tokens = Vec::new();
        let mut sentences = Vec::new();
        for (raw, toks) in s.pdoc.sentences.iter().zip(&s.sentence_tokens) {
            let start = tokens.len();
            for t in toks {
                tokens.push(vocab.id(t).expect("vocabulary covers retained tokens"));
            }
            sentences.push(Sentence {
                text: raw.text.clone(),
                token_range: start..tokens.len(),
                timestamp: raw.timestamp,
            });
        }
        docs.push(Document {
            doc_id,
            tokens,
            sentences,
            timestamp: midnight_utc(*day_ts),
            time_category,
        });
    }

    let corpus = Corpus::from_raw_parts(docs, vocab, grid)?;
    Ok((corpus, stats))
}
