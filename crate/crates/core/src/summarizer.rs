//! Time-ordered narrative summaries: per topic, sample documents through the
//! topic's time distribution, pool their sentences, drop near-duplicates,
//! and keep the highest-scoring sentences in chronological order.

use std::collections::HashSet;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Vocabulary};
use crate::metrics::top_words;
use crate::sampler::Posterior;
use crate::util::sample_index;
use crate::{Error, Result};

/// Attempts at drawing a time category that actually contains documents
/// before the sampler gives up on a topic.
const MAX_CATEGORY_DRAWS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct SummaryConfig {
    /// Sentences kept per topic.
    pub sentences_per_topic: usize,
    /// Documents drawn per topic before sentence pooling.
    pub docs_per_topic: usize,
    /// Jaro-Winkler similarity at or above which two sentences count as
    /// duplicates.
    pub similarity_threshold: f64,
    /// Divide sentence scores by the number of scored tokens.
    pub length_normalize: bool,
    /// Topic keywords reported alongside the sentences.
    pub keywords: usize,
    pub seed: u64,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        SummaryConfig {
            sentences_per_topic: 8,
            docs_per_topic: 200,
            similarity_threshold: 0.70,
            length_normalize: false,
            keywords: 10,
            seed: 0,
        }
    }
}

impl SummaryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sentences_per_topic == 0 || self.docs_per_topic == 0 {
            return Err(Error::InvalidConfig(
                "sentences_per_topic and docs_per_topic must be positive".into(),
            ));
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "similarity_threshold must lie in (0, 1], got {}",
                self.similarity_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SummarySentence {
    pub text: String,
    pub timestamp: DateTime<Utc>,
    pub doc_id: usize,
    /// Index of the sentence within its source document.
    pub sent_idx: usize,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct NarrativeSummary {
    pub topic: usize,
    pub keywords: Vec<String>,
    /// Selected sentences in chronological order.
    pub sentences: Vec<SummarySentence>,
    /// True when deduplication left fewer sentences than requested.
    pub truncated: bool,
}

/// Jaro similarity: average of match fractions and transposition share.
fn jaro(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_matched = vec![false; a.len()];
    let mut b_matched = vec![false; b.len()];
    let mut matches = 0usize;
    for (i, &ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == ca {
                a_matched[i] = true;
                b_matched[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let mut transpositions = 0usize;
    let mut j = 0usize;
    for (i, &ca) in a.iter().enumerate() {
        if !a_matched[i] {
            continue;
        }
        while !b_matched[j] {
            j += 1;
        }
        if ca != b[j] {
            transpositions += 1;
        }
        j += 1;
    }
    let m = matches as f64;
    let t = (transpositions / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler similarity with the standard 0.1 prefix scale over at most
/// four common leading characters.
pub fn jaro_winkler(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let j = jaro(&a, &b);
    let prefix = a.iter().zip(&b).take(4).take_while(|(x, y)| x == y).count();
    j + prefix as f64 * 0.1 * (1.0 - j)
}

/// Sum of the topic's word probabilities over the sentence's in-vocabulary
/// tokens. Out-of-vocabulary tokens are skipped; with `length_normalize` the
/// sum is divided by the number of scored tokens.
pub fn score_sentence(
    phi_row: &[f64],
    vocab: &Vocabulary,
    text: &str,
    length_normalize: bool,
) -> f64 {
    let mut sum = 0.0;
    let mut counted = 0usize;
    for term in crate::corpus::tokenize_lossy(text) {
        if let Some(id) = vocab.id(&term) {
            sum += phi_row[id as usize];
            counted += 1;
        }
    }
    if length_normalize && counted > 0 {
        sum / counted as f64
    } else {
        sum
    }
}

fn normalize_for_similarity(text: &str) -> String {
    text.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Draw `docs_per_topic` documents for one topic: a time category from the
/// topic's time distribution, then a document within that category with
/// probability proportional to its topic share. Draws landing in empty
/// categories are retried.
fn sample_topic_docs(
    topic: usize,
    psi_row: &[f64],
    theta: &[Vec<f64>],
    docs_by_category: &[Vec<usize>],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let mut picked = HashSet::new();
    for _ in 0..count {
        let mut category = None;
        for _ in 0..MAX_CATEGORY_DRAWS {
            let k = sample_index(psi_row, rng.random::<f64>()).ok_or_else(|| Error::Sampling {
                topic,
                detail: "time distribution has no positive mass".into(),
            })?;
            if !docs_by_category[k].is_empty() {
                category = Some(k);
                break;
            }
        }
        let category = category.ok_or_else(|| Error::Sampling {
            topic,
            detail: format!("no populated time category found in {MAX_CATEGORY_DRAWS} draws"),
        })?;
        let members = &docs_by_category[category];
        let weights: Vec<f64> = members.iter().map(|&d| theta[d][topic]).collect();
        let pick = sample_index(&weights, rng.random::<f64>()).ok_or_else(|| Error::Sampling {
            topic,
            detail: format!("all documents in category {category} have zero topic share"),
        })?;
        picked.insert(members[pick]);
    }
    let mut docs: Vec<usize> = picked.into_iter().collect();
    docs.sort_unstable();
    Ok(docs)
}

struct Candidate {
    text: String,
    normalized: String,
    chars: usize,
    timestamp: DateTime<Utc>,
    doc_id: usize,
    sent_idx: usize,
}

/// Build one summary per topic from fitted estimates.
pub fn summarize(
    corpus: &Corpus,
    posterior: &Posterior,
    config: &SummaryConfig,
) -> Result<Vec<NarrativeSummary>> {
    config.validate()?;
    let psi = posterior.psi.as_ref().ok_or_else(|| {
        Error::InvalidArgument("summaries need a model with time distributions".into())
    })?;
    if posterior.theta.len() != corpus.num_docs() {
        return Err(Error::InvalidArgument(format!(
            "theta covers {} docs, corpus has {}",
            posterior.theta.len(),
            corpus.num_docs()
        )));
    }
    let docs_by_category = corpus.docs_by_category();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut summaries = Vec::with_capacity(posterior.phi.len());

    for (topic, phi_row) in posterior.phi.iter().enumerate() {
        let doc_ids = sample_topic_docs(
            topic,
            &psi[topic],
            &posterior.theta,
            &docs_by_category,
            config.docs_per_topic,
            &mut rng,
        )?;

        let mut candidates: Vec<Candidate> = Vec::new();
        for &d in &doc_ids {
            let doc = &corpus.docs[d];
            for (si, sent) in doc.sentences.iter().enumerate() {
                if sent.text.is_empty() {
                    continue;
                }
                let normalized = normalize_for_similarity(&sent.text);
                candidates.push(Candidate {
                    chars: sent.text.chars().count(),
                    text: sent.text.clone(),
                    normalized,
                    timestamp: sent.timestamp,
                    doc_id: d,
                    sent_idx: si,
                });
            }
        }
        candidates.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then(a.doc_id.cmp(&b.doc_id))
                .then(a.sent_idx.cmp(&b.sent_idx))
        });

        // Greedy near-duplicate removal; the longest member of a duplicate
        // group survives, in the position of the group's first appearance.
        // Merging whole groups keeps the survivors pairwise below the
        // threshold: a survivor is either an untouched earlier candidate or
        // the new one, which matched none of the untouched entries.
        let mut kept: Vec<Candidate> = Vec::new();
        for cand in candidates {
            let matched: Vec<usize> = kept
                .iter()
                .enumerate()
                .filter(|(_, k)| {
                    jaro_winkler(&k.normalized, &cand.normalized) > config.similarity_threshold
                })
                .map(|(i, _)| i)
                .collect();
            let Some(&slot) = matched.first() else {
                kept.push(cand);
                continue;
            };
            // Earlier group members win length ties.
            let mut winner = cand;
            for &i in matched.iter().rev() {
                let member = kept.remove(i);
                if member.chars >= winner.chars {
                    winner = member;
                }
            }
            kept.insert(slot, winner);
        }

        let mut scored: Vec<(f64, Candidate)> = kept
            .into_iter()
            .map(|c| {
                (
                    score_sentence(phi_row, &corpus.vocab, &c.text, config.length_normalize),
                    c,
                )
            })
            .collect();
        scored.sort_by(|(sa, a), (sb, b)| {
            sb.partial_cmp(sa)
                .expect("scores are not NaN")
                .then(a.timestamp.cmp(&b.timestamp))
                .then(a.doc_id.cmp(&b.doc_id))
                .then(a.sent_idx.cmp(&b.sent_idx))
        });
        scored.truncate(config.sentences_per_topic);
        scored.sort_by(|(_, a), (_, b)| {
            a.timestamp
                .cmp(&b.timestamp)
                .then(a.doc_id.cmp(&b.doc_id))
                .then(a.sent_idx.cmp(&b.sent_idx))
        });

        let keywords = top_words(phi_row, config.keywords)
            .into_iter()
            .map(|id| corpus.vocab.term(id).to_string())
            .collect();
        let truncated = scored.len() < config.sentences_per_topic;
        summaries.push(NarrativeSummary {
            topic,
            keywords,
            sentences: scored
                .into_iter()
                .map(|(score, c)| SummarySentence {
                    text: c.text,
                    timestamp: c.timestamp,
                    doc_id: c.doc_id,
                    sent_idx: c.sent_idx,
                    score,
                })
                .collect(),
            truncated,
        });
    }
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jaro_winkler_reference_pair() {
        let s = jaro_winkler("MARTHA", "MARHTA");
        assert!((s - 0.9611).abs() < 1e-4, "got {s}");
    }

    #[test]
    fn jaro_winkler_bounds_and_identity() {
        assert_eq!(jaro_winkler("", ""), 1.0);
        assert_eq!(jaro_winkler("abc", ""), 0.0);
        assert_eq!(jaro_winkler("", "abc"), 0.0);
        assert_eq!(jaro_winkler("same", "same"), 1.0);
        let s = jaro_winkler("DWAYNE", "DUANE");
        assert!((s - 0.84).abs() < 1e-2, "got {s}");
    }

    #[test]
    fn jaro_winkler_is_symmetric() {
        for (a, b) in [("kitten", "sitting"), ("abcdef", "fedcba"), ("x", "xyz")] {
            let ab = jaro_winkler(a, b);
            let ba = jaro_winkler(b, a);
            assert!((ab - ba).abs() < 1e-15, "{a} / {b}: {ab} vs {ba}");
        }
    }

    #[test]
    fn jaro_winkler_disjoint_strings_score_zero() {
        assert_eq!(jaro_winkler("abc", "xyz"), 0.0);
    }

    use chrono::{Duration, TimeZone};

    use crate::corpus::{Document, Sentence, TimeGrid};

    fn day(n: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap() + Duration::days(n)
    }

    fn doc(id: usize, cat: usize, day_n: i64, sents: &[(&str, &[u32])]) -> Document {
        let mut tokens = Vec::new();
        let mut sentences = Vec::new();
        for (i, (text, toks)) in sents.iter().enumerate() {
            let start = tokens.len();
            tokens.extend_from_slice(toks);
            sentences.push(Sentence {
                text: text.to_string(),
                token_range: start..tokens.len(),
                timestamp: day(day_n) + Duration::hours(i as i64),
            });
        }
        Document {
            doc_id: id,
            tokens,
            sentences,
            timestamp: day(day_n),
            time_category: cat,
        }
    }

    fn vocab() -> Vocabulary {
        let terms = [
            "storm", "hits", "coast", "rescue", "teams", "arrive", "markets", "rally", "quietly",
            "banks",
        ];
        Vocabulary::from_terms(terms.iter().map(|t| t.to_string()).collect()).unwrap()
    }

    fn fixture() -> (Corpus, Posterior) {
        let docs = vec![
            doc(
                0,
                0,
                0,
                &[
                    ("Storm hits the coast", &[0, 1, 2]),
                    ("Rescue teams arrive", &[3, 4, 5]),
                ],
            ),
            doc(1, 0, 1, &[("Storm hits the coast", &[0, 1, 2])]),
            doc(
                2,
                1,
                8,
                &[
                    ("Markets rally quietly", &[6, 7, 8]),
                    ("Banks rally", &[9, 7]),
                ],
            ),
        ];
        let grid = TimeGrid::new(day(0), 7, 2).unwrap();
        let corpus = Corpus::from_raw_parts(docs, vocab(), grid).unwrap();
        let posterior = Posterior {
            theta: vec![vec![0.9, 0.1], vec![0.8, 0.2], vec![0.1, 0.9]],
            phi: vec![
                vec![0.3, 0.2, 0.2, 0.1, 0.1, 0.05, 0.01, 0.01, 0.01, 0.02],
                vec![0.01, 0.01, 0.01, 0.02, 0.05, 0.1, 0.3, 0.2, 0.2, 0.1],
            ],
            psi: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
        };
        (corpus, posterior)
    }

    fn config() -> SummaryConfig {
        SummaryConfig {
            docs_per_topic: 50,
            ..SummaryConfig::default()
        }
    }

    #[test]
    fn sentence_scores_sum_topic_word_probabilities() {
        let (corpus, posterior) = fixture();
        let phi0 = &posterior.phi[0];
        let s = score_sentence(phi0, &corpus.vocab, "Storm hits the coast", false);
        assert!((s - 0.7).abs() < 1e-12, "got {s}");
        let s = score_sentence(phi0, &corpus.vocab, "Storm hits the coast", true);
        assert!((s - 0.7 / 3.0).abs() < 1e-12, "got {s}");
        // Out-of-vocabulary text scores zero either way.
        assert_eq!(
            score_sentence(phi0, &corpus.vocab, "nothing known", false),
            0.0
        );
        assert_eq!(
            score_sentence(phi0, &corpus.vocab, "nothing known", true),
            0.0
        );
    }

    #[test]
    fn summaries_follow_the_topic_time_distribution() {
        let (corpus, posterior) = fixture();
        let summaries = summarize(&corpus, &posterior, &config()).unwrap();
        assert_eq!(summaries.len(), 2);
        let boundary = corpus.grid.slice_bounds(1).0;
        // Topic 0 puts all its mass on the first slice, topic 1 on the second.
        assert!(!summaries[0].sentences.is_empty());
        assert!(summaries[0]
            .sentences
            .iter()
            .all(|s| s.timestamp < boundary));
        assert!(!summaries[1].sentences.is_empty());
        assert!(summaries[1]
            .sentences
            .iter()
            .all(|s| s.timestamp >= boundary));
        assert_eq!(summaries[0].keywords[..3], ["storm", "hits", "coast"]);
        assert_eq!(summaries[1].keywords[..3], ["markets", "rally", "quietly"]);
    }

    #[test]
    fn summary_sentences_are_chronological_and_distinct() {
        let (corpus, posterior) = fixture();
        let summaries = summarize(&corpus, &posterior, &config()).unwrap();
        for summary in &summaries {
            for pair in summary.sentences.windows(2) {
                assert!(pair[0].timestamp <= pair[1].timestamp);
            }
            for (i, a) in summary.sentences.iter().enumerate() {
                for b in &summary.sentences[i + 1..] {
                    let sim = jaro_winkler(
                        &normalize_for_similarity(&a.text),
                        &normalize_for_similarity(&b.text),
                    );
                    assert!(
                        sim <= config().similarity_threshold,
                        "kept near-duplicates {:?} / {:?} ({sim})",
                        a.text,
                        b.text
                    );
                }
            }
        }
        // Both docs repeating the storm sentence collapse to one copy.
        let storms = summaries[0]
            .sentences
            .iter()
            .filter(|s| s.text == "Storm hits the coast")
            .count();
        assert_eq!(storms, 1);
    }

    #[test]
    fn duplicate_sentences_keep_the_longer_variant() {
        let (_, posterior) = fixture();
        let docs = vec![
            doc(0, 0, 0, &[("Storm hits the coast", &[0, 1, 2])]),
            doc(
                1,
                0,
                1,
                &[("Storm hits the coast hard tonight", &[0, 1, 2])],
            ),
            doc(2, 1, 8, &[("Markets rally quietly", &[6, 7, 8])]),
        ];
        let grid = TimeGrid::new(day(0), 7, 2).unwrap();
        let corpus = Corpus::from_raw_parts(docs, vocab(), grid).unwrap();
        let summaries = summarize(&corpus, &posterior, &config()).unwrap();
        let texts: Vec<&str> = summaries[0]
            .sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect();
        assert!(texts.contains(&"Storm hits the coast hard tonight"));
        assert!(!texts.contains(&"Storm hits the coast"));
    }

    #[test]
    fn selection_keeps_the_highest_scoring_sentences() {
        let (corpus, posterior) = fixture();
        let cfg = SummaryConfig {
            sentences_per_topic: 1,
            ..config()
        };
        let summaries = summarize(&corpus, &posterior, &cfg).unwrap();
        // Topic 0: 0.7 for the storm sentence vs 0.25 for the rescue one.
        assert_eq!(summaries[0].sentences[0].text, "Storm hits the coast");
        assert!((summaries[0].sentences[0].score - 0.7).abs() < 1e-12);
        assert_eq!(summaries[1].sentences[0].text, "Markets rally quietly");
        assert!(!summaries[0].truncated);
    }

    #[test]
    fn truncation_is_reported_when_candidates_run_out() {
        let (corpus, posterior) = fixture();
        let summaries = summarize(&corpus, &posterior, &config()).unwrap();
        // Eight requested, at most two distinct sentences available per topic.
        assert!(summaries.iter().all(|s| s.truncated));
    }

    #[test]
    fn summaries_are_deterministic_per_seed() {
        let (corpus, posterior) = fixture();
        let a = summarize(&corpus, &posterior, &config()).unwrap();
        let b = summarize(&corpus, &posterior, &config()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.keywords, y.keywords);
            assert_eq!(x.truncated, y.truncated);
            assert_eq!(x.sentences.len(), y.sentences.len());
            for (sa, sb) in x.sentences.iter().zip(&y.sentences) {
                assert_eq!(sa.text, sb.text);
                assert_eq!(sa.timestamp, sb.timestamp);
                assert_eq!(sa.doc_id, sb.doc_id);
                assert_eq!(sa.score, sb.score);
            }
        }
    }

    #[test]
    fn summaries_reject_incompatible_inputs() {
        let (corpus, posterior) = fixture();
        let no_time = Posterior {
            psi: None,
            ..posterior.clone()
        };
        assert!(summarize(&corpus, &no_time, &config()).is_err());

        let short_theta = Posterior {
            theta: posterior.theta[..2].to_vec(),
            ..posterior.clone()
        };
        assert!(summarize(&corpus, &short_theta, &config()).is_err());

        let bad = SummaryConfig {
            sentences_per_topic: 0,
            ..config()
        };
        assert!(summarize(&corpus, &posterior, &bad).is_err());
        let bad = SummaryConfig {
            similarity_threshold: 0.0,
            ..config()
        };
        assert!(summarize(&corpus, &posterior, &bad).is_err());
        let bad = SummaryConfig {
            similarity_threshold: 1.2,
            ..config()
        };
        assert!(summarize(&corpus, &posterior, &bad).is_err());
    }

    #[test]
    fn sampling_fails_cleanly_on_unusable_time_distributions() {
        let (corpus, posterior) = fixture();
        // No positive mass at all.
        let zero = Posterior {
            psi: Some(vec![vec![0.0, 0.0], vec![0.0, 1.0]]),
            ..posterior.clone()
        };
        assert!(matches!(
            summarize(&corpus, &zero, &config()),
            Err(Error::Sampling { topic: 0, .. })
        ));

        // All mass on a slice containing no documents.
        let docs = vec![
            doc(0, 0, 0, &[("Storm hits the coast", &[0, 1, 2])]),
            doc(1, 1, 8, &[("Markets rally quietly", &[6, 7, 8])]),
        ];
        let grid = TimeGrid::new(day(0), 7, 3).unwrap();
        let sparse = Corpus::from_raw_parts(docs, vocab(), grid).unwrap();
        let empty_slice = Posterior {
            theta: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            phi: posterior.phi.clone(),
            psi: Some(vec![vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]),
        };
        assert!(matches!(
            summarize(&sparse, &empty_slice, &config()),
            Err(Error::Sampling { topic: 0, .. })
        ));
    }
}
