//! Topic quality metrics: PMI coherence over document co-occurrence, Shannon
//! entropy of time distributions, and the entropy-based temporality score.

use std::collections::HashMap;

use crate::corpus::Corpus;
use crate::{Error, Result};

/// Ids of the `k` highest-probability words of a topic; ties break toward
/// the smaller id so the ranking is total.
pub fn top_words(phi_row: &[f64], k: usize) -> Vec<u32> {
    let mut ids: Vec<u32> = (0..phi_row.len() as u32).collect();
    ids.sort_by(|&a, &b| {
        phi_row[b as usize]
            .partial_cmp(&phi_row[a as usize])
            .expect("probabilities are not NaN")
            .then(a.cmp(&b))
    });
    ids.truncate(k);
    ids
}

/// Smoothing applied to pairwise co-occurrence counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSmoothing {
    /// Add one to every pair count (marginals stay raw).
    #[default]
    AddOne,
    /// Raw counts; a never-co-occurring pair contributes negative infinity.
    None,
}

/// Pointwise-mutual-information coherence of one topic: the average over
/// distinct top-word pairs of `ln p(w_j, w_k) / (p(w_j) p(w_k))`, with
/// document-level occurrence probabilities.
pub fn topic_coherence(
    phi_row: &[f64],
    corpus: &Corpus,
    k_words: usize,
    smoothing: PairSmoothing,
) -> Result<f64> {
    if k_words < 2 {
        return Err(Error::InvalidArgument(
            "coherence needs at least two top words".into(),
        ));
    }
    if k_words > corpus.vocab.len() {
        return Err(Error::InvalidArgument(format!(
            "coherence over {k_words} words exceeds vocabulary size {}",
            corpus.vocab.len()
        )));
    }
    if phi_row.len() != corpus.vocab.len() {
        return Err(Error::InvalidArgument(format!(
            "topic-word row has {} entries for vocabulary of {}",
            phi_row.len(),
            corpus.vocab.len()
        )));
    }
    let words = top_words(phi_row, k_words);
    let d = corpus.num_docs() as f64;

    let index: HashMap<u32, usize> = words.iter().enumerate().map(|(i, &w)| (w, i)).collect();
    let k = words.len();
    let mut pair_counts = vec![0u32; k * (k - 1) / 2];
    let pair_idx = |a: usize, b: usize| {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        // Upper-triangle linearization.
        lo * k - lo * (lo + 1) / 2 + (hi - lo - 1)
    };
    let mut present: Vec<usize> = Vec::with_capacity(k);
    for doc in &corpus.docs {
        present.clear();
        let mut seen = vec![false; k];
        for &tok in &doc.tokens {
            if let Some(&i) = index.get(&tok) {
                if !seen[i] {
                    seen[i] = true;
                    present.push(i);
                }
            }
        }
        for a in 0..present.len() {
            for b in a + 1..present.len() {
                pair_counts[pair_idx(present[a], present[b])] += 1;
            }
        }
    }

    let mut sum = 0.0;
    for a in 0..k {
        let df_a = corpus.vocab.doc_frequency(words[a]);
        if df_a == 0 {
            return Err(Error::InvalidArgument(format!(
                "top word {:?} never occurs in the corpus",
                corpus.vocab.term(words[a])
            )));
        }
        for b in a + 1..k {
            let df_b = corpus.vocab.doc_frequency(words[b]);
            if df_b == 0 {
                return Err(Error::InvalidArgument(format!(
                    "top word {:?} never occurs in the corpus",
                    corpus.vocab.term(words[b])
                )));
            }
            let joint = pair_counts[pair_idx(a, b)] as f64;
            let p_joint = match smoothing {
                PairSmoothing::AddOne => (joint + 1.0) / d,
                PairSmoothing::None => joint / d,
            };
            let p_a = df_a as f64 / d;
            let p_b = df_b as f64 / d;
            sum += (p_joint / (p_a * p_b)).ln();
        }
    }
    let pairs = (k * (k - 1) / 2) as f64;
    Ok(sum / pairs)
}

#[derive(Debug, Clone)]
pub struct CoherenceReport {
    pub k_words: usize,
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

/// Coherence of every topic plus the corpus mean.
pub fn coherence_report(
    phi: &[Vec<f64>],
    corpus: &Corpus,
    k_words: usize,
    smoothing: PairSmoothing,
) -> Result<CoherenceReport> {
    let per_topic = phi
        .iter()
        .map(|row| topic_coherence(row, corpus, k_words, smoothing))
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_topic.iter().sum::<f64>() / per_topic.len().max(1) as f64;
    Ok(CoherenceReport {
        k_words,
        per_topic,
        mean,
    })
}

/// Shannon entropy in bits. The input must be a distribution: entries
/// non-negative, summing to one within `1e-9`. Zero entries contribute zero.
pub fn entropy_bits(dist: &[f64]) -> Result<f64> {
    if dist.is_empty() {
        return Err(Error::InvalidArgument("entropy of an empty vector".into()));
    }
    let mut sum = 0.0;
    for &p in dist {
        if p < 0.0 || p.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "entropy input has negative or NaN entry {p}"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "entropy input sums to {sum}, expected 1"
        )));
    }
    Ok(dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum())
}

/// Entropy-based temporality score `H^gamma * (H_max - H)^(1 - gamma)`.
/// `gamma` trades off spread (entropy) against concentration; the convention
/// `0^0 = 1` makes the endpoints `gamma = 0` and `gamma = 1` linear in the
/// respective factor.
pub fn sdt(h: f64, h_max: f64, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    if !h_max.is_finite() || h_max < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "maximum entropy must be non-negative, got {h_max}"
        )));
    }
    if !(-1e-9..=h_max + 1e-9).contains(&h) {
        return Err(Error::InvalidArgument(format!(
            "entropy {h} outside [0, {h_max}]"
        )));
    }
    let h = h.clamp(0.0, h_max);
    Ok(h.powf(gamma) * (h_max - h).powf(1.0 - gamma))
}

#[derive(Debug, Clone)]
pub struct SdtReport {
    /// Entropy in bits of each topic's time distribution.
    pub entropy: Vec<f64>,
    /// `log2` of the number of time categories.
    pub h_max: f64,
    pub gammas: Vec<f64>,
    /// Scores indexed `[gamma][topic]`.
    pub scores: Vec<Vec<f64>>,
    /// Per gamma, all topics within a relative `1e-12` of the best score.
    pub argmax: Vec<Vec<usize>>,
}

/// Score every topic's time distribution at each `gamma`.
pub fn sdt_report(psi: &[Vec<f64>], gammas: &[f64]) -> Result<SdtReport> {
    if psi.is_empty() {
        return Err(Error::InvalidArgument("no time distributions given".into()));
    }
    let k = psi[0].len();
    if psi.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidArgument(
            "time distributions have differing lengths".into(),
        ));
    }
    let entropy = psi
        .iter()
        .map(|row| entropy_bits(row))
        .collect::<Result<Vec<f64>>>()?;
    let h_max = (k as f64).log2();
    let mut scores = Vec::with_capacity(gammas.len());
    let mut argmax = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let row = entropy
            .iter()
            .map(|&h| sdt(h, h_max, gamma))
            .collect::<Result<Vec<f64>>>()?;
        let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * best.abs().max(1.0);
        let ties = row
            .iter()
            .enumerate()
            .filter(|(_, &s)| best - s <= tol)
            .map(|(i, _)| i)
            .collect();
        scores.push(row);
        argmax.push(ties);
    }
    Ok(SdtReport {
        entropy,
        h_max,
        gammas: gammas.to_vec(),
        scores,
        argmax,
    })
}
