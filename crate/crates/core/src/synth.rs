//! Synthetic corpora with known ground truth, for recovery tests and model
//! comparisons.
//!
//! Topic-word rows are Dirichlet draws over a shared background vocabulary;
//! optionally each topic also owns a disjoint block of marker words holding a
//! fixed probability mass, which makes topics identifiable. Each document
//! draws a time category through its dominant topic's time distribution, so
//! the corpus carries a real topic-time signal.

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::corpus::{Corpus, Document, Sentence, TimeGrid, Vocabulary};
use crate::util::{cosine, sample_index};
use crate::{Error, Result};

/// Tokens per generated document.
#[derive(Debug, Clone, Copy)]
pub enum TokensPerDoc {
    Fixed(usize),
    /// Inclusive bounds.
    Range(usize, usize),
}

/// How the per-topic time distributions are specified.
#[derive(Debug, Clone)]
pub enum PsiSpec {
    /// One row per topic; rows must be distributions over the same number of
    /// categories.
    Explicit(Vec<Vec<f64>>),
    /// Evenly staggered block modes: each topic's mass is split across
    /// `modes_per_topic` runs of `mode_width` consecutive slices.
    Modes {
        num_slices: usize,
        modes_per_topic: usize,
        mode_width: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub topics: usize,
    pub vocab_size: usize,
    pub docs: usize,
    pub tokens_per_doc: TokensPerDoc,
    /// Document-topic Dirichlet concentration.
    pub alpha: f64,
    /// Topic-word Dirichlet concentration over the background vocabulary.
    pub beta: f64,
    pub psi: PsiSpec,
    /// Fraction of the vocabulary reserved as marker words, per topic.
    pub marker_fraction: f64,
    /// Topic-word probability mass placed uniformly on the topic's own
    /// marker block.
    pub marker_mass: f64,
    pub slice_width_days: u32,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(topics: usize, vocab_size: usize, docs: usize) -> Self {
        SynthSpec {
            topics,
            vocab_size,
            docs,
            tokens_per_doc: TokensPerDoc::Fixed(40),
            alpha: 0.2,
            beta: 0.1,
            psi: PsiSpec::Modes {
                num_slices: 8,
                modes_per_topic: 1,
                mode_width: 2,
            },
            marker_fraction: 0.1,
            marker_mass: 0.5,
            slice_width_days: 7,
            seed: 0,
        }
    }

    fn markers_per_topic(&self) -> usize {
        (self.vocab_size as f64 * self.marker_fraction).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics == 0 || self.vocab_size == 0 || self.docs == 0 {
            return Err(Error::InvalidConfig(
                "topics, vocab_size, and docs must be positive".into(),
            ));
        }
        match self.tokens_per_doc {
            TokensPerDoc::Fixed(0) => {
                return Err(Error::InvalidConfig(
                    "tokens_per_doc must be positive".into(),
                ))
            }
            TokensPerDoc::Range(lo, hi) if lo == 0 || hi < lo => {
                return Err(Error::InvalidConfig(format!(
                    "bad tokens_per_doc range [{lo}, {hi}]"
                )))
            }
            _ => {}
        }
        if self.alpha <= 0.0 || self.beta <= 0.0 || self.alpha.is_nan() || self.beta.is_nan() {
            return Err(Error::InvalidConfig(
                "alpha and beta must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.marker_fraction) || !(0.0..=1.0).contains(&self.marker_mass)
        {
            return Err(Error::InvalidConfig(
                "marker_fraction and marker_mass must lie in [0, 1]".into(),
            ));
        }
        let m = self.markers_per_topic();
        if m > 0 && self.topics * m >= self.vocab_size {
            return Err(Error::InvalidConfig(format!(
                "marker blocks ({} topics x {m} words) leave no background vocabulary of {}",
                self.topics, self.vocab_size
            )));
        }
        if self.slice_width_days == 0 {
            return Err(Error::InvalidConfig(
                "slice_width_days must be positive".into(),
            ));
        }
        match &self.psi {
            PsiSpec::Explicit(rows) => {
                if rows.len() != self.topics {
                    return Err(Error::InvalidConfig(format!(
                        "psi has {} rows for {} topics",
                        rows.len(),
                        self.topics
                    )));
                }
                let k = rows.first().map_or(0, Vec::len);
                if k == 0 {
                    return Err(Error::InvalidConfig("psi rows are empty".into()));
                }
                for (z, row) in rows.iter().enumerate() {
                    if row.len() != k {
                        return Err(Error::InvalidConfig(format!(
                            "psi row {z} has {} entries, expected {k}",
                            row.len()
                        )));
                    }
                    let sum: f64 = row.iter().sum();
                    if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidConfig(format!(
                            "psi row {z} is not a distribution"
                        )));
                    }
                }
            }
            PsiSpec::Modes {
                num_slices,
                modes_per_topic,
                mode_width,
            } => {
                if *num_slices == 0 || *modes_per_topic == 0 || *mode_width == 0 {
                    return Err(Error::InvalidConfig(
                        "mode layout values must be positive".into(),
                    ));
                }
                if *mode_width > *num_slices {
                    return Err(Error::InvalidConfig(format!(
                        "mode_width {mode_width} exceeds {num_slices} slices"
                    )));
                }
            }
        }
        Ok(())
    }

    fn psi_rows(&self) -> Vec<Vec<f64>> {
        match &self.psi {
            PsiSpec::Explicit(rows) => rows.clone(),
            PsiSpec::Modes {
                num_slices,
                modes_per_topic,
                mode_width,
            } => {
                let (k, modes, width) = (*num_slices, *modes_per_topic, *mode_width);
                let total_modes = self.topics * modes;
                let mut rows = Vec::with_capacity(self.topics);
                for z in 0..self.topics {
                    let mut row = vec![0.0; k];
                    for j in 0..modes {
                        // Stagger starts so consecutive topics peak apart.
                        let rank = z + j * self.topics;
                        let start = (rank * k / total_modes).min(k - width);
                        for cell in &mut row[start..start + width] {
                            *cell += 1.0 / (modes * width) as f64;
                        }
                    }
                    let sum: f64 = row.iter().sum();
                    for cell in &mut row {
                        *cell /= sum;
                    }
                    rows.push(row);
                }
                rows
            }
        }
    }
}

/// The latent variables a synthetic corpus was generated from.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub theta: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    /// True topic of every token, `[doc][position]`.
    pub z: Vec<Vec<u32>>,
}

fn dirichlet(rng: &mut ChaCha8Rng, concentration: f64, n: usize) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive shape");
    let mut draw: Vec<f64> = (0..n)
        .map(|_| gamma.sample(rng).max(f64::MIN_POSITIVE))
        .collect();
    let sum: f64 = draw.iter().sum();
    for x in &mut draw {
        *x /= sum;
    }
    draw
}

/// Generate a corpus and its ground truth. Deterministic in the settings.
pub fn generate(spec: &SynthSpec) -> Result<(Corpus, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let t = spec.topics;
    let v = spec.vocab_size;
    let m = spec.markers_per_topic();
    let background_start = t * m * usize::from(m > 0);

    let psi = spec.psi_rows();
    let k = psi[0].len();

    let mut phi: Vec<Vec<f64>> = Vec::with_capacity(t);
    for z in 0..t {
        let mut row = vec![0.0; v];
        let background = dirichlet(&mut rng, spec.beta, v - background_start);
        let background_mass = if m > 0 { 1.0 - spec.marker_mass } else { 1.0 };
        for (i, &p) in background.iter().enumerate() {
            row[background_start + i] = p * background_mass;
        }
        if m > 0 {
            for cell in &mut row[z * m..(z + 1) * m] {
                *cell = spec.marker_mass / m as f64;
            }
        }
        phi.push(row);
    }

    let mut theta: Vec<Vec<f64>> = Vec::with_capacity(spec.docs);
    for _ in 0..spec.docs {
        theta.push(dirichlet(&mut rng, spec.alpha, t));
    }

    let origin = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let grid = TimeGrid::new(origin, spec.slice_width_days, k)?;

    let digits = (v.max(2) - 1).to_string().len();
    let terms: Vec<String> = (0..v).map(|i| format!("w{i:0digits$}")).collect();
    let vocab = Vocabulary::from_terms(terms)?;

    let mut docs = Vec::with_capacity(spec.docs);
    let mut truth_z = Vec::with_capacity(spec.docs);
    for (d, theta_d) in theta.iter().enumerate() {
        let n_d = match spec.tokens_per_doc {
            TokensPerDoc::Fixed(n) => n,
            TokensPerDoc::Range(lo, hi) => rng.random_range(lo..=hi),
        };
        // The document's timestamp follows one draw of its own topic mix.
        let lead_topic = sample_index(theta_d, rng.random()).expect("theta is a distribution");
        let category =
            sample_index(&psi[lead_topic], rng.random()).expect("psi row is a distribution");
        let day = rng.random_range(0..spec.slice_width_days);
        let timestamp = origin
            + Duration::days(i64::from(spec.slice_width_days) * category as i64 + i64::from(day));

        let mut tokens = Vec::with_capacity(n_d);
        let mut zs = Vec::with_capacity(n_d);
        for _ in 0..n_d {
            let z = sample_index(theta_d, rng.random()).expect("theta is a distribution");
            let w = sample_index(&phi[z], rng.random()).expect("phi row is a distribution");
            zs.push(z as u32);
            tokens.push(w as u32);
        }
        let mut sentences = Vec::new();
        for (chunk_idx, chunk) in tokens.chunks(8).enumerate() {
            let words: Vec<&str> = chunk.iter().map(|&w| vocab.term(w)).collect();
            sentences.push(Sentence {
                text: words.join(" "),
                token_range: chunk_idx * 8..chunk_idx * 8 + chunk.len(),
                timestamp,
            });
        }
        docs.push(Document {
            doc_id: d,
            tokens,
            sentences,
            timestamp,
            time_category: category,
        });
        truth_z.push(zs);
    }

    let corpus = Corpus::from_raw_parts(docs, vocab, grid)?;
    Ok((
        corpus,
        GroundTruth {
            theta,
            phi,
            psi,
            z: truth_z,
        },
    ))
}

/// Write the ground truth under `dir` in the model output layout:
/// `theta.csv`, `phi.csv`, `psi.csv`, and `assignments.txt` with the true
/// token topics.
pub fn save_truth(truth: &GroundTruth, dir: &std::path::Path) -> Result<()> {
    use std::io::Write;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    crate::model_io::write_matrix(&dir.join("theta.csv"), &truth.theta)?;
    crate::model_io::write_matrix(&dir.join("phi.csv"), &truth.phi)?;
    crate::model_io::write_matrix(&dir.join("psi.csv"), &truth.psi)?;
    let path = dir.join("assignments.txt");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for (d, zs) in truth.z.iter().enumerate() {
        for (i, &topic) in zs.iter().enumerate() {
            writeln!(w, "{d}\t{i}\t{topic}").map_err(|e| Error::io(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Greedy one-to-one matching of fitted topics to true topics by cosine
/// similarity of the topic-word rows.
#[derive(Debug, Clone)]
pub struct TopicMatching {
    /// `assignment[true_topic] = fitted_topic`.
    pub assignment: Vec<usize>,
    /// Cosine similarity of each matched pair, indexed by true topic.
    pub cosines: Vec<f64>,
}

pub fn match_topics(truth_phi: &[Vec<f64>], fitted_phi: &[Vec<f64>]) -> Result<TopicMatching> {
    let t = truth_phi.len();
    if fitted_phi.len() != t {
        return Err(Error::InvalidArgument(format!(
            "cannot match {} fitted topics to {t} true topics",
            fitted_phi.len()
        )));
    }
    let mut assignment = vec![usize::MAX; t];
    let mut cosines = vec![0.0; t];
    let mut used_truth = vec![false; t];
    let mut used_fit = vec![false; t];
    for _ in 0..t {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for i in 0..t {
            if used_truth[i] {
                continue;
            }
            for j in 0..t {
                if used_fit[j] {
                    continue;
                }
                let c = cosine(&truth_phi[i], &fitted_phi[j]);
                if c > best.0 {
                    best = (c, i, j);
                }
            }
        }
        let (c, i, j) = best;
        used_truth[i] = true;
        used_fit[j] = true;
        assignment[i] = j;
        cosines[i] = c;
    }
    Ok(TopicMatching {
        assignment,
        cosines,
    })
}
