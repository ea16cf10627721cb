//! Collapsed Gibbs sampling state shared by the NOC model and the baselines.
//!
//! Counts are kept exactly consistent with the assignment vectors at all
//! times: every resampling step decrements the token's counts, draws from the
//! full conditional, and increments again. `psi` is a point-estimated
//! categorical time distribution per topic, re-fit once per sweep from the
//! `tau_zk` topic-by-category counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::corpus::Corpus;
use crate::{Error, Result};

use super::{NocConfig, PsiInit};

#[derive(Debug, Clone)]
pub struct ModelState {
    pub num_topics: usize,
    pub vocab_size: usize,
    pub num_slices: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Additive smoothing used when re-estimating `psi` from counts.
    pub psi_smoothing: f64,
    /// Topic assignment of every token, indexed `[doc][position]`.
    pub z: Vec<Vec<u32>>,
    /// Topic-word counts, row-major `[topic * V + word]`.
    pub n_zv: Vec<u32>,
    /// Document-topic counts, row-major `[doc * T + topic]`.
    pub m_dz: Vec<u32>,
    /// Tokens per topic.
    pub n_z: Vec<u32>,
    /// Topic-by-time-category counts, row-major `[topic * K + category]`.
    pub tau_zk: Vec<u32>,
    /// Per-topic time distributions, row-major `[topic * K + category]`.
    /// Rows sum to one.
    pub psi: Vec<f64>,
    rng: ChaCha8Rng,
}

impl ModelState {
    /// Random initialization: every token gets a uniform topic, counts are
    /// built to match, and `psi` starts according to `config.psi_init`.
    pub fn init(corpus: &Corpus, config: &NocConfig) -> Result<Self> {
        let t = config.topics;
        let v = corpus.vocab.len();
        let k = corpus.grid.num_slices;
        if corpus.docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if v == 0 {
            return Err(Error::InvalidConfig("empty vocabulary".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut z = Vec::with_capacity(corpus.docs.len());
        for doc in &corpus.docs {
            let assignments: Vec<u32> = doc
                .tokens
                .iter()
                .map(|_| rng.random_range(0..t as u32))
                .collect();
            z.push(assignments);
        }
        let psi_smoothing = config
            .psi_smoothing
            .unwrap_or(NocConfig::DEFAULT_PSI_SMOOTHING_MASS / k as f64);
        let mut state = ModelState::from_assignments(
            corpus,
            t,
            config.alpha,
            config.beta,
            psi_smoothing,
            z,
            rng,
        )?;
        match config.psi_init {
            PsiInit::Random => state.update_psi(),
            PsiInit::Activity => {
                let hist = corpus.category_token_histogram();
                let total: u64 = hist.iter().sum();
                let row: Vec<f64> = if total == 0 {
                    vec![1.0 / k as f64; k]
                } else {
                    hist.iter().map(|&c| c as f64 / total as f64).collect()
                };
                for zrow in state.psi.chunks_mut(k) {
                    zrow.copy_from_slice(&row);
                }
            }
        }
        Ok(state)
    }

    /// Build counts from explicit assignments. `psi` starts uniform; call
    /// [`ModelState::update_psi`] or set rows directly afterwards.
    pub fn from_assignments(
        corpus: &Corpus,
        num_topics: usize,
        alpha: f64,
        beta: f64,
        psi_smoothing: f64,
        z: Vec<Vec<u32>>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let t = num_topics;
        let v = corpus.vocab.len();
        let k = corpus.grid.num_slices;
        if t == 0 {
            return Err(Error::InvalidConfig("at least one topic required".into()));
        }
        if z.len() != corpus.docs.len() {
            return Err(Error::InvalidArgument(format!(
                "assignments cover {} docs, corpus has {}",
                z.len(),
                corpus.docs.len()
            )));
        }
        let mut state = ModelState {
            num_topics: t,
            vocab_size: v,
            num_slices: k,
            alpha,
            beta,
            psi_smoothing,
            z,
            n_zv: vec![0; t * v],
            m_dz: vec![0; corpus.docs.len() * t],
            n_z: vec![0; t],
            tau_zk: vec![0; t * k],
            psi: vec![1.0 / k as f64; t * k],
            rng,
        };
        for (d, doc) in corpus.docs.iter().enumerate() {
            if state.z[d].len() != doc.tokens.len() {
                return Err(Error::InvalidArgument(format!(
                    "doc {d}: {} assignments for {} tokens",
                    state.z[d].len(),
                    doc.tokens.len()
                )));
            }
            for (i, &w) in doc.tokens.iter().enumerate() {
                let zi = state.z[d][i] as usize;
                if zi >= t {
                    return Err(Error::InvalidArgument(format!(
                        "doc {d} token {i}: topic {zi} out of range"
                    )));
                }
                state.bump(d, w as usize, doc.time_category, zi, 1);
            }
        }
        Ok(state)
    }

    fn bump(&mut self, d: usize, w: usize, k: usize, z: usize, delta: i64) {
        let apply = |c: &mut u32| *c = (*c as i64 + delta) as u32;
        apply(&mut self.n_zv[z * self.vocab_size + w]);
        apply(&mut self.m_dz[d * self.num_topics + z]);
        apply(&mut self.n_z[z]);
        apply(&mut self.tau_zk[z * self.num_slices + k]);
    }

    /// Unnormalized full-conditional weights for one held-out token, written
    /// into `out`. Returns their sum. The token at `(d, i)` must already be
    /// removed from the counts. With `use_time` the per-topic time factor
    /// `psi[z][category]` multiplies the usual document and word terms.
    fn weights_into(
        &self,
        d: usize,
        word: usize,
        category: usize,
        use_time: bool,
        out: &mut [f64],
    ) -> f64 {
        let t = self.num_topics;
        let v_beta = self.vocab_size as f64 * self.beta;
        let mut total = 0.0;
        for (z, slot) in out[..t].iter_mut().enumerate() {
            let mut weight = (self.m_dz[d * t + z] as f64 + self.alpha)
                * ((self.n_zv[z * self.vocab_size + word] as f64 + self.beta)
                    / (self.n_z[z] as f64 + v_beta));
            if use_time {
                weight *= self.psi[z * self.num_slices + category];
            }
            *slot = weight;
            total += weight;
        }
        total
    }

    /// Normalized full conditional for token `i` of document `d`, which must
    /// already be decremented from the counts.
    pub fn full_conditional(&self, corpus: &Corpus, d: usize, i: usize) -> Vec<f64> {
        let doc = &corpus.docs[d];
        let mut weights = vec![0.0; self.num_topics];
        let total = self.weights_into(
            d,
            doc.tokens[i] as usize,
            doc.time_category,
            true,
            &mut weights,
        );
        for w in &mut weights {
            *w /= total;
        }
        weights
    }

    /// One full pass of collapsed Gibbs resampling over every token, in
    /// document then position order. `psi` is held fixed. With
    /// `use_time = false` this is plain LDA resampling; the random stream is
    /// consumed identically either way (one uniform draw per token).
    pub fn resample_pass(&mut self, corpus: &Corpus, use_time: bool) {
        let t = self.num_topics;
        let mut weights = vec![0.0f64; t];
        for d in 0..corpus.docs.len() {
            let doc = &corpus.docs[d];
            let k = doc.time_category;
            for i in 0..doc.tokens.len() {
                let w = doc.tokens[i] as usize;
                let old = self.z[d][i] as usize;
                self.bump(d, w, k, old, -1);
                let total = self.weights_into(d, w, k, use_time, &mut weights);
                let target = self.rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut chosen = None;
                for (zi, &wz) in weights.iter().enumerate() {
                    acc += wz;
                    if wz > 0.0 && acc > target {
                        chosen = Some(zi);
                        break;
                    }
                }
                let new = chosen.unwrap_or_else(|| {
                    weights
                        .iter()
                        .rposition(|&x| x > 0.0)
                        .expect("at least one positive weight")
                });
                self.z[d][i] = new as u32;
                self.bump(d, w, k, new, 1);
            }
        }
    }

    /// One resampling pass where each topic's time factor is a Beta density
    /// evaluated at the document's normalized timestamp. `ln_pdf_zd` gives,
    /// per document, the per-topic log densities. If every topic's density
    /// underflows for a document, the pass falls back to the time-free
    /// weights so the draw stays well defined.
    pub(crate) fn resample_pass_beta(
        &mut self,
        corpus: &Corpus,
        ln_pdf: impl Fn(usize, usize) -> f64,
    ) {
        let t = self.num_topics;
        let mut weights = vec![0.0f64; t];
        let mut pdf = vec![0.0f64; t];
        for d in 0..corpus.docs.len() {
            let doc = &corpus.docs[d];
            let k = doc.time_category;
            for (z, p) in pdf.iter_mut().enumerate() {
                *p = ln_pdf(z, d).exp();
            }
            for i in 0..doc.tokens.len() {
                let w = doc.tokens[i] as usize;
                let old = self.z[d][i] as usize;
                self.bump(d, w, k, old, -1);
                let mut total = 0.0;
                self.weights_into(d, w, k, false, &mut weights);
                for (wz, &p) in weights.iter_mut().zip(&pdf) {
                    *wz *= p;
                    total += *wz;
                }
                if total <= 0.0 {
                    total = self.weights_into(d, w, k, false, &mut weights);
                }
                let target = self.rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut chosen = None;
                for (zi, &wz) in weights.iter().enumerate() {
                    acc += wz;
                    if wz > 0.0 && acc > target {
                        chosen = Some(zi);
                        break;
                    }
                }
                let new = chosen.unwrap_or_else(|| {
                    weights
                        .iter()
                        .rposition(|&x| x > 0.0)
                        .expect("at least one positive weight")
                });
                self.z[d][i] = new as u32;
                self.bump(d, w, k, new, 1);
            }
        }
    }

    /// Re-fit `psi` as the smoothed per-topic histogram of `tau_zk`. Topics
    /// with no tokens fall back to the uniform row.
    pub fn update_psi(&mut self) {
        let k = self.num_slices;
        let s = self.psi_smoothing;
        for z in 0..self.num_topics {
            let n = self.n_z[z] as f64;
            let row = &mut self.psi[z * k..(z + 1) * k];
            if self.n_z[z] == 0 {
                row.fill(1.0 / k as f64);
                continue;
            }
            let denom = n + k as f64 * s;
            for (cell, &tau) in row.iter_mut().zip(&self.tau_zk[z * k..(z + 1) * k]) {
                *cell = (tau as f64 + s) / denom;
            }
        }
    }

    /// One NOC sweep: resample every token with the time factor, then re-fit
    /// `psi`.
    pub fn gibbs_sweep(&mut self, corpus: &Corpus) {
        self.resample_pass(corpus, true);
        self.update_psi();
    }

    /// Document-topic point estimates `(m + alpha) / (N_d + T alpha)`.
    pub fn theta_estimate(&self) -> Vec<Vec<f64>> {
        let t = self.num_topics;
        self.m_dz
            .chunks(t)
            .map(|row| {
                let n_d: u32 = row.iter().sum();
                let denom = n_d as f64 + t as f64 * self.alpha;
                row.iter()
                    .map(|&m| (m as f64 + self.alpha) / denom)
                    .collect()
            })
            .collect()
    }

    /// Topic-word point estimates `(n_zv + beta) / (n_z + V beta)`.
    pub fn phi_estimate(&self) -> Vec<Vec<f64>> {
        let v = self.vocab_size;
        self.n_zv
            .chunks(v)
            .enumerate()
            .map(|(z, row)| {
                let denom = self.n_z[z] as f64 + v as f64 * self.beta;
                row.iter()
                    .map(|&n| (n as f64 + self.beta) / denom)
                    .collect()
            })
            .collect()
    }

    /// Current `psi` as per-topic rows.
    pub fn psi_rows(&self) -> Vec<Vec<f64>> {
        self.psi
            .chunks(self.num_slices)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Replace `psi` wholesale; rows must be distributions.
    pub fn set_psi_rows(&mut self, rows: &[Vec<f64>]) -> Result<()> {
        if rows.len() != self.num_topics {
            return Err(Error::InvalidArgument(format!(
                "expected {} psi rows, got {}",
                self.num_topics,
                rows.len()
            )));
        }
        for (z, row) in rows.iter().enumerate() {
            if row.len() != self.num_slices {
                return Err(Error::InvalidArgument(format!(
                    "psi row {z} has {} entries, expected {}",
                    row.len(),
                    self.num_slices
                )));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "psi row {z} is not a distribution (sum = {sum})"
                )));
            }
            self.psi[z * self.num_slices..(z + 1) * self.num_slices].copy_from_slice(row);
        }
        Ok(())
    }

    /// Joint log probability of assignments and data under the collapsed
    /// model, up to additive constant-in-z terms that are included so the
    /// value is comparable across sweeps. With `use_time`, the categorical
    /// time term `sum_zk tau_zk ln psi_zk` is added.
    pub fn log_joint(&self, use_time: bool) -> f64 {
        let t = self.num_topics as f64;
        let v = self.vocab_size as f64;
        let d = (self.m_dz.len() / self.num_topics) as f64;
        let ln_gamma_beta = ln_gamma(self.beta);
        let ln_gamma_alpha = ln_gamma(self.alpha);

        let mut total = (ln_gamma(v * self.beta) - v * ln_gamma_beta) * t
            + (ln_gamma(t * self.alpha) - t * ln_gamma_alpha) * d;

        for z in 0..self.num_topics {
            let mut s = 0.0;
            for &n in &self.n_zv[z * self.vocab_size..(z + 1) * self.vocab_size] {
                s += if n == 0 {
                    ln_gamma_beta
                } else {
                    ln_gamma(n as f64 + self.beta)
                };
            }
            total += s - ln_gamma(self.n_z[z] as f64 + v * self.beta);
        }
        for row in self.m_dz.chunks(self.num_topics) {
            let n_d: u32 = row.iter().sum();
            for &m in row {
                total += if m == 0 {
                    ln_gamma_alpha
                } else {
                    ln_gamma(m as f64 + self.alpha)
                };
            }
            total -= ln_gamma(n_d as f64 + t * self.alpha);
        }
        if use_time {
            for (z, row) in self.tau_zk.chunks(self.num_slices).enumerate() {
                for (k, &tau) in row.iter().enumerate() {
                    if tau > 0 {
                        total += tau as f64 * self.psi[z * self.num_slices + k].ln();
                    }
                }
            }
        }
        total
    }

    /// Verify that the count tables agree with the assignment vectors and the
    /// corpus. Cheap enough for tests, not called in the sweep loop.
    pub fn validate_consistency(&self, corpus: &Corpus) -> std::result::Result<(), String> {
        let t = self.num_topics;
        let v = self.vocab_size;
        let k = self.num_slices;
        let mut n_zv = vec![0u32; t * v];
        let mut m_dz = vec![0u32; corpus.docs.len() * t];
        let mut n_z = vec![0u32; t];
        let mut tau = vec![0u32; t * k];
        for (d, doc) in corpus.docs.iter().enumerate() {
            if self.z[d].len() != doc.tokens.len() {
                return Err(format!("doc {d}: assignment length mismatch"));
            }
            for (i, &w) in doc.tokens.iter().enumerate() {
                let zi = self.z[d][i] as usize;
                if zi >= t {
                    return Err(format!("doc {d} token {i}: topic out of range"));
                }
                n_zv[zi * v + w as usize] += 1;
                m_dz[d * t + zi] += 1;
                n_z[zi] += 1;
                tau[zi * k + doc.time_category] += 1;
            }
        }
        if n_zv != self.n_zv {
            return Err("topic-word counts inconsistent".into());
        }
        if m_dz != self.m_dz {
            return Err("document-topic counts inconsistent".into());
        }
        if n_z != self.n_z {
            return Err("topic totals inconsistent".into());
        }
        if tau != self.tau_zk {
            return Err("topic-category counts inconsistent".into());
        }
        for (z, row) in self.psi.chunks(k).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(format!("psi row {z} sums to {sum}"));
            }
        }
        Ok(())
    }

    /// Remove one token from the counts (test and oracle hook).
    pub fn remove_token(&mut self, corpus: &Corpus, d: usize, i: usize) {
        let doc = &corpus.docs[d];
        let old = self.z[d][i] as usize;
        self.bump(d, doc.tokens[i] as usize, doc.time_category, old, -1);
    }

    /// Put a token back with topic `z` (test and oracle hook).
    pub fn add_token(&mut self, corpus: &Corpus, d: usize, i: usize, z: u32) {
        let doc = &corpus.docs[d];
        self.z[d][i] = z;
        self.bump(d, doc.tokens[i] as usize, doc.time_category, z as usize, 1);
    }
}
