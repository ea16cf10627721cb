//! Topics-over-Time baseline: collapsed Gibbs sampling where each topic
//! carries a Beta density over timestamps normalized to the unit interval.
//! Beta parameters are re-fit once per sweep by the method of moments.

use std::time::{Duration, Instant};

use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::corpus::Corpus;
use crate::sampler::{
    EstimateAccumulator, EstimateMode, FitDiagnostics, ModelState, NocConfig, Posterior,
    SweepRecord,
};
use crate::Result;

/// Normalized timestamps are clamped into this open interval so Beta
/// densities with parameters below one stay finite.
const TIME_CLAMP: f64 = 1e-4;
/// Variance below this is treated as exactly degenerate.
const DEGENERATE_VAR: f64 = 1e-12;
/// Variance floor for moment matching; bounds the fitted parameters.
const VAR_FLOOR: f64 = 1e-6;

/// Beta density parameters of one topic's time distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub const UNIFORM: BetaParams = BetaParams { a: 1.0, b: 1.0 };

    /// Method-of-moments fit. Degenerate inputs (no spread, or moments
    /// inconsistent with a Beta) fall back to the uniform density.
    pub fn from_moments(mean: f64, variance: f64) -> BetaParams {
        if !mean.is_finite() || !variance.is_finite() {
            return BetaParams::UNIFORM;
        }
        if mean <= 0.0 || mean >= 1.0 || variance < DEGENERATE_VAR {
            return BetaParams::UNIFORM;
        }
        let variance = variance.max(VAR_FLOOR);
        let nu = mean * (1.0 - mean) / variance - 1.0;
        if nu <= 0.0 {
            return BetaParams::UNIFORM;
        }
        BetaParams {
            a: mean * nu,
            b: (1.0 - mean) * nu,
        }
    }

    pub fn ln_pdf(&self, t: f64) -> f64 {
        let ln_norm = ln_gamma(self.a) + ln_gamma(self.b) - ln_gamma(self.a + self.b);
        (self.a - 1.0) * t.ln() + (self.b - 1.0) * (1.0 - t).ln() - ln_norm
    }

    /// Probability mass on `[lo, hi]` within the unit interval.
    fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let dist = Beta::new(self.a, self.b).expect("positive parameters");
        let lo = lo.clamp(0.0, 1.0);
        let hi = hi.clamp(0.0, 1.0);
        if hi <= lo {
            return 0.0;
        }
        (dist.cdf(hi) - dist.cdf(lo)).max(0.0)
    }
}

/// Document timestamps min-max normalized to the unit interval and clamped
/// away from the endpoints. A corpus spanning a single instant maps to 0.5.
pub fn normalized_doc_times(corpus: &Corpus) -> Vec<f64> {
    let min = corpus.docs.iter().map(|d| d.timestamp).min();
    let max = corpus.docs.iter().map(|d| d.timestamp).max();
    let (min, max) = match (min, max) {
        (Some(a), Some(b)) => (a, b),
        _ => return Vec::new(),
    };
    let span = (max - min).num_seconds() as f64;
    corpus
        .docs
        .iter()
        .map(|d| {
            if span <= 0.0 {
                0.5
            } else {
                let t = (d.timestamp - min).num_seconds() as f64 / span;
                t.clamp(TIME_CLAMP, 1.0 - TIME_CLAMP)
            }
        })
        .collect()
}

/// Moment-matched Beta parameters per topic from the times of the tokens
/// currently assigned to each topic.
fn fit_beta_params(state: &ModelState, times: &[f64]) -> Vec<BetaParams> {
    let t = state.num_topics;
    let mut sum = vec![0.0f64; t];
    let mut sum_sq = vec![0.0f64; t];
    for (d, &time) in times.iter().enumerate() {
        for z in 0..t {
            let m = state.m_dz[d * t + z] as f64;
            if m > 0.0 {
                sum[z] += m * time;
                sum_sq[z] += m * time * time;
            }
        }
    }
    (0..t)
        .map(|z| {
            let n = state.n_z[z] as f64;
            if n == 0.0 {
                return BetaParams::UNIFORM;
            }
            let mean = sum[z] / n;
            let var = (sum_sq[z] / n - mean * mean).max(0.0);
            BetaParams::from_moments(mean, var)
        })
        .collect()
}

/// Per-topic time densities discretized onto the corpus time grid: the Beta
/// mass between each slice's boundaries in normalized time, renormalized.
fn discretize_psi(params: &[BetaParams], corpus: &Corpus) -> Vec<Vec<f64>> {
    let k = corpus.grid.num_slices;
    let min = corpus
        .docs
        .iter()
        .map(|d| d.timestamp)
        .min()
        .expect("non-empty corpus");
    let max = corpus
        .docs
        .iter()
        .map(|d| d.timestamp)
        .max()
        .expect("non-empty corpus");
    let span = (max - min).num_seconds() as f64;
    params
        .iter()
        .map(|p| {
            let mut row = vec![0.0; k];
            if span <= 0.0 {
                // Degenerate span: all mass in the slice holding the corpus.
                let cat = corpus.grid.category_of(min).unwrap_or(0);
                row[cat] = 1.0;
                return row;
            }
            for (slice, cell) in row.iter_mut().enumerate() {
                let (start, end) = corpus.grid.slice_bounds(slice);
                let lo = (start - min).num_seconds() as f64 / span;
                let hi = (end - min).num_seconds() as f64 / span;
                *cell = p.mass_between(lo, hi);
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                for cell in &mut row {
                    *cell /= total;
                }
            } else {
                row.fill(1.0 / k as f64);
            }
            row
        })
        .collect()
}

/// Log joint of the TOT state: the collapsed LDA terms plus the sum of topic
/// Beta log densities at every token's document time.
fn tot_log_joint(state: &ModelState, times: &[f64], params: &[BetaParams]) -> f64 {
    let t = state.num_topics;
    let mut total = state.log_joint(false);
    for (d, &time) in times.iter().enumerate() {
        for (z, p) in params.iter().enumerate() {
            let m = state.m_dz[d * t + z] as f64;
            if m > 0.0 {
                total += m * p.ln_pdf(time);
            }
        }
    }
    total
}

#[derive(Debug, Clone)]
pub struct TotFit {
    pub posterior: Posterior,
    /// Final per-topic Beta parameters.
    pub beta_params: Vec<BetaParams>,
    pub diagnostics: FitDiagnostics,
}

/// Fit the TOT baseline. The reported `psi` is the discretized form of the
/// continuous time densities, comparable cell by cell with the NOC output.
pub fn tot_fit(
    corpus: &Corpus,
    config: &NocConfig,
    mut on_sweep: impl FnMut(&SweepRecord),
) -> Result<(TotFit, ModelState)> {
    config.validate()?;
    let start = Instant::now();
    let mut state = ModelState::init(corpus, config)?;
    let times = normalized_doc_times(corpus);
    let mut params = vec![BetaParams::UNIFORM; config.topics];
    let mut diagnostics = FitDiagnostics::default();
    let mut acc = EstimateAccumulator::new();
    let mut prev = Duration::ZERO;
    for sweep in 0..config.sweeps {
        {
            let params = &params;
            let times = &times;
            state.resample_pass_beta(corpus, |z, d| params[z].ln_pdf(times[d]));
        }
        params = fit_beta_params(&state, &times);
        let lj = tot_log_joint(&state, &times, &params);
        diagnostics.log_joint.push(lj);
        let now = start.elapsed();
        on_sweep(&SweepRecord {
            sweep,
            log_joint: lj,
            elapsed: now - prev,
        });
        prev = now;
        if config.estimate == EstimateMode::Average && sweep >= config.burn_in {
            let theta = state.theta_estimate();
            let phi = state.phi_estimate();
            let psi = discretize_psi(&params, corpus);
            acc.add(&theta, &phi, Some(&psi));
        }
    }
    let posterior = match config.estimate {
        EstimateMode::Final => Posterior {
            theta: state.theta_estimate(),
            phi: state.phi_estimate(),
            psi: Some(discretize_psi(&params, corpus)),
        },
        EstimateMode::Average => acc.finish(true),
    };
    diagnostics.elapsed = start.elapsed();
    Ok((
        TotFit {
            posterior,
            beta_params: params,
            diagnostics,
        },
        state,
    ))
}
