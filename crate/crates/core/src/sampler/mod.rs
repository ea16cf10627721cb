//! The NOC topic model: collapsed Gibbs sampling for topics with a
//! per-topic categorical distribution over discrete time slices.

mod state;

pub use state::ModelState;

use std::time::{Duration, Instant};

use crate::corpus::Corpus;
use crate::{Error, Result};

/// How the per-topic time distributions start out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsiInit {
    /// Uniform-assignment counts, smoothed (rows are near uniform).
    #[default]
    Random,
    /// Every row starts at the corpus-wide activity histogram (token counts
    /// per time category, normalized).
    Activity,
}

/// Which sweeps produce the reported point estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimateMode {
    /// Estimates from the final sweep only.
    #[default]
    Final,
    /// Average estimates over all post-burn-in sweeps.
    Average,
}

#[derive(Debug, Clone)]
pub struct NocConfig {
    pub topics: usize,
    /// Symmetric document-topic Dirichlet concentration.
    pub alpha: f64,
    /// Symmetric topic-word Dirichlet concentration.
    pub beta: f64,
    pub sweeps: usize,
    /// Sweeps discarded before estimates are accumulated in
    /// [`EstimateMode::Average`].
    pub burn_in: usize,
    pub seed: u64,
    pub psi_init: PsiInit,
    /// Additive smoothing for the per-topic time histograms. `None` means
    /// the default total smoothing mass split over the slices.
    pub psi_smoothing: Option<f64>,
    pub estimate: EstimateMode,
}

impl NocConfig {
    /// Default total smoothing mass per psi row; per-cell smoothing is this
    /// divided by the number of slices.
    pub const DEFAULT_PSI_SMOOTHING_MASS: f64 = 1e-3;

    pub fn new(topics: usize) -> Self {
        NocConfig {
            topics,
            alpha: 1.0,
            beta: 0.5,
            sweeps: 500,
            burn_in: 300,
            seed: 0,
            psi_init: PsiInit::default(),
            psi_smoothing: None,
            estimate: EstimateMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics < 2 {
            return Err(Error::InvalidConfig(format!(
                "topics must be at least 2, got {}",
                self.topics
            )));
        }
        if self.alpha <= 0.0 || self.beta <= 0.0 || self.alpha.is_nan() || self.beta.is_nan() {
            return Err(Error::InvalidConfig(
                "alpha and beta must be positive".into(),
            ));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidConfig("sweeps must be positive".into()));
        }
        if self.burn_in >= self.sweeps {
            return Err(Error::InvalidConfig(format!(
                "burn_in ({}) must be smaller than sweeps ({})",
                self.burn_in, self.sweeps
            )));
        }
        if let Some(s) = self.psi_smoothing {
            if s <= 0.0 || s.is_nan() {
                return Err(Error::InvalidConfig(
                    "psi_smoothing must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Point estimates reported by a fit. `psi` is `None` for models without a
/// time component.
#[derive(Debug, Clone)]
pub struct Posterior {
    /// Document-topic mixtures, `[doc][topic]`.
    pub theta: Vec<Vec<f64>>,
    /// Topic-word distributions, `[topic][word]`.
    pub phi: Vec<Vec<f64>>,
    /// Topic-time distributions, `[topic][category]`.
    pub psi: Option<Vec<Vec<f64>>>,
}

/// One completed sweep, as seen by a fit observer.
#[derive(Debug, Clone, Copy)]
pub struct SweepRecord {
    /// Zero-based sweep index.
    pub sweep: usize,
    pub log_joint: f64,
    /// Wall time spent in this sweep.
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct FitDiagnostics {
    /// Log joint after every sweep.
    pub log_joint: Vec<f64>,
    pub elapsed: Duration,
}

/// Accumulates per-sweep estimates for [`EstimateMode::Average`].
pub(crate) struct EstimateAccumulator {
    theta: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
    psi: Vec<Vec<f64>>,
    count: usize,
}

impl EstimateAccumulator {
    pub(crate) fn new() -> Self {
        EstimateAccumulator {
            theta: Vec::new(),
            phi: Vec::new(),
            psi: Vec::new(),
            count: 0,
        }
    }

    fn add_matrix(acc: &mut Vec<Vec<f64>>, m: &[Vec<f64>]) {
        if acc.is_empty() {
            *acc = m.to_vec();
            return;
        }
        for (arow, mrow) in acc.iter_mut().zip(m) {
            for (a, b) in arow.iter_mut().zip(mrow) {
                *a += b;
            }
        }
    }

    pub(crate) fn add(&mut self, theta: &[Vec<f64>], phi: &[Vec<f64>], psi: Option<&[Vec<f64>]>) {
        Self::add_matrix(&mut self.theta, theta);
        Self::add_matrix(&mut self.phi, phi);
        if let Some(psi) = psi {
            Self::add_matrix(&mut self.psi, psi);
        }
        self.count += 1;
    }

    pub(crate) fn finish(self, with_psi: bool) -> Posterior {
        let n = self.count.max(1) as f64;
        let div = |m: Vec<Vec<f64>>| {
            m.into_iter()
                .map(|row| row.into_iter().map(|x| x / n).collect())
                .collect()
        };
        Posterior {
            theta: div(self.theta),
            phi: div(self.phi),
            psi: with_psi.then(|| div(self.psi)),
        }
    }
}

/// Fit the NOC model. Deterministic given the corpus and config.
pub fn fit(corpus: &Corpus, config: &NocConfig) -> Result<(Posterior, FitDiagnostics)> {
    fit_observed(corpus, config, |_| {})
}

/// Like [`fit`], with a callback after every sweep (progress logging).
pub fn fit_observed(
    corpus: &Corpus,
    config: &NocConfig,
    on_sweep: impl FnMut(&SweepRecord),
) -> Result<(Posterior, FitDiagnostics)> {
    let (posterior, diagnostics, _) = fit_with_state(corpus, config, on_sweep)?;
    Ok((posterior, diagnostics))
}

/// Fit and also return the final sampling state (assignments for export).
pub fn fit_with_state(
    corpus: &Corpus,
    config: &NocConfig,
    mut on_sweep: impl FnMut(&SweepRecord),
) -> Result<(Posterior, FitDiagnostics, ModelState)> {
    config.validate()?;
    let start = Instant::now();
    let mut state = ModelState::init(corpus, config)?;
    let mut diagnostics = FitDiagnostics::default();
    let mut acc = EstimateAccumulator::new();
    let mut prev = Duration::ZERO;
    for sweep in 0..config.sweeps {
        state.gibbs_sweep(corpus);
        let lj = state.log_joint(true);
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
            let psi = state.psi_rows();
            acc.add(&theta, &phi, Some(&psi));
        }
    }
    let posterior = match config.estimate {
        EstimateMode::Final => Posterior {
            theta: state.theta_estimate(),
            phi: state.phi_estimate(),
            psi: Some(state.psi_rows()),
        },
        EstimateMode::Average => acc.finish(true),
    };
    diagnostics.elapsed = start.elapsed();
    Ok((posterior, diagnostics, state))
}
