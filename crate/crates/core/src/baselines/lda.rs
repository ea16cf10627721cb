//! Plain LDA through the shared sweep machinery with time factors disabled.

use std::time::{Duration, Instant};

use crate::corpus::Corpus;
use crate::sampler::{
    EstimateAccumulator, EstimateMode, FitDiagnostics, ModelState, NocConfig, Posterior,
    SweepRecord,
};
use crate::Result;

/// Fit LDA by collapsed Gibbs sampling. Identical to the NOC fit except that
/// full conditionals carry no time factor and no `psi` is estimated; given
/// the same seed the random stream is consumed identically.
pub fn lda_fit(
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
        state.resample_pass(corpus, false);
        let lj = state.log_joint(false);
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
            acc.add(&theta, &phi, None);
        }
    }
    let posterior = match config.estimate {
        EstimateMode::Final => Posterior {
            theta: state.theta_estimate(),
            phi: state.phi_estimate(),
            psi: None,
        },
        EstimateMode::Average => acc.finish(false),
    };
    diagnostics.elapsed = start.elapsed();
    Ok((posterior, diagnostics, state))
}
