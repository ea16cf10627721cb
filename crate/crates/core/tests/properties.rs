//! Randomized invariants: sampler count consistency, posterior normalization,
//! and the structural properties of the supporting utilities.

use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;

use chronotopics::baselines::{lda_fit, tot_fit};
use chronotopics::corpus::{aggregate_cascades, preprocess, CleanConfig, RawRecord, TimeGrid};
use chronotopics::corpus::{midnight_utc, Corpus};
use chronotopics::metrics::{entropy_bits, sdt};
use chronotopics::sampler::{fit, EstimateMode, ModelState, NocConfig, Posterior};
use chronotopics::summarizer::jaro_winkler;
use chronotopics::synth::{generate, PsiSpec, SynthSpec, TokensPerDoc};
use chronotopics::util::sample_index;

/// Small random corpora with a genuine time signal, via forward sampling.
fn corpus_strategy() -> impl Strategy<Value = Corpus> {
    (
        2usize..5,
        5usize..16,
        2usize..9,
        1usize..12,
        2usize..6,
        any::<u64>(),
    )
        .prop_map(|(topics, vocab, docs, max_tokens, slices, seed)| {
            let spec = SynthSpec {
                tokens_per_doc: TokensPerDoc::Range(1, max_tokens),
                marker_fraction: 0.0,
                psi: PsiSpec::Modes {
                    num_slices: slices,
                    modes_per_topic: 1,
                    mode_width: 1,
                },
                seed,
                ..SynthSpec::new(topics, vocab, docs)
            };
            let (corpus, _) = generate(&spec).expect("valid spec");
            corpus
        })
}

fn assert_rows_normalized(matrix: &[Vec<f64>]) -> Result<(), TestCaseError> {
    for row in matrix {
        let sum: f64 = row.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9, "row sums to {sum}");
        prop_assert!(row.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
    }
    Ok(())
}

fn assert_posterior_normalized(p: &Posterior) -> Result<(), TestCaseError> {
    assert_rows_normalized(&p.theta)?;
    assert_rows_normalized(&p.phi)?;
    if let Some(psi) = &p.psi {
        assert_rows_normalized(psi)?;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn counts_stay_consistent_through_time_aware_sweeps(
        corpus in corpus_strategy(),
        topics in 2usize..5,
        seed in any::<u64>(),
    ) {
        let config = NocConfig { seed, ..NocConfig::new(topics) };
        let mut state = ModelState::init(&corpus, &config).unwrap();
        prop_assert_eq!(state.validate_consistency(&corpus), Ok(()));
        for _ in 0..3 {
            state.gibbs_sweep(&corpus);
            prop_assert_eq!(state.validate_consistency(&corpus), Ok(()));
        }
    }

    #[test]
    fn counts_stay_consistent_through_time_free_sweeps(
        corpus in corpus_strategy(),
        topics in 2usize..5,
        seed in any::<u64>(),
    ) {
        let config = NocConfig { seed, ..NocConfig::new(topics) };
        let mut state = ModelState::init(&corpus, &config).unwrap();
        for _ in 0..3 {
            state.resample_pass(&corpus, false);
            prop_assert_eq!(state.validate_consistency(&corpus), Ok(()));
        }
    }

    #[test]
    fn counts_stay_consistent_through_beta_weighted_sweeps(
        corpus in corpus_strategy(),
        topics in 2usize..4,
        seed in any::<u64>(),
    ) {
        // The Beta-weighted pass is only reachable through the full fit, so
        // run fits of increasing length and check the state left by each.
        for sweeps in 1..=3usize {
            let config = NocConfig {
                sweeps,
                burn_in: sweeps - 1,
                seed,
                ..NocConfig::new(topics)
            };
            let (_, state) = tot_fit(&corpus, &config, |_| {}).unwrap();
            prop_assert_eq!(state.validate_consistency(&corpus), Ok(()));
        }
    }

    #[test]
    fn posterior_rows_are_distributions_for_every_model(
        corpus in corpus_strategy(),
        topics in 2usize..4,
        seed in any::<u64>(),
        average in any::<bool>(),
    ) {
        let config = NocConfig {
            sweeps: 4,
            burn_in: 2,
            seed,
            estimate: if average { EstimateMode::Average } else { EstimateMode::Final },
            ..NocConfig::new(topics)
        };
        let (posterior, _) = fit(&corpus, &config).unwrap();
        prop_assert!(posterior.psi.is_some());
        assert_posterior_normalized(&posterior)?;

        let (posterior, _, _) = lda_fit(&corpus, &config, |_| {}).unwrap();
        prop_assert!(posterior.psi.is_none());
        assert_posterior_normalized(&posterior)?;

        let (tot, _) = tot_fit(&corpus, &config, |_| {}).unwrap();
        prop_assert!(tot.posterior.psi.is_some());
        assert_posterior_normalized(&tot.posterior)?;
    }

    #[test]
    fn full_conditionals_are_distributions(
        corpus in corpus_strategy(),
        topics in 2usize..5,
        seed in any::<u64>(),
    ) {
        let config = NocConfig { seed, ..NocConfig::new(topics) };
        let mut state = ModelState::init(&corpus, &config).unwrap();
        state.gibbs_sweep(&corpus);
        let d = seed as usize % corpus.num_docs();
        if corpus.docs[d].tokens.is_empty() {
            return Ok(());
        }
        let i = seed as usize % corpus.docs[d].tokens.len();
        let old = state.z[d][i];
        state.remove_token(&corpus, d, i);
        let cond = state.full_conditional(&corpus, d, i);
        state.add_token(&corpus, d, i, old);
        prop_assert_eq!(cond.len(), topics);
        let sum: f64 = cond.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9, "conditional sums to {sum}");
        prop_assert!(cond.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn log_joint_stays_finite(
        corpus in corpus_strategy(),
        topics in 2usize..5,
        seed in any::<u64>(),
    ) {
        let config = NocConfig { seed, ..NocConfig::new(topics) };
        let mut state = ModelState::init(&corpus, &config).unwrap();
        for _ in 0..2 {
            state.gibbs_sweep(&corpus);
            prop_assert!(state.log_joint(true).is_finite());
            prop_assert!(state.log_joint(false).is_finite());
        }
    }

    #[test]
    fn fits_are_reproducible_from_the_seed(
        corpus in corpus_strategy(),
        topics in 2usize..4,
        seed in any::<u64>(),
    ) {
        let config = NocConfig {
            sweeps: 3,
            burn_in: 1,
            seed,
            ..NocConfig::new(topics)
        };
        let (a, da) = fit(&corpus, &config).unwrap();
        let (b, db) = fit(&corpus, &config).unwrap();
        prop_assert_eq!(a.theta, b.theta);
        prop_assert_eq!(a.phi, b.phi);
        prop_assert_eq!(a.psi, b.psi);
        prop_assert_eq!(da.log_joint, db.log_joint);
    }

    #[test]
    fn aggregation_ignores_record_order(
        texts in prop::collection::vec("[a-z]{1,6}( [a-z]{1,6}){0,3}", 1..12),
        days in prop::collection::vec(0i64..5, 1..12),
        cascades in prop::collection::vec(prop::option::of(0u8..3), 1..12),
        shuffle_seed in any::<u64>(),
    ) {
        let n = texts.len().min(days.len()).min(cascades.len());
        let origin = Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap();
        let records: Vec<RawRecord> = (0..n)
            .map(|i| RawRecord {
                id: format!("r{i}"),
                text: texts[i].clone(),
                timestamp: origin + Duration::days(days[i]) + Duration::minutes(i as i64),
                cascade_id: cascades[i].map(|c| format!("c{c}")),
                parent_id: None,
            })
            .collect();
        let mut shuffled = records.clone();
        // Deterministic Fisher-Yates driven by the seed.
        let mut s = shuffle_seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }

        let a = aggregate_cascades(&records);
        let b = aggregate_cascades(&shuffled);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.day, y.day);
            prop_assert_eq!(&x.cascade_key, &y.cascade_key);
            prop_assert_eq!(x.text(), y.text());
        }
    }

    #[test]
    fn cleaned_tokens_are_lowercase_alphanumeric_non_stopwords(
        text in ".{0,120}",
    ) {
        let config = CleanConfig::default();
        for token in preprocess(&text, &config) {
            prop_assert!(!token.is_empty());
            prop_assert!(token.chars().all(|c| c.is_alphanumeric()));
            prop_assert_eq!(token.to_lowercase(), token.clone());
            prop_assert!(!config.stopwords.contains(&token));
        }
    }

    #[test]
    fn covering_grid_brackets_every_timestamp(
        offsets in prop::collection::vec(0i64..400_000, 1..20),
        width in 1u32..30,
    ) {
        let origin = Utc.with_ymd_and_hms(2019, 6, 15, 9, 30, 0).unwrap();
        let stamps: Vec<DateTime<Utc>> =
            offsets.iter().map(|&m| origin + Duration::minutes(m)).collect();
        let grid = TimeGrid::covering(stamps.iter(), width).unwrap();
        prop_assert_eq!(grid.origin, midnight_utc(*stamps.iter().min().unwrap()));
        for ts in &stamps {
            prop_assert!(grid.category_of(*ts).is_some(), "{ts} escapes the grid");
        }
    }

    #[test]
    fn string_similarity_is_a_bounded_symmetric_score(
        a in ".{0,24}",
        b in ".{0,24}",
    ) {
        let ab = jaro_winkler(&a, &b);
        let ba = jaro_winkler(&b, &a);
        prop_assert!((0.0..=1.0).contains(&ab), "similarity {ab} out of range");
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert_eq!(jaro_winkler(&a, &a), 1.0);
    }

    #[test]
    fn weighted_sampling_lands_on_positive_weights(
        weights in prop::collection::vec(0.0f64..10.0, 1..12),
        u in 0.0f64..1.0,
    ) {
        match sample_index(&weights, u) {
            Some(i) => prop_assert!(weights[i] > 0.0),
            None => prop_assert!(weights.iter().all(|&w| w <= 0.0)),
        }
    }

    #[test]
    fn entropy_is_bounded_by_the_uniform_maximum(
        raw in prop::collection::vec(1e-6f64..10.0, 1..16),
    ) {
        let sum: f64 = raw.iter().sum();
        let dist: Vec<f64> = raw.iter().map(|x| x / sum).collect();
        let h = entropy_bits(&dist).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (dist.len() as f64).log2() + 1e-9);
    }

    #[test]
    fn temporality_score_is_bounded(
        frac in 0.0f64..=1.0,
        h_max in 0.5f64..8.0,
        gamma in 0.0f64..=1.0,
    ) {
        let h = frac * h_max;
        let score = sdt(h, h_max, gamma).unwrap();
        prop_assert!(score >= 0.0);
        prop_assert!(score <= h_max + 1e-12, "score {score} above {h_max}");
    }
}
