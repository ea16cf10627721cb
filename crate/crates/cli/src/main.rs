//! Command-line pipeline: corpus ingestion, synthetic corpora, model
//! training (NOC, LDA, TOT), topic-count sweeps, evaluation, and narrative
//! summaries.
//!
//! Exit codes: 0 success, 1 data or runtime failure, 2 usage error.

mod config;

use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use chronotopics::baselines::{lda_fit, tot_fit, BetaParams};
use chronotopics::corpus::{
    self, aggregate_cascades, build_corpus, ingest, CorpusConfig, IngestConfig,
};
use chronotopics::metrics::{coherence_report, sdt_report, PairSmoothing};
use chronotopics::model_io::{load_model_dir, write_model_dir, ModelMeta};
use chronotopics::sampler::{fit_with_state, EstimateMode, NocConfig, PsiInit, SweepRecord};
use chronotopics::summarizer::{summarize, SummaryConfig};
use chronotopics::synth::{generate, save_truth, PsiSpec, SynthSpec, TokensPerDoc};
use chronotopics::util::fmt_prob;
use chronotopics::Error;

use config::FileConfig;

#[derive(Parser)]
#[command(
    name = "chronotopics",
    version,
    about = "Topic models over categorical time: fit NOC, LDA, and TOT, score topics, extract narrative summaries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a corpus directory from JSON-lines records
    Ingest(IngestArgs),
    /// Generate a synthetic corpus with known ground truth
    Synth(SynthArgs),
    /// Fit a model on a corpus directory
    Train(TrainArgs),
    /// Fit over a range of topic counts and report mean coherence per count
    Sweep(SweepArgs),
    /// Score a fitted model: coherence and time-concentration metrics
    Eval(EvalArgs),
    /// Extract time-ordered narrative summaries from a fitted model
    Summarize(SummarizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Noc,
    Lda,
    Tot,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Noc => "noc",
            ModelKind::Lda => "lda",
            ModelKind::Tot => "tot",
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "noc" => Ok(ModelKind::Noc),
            "lda" => Ok(ModelKind::Lda),
            "tot" => Ok(ModelKind::Tot),
            other => Err(format!("unknown model {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PsiInitArg {
    Random,
    Activity,
}

impl From<PsiInitArg> for PsiInit {
    fn from(v: PsiInitArg) -> PsiInit {
        match v {
            PsiInitArg::Random => PsiInit::Random,
            PsiInitArg::Activity => PsiInit::Activity,
        }
    }
}

impl FromStr for PsiInitArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(PsiInitArg::Random),
            "activity" => Ok(PsiInitArg::Activity),
            other => Err(format!("unknown psi_init {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimateArg {
    Final,
    Average,
}

impl From<EstimateArg> for EstimateMode {
    fn from(v: EstimateArg) -> EstimateMode {
        match v {
            EstimateArg::Final => EstimateMode::Final,
            EstimateArg::Average => EstimateMode::Average,
        }
    }
}

impl FromStr for EstimateArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "final" => Ok(EstimateArg::Final),
            "average" => Ok(EstimateArg::Average),
            other => Err(format!("unknown estimate mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SmoothingArg {
    Addone,
    None,
}

impl From<SmoothingArg> for PairSmoothing {
    fn from(v: SmoothingArg) -> PairSmoothing {
        match v {
            SmoothingArg::Addone => PairSmoothing::AddOne,
            SmoothingArg::None => PairSmoothing::None,
        }
    }
}

impl FromStr for SmoothingArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "addone" => Ok(SmoothingArg::Addone),
            "none" => Ok(SmoothingArg::None),
            other => Err(format!("unknown smoothing {other:?}")),
        }
    }
}

/// Tokens-per-document spec: a count `40` or an inclusive range `20:60`.
#[derive(Debug, Clone, Copy)]
struct TokensArg(TokensPerDoc);

impl FromStr for TokensArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if let Some((lo, hi)) = s.split_once(':') {
            let lo = lo.parse().map_err(|_| format!("bad token range {s:?}"))?;
            let hi = hi.parse().map_err(|_| format!("bad token range {s:?}"))?;
            Ok(TokensArg(TokensPerDoc::Range(lo, hi)))
        } else {
            let n = s.parse().map_err(|_| format!("bad token count {s:?}"))?;
            Ok(TokensArg(TokensPerDoc::Fixed(n)))
        }
    }
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// JSON-lines input file
    #[arg(long)]
    input: Option<PathBuf>,
    /// Corpus directory to write
    #[arg(long)]
    output: Option<PathBuf>,
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    slice_width_days: Option<u32>,
    #[arg(long)]
    min_doc_tokens: Option<usize>,
    /// Keep only documents mentioning a named entity
    #[arg(long)]
    entity_filter: Option<bool>,
    /// Drop documents that do not look English
    #[arg(long)]
    language_filter: Option<bool>,
    /// Stopword list file, one lowercase term per line
    #[arg(long)]
    stopword_list: Option<PathBuf>,
    /// Extra entity names for the entity filter, one per line
    #[arg(long)]
    gazetteer_list: Option<PathBuf>,
    /// Ignore records before this RFC 3339 instant
    #[arg(long)]
    window_start: Option<String>,
    /// Ignore records at or after this RFC 3339 instant
    #[arg(long)]
    window_end: Option<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Corpus directory to write (ground truth goes to `<output>/truth`)
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    docs: Option<usize>,
    /// Tokens per document: `40` or `20:60`
    #[arg(long)]
    tokens_per_doc: Option<TokensArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Number of time slices (mode-structured psi)
    #[arg(long)]
    slices: Option<usize>,
    #[arg(long)]
    modes_per_topic: Option<usize>,
    #[arg(long)]
    mode_width: Option<usize>,
    /// Explicit psi rows as a CSV file (overrides the mode structure)
    #[arg(long)]
    psi_file: Option<PathBuf>,
    #[arg(long)]
    marker_fraction: Option<f64>,
    #[arg(long)]
    marker_mass: Option<f64>,
    #[arg(long)]
    slice_width_days: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initialization of the per-topic time distributions
    #[arg(long, value_enum)]
    psi_init: Option<PsiInitArg>,
    /// Additive smoothing per time-histogram cell
    #[arg(long)]
    psi_smoothing: Option<f64>,
    /// Report final-sweep or averaged post-burn-in estimates
    #[arg(long, value_enum)]
    estimate: Option<EstimateArg>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Corpus directory
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Model directory to write
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long)]
    topics: Option<usize>,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suppress per-sweep progress lines
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Smallest topic count to fit (inclusive)
    #[arg(long)]
    min_topics: Option<usize>,
    /// Largest topic count to fit (inclusive)
    #[arg(long)]
    max_topics: Option<usize>,
    /// Top words per topic for the coherence metric
    #[arg(long)]
    k_words: Option<usize>,
    /// Write the table as CSV here
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Fitted model directory
    #[arg(long)]
    model_dir: Option<PathBuf>,
    /// Where to write coherence.csv and sdt.csv (default: the model dir)
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    k_words: Option<usize>,
    /// Comma-separated gamma grid for the temporality score
    #[arg(long)]
    gammas: Option<String>,
    /// Pair-count smoothing for coherence
    #[arg(long, value_enum)]
    pair_smoothing: Option<SmoothingArg>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    model_dir: Option<PathBuf>,
    /// Directory for summary_<topic>.txt and summaries.jsonl
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    sentences_per_topic: Option<usize>,
    #[arg(long)]
    docs_per_topic: Option<usize>,
    /// Jaro-Winkler similarity above which sentences are duplicates
    #[arg(long)]
    similarity_threshold: Option<f64>,
    /// Divide sentence scores by scored token count
    #[arg(long)]
    length_normalize: Option<bool>,
    /// Keywords reported per topic
    #[arg(long)]
    keywords: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Summarize(args) => cmd_summarize(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn required<T>(value: Option<T>, key: &str) -> Result<T, Error> {
    value.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "missing required setting `{key}` (flag or config file)"
        ))
    })
}

fn path_setting(flag: Option<PathBuf>, cfg: &FileConfig, key: &str) -> Option<PathBuf> {
    flag.or_else(|| cfg.get(key).map(PathBuf::from))
}

fn parse_rfc3339(value: &str, what: &str) -> Result<DateTime<Utc>, Error> {
    DateTime::parse_from_rfc3339(value)
        .map(|dt| dt.with_timezone(&Utc))
        .map_err(|e| Error::InvalidConfig(format!("bad {what} timestamp {value:?}: {e}")))
}

fn read_word_list(path: &Path) -> Result<HashSet<String>, Error> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(body
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Worker cap for `sweep`: `CHRONOTOPICS_THREADS` when set, otherwise the
/// machine's available parallelism.
fn thread_cap() -> Result<usize, Error> {
    match std::env::var("CHRONOTOPICS_THREADS") {
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, usize::from)),
        Ok(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "CHRONOTOPICS_THREADS must be a positive integer, got {raw:?}"
                ))
            }),
    }
}

fn cmd_ingest(args: IngestArgs) -> Result<(), Error> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let input = required(path_setting(args.input, &cfg, "input"), "input")?;
    let output = required(path_setting(args.output, &cfg, "output"), "output")?;

    let window_start = args
        .window_start
        .or_else(|| cfg.get("window_start").map(str::to_string))
        .map(|v| parse_rfc3339(&v, "window_start"))
        .transpose()?;
    let window_end = args
        .window_end
        .or_else(|| cfg.get("window_end").map(str::to_string))
        .map(|v| parse_rfc3339(&v, "window_end"))
        .transpose()?;

    let mut corpus_config = CorpusConfig {
        slice_width_days: args
            .slice_width_days
            .or(cfg.parse("slice_width_days")?)
            .unwrap_or(14),
        min_doc_tokens: args
            .min_doc_tokens
            .or(cfg.parse("min_doc_tokens")?)
            .unwrap_or(3),
        entity_filter: args
            .entity_filter
            .or(cfg.parse("entity_filter")?)
            .unwrap_or(true),
        language_filter: args
            .language_filter
            .or(cfg.parse("language_filter")?)
            .unwrap_or(false),
        ..CorpusConfig::default()
    };
    if let Some(path) = args
        .stopword_list
        .or_else(|| cfg.get("stopword_list").map(PathBuf::from))
    {
        corpus_config.clean.stopwords = read_word_list(&path)?;
    }
    if let Some(path) = args
        .gazetteer_list
        .or_else(|| cfg.get("gazetteer_list").map(PathBuf::from))
    {
        corpus_config.gazetteer = read_word_list(&path)?;
    }

    let (records, ingest_stats) = ingest(
        &input,
        &IngestConfig {
            window_start,
            window_end,
        },
    )?;
    let pseudo_docs = aggregate_cascades(&records);
    let (corpus, build_stats) = build_corpus(&pseudo_docs, &corpus_config)?;
    corpus::save_corpus(&corpus, &output)?;
    println!(
        "records={} skipped={} pseudo_docs={} kept={} dropped_entity={} dropped_language={} \
         dropped_short={} vocab={} slices={}",
        ingest_stats.parsed,
        ingest_stats.skipped,
        build_stats.input_docs,
        build_stats.kept,
        build_stats.dropped_entity,
        build_stats.dropped_language,
        build_stats.dropped_short,
        corpus.vocab.len(),
        corpus.grid.num_slices
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let output = required(path_setting(args.output, &cfg, "output"), "output")?;
    let topics = required(args.topics.or(cfg.parse("topics")?), "topics")?;
    let vocab_size = required(args.vocab_size.or(cfg.parse("vocab_size")?), "vocab_size")?;
    let docs = required(args.docs.or(cfg.parse("docs")?), "docs")?;

    let mut spec = SynthSpec::new(topics, vocab_size, docs);
    if let Some(TokensArg(t)) = args.tokens_per_doc.or(cfg.parse("tokens_per_doc")?) {
        spec.tokens_per_doc = t;
    }
    if let Some(v) = args.alpha.or(cfg.parse("alpha")?) {
        spec.alpha = v;
    }
    if let Some(v) = args.beta.or(cfg.parse("beta")?) {
        spec.beta = v;
    }
    if let Some(v) = args.marker_fraction.or(cfg.parse("marker_fraction")?) {
        spec.marker_fraction = v;
    }
    if let Some(v) = args.marker_mass.or(cfg.parse("marker_mass")?) {
        spec.marker_mass = v;
    }
    if let Some(v) = args.slice_width_days.or(cfg.parse("slice_width_days")?) {
        spec.slice_width_days = v;
    }
    if let Some(v) = args.seed.or(cfg.parse("seed")?) {
        spec.seed = v;
    }
    spec.psi = if let Some(path) = args.psi_file {
        PsiSpec::Explicit(chronotopics::model_io::read_matrix(&path)?)
    } else {
        PsiSpec::Modes {
            num_slices: args.slices.or(cfg.parse("slices")?).unwrap_or(8),
            modes_per_topic: args
                .modes_per_topic
                .or(cfg.parse("modes_per_topic")?)
                .unwrap_or(1),
            mode_width: args.mode_width.or(cfg.parse("mode_width")?).unwrap_or(2),
        }
    };

    let (corpus, truth) = generate(&spec)?;
    corpus::save_corpus(&corpus, &output)?;
    save_truth(&truth, &output.join("truth"))?;
    println!(
        "docs={} vocab={} slices={} tokens={}",
        corpus.num_docs(),
        corpus.vocab.len(),
        corpus.grid.num_slices,
        corpus.total_tokens()
    );
    Ok(())
}

fn build_noc_config(fit: &FitArgs, cfg: &FileConfig, topics: usize) -> Result<NocConfig, Error> {
    let mut nc = NocConfig::new(topics);
    if let Some(v) = fit.alpha.or(cfg.parse("alpha")?) {
        nc.alpha = v;
    }
    if let Some(v) = fit.beta.or(cfg.parse("beta")?) {
        nc.beta = v;
    }
    if let Some(v) = fit.sweeps.or(cfg.parse("sweeps")?) {
        nc.sweeps = v;
    }
    if let Some(v) = fit.burn_in.or(cfg.parse("burn_in")?) {
        nc.burn_in = v;
    }
    if let Some(v) = fit.seed.or(cfg.parse("seed")?) {
        nc.seed = v;
    }
    if let Some(v) = fit.psi_init.or(cfg.parse("psi_init")?) {
        nc.psi_init = v.into();
    }
    if let Some(v) = fit.psi_smoothing.or(cfg.parse("psi_smoothing")?) {
        nc.psi_smoothing = Some(v);
    }
    if let Some(v) = fit.estimate.or(cfg.parse("estimate")?) {
        nc.estimate = v.into();
    }
    Ok(nc)
}

fn psi_init_name(v: PsiInit) -> &'static str {
    match v {
        PsiInit::Random => "random",
        PsiInit::Activity => "activity",
    }
}

fn estimate_name(v: EstimateMode) -> &'static str {
    match v {
        EstimateMode::Final => "final",
        EstimateMode::Average => "average",
    }
}

fn echo_settings(nc: &NocConfig, num_slices: usize) -> Vec<(String, String)> {
    let smoothing = nc
        .psi_smoothing
        .unwrap_or(NocConfig::DEFAULT_PSI_SMOOTHING_MASS / num_slices as f64);
    vec![
        ("topics".into(), nc.topics.to_string()),
        ("alpha".into(), nc.alpha.to_string()),
        ("beta".into(), nc.beta.to_string()),
        ("sweeps".into(), nc.sweeps.to_string()),
        ("burn_in".into(), nc.burn_in.to_string()),
        ("psi_init".into(), psi_init_name(nc.psi_init).into()),
        ("psi_smoothing".into(), smoothing.to_string()),
        ("estimate".into(), estimate_name(nc.estimate).into()),
    ]
}

struct FitOutput {
    posterior: chronotopics::sampler::Posterior,
    log_joint: Vec<f64>,
    assignments: Vec<Vec<u32>>,
    beta_params: Option<Vec<BetaParams>>,
    elapsed_ms: u128,
}

fn run_fit(
    corpus: &chronotopics::corpus::Corpus,
    model: ModelKind,
    nc: &NocConfig,
    mut log: impl FnMut(&SweepRecord),
) -> Result<FitOutput, Error> {
    match model {
        ModelKind::Noc => {
            let (posterior, diag, state) = fit_with_state(corpus, nc, &mut log)?;
            Ok(FitOutput {
                posterior,
                log_joint: diag.log_joint,
                assignments: state.z,
                beta_params: None,
                elapsed_ms: diag.elapsed.as_millis(),
            })
        }
        ModelKind::Lda => {
            let (posterior, diag, state) = lda_fit(corpus, nc, &mut log)?;
            Ok(FitOutput {
                posterior,
                log_joint: diag.log_joint,
                assignments: state.z,
                beta_params: None,
                elapsed_ms: diag.elapsed.as_millis(),
            })
        }
        ModelKind::Tot => {
            let (fit, state) = tot_fit(corpus, nc, &mut log)?;
            Ok(FitOutput {
                posterior: fit.posterior,
                log_joint: fit.diagnostics.log_joint,
                assignments: state.z,
                beta_params: Some(fit.beta_params),
                elapsed_ms: fit.diagnostics.elapsed.as_millis(),
            })
        }
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let corpus_dir = required(path_setting(args.corpus, &cfg, "corpus"), "corpus")?;
    let output = required(path_setting(args.output, &cfg, "output"), "output")?;
    let model = args.model.or(cfg.parse("model")?).unwrap_or(ModelKind::Noc);
    let topics = required(args.topics.or(cfg.parse("topics")?), "topics")?;
    let nc = build_noc_config(&args.fit, &cfg, topics)?;
    nc.validate()?;

    let corpus = corpus::load_corpus(&corpus_dir)?;
    let quiet = args.quiet;
    let out = run_fit(&corpus, model, &nc, |rec| {
        if !quiet {
            let line = format!(
                "sweep={} log_joint={:.6} elapsed_ms={}",
                rec.sweep + 1,
                rec.log_joint,
                rec.elapsed.as_millis()
            );
            eprintln!("{line}");
        }
    })?;

    let meta = ModelMeta {
        model: model.name().to_string(),
        seed: nc.seed,
        settings: echo_settings(&nc, corpus.grid.num_slices),
        log_joint: out.log_joint.clone(),
    };
    write_model_dir(
        &output,
        &meta,
        &out.posterior,
        Some(&out.assignments),
        out.beta_params.as_deref(),
    )?;
    println!(
        "model={} topics={} sweeps={} final_log_joint={:.6} elapsed_ms={}",
        model.name(),
        nc.topics,
        nc.sweeps,
        out.log_joint.last().copied().unwrap_or(f64::NAN),
        out.elapsed_ms
    );
    Ok(())
}

struct SweepRow {
    topics: usize,
    mean_coherence: f64,
    final_log_joint: f64,
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let corpus_dir = required(path_setting(args.corpus, &cfg, "corpus"), "corpus")?;
    let model = args.model.or(cfg.parse("model")?).unwrap_or(ModelKind::Noc);
    let min_topics = required(args.min_topics.or(cfg.parse("min_topics")?), "min_topics")?;
    let max_topics = required(args.max_topics.or(cfg.parse("max_topics")?), "max_topics")?;
    if min_topics < 2 || max_topics < min_topics {
        return Err(Error::InvalidConfig(format!(
            "topic range [{min_topics}, {max_topics}] is empty or starts below 2"
        )));
    }
    let k_words = args.k_words.or(cfg.parse("k_words")?).unwrap_or(500);
    let corpus = corpus::load_corpus(&corpus_dir)?;
    let quiet = args.quiet;

    let topic_counts: Vec<usize> = (min_topics..=max_topics).collect();
    let workers = thread_cap()?.min(topic_counts.len());
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<SweepRow, Error>>>> =
        topic_counts.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= topic_counts.len() {
                    break;
                }
                let topics = topic_counts[i];
                let row = (|| -> Result<SweepRow, Error> {
                    let nc = build_noc_config(&args.fit, &cfg, topics)?;
                    nc.validate()?;
                    let out = run_fit(&corpus, model, &nc, |rec| {
                        if !quiet {
                            let line = format!(
                                "topics={} sweep={} log_joint={:.6} elapsed_ms={}",
                                topics,
                                rec.sweep + 1,
                                rec.log_joint,
                                rec.elapsed.as_millis()
                            );
                            eprintln!("{line}");
                        }
                    })?;
                    let report = coherence_report(
                        &out.posterior.phi,
                        &corpus,
                        k_words,
                        PairSmoothing::AddOne,
                    )?;
                    Ok(SweepRow {
                        topics,
                        mean_coherence: report.mean,
                        final_log_joint: out.log_joint.last().copied().unwrap_or(f64::NAN),
                    })
                })();
                *results[i].lock().expect("no poisoned lock") = Some(row);
            });
        }
    });

    let mut rows = Vec::with_capacity(topic_counts.len());
    for cell in results {
        let row = cell
            .into_inner()
            .expect("no poisoned lock")
            .expect("worker filled every slot")?;
        rows.push(row);
    }
    let selected = rows
        .iter()
        .max_by(|a, b| {
            a.mean_coherence
                .partial_cmp(&b.mean_coherence)
                .expect("coherence is not NaN")
                .then(b.topics.cmp(&a.topics))
        })
        .map(|r| r.topics)
        .expect("non-empty range");

    for row in &rows {
        println!(
            "topics={} mean_coherence={:.6} final_log_joint={:.6} selected={}",
            row.topics,
            row.mean_coherence,
            row.final_log_joint,
            row.topics == selected
        );
    }
    println!("selected_topics={selected}");

    if let Some(path) = args.output {
        let mut body = String::from("topics,mean_coherence,final_log_joint,selected\n");
        for row in &rows {
            body.push_str(&format!(
                "{},{},{},{}\n",
                row.topics,
                fmt_prob(row.mean_coherence),
                fmt_prob(row.final_log_joint),
                row.topics == selected
            ));
        }
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let corpus_dir = required(path_setting(args.corpus, &cfg, "corpus"), "corpus")?;
    let model_dir = required(path_setting(args.model_dir, &cfg, "model_dir"), "model_dir")?;
    let out_dir = path_setting(args.output, &cfg, "output").unwrap_or_else(|| model_dir.clone());
    let k_words = args.k_words.or(cfg.parse("k_words")?).unwrap_or(500);
    let smoothing: PairSmoothing = args
        .pair_smoothing
        .or(cfg.parse("pair_smoothing")?)
        .unwrap_or(SmoothingArg::Addone)
        .into();
    let gammas_raw = args
        .gammas
        .or_else(|| cfg.get("gammas").map(str::to_string))
        .unwrap_or_else(|| "0,0.4,0.7,1".to_string());
    let gammas = gammas_raw
        .split(',')
        .map(|g| {
            g.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad gamma value {g:?}")))
        })
        .collect::<Result<Vec<f64>, Error>>()?;

    let corpus = corpus::load_corpus(&corpus_dir)?;
    let model = load_model_dir(&model_dir)?;
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let report = coherence_report(&model.posterior.phi, &corpus, k_words, smoothing)?;
    let path = out_dir.join("coherence.csv");
    let mut body = String::from("topic,coherence\n");
    for (z, c) in report.per_topic.iter().enumerate() {
        body.push_str(&format!("{z},{}\n", fmt_prob(*c)));
    }
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    println!(
        "model={} mean_coherence={:.6}",
        model.meta.model, report.mean
    );

    if let Some(psi) = &model.posterior.psi {
        let sdt = sdt_report(psi, &gammas)?;
        let path = out_dir.join("sdt.csv");
        let mut header = String::from("topic,entropy,h_max");
        for g in &gammas {
            header.push_str(&format!(",sdt@{g}"));
        }
        header.push('\n');
        let mut body = header;
        for z in 0..psi.len() {
            body.push_str(&format!(
                "{z},{},{}",
                fmt_prob(sdt.entropy[z]),
                fmt_prob(sdt.h_max)
            ));
            for gi in 0..gammas.len() {
                body.push_str(&format!(",{}", fmt_prob(sdt.scores[gi][z])));
            }
            body.push('\n');
        }
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        for (gi, g) in gammas.iter().enumerate() {
            let tops: Vec<String> = sdt.argmax[gi].iter().map(usize::to_string).collect();
            let best = sdt.argmax[gi].first().copied().unwrap_or(0);
            println!(
                "gamma={g} argmax={} sdt={:.6}",
                tops.join(","),
                sdt.scores[gi][best]
            );
        }
    } else {
        println!(
            "model={} has no time distributions; sdt.csv skipped",
            model.meta.model
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct SentenceRecord<'a> {
    topic: usize,
    score: f64,
    timestamp: String,
    doc_id: usize,
    sentence_index: usize,
    text: &'a str,
}

fn cmd_summarize(args: SummarizeArgs) -> Result<(), Error> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let corpus_dir = required(path_setting(args.corpus, &cfg, "corpus"), "corpus")?;
    let model_dir = required(path_setting(args.model_dir, &cfg, "model_dir"), "model_dir")?;
    let out_dir = required(path_setting(args.output, &cfg, "output"), "output")?;

    let mut sc = SummaryConfig::default();
    if let Some(v) = args
        .sentences_per_topic
        .or(cfg.parse("sentences_per_topic")?)
    {
        sc.sentences_per_topic = v;
    }
    if let Some(v) = args.docs_per_topic.or(cfg.parse("docs_per_topic")?) {
        sc.docs_per_topic = v;
    }
    if let Some(v) = args
        .similarity_threshold
        .or(cfg.parse("similarity_threshold")?)
    {
        sc.similarity_threshold = v;
    }
    if let Some(v) = args.length_normalize.or(cfg.parse("length_normalize")?) {
        sc.length_normalize = v;
    }
    if let Some(v) = args.keywords.or(cfg.parse("keywords")?) {
        sc.keywords = v;
    }
    if let Some(v) = args.seed.or(cfg.parse("seed")?) {
        sc.seed = v;
    }

    let corpus = corpus::load_corpus(&corpus_dir)?;
    let model = load_model_dir(&model_dir)?;
    let summaries = summarize(&corpus, &model.posterior, &sc)?;

    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let jsonl_path = out_dir.join("summaries.jsonl");
    let jsonl = fs::File::create(&jsonl_path).map_err(|e| Error::io(&jsonl_path, e))?;
    let mut jsonl = std::io::BufWriter::new(jsonl);
    for summary in &summaries {
        let path = out_dir.join(format!("summary_{}.txt", summary.topic));
        let mut body = format!("keywords: {}\n", summary.keywords.join(" "));
        for s in &summary.sentences {
            body.push_str(&format!(
                "{}\t{}\t{}\n",
                s.timestamp.to_rfc3339(),
                fmt_prob(s.score),
                s.text
            ));
        }
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        for s in &summary.sentences {
            let record = SentenceRecord {
                topic: summary.topic,
                score: s.score,
                timestamp: s.timestamp.to_rfc3339(),
                doc_id: s.doc_id,
                sentence_index: s.sent_idx,
                text: &s.text,
            };
            let line = serde_json::to_string(&record)
                .map_err(|e| Error::InvalidArgument(format!("summary serialization: {e}")))?;
            writeln!(jsonl, "{line}").map_err(|e| Error::io(&jsonl_path, e))?;
        }
        println!(
            "topic={} sentences={} truncated={}",
            summary.topic,
            summary.sentences.len(),
            summary.truncated
        );
    }
    jsonl.flush().map_err(|e| Error::io(&jsonl_path, e))?;
    Ok(())
}
