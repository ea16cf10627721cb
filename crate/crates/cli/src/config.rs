//! Flat key=value configuration files. Every command accepts `--config`;
//! explicit flags override file values, file values override defaults.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chronotopics::Error;

/// Every key a configuration file may contain.
pub const ALLOWED_KEYS: &[&str] = &[
    // paths
    "input",
    "output",
    "corpus",
    "model_dir",
    // corpus assembly
    "slice_width_days",
    "min_doc_tokens",
    "entity_filter",
    "language_filter",
    "stopword_list",
    "gazetteer_list",
    "window_start",
    "window_end",
    // model fitting
    "model",
    "topics",
    "alpha",
    "beta",
    "sweeps",
    "burn_in",
    "seed",
    "psi_init",
    "psi_smoothing",
    "estimate",
    // topic-count sweep
    "min_topics",
    "max_topics",
    // metrics
    "k_words",
    "gammas",
    "pair_smoothing",
    // summaries
    "docs_per_topic",
    "sentences_per_topic",
    "similarity_threshold",
    "length_normalize",
    "keywords",
    // synthetic corpora
    "vocab_size",
    "docs",
    "tokens_per_doc",
    "slices",
    "modes_per_topic",
    "mode_width",
    "marker_fraction",
    "marker_mass",
];

/// Parsed configuration file contents.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    /// Load `path` if given; unknown keys and malformed lines are usage
    /// errors.
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut values = HashMap::new();
        for (i, raw) in body.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{}:{}: expected key = value, got {raw:?}",
                    path.display(),
                    i + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !ALLOWED_KEYS.contains(&key) {
                return Err(Error::InvalidConfig(format!(
                    "{}:{}: unknown configuration key {key:?}",
                    path.display(),
                    i + 1
                )));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "{}:{}: duplicate configuration key {key:?}",
                    path.display(),
                    i + 1
                )));
            }
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Parse a value if present. `bool` values are `true`/`false`.
    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, Error> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("configuration key {key:?} has bad value {v:?}"))
            }),
        }
    }
}
