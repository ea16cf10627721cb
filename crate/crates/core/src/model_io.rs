//! On-disk model directory format.
//!
//! ```text
//! theta.csv        document-topic matrix, one row per document
//! phi.csv          topic-word matrix, one row per topic
//! psi.csv          topic-time matrix (models with a time component)
//! beta_params.csv  per-topic Beta parameters `a,b` (TOT only)
//! assignments.txt  doc_id  position  topic
//! fit.meta         model name, seed, settings, per-sweep log joint
//! ```
//!
//! All floats use a fixed 9-significant-digit scientific format, so reruns
//! with the same seed produce byte-identical directories.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::baselines::BetaParams;
use crate::sampler::Posterior;
use crate::util::fmt_prob;
use crate::{Error, Result};

pub const THETA_FILE: &str = "theta.csv";
pub const PHI_FILE: &str = "phi.csv";
pub const PSI_FILE: &str = "psi.csv";
pub const BETA_FILE: &str = "beta_params.csv";
pub const ASSIGNMENTS_FILE: &str = "assignments.txt";
pub const META_FILE: &str = "fit.meta";

/// Everything recorded about a fit besides the matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    /// `"noc"`, `"lda"`, or `"tot"`.
    pub model: String,
    pub seed: u64,
    /// Echo of the fit settings, in write order.
    pub settings: Vec<(String, String)>,
    /// Log joint after each sweep.
    pub log_joint: Vec<f64>,
}

/// Write one matrix as comma-separated rows.
pub fn write_matrix(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt_prob(x)).collect();
        writeln!(w, "{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a matrix written by [`write_matrix`]; rows must be equally long.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::MalformedFile {
                        what: "matrix cell",
                        path: path.to_path_buf(),
                        line: i + 1,
                        detail: format!("not a number: {cell:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::MalformedFile {
                    what: "matrix row",
                    path: path.to_path_buf(),
                    line: i + 1,
                    detail: format!("row has {} cells, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Write a complete model directory, creating it if needed.
pub fn write_model_dir(
    dir: &Path,
    meta: &ModelMeta,
    posterior: &Posterior,
    assignments: Option<&[Vec<u32>]>,
    beta_params: Option<&[BetaParams]>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix(&dir.join(THETA_FILE), &posterior.theta)?;
    write_matrix(&dir.join(PHI_FILE), &posterior.phi)?;
    if let Some(psi) = &posterior.psi {
        write_matrix(&dir.join(PSI_FILE), psi)?;
    }
    if let Some(params) = beta_params {
        let rows: Vec<Vec<f64>> = params.iter().map(|p| vec![p.a, p.b]).collect();
        write_matrix(&dir.join(BETA_FILE), &rows)?;
    }
    if let Some(z) = assignments {
        let path = dir.join(ASSIGNMENTS_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for (d, zs) in z.iter().enumerate() {
            for (i, &topic) in zs.iter().enumerate() {
                writeln!(w, "{d}\t{i}\t{topic}").map_err(|e| Error::io(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    let path = dir.join(META_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "model={}", meta.model).map_err(|e| Error::io(&path, e))?;
    writeln!(w, "seed={}", meta.seed).map_err(|e| Error::io(&path, e))?;
    for (key, value) in &meta.settings {
        writeln!(w, "{key}={value}").map_err(|e| Error::io(&path, e))?;
    }
    writeln!(w, "[log_joint]").map_err(|e| Error::io(&path, e))?;
    for lj in &meta.log_joint {
        writeln!(w, "{}", fmt_prob(*lj)).map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub meta: ModelMeta,
    pub posterior: Posterior,
    pub assignments: Option<Vec<Vec<u32>>>,
    pub beta_params: Option<Vec<BetaParams>>,
}

fn read_meta(path: &Path) -> Result<ModelMeta> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut model = None;
    let mut seed = None;
    let mut settings = Vec::new();
    let mut log_joint = Vec::new();
    let mut in_log = false;
    for (i, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |detail: String| Error::MalformedFile {
            what: "fit metadata",
            path: path.to_path_buf(),
            line: i + 1,
            detail,
        };
        if line == "[log_joint]" {
            in_log = true;
            continue;
        }
        if in_log {
            log_joint.push(
                line.parse::<f64>()
                    .map_err(|_| bad(format!("bad log joint {line:?}")))?,
            );
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad("expected key=value".into()))?;
        match key {
            "model" => model = Some(value.to_string()),
            "seed" => {
                seed = Some(
                    value
                        .parse()
                        .map_err(|_| bad(format!("bad seed {value:?}")))?,
                )
            }
            _ => settings.push((key.to_string(), value.to_string())),
        }
    }
    Ok(ModelMeta {
        model: model.ok_or(Error::MissingModelFile(path.to_path_buf(), "model name"))?,
        seed: seed.ok_or(Error::MissingModelFile(path.to_path_buf(), "seed"))?,
        settings,
        log_joint,
    })
}

/// Load a model directory written by [`write_model_dir`].
pub fn load_model_dir(dir: &Path) -> Result<LoadedModel> {
    for (file, what) in [
        (THETA_FILE, "document-topic matrix"),
        (PHI_FILE, "topic-word matrix"),
        (META_FILE, "fit metadata"),
    ] {
        let p = dir.join(file);
        if !p.is_file() {
            return Err(Error::MissingModelFile(p, what));
        }
    }
    let meta = read_meta(&dir.join(META_FILE))?;
    let theta = read_matrix(&dir.join(THETA_FILE))?;
    let phi = read_matrix(&dir.join(PHI_FILE))?;
    let psi_path = dir.join(PSI_FILE);
    let psi = if psi_path.is_file() {
        Some(read_matrix(&psi_path)?)
    } else {
        None
    };
    if let Some(psi) = &psi {
        if psi.len() != phi.len() {
            return Err(Error::CorruptCorpus(
                dir.to_path_buf(),
                format!("{} time rows for {} topics", psi.len(), phi.len()),
            ));
        }
    }
    let beta_path = dir.join(BETA_FILE);
    let beta_params = if beta_path.is_file() {
        let rows = read_matrix(&beta_path)?;
        let params = rows
            .iter()
            .map(|row| {
                if row.len() != 2 {
                    return Err(Error::MalformedFile {
                        what: "Beta parameter row",
                        path: beta_path.clone(),
                        line: 0,
                        detail: format!("expected 2 cells, got {}", row.len()),
                    });
                }
                Ok(BetaParams {
                    a: row[0],
                    b: row[1],
                })
            })
            .collect::<Result<Vec<BetaParams>>>()?;
        Some(params)
    } else {
        None
    };
    let assign_path = dir.join(ASSIGNMENTS_FILE);
    let assignments = if assign_path.is_file() {
        let body = fs::read_to_string(&assign_path).map_err(|e| Error::io(&assign_path, e))?;
        let mut z: Vec<Vec<u32>> = Vec::new();
        for (i, line) in body.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |detail: String| Error::MalformedFile {
                what: "assignment record",
                path: assign_path.clone(),
                line: i + 1,
                detail,
            };
            let mut fields = line.split('\t');
            let d: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad("bad doc id".into()))?;
            let pos: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad("bad position".into()))?;
            let topic: u32 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad("bad topic".into()))?;
            if d == z.len() {
                z.push(Vec::new());
            } else if d + 1 != z.len() {
                return Err(bad(format!("doc ids not contiguous at {d}")));
            }
            if pos != z[d].len() {
                return Err(bad(format!(
                    "positions for doc {d} not contiguous at {pos}"
                )));
            }
            z[d].push(topic);
        }
        Some(z)
    } else {
        None
    };
    Ok(LoadedModel {
        meta,
        posterior: Posterior { theta, phi, psi },
        assignments,
        beta_params,
    })
}
