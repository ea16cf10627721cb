//! On-disk corpus directory format.
//!
//! ```text
//! vocab.txt      one term per line, line number = token id
//! docs.txt       doc_id  time_category  epoch_secs  space-separated token ids
//! sentences.txt  doc_id  sentence_idx  epoch_secs  display text
//! grid.meta      origin / slice width / slice count
//! ```
//!
//! Sentence token ranges are not stored: the loader re-derives them by
//! re-tokenizing the display text against the vocabulary and verifies that
//! the concatenation reproduces the stored token ids exactly.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};

use crate::{Error, Result};

use super::{pipeline::tokenize_lossy, Corpus, Document, Sentence, TimeGrid, Vocabulary};

pub const VOCAB_FILE: &str = "vocab.txt";
pub const DOCS_FILE: &str = "docs.txt";
pub const SENTENCES_FILE: &str = "sentences.txt";
pub const GRID_FILE: &str = "grid.meta";

/// Write the corpus directory, creating it if needed.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let vocab_path = dir.join(VOCAB_FILE);
    let mut out = String::new();
    for term in corpus.vocab.terms() {
        out.push_str(term);
        out.push('\n');
    }
    fs::write(&vocab_path, out).map_err(|e| Error::io(&vocab_path, e))?;

    let docs_path = dir.join(DOCS_FILE);
    let file = fs::File::create(&docs_path).map_err(|e| Error::io(&docs_path, e))?;
    let mut w = BufWriter::new(file);
    for doc in &corpus.docs {
        let ids: Vec<String> = doc.tokens.iter().map(u32::to_string).collect();
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            doc.doc_id,
            doc.time_category,
            doc.timestamp.timestamp(),
            ids.join(" ")
        )
        .map_err(|e| Error::io(&docs_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&docs_path, e))?;

    let sent_path = dir.join(SENTENCES_FILE);
    let file = fs::File::create(&sent_path).map_err(|e| Error::io(&sent_path, e))?;
    let mut w = BufWriter::new(file);
    for doc in &corpus.docs {
        for (i, sent) in doc.sentences.iter().enumerate() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                doc.doc_id,
                i,
                sent.timestamp.timestamp(),
                sent.text
            )
            .map_err(|e| Error::io(&sent_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&sent_path, e))?;

    let grid_path = dir.join(GRID_FILE);
    let meta = format!(
        "origin={}\nslice_width_days={}\nslices={}\n",
        corpus.grid.origin.to_rfc3339(),
        corpus.grid.slice_width_days,
        corpus.grid.num_slices
    );
    fs::write(&grid_path, meta).map_err(|e| Error::io(&grid_path, e))?;
    Ok(())
}

fn parse_epoch(secs: &str, path: &Path, line: usize) -> Result<DateTime<Utc>> {
    let secs: i64 = secs.parse().map_err(|_| Error::MalformedFile {
        what: "epoch timestamp",
        path: path.to_path_buf(),
        line,
        detail: format!("not an integer: {secs:?}"),
    })?;
    DateTime::<Utc>::from_timestamp(secs, 0).ok_or_else(|| Error::MalformedFile {
        what: "epoch timestamp",
        path: path.to_path_buf(),
        line,
        detail: format!("out of range: {secs}"),
    })
}

fn read_grid(path: &Path) -> Result<TimeGrid> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut origin = None;
    let mut width = None;
    let mut slices = None;
    for (i, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::MalformedFile {
            what: "grid metadata",
            path: path.to_path_buf(),
            line: i + 1,
            detail: "expected key=value".into(),
        })?;
        let bad = |detail: String| Error::MalformedFile {
            what: "grid metadata",
            path: path.to_path_buf(),
            line: i + 1,
            detail,
        };
        match key {
            "origin" => {
                let dt = DateTime::parse_from_rfc3339(value)
                    .map_err(|e| bad(format!("bad origin: {e}")))?;
                origin = Some(dt.with_timezone(&Utc));
            }
            "slice_width_days" => {
                width = Some(value.parse().map_err(|_| bad("bad slice width".into()))?);
            }
            "slices" => {
                slices = Some(value.parse().map_err(|_| bad("bad slice count".into()))?);
            }
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    match (origin, width, slices) {
        (Some(o), Some(w), Some(s)) => TimeGrid::new(o, w, s),
        _ => Err(Error::MalformedFile {
            what: "grid metadata",
            path: path.to_path_buf(),
            line: 0,
            detail: "missing origin, slice_width_days, or slices".into(),
        }),
    }
}

/// Load a corpus directory written by [`save_corpus`], verifying that the
/// stored sentences re-tokenize to exactly the stored token ids.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    for (file, what) in [
        (VOCAB_FILE, "vocabulary"),
        (DOCS_FILE, "documents"),
        (SENTENCES_FILE, "sentences"),
        (GRID_FILE, "time grid"),
    ] {
        let p = dir.join(file);
        if !p.is_file() {
            return Err(Error::MissingModelFile(p, what));
        }
    }

    let vocab_path = dir.join(VOCAB_FILE);
    let body = fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    let terms: Vec<String> = body.lines().map(str::to_string).collect();
    let vocab = Vocabulary::from_terms(terms)?;

    let grid = read_grid(&dir.join(GRID_FILE))?;

    let docs_path = dir.join(DOCS_FILE);
    let body = fs::read_to_string(&docs_path).map_err(|e| Error::io(&docs_path, e))?;
    let mut docs: Vec<Document> = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedFile {
                what: "document record",
                path: docs_path.clone(),
                line: i + 1,
                detail: "expected 4 tab-separated fields".into(),
            });
        }
        let bad = |detail: String| Error::MalformedFile {
            what: "document record",
            path: docs_path.clone(),
            line: i + 1,
            detail,
        };
        let doc_id: usize = fields[0].parse().map_err(|_| bad("bad doc id".into()))?;
        if doc_id != docs.len() {
            return Err(bad(format!("doc ids not contiguous at {doc_id}")));
        }
        let time_category: usize = fields[1]
            .parse()
            .map_err(|_| bad("bad time category".into()))?;
        let timestamp = parse_epoch(fields[2], &docs_path, i + 1)?;
        let mut tokens = Vec::new();
        for tok in fields[3].split_whitespace() {
            let id: u32 = tok
                .parse()
                .map_err(|_| bad(format!("bad token id {tok:?}")))?;
            tokens.push(id);
        }
        docs.push(Document {
            doc_id,
            tokens,
            sentences: Vec::new(),
            timestamp,
            time_category,
        });
    }

    let sent_path = dir.join(SENTENCES_FILE);
    let body = fs::read_to_string(&sent_path).map_err(|e| Error::io(&sent_path, e))?;
    for (i, line) in body.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedFile {
                what: "sentence record",
                path: sent_path.clone(),
                line: i + 1,
                detail: "expected 4 tab-separated fields".into(),
            });
        }
        let bad = |detail: String| Error::MalformedFile {
            what: "sentence record",
            path: sent_path.clone(),
            line: i + 1,
            detail,
        };
        let doc_id: usize = fields[0].parse().map_err(|_| bad("bad doc id".into()))?;
        let sent_idx: usize = fields[1]
            .parse()
            .map_err(|_| bad("bad sentence index".into()))?;
        let timestamp = parse_epoch(fields[2], &sent_path, i + 1)?;
        let doc = docs
            .get_mut(doc_id)
            .ok_or_else(|| bad(format!("sentence references unknown doc {doc_id}")))?;
        if sent_idx != doc.sentences.len() {
            return Err(bad(format!(
                "sentence indices for doc {doc_id} not contiguous at {sent_idx}"
            )));
        }
        doc.sentences.push(Sentence {
            text: fields[3].to_string(),
            token_range: 0..0,
            timestamp,
        });
    }

    // Re-derive token ranges from the display text and check the
    // concatenation against the stored ids.
    for doc in &mut docs {
        let mut cursor = 0usize;
        for (si, sent) in doc.sentences.iter_mut().enumerate() {
            let start = cursor;
            for term in tokenize_lossy(&sent.text) {
                if let Some(id) = vocab.id(&term) {
                    if doc.tokens.get(cursor) != Some(&id) {
                        return Err(Error::CorruptCorpus(
                            dir.to_path_buf(),
                            format!(
                                "doc {} sentence {si}: token stream does not match sentence text",
                                doc.doc_id
                            ),
                        ));
                    }
                    cursor += 1;
                }
            }
            sent.token_range = start..cursor;
        }
        if cursor != doc.tokens.len() {
            return Err(Error::CorruptCorpus(
                dir.to_path_buf(),
                format!(
                    "doc {}: sentences cover {cursor} of {} stored tokens",
                    doc.doc_id,
                    doc.tokens.len()
                ),
            ));
        }
    }

    Corpus::from_raw_parts(docs, vocab, grid)
}
