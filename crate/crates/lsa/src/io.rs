//! Review files, mention files and small JSON helpers.
//!
//! Two review layouts are read:
//!
//! * the native JSON-lines layout, `{user, item, rating, ts, text?, triples?}`
//!   with triples as `[relation, head, dependent]` arrays;
//! * raw Amazon review dumps, `{reviewerID, asin, overall, unixReviewTime,
//!   reviewText?, triples?}`.
//!
//! `Auto` picks the layout per line by looking for `reviewerID`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lsa_core::corpus::{extract_aspect_mentions, AspectMention, DependencyTriple, RawReview};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
}

impl IoError {
    pub fn file(path: &Path, source: std::io::Error) -> Self {
        IoError::File {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True when the error means the file could not be found.
    pub fn is_missing(&self) -> bool {
        matches!(self, IoError::File { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

pub type IoResult<T> = Result<T, IoError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewFormat {
    #[default]
    Auto,
    Jsonl,
    Amazon,
}

impl FromStr for ReviewFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(ReviewFormat::Auto),
            "jsonl" => Ok(ReviewFormat::Jsonl),
            "amazon" => Ok(ReviewFormat::Amazon),
            other => Err(format!("unknown review format `{other}`")),
        }
    }
}

#[derive(Deserialize)]
struct AmazonRecord {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    overall: f64,
    #[serde(rename = "unixReviewTime")]
    unix_review_time: i64,
    #[serde(rename = "reviewText", default)]
    review_text: Option<String>,
    #[serde(default)]
    triples: Option<Vec<DependencyTriple>>,
}

impl From<AmazonRecord> for RawReview {
    fn from(r: AmazonRecord) -> Self {
        RawReview {
            user_id: r.reviewer_id,
            item_id: r.asin,
            rating: r.overall,
            timestamp: r.unix_review_time,
            // Raw dumps occasionally omit the text; an empty body still
            // counts as a record.
            text: Some(r.review_text.unwrap_or_default()),
            triples: r.triples,
        }
    }
}

/// A record that parsed but violates a review invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedReviews {
    pub reviews: Vec<RawReview>,
    pub rejected: Vec<Rejection>,
}

/// Parses one review per non-blank line, preserving order. Syntax errors are
/// fatal and name the line; invariant violations such as an out-of-range
/// rating skip the record and are listed in `rejected`.
pub fn parse_reviews<R: BufRead>(reader: R, format: ReviewFormat, path: &Path) -> IoResult<ParsedReviews> {
    let mut out = ParsedReviews::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IoError::file(path, e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let malformed = |message: String| IoError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        let amazon = match format {
            ReviewFormat::Amazon => true,
            ReviewFormat::Jsonl => false,
            ReviewFormat::Auto => value.get("reviewerID").is_some(),
        };
        let review: RawReview = if amazon {
            serde_json::from_value::<AmazonRecord>(value).map(Into::into)
        } else {
            serde_json::from_value(value)
        }
        .map_err(|e| malformed(e.to_string()))?;
        match review.validate() {
            Ok(()) => out.reviews.push(review),
            Err(e) => out.rejected.push(Rejection {
                line: line_no,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

pub fn read_reviews(path: &Path, format: ReviewFormat) -> IoResult<ParsedReviews> {
    let file = File::open(path).map_err(|e| IoError::file(path, e))?;
    parse_reviews(BufReader::new(file), format, path)
}

/// Mentions of every review, in review order.
pub fn extract_all(reviews: &[RawReview]) -> Vec<AspectMention> {
    reviews
        .iter()
        .enumerate()
        .flat_map(|(i, r)| extract_aspect_mentions(r.triples.as_deref().unwrap_or(&[]), i))
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> IoResult<()> {
    let file = File::create(path).map_err(|e| IoError::file(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(&r).map_err(|e| IoError::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        writeln!(w, "{line}").map_err(|e| IoError::file(path, e))?;
    }
    w.flush().map_err(|e| IoError::file(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> IoResult<Vec<T>> {
    let file = File::open(path).map_err(|e| IoError::file(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IoError::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| IoError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> IoResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| IoError::file(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> IoResult<T> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> IoResult<String> {
    let bytes = fs::read(path).map_err(|e| IoError::file(path, e))?;
    Ok(sha256_hex(&bytes))
}
