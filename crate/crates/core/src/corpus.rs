//! Paper corpora: ingestion, validation, seeded sampling and filtering.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::rng::seeded_rng;

pub const MIN_YEAR: i32 = 1950;
pub const MAX_YEAR: i32 = 2100;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus source {source_label}: {cause}")]
    Unreadable { source_label: String, cause: std::io::Error },
    #[error("corpus source {source_label} has a malformed CSV header: {reason}")]
    Header { source_label: String, reason: String },
    #[error("no valid rows in {source_label} ({rejected} rejected)")]
    Empty { source_label: String, rejected: usize },
    #[error("requested sample of {requested} from a corpus of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("sample size must be positive")]
    ZeroSample,
    #[error("write failed: {0}")]
    Write(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// Guess from the file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    pub venue: String,
    pub year: i32,
}

impl PaperRecord {
    pub fn venue_key(&self) -> VenueKey {
        VenueKey { venue: self.venue.clone(), year: self.year }
    }
}

/// A (venue, year) pair such as "ACL 2024".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VenueKey {
    pub venue: String,
    pub year: i32,
}

impl VenueKey {
    pub fn new(venue: impl Into<String>, year: i32) -> Self {
        VenueKey { venue: venue.into(), year }
    }
}

impl fmt::Display for VenueKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.venue, self.year)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<PaperRecord>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line_number: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    pub rejects: Vec<Reject>,
}

struct Validator {
    seen: HashSet<String>,
    records: Vec<PaperRecord>,
    rejects: Vec<Reject>,
}

impl Validator {
    fn new() -> Self {
        Validator { seen: HashSet::new(), records: Vec::new(), rejects: Vec::new() }
    }

    fn reject(&mut self, line_number: usize, reason: impl Into<String>) {
        self.rejects.push(Reject { line_number, reason: reason.into() });
    }

    fn accept(&mut self, line_number: usize, raw: RawRow) {
        match raw.into_record() {
            Ok(record) => {
                if !self.seen.insert(record.id.clone()) {
                    self.reject(line_number, format!("duplicate id {}", record.id));
                } else {
                    self.records.push(record);
                }
            }
            Err(reason) => self.reject(line_number, reason),
        }
    }

    fn finish(self, source_label: String) -> Result<Ingested, CorpusError> {
        if self.records.is_empty() {
            return Err(CorpusError::Empty { source_label, rejected: self.rejects.len() });
        }
        Ok(Ingested { corpus: Corpus { records: self.records, source: source_label }, rejects: self.rejects })
    }
}

#[derive(Default)]
struct RawRow {
    id: Option<String>,
    title: Option<String>,
    abstract_text: Option<String>,
    venue: Option<String>,
    year: Option<Result<i64, String>>,
}

impl RawRow {
    fn into_record(self) -> Result<PaperRecord, String> {
        let id = self.id.map(|s| s.trim().to_owned()).unwrap_or_default();
        if id.is_empty() {
            return Err("empty id".into());
        }
        let title = self.title.map(|s| s.trim().to_owned()).unwrap_or_default();
        if title.is_empty() {
            return Err("empty title".into());
        }
        let venue = self.venue.map(|s| s.trim().to_owned()).unwrap_or_default();
        if venue.is_empty() {
            return Err("empty venue".into());
        }
        let year = match self.year {
            None => return Err("missing year".into()),
            Some(Err(raw)) => return Err(format!("invalid year {raw:?}")),
            Some(Ok(y)) => y,
        };
        if !(MIN_YEAR as i64..=MAX_YEAR as i64).contains(&year) {
            return Err(format!("year {year} out of range"));
        }
        Ok(PaperRecord { id, title, abstract_text: self.abstract_text.unwrap_or_default(), venue, year: year as i32 })
    }
}

fn json_string(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_year(raw: &str) -> Result<i64, String> {
    raw.trim().parse::<i64>().map_err(|_| raw.to_owned())
}

/// Read a corpus file. Invalid rows are returned as rejects, never dropped.
pub fn ingest(path: &Path, format: Format) -> Result<Ingested, CorpusError> {
    let label = path.display().to_string();
    let file = File::open(path).map_err(|cause| CorpusError::Unreadable { source_label: label.clone(), cause })?;
    ingest_reader(file, format, &label)
}

pub fn ingest_reader<R: Read>(reader: R, format: Format, source_label: &str) -> Result<Ingested, CorpusError> {
    match format {
        Format::Jsonl => ingest_jsonl(reader, source_label),
        Format::Csv => ingest_csv(reader, source_label),
    }
}

fn ingest_jsonl<R: Read>(reader: R, label: &str) -> Result<Ingested, CorpusError> {
    let mut v = Validator::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_number = i + 1;
        let line = line.map_err(|cause| CorpusError::Unreadable { source_label: label.to_owned(), cause })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(&line) {
            Ok(value) => value,
            Err(e) => {
                v.reject(line_number, format!("invalid json: {e}"));
                continue;
            }
        };
        let Value::Object(map) = value else {
            v.reject(line_number, "row is not an object");
            continue;
        };
        let year = match map.get("year") {
            None | Some(Value::Null) => None,
            Some(Value::Number(n)) => Some(n.as_i64().ok_or_else(|| n.to_string())),
            Some(Value::String(s)) => Some(parse_year(s)),
            Some(other) => Some(Err(other.to_string())),
        };
        let row = RawRow {
            id: json_string(map.get("id")),
            title: json_string(map.get("title")),
            abstract_text: json_string(map.get("abstract")),
            venue: json_string(map.get("venue")),
            year,
        };
        v.accept(line_number, row);
    }
    v.finish(label.to_owned())
}

const CSV_COLUMNS: [&str; 5] = ["id", "title", "abstract", "venue", "year"];

fn ingest_csv<R: Read>(reader: R, label: &str) -> Result<Ingested, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::Header { source_label: label.to_owned(), reason: e.to_string() })?
        .clone();
    let mut positions = [0usize; 5];
    for (slot, name) in positions.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers.iter().position(|h| h.trim() == name).ok_or_else(|| CorpusError::Header {
            source_label: label.to_owned(),
            reason: format!("missing column {name}"),
        })?;
    }
    let mut v = Validator::new();
    for result in rdr.records() {
        match result {
            Ok(rec) => {
                let line_number = rec.position().map(|p| p.line() as usize).unwrap_or(0);
                let get = |k: usize| rec.get(positions[k]).map(str::to_owned);
                let row = RawRow {
                    id: get(0),
                    title: get(1),
                    abstract_text: get(2),
                    venue: get(3),
                    year: get(4).map(|y| parse_year(&y)),
                };
                v.accept(line_number, row);
            }
            Err(e) => {
                let line_number = e.position().map(|p| p.line() as usize).unwrap_or(0);
                v.reject(line_number, format!("invalid csv row: {e}"));
            }
        }
    }
    v.finish(label.to_owned())
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct (venue, year) keys in first-appearance order.
    pub fn venue_keys(&self) -> Vec<VenueKey> {
        let mut seen = HashSet::new();
        self.records.iter().map(PaperRecord::venue_key).filter(|k| seen.insert(k.clone())).collect()
    }

    /// One JSON object per line, in corpus order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

pub fn write_rejects<W: Write>(rejects: &[Reject], mut out: W) -> std::io::Result<()> {
    for r in rejects {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Uniform sample of `n` records without replacement, seeded with ChaCha8.
/// The sample keeps the input order of the chosen records.
pub fn sample(corpus: &Corpus, n: usize, seed: u64) -> Result<Corpus, CorpusError> {
    if n == 0 {
        return Err(CorpusError::ZeroSample);
    }
    if n > corpus.len() {
        return Err(CorpusError::SampleTooLarge { requested: n, available: corpus.len() });
    }
    let mut rng = seeded_rng(seed);
    let mut picked = index::sample(&mut rng, corpus.len(), n).into_vec();
    picked.sort_unstable();
    Ok(Corpus {
        records: picked.into_iter().map(|i| corpus.records[i].clone()).collect(),
        source: format!("{} (sample n={n} seed={seed})", corpus.source),
    })
}

pub fn filter(corpus: &Corpus, venue: Option<&str>, year: Option<i32>) -> Corpus {
    let records = corpus
        .records
        .iter()
        .filter(|r| venue.is_none_or(|v| r.venue == v))
        .filter(|r| year.is_none_or(|y| r.year == y))
        .cloned()
        .collect();
    Corpus { records, source: corpus.source.clone() }
}
