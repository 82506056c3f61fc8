//! Bibliographic record model, corpus ingestion, and reference linking.
//!
//! A corpus is an ordered set of article records keyed by normalised DOI
//! together with a citing window (years whose papers' reference lists are
//! analysed) and a cited window (years whose papers are eligible
//! citation targets). Ingestion never aborts on a malformed row: rows
//! are either accepted or collected into a rejection report of
//! `{line, reason}` entries.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use thiserror::Error;

pub const DEFAULT_CITING_WINDOW: (i32, i32) = (2009, 2018);
pub const DEFAULT_CITED_WINDOW: (i32, i32) = (1995, 2018);

/// Month used when a record carries no publication month.
pub const DEFAULT_MONTH: u8 = 6;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("corpus is empty after ingestion")]
    Empty,
    #[error("duplicate doi {0}")]
    DuplicateDoi(String),
    #[error("record {doi} has no {field}")]
    MissingField { doi: String, field: &'static str },
    #[error("value count {got} does not match record count {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Normalises a DOI for use as a corpus key: trims whitespace,
/// lowercases, and strips resolver prefixes (`https://doi.org/`,
/// `http://dx.doi.org/`, and friends) and a leading `doi:`.
pub fn normalize_doi(raw: &str) -> String {
    let mut s = raw.trim().to_lowercase();
    for prefix in [
        "https://doi.org/",
        "http://doi.org/",
        "https://dx.doi.org/",
        "http://dx.doi.org/",
        "doi:",
    ] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest.trim_start().to_string();
        }
    }
    s
}

/// Calendar month as a single orderable index (`year * 12 + month - 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonthIdx(pub i32);

impl MonthIdx {
    pub fn new(year: i32, month: u8) -> Self {
        assert!((1..=12).contains(&month), "month out of range: {month}");
        MonthIdx(year * 12 + month as i32 - 1)
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(12)
    }

    pub fn month(self) -> u8 {
        (self.0.rem_euclid(12) + 1) as u8
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub doi: String,
    pub journal: String,
    pub pub_year: i32,
    pub pub_month: u8,
    pub is_review: bool,
    /// Author names in byline order, either `Given Family` or
    /// `F. M. Family`.
    pub authors: Vec<String>,
    /// Normalised DOIs cited by this record, duplicates collapsed.
    pub references: Vec<String>,
    pub subfield: Option<String>,
    pub inbound_citation_count: Option<u32>,
}

impl ArticleRecord {
    pub fn month_idx(&self) -> MonthIdx {
        MonthIdx::new(self.pub_year, self.pub_month)
    }
}

/// One rejection-report entry; serialised as JSON lines.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportEntry {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParseReport {
    /// Rows dropped, with the input line they came from.
    pub rejections: Vec<ReportEntry>,
    /// Rows kept but adjusted (e.g. duplicate references collapsed).
    pub notes: Vec<ReportEntry>,
}

impl ParseReport {
    /// Writes rejections followed by notes as `{line, reason}` JSON lines.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), CorpusError> {
        for entry in self.rejections.iter().chain(&self.notes) {
            serde_json::to_writer(&mut w, entry).map_err(std::io::Error::other)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    records: Vec<ArticleRecord>,
    by_doi: HashMap<String, usize>,
    pub citing_window: (i32, i32),
    pub cited_window: (i32, i32),
}

impl Corpus {
    /// Builds a corpus from already-normalised records, enforcing unique
    /// DOIs.
    pub fn new(records: Vec<ArticleRecord>) -> Result<Self, CorpusError> {
        if records.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut by_doi = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if by_doi.insert(r.doi.clone(), i).is_some() {
                return Err(CorpusError::DuplicateDoi(r.doi.clone()));
            }
        }
        Ok(Corpus {
            records,
            by_doi,
            citing_window: DEFAULT_CITING_WINDOW,
            cited_window: DEFAULT_CITED_WINDOW,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, idx: usize) -> &ArticleRecord {
        &self.records[idx]
    }

    pub fn records(&self) -> &[ArticleRecord] {
        &self.records
    }

    pub fn index_of(&self, doi: &str) -> Option<usize> {
        self.by_doi.get(doi).copied()
    }

    pub fn get(&self, doi: &str) -> Option<&ArticleRecord> {
        self.index_of(doi).map(|i| &self.records[i])
    }

    pub fn in_citing_window(&self, idx: usize) -> bool {
        let y = self.records[idx].pub_year;
        y >= self.citing_window.0 && y <= self.citing_window.1
    }

    pub fn in_cited_window(&self, idx: usize) -> bool {
        let y = self.records[idx].pub_year;
        y >= self.cited_window.0 && y <= self.cited_window.1
    }

    /// Serialises the corpus as JSON lines in record order. Parsing the
    /// output reproduces the corpus exactly, and re-serialising it
    /// reproduces the bytes.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), CorpusError> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::other)?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Inbound citation counts for every record, for median splits.
    pub fn inbound_citation_values(&self) -> Result<Vec<f64>, CorpusError> {
        self.records
            .iter()
            .map(|r| {
                r.inbound_citation_count
                    .map(|c| c as f64)
                    .ok_or_else(|| CorpusError::MissingField {
                        doi: r.doi.clone(),
                        field: "inbound_citation_count",
                    })
            })
            .collect()
    }
}

pub struct ParseOutcome {
    pub corpus: Result<Corpus, CorpusError>,
    pub report: ParseReport,
}

/// Parses a corpus from JSON lines or CSV. Malformed rows are collected
/// into the report rather than aborting the parse; the corpus itself is
/// an error only when unreadable or empty after rejection.
pub fn parse_corpus<R: BufRead>(reader: R, format: CorpusFormat) -> ParseOutcome {
    match format {
        CorpusFormat::Jsonl => parse_jsonl(reader),
        CorpusFormat::Csv => parse_csv(reader),
    }
}

struct RowCollector {
    records: Vec<ArticleRecord>,
    seen: HashSet<String>,
    report: ParseReport,
}

impl RowCollector {
    fn new() -> Self {
        RowCollector {
            records: Vec::new(),
            seen: HashSet::new(),
            report: ParseReport::default(),
        }
    }

    fn reject(&mut self, line: usize, reason: impl Into<String>) {
        self.report.rejections.push(ReportEntry {
            line,
            reason: reason.into(),
        });
    }

    fn accept(&mut self, line: usize, mut record: ArticleRecord) {
        if !self.seen.insert(record.doi.clone()) {
            self.reject(line, format!("duplicate doi {}", record.doi));
            return;
        }
        // Duplicate references count once downstream; keep the first copy.
        let mut seen_refs = HashSet::new();
        let before = record.references.len();
        record.references.retain(|r| seen_refs.insert(r.clone()));
        if record.references.len() < before {
            self.report.notes.push(ReportEntry {
                line,
                reason: format!(
                    "collapsed {} duplicate reference(s) in {}",
                    before - record.references.len(),
                    record.doi
                ),
            });
        }
        self.records.push(record);
    }

    fn finish(self) -> ParseOutcome {
        ParseOutcome {
            corpus: Corpus::new(self.records),
            report: self.report,
        }
    }
}

fn parse_jsonl<R: BufRead>(reader: R) -> ParseOutcome {
    let mut rows = RowCollector::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                rows.reject(line_no, format!("unreadable line: {e}"));
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                rows.reject(line_no, format!("invalid json: {e}"));
                continue;
            }
        };
        match record_from_value(&value) {
            Ok(record) => rows.accept(line_no, record),
            Err(reason) => rows.reject(line_no, reason),
        }
    }
    rows.finish()
}

fn record_from_value(v: &serde_json::Value) -> Result<ArticleRecord, String> {
    let obj = v.as_object().ok_or("row is not a json object")?;
    let doi = normalize_doi(
        obj.get("doi")
            .and_then(|d| d.as_str())
            .ok_or("missing doi")?,
    );
    if doi.is_empty() {
        return Err("empty doi".into());
    }
    let journal = obj
        .get("journal")
        .and_then(|j| j.as_str())
        .map(str::trim)
        .filter(|j| !j.is_empty())
        .ok_or("missing journal")?
        .to_string();
    let pub_year = obj
        .get("pub_year")
        .and_then(|y| y.as_i64())
        .ok_or("missing or non-integer pub_year")? as i32;
    let pub_month = match obj.get("pub_month") {
        None | Some(serde_json::Value::Null) => DEFAULT_MONTH,
        Some(m) => {
            let m = m.as_i64().ok_or("pub_month is not an integer")?;
            if !(1..=12).contains(&m) {
                return Err(format!("pub_month {m} out of range 1..=12"));
            }
            m as u8
        }
    };
    let is_review = match obj.get("is_review") {
        None | Some(serde_json::Value::Null) => false,
        Some(b) => b.as_bool().ok_or("is_review is not a boolean")?,
    };
    let authors = obj
        .get("authors")
        .and_then(|a| a.as_array())
        .ok_or("missing authors")?
        .iter()
        .map(|a| {
            a.as_str()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .ok_or("author entry is not a non-empty string".to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    if authors.is_empty() {
        return Err("empty author list".into());
    }
    let references = match obj.get("references") {
        None | Some(serde_json::Value::Null) => Vec::new(),
        Some(r) => r
            .as_array()
            .ok_or("references is not an array")?
            .iter()
            .map(|d| {
                d.as_str()
                    .map(normalize_doi)
                    .filter(|s| !s.is_empty())
                    .ok_or("reference entry is not a non-empty string".to_string())
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let subfield = match obj.get("subfield") {
        None | Some(serde_json::Value::Null) => None,
        Some(s) => Some(
            s.as_str()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or("subfield is not a non-empty string")?
                .to_string(),
        ),
    };
    let inbound_citation_count = match obj.get("inbound_citation_count") {
        None | Some(serde_json::Value::Null) => None,
        Some(c) => {
            let c = c.as_i64().ok_or("inbound_citation_count is not an integer")?;
            if c < 0 {
                return Err("inbound_citation_count is negative".into());
            }
            Some(c as u32)
        }
    };
    Ok(ArticleRecord {
        doi,
        journal,
        pub_year,
        pub_month,
        is_review,
        authors,
        references,
        subfield,
        inbound_citation_count,
    })
}

fn parse_csv<R: BufRead>(reader: R) -> ParseOutcome {
    let mut rows = RowCollector::new();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            rows.reject(1, format!("unreadable header: {e}"));
            return rows.finish();
        }
    };
    let col = |name: &str| headers.iter().position(|h| h == name);
    let columns: HashMap<&str, Option<usize>> = [
        "doi",
        "journal",
        "pub_year",
        "pub_month",
        "is_review",
        "authors",
        "references",
        "subfield",
        "inbound_citation_count",
    ]
    .into_iter()
    .map(|n| (n, col(n)))
    .collect();
    for (i, result) in rdr.records().enumerate() {
        let line_no = i + 2; // header occupies line 1
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                rows.reject(line_no, format!("unreadable row: {e}"));
                continue;
            }
        };
        let fields: HashMap<&str, &str> = columns
            .iter()
            .filter_map(|(&name, &idx)| {
                let value = idx.and_then(|i| record.get(i)).map(str::trim)?;
                (!value.is_empty()).then_some((name, value))
            })
            .collect();
        match record_from_csv_fields(&fields) {
            Ok(rec) => rows.accept(line_no, rec),
            Err(reason) => rows.reject(line_no, reason),
        }
    }
    rows.finish()
}

fn record_from_csv_fields(fields: &HashMap<&str, &str>) -> Result<ArticleRecord, String> {
    let field = |name: &str| fields.get(name).copied();
    let doi = normalize_doi(field("doi").ok_or("missing doi")?);
    if doi.is_empty() {
        return Err("empty doi".into());
    }
    let journal = field("journal").ok_or("missing journal")?.to_string();
    let pub_year = field("pub_year")
        .ok_or("missing pub_year")?
        .parse::<i32>()
        .map_err(|_| "non-integer pub_year")?;
    let pub_month = match field("pub_month") {
        None => DEFAULT_MONTH,
        Some(m) => {
            let m = m.parse::<i64>().map_err(|_| "non-integer pub_month")?;
            if !(1..=12).contains(&m) {
                return Err(format!("pub_month {m} out of range 1..=12"));
            }
            m as u8
        }
    };
    let is_review = match field("is_review") {
        None => false,
        Some("true") | Some("1") => true,
        Some("false") | Some("0") => false,
        Some(other) => return Err(format!("is_review {other:?} is not a boolean")),
    };
    let authors: Vec<String> = field("authors")
        .ok_or("missing authors")?
        .split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    if authors.is_empty() {
        return Err("empty author list".into());
    }
    let references: Vec<String> = field("references")
        .map(|r| {
            r.split('|')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(normalize_doi)
                .collect()
        })
        .unwrap_or_default();
    let subfield = field("subfield").map(String::from);
    let inbound_citation_count = match field("inbound_citation_count") {
        None => None,
        Some(c) => Some(
            c.parse::<u32>()
                .map_err(|_| "inbound_citation_count is not a non-negative integer")?,
        ),
    };
    Ok(ArticleRecord {
        doi,
        journal,
        pub_year,
        pub_month,
        is_review,
        authors,
        references,
        subfield,
        inbound_citation_count,
    })
}

/// Per-edge self-citation indicators, filled in by the imbalance stage.
/// `primary` implies both broad flags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfCiteFlags {
    /// A first/last author of the citing paper is a first/last author of
    /// the cited paper.
    pub primary: bool,
    /// A first/last author of the cited paper appears anywhere on the
    /// citing paper.
    pub broad_citing: bool,
    /// A first/last author of the citing paper appears anywhere on the
    /// cited paper.
    pub broad_cited: bool,
    /// Any first/last surname is shared between the two papers.
    pub surname: bool,
}

/// Which self-citation definition removes an edge from analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfCiteDef {
    Primary,
    BroadCiting,
    BroadCited,
    SurnameStrict,
}

impl SelfCiteFlags {
    pub fn is_self(&self, def: SelfCiteDef) -> bool {
        match def {
            SelfCiteDef::Primary => self.primary,
            SelfCiteDef::BroadCiting => self.broad_citing,
            SelfCiteDef::BroadCited => self.broad_cited,
            SelfCiteDef::SurnameStrict => self.surname,
        }
    }
}

impl std::str::FromStr for SelfCiteDef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "primary" => Ok(SelfCiteDef::Primary),
            "broad_citing" => Ok(SelfCiteDef::BroadCiting),
            "broad_cited" => Ok(SelfCiteDef::BroadCited),
            "surname_strict" => Ok(SelfCiteDef::SurnameStrict),
            other => Err(format!("unknown self-citation definition {other:?}")),
        }
    }
}

impl SelfCiteDef {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelfCiteDef::Primary => "primary",
            SelfCiteDef::BroadCiting => "broad_citing",
            SelfCiteDef::BroadCited => "broad_cited",
            SelfCiteDef::SurnameStrict => "surname_strict",
        }
    }
}

/// One citation edge; indices address `Corpus` records.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CitationEdge {
    pub citing: u32,
    pub cited: u32,
    pub flags: SelfCiteFlags,
}

/// Per-record linking tallies, so the candidate-citation denominator is
/// well defined downstream. Indices parallel the corpus records.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinkCounts {
    /// References that became edges.
    pub resolved: u32,
    /// References whose DOI is not in the corpus.
    pub out_of_corpus: u32,
    /// In-corpus references excluded by a window or by date ordering.
    pub excluded: u32,
}

pub struct LinkOutcome {
    /// Edges sorted by (citing, cited) record index.
    pub edges: Vec<CitationEdge>,
    pub per_paper: Vec<LinkCounts>,
}

/// Resolves reference lists into citation edges.
///
/// An edge requires: the citing record inside the citing window, the
/// cited record inside the cited window, and the cited (year, month)
/// strictly before the citing (year, month). Records outside the citing
/// window contribute no edges and report zero counts.
pub fn link_references(corpus: &Corpus) -> LinkOutcome {
    let mut edges = Vec::new();
    let mut per_paper = vec![LinkCounts::default(); corpus.len()];
    for (citing_idx, record) in corpus.records().iter().enumerate() {
        if !corpus.in_citing_window(citing_idx) {
            continue;
        }
        let counts = &mut per_paper[citing_idx];
        let citing_month = record.month_idx();
        for reference in &record.references {
            let Some(cited_idx) = corpus.index_of(reference) else {
                counts.out_of_corpus += 1;
                continue;
            };
            let cited = corpus.record(cited_idx);
            if !corpus.in_cited_window(cited_idx) || cited.month_idx() >= citing_month {
                counts.excluded += 1;
                continue;
            }
            counts.resolved += 1;
            edges.push(CitationEdge {
                citing: citing_idx as u32,
                cited: cited_idx as u32,
                flags: SelfCiteFlags::default(),
            });
        }
    }
    edges.sort_by_key(|e| (e.citing, e.cited));
    LinkOutcome { edges, per_paper }
}

/// A corpus split at the empirical median of a per-record value.
#[derive(Clone, Debug)]
pub struct MedianSplit {
    pub median: f64,
    /// Record indices with value <= median.
    pub below_or_equal: Vec<usize>,
    /// Record indices with value > median.
    pub above: Vec<usize>,
}

/// Splits record indices at the median of `values` (one value per
/// record). Ties at the median go to the lower stratum.
pub fn stratify_by_median(corpus: &Corpus, values: &[f64]) -> Result<MedianSplit, CorpusError> {
    if values.len() != corpus.len() {
        return Err(CorpusError::LengthMismatch {
            got: values.len(),
            expected: corpus.len(),
        });
    }
    let median = crate::stats::split_median(values).ok_or(CorpusError::Empty)?;
    let mut below_or_equal = Vec::new();
    let mut above = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if v <= median {
            below_or_equal.push(i);
        } else {
            above.push(i);
        }
    }
    Ok(MedianSplit {
        median,
        below_or_equal,
        above,
    })
}
