//! Probabilistic gender assignment for given names.
//!
//! Sources are queried in configured order (typically a local table,
//! then a cached remote service). A source's answer is decisive when its
//! `p_woman` clears the threshold from either side; probabilities inside
//! the ambiguous band fall through to the next source, as do absent
//! names. Manual overrides supersede every source. Lookups are
//! case-insensitive and diacritic-folded, trying the full given string
//! before its first token. No failure here is ever fatal: an
//! unreachable remote simply yields an unresolved assignment.

use super::{categorize_paper, fold, AuthorTable, GenderCategory, GenderLabel};
use crate::corpus::Corpus;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderSourceKind {
    LocalTable,
    RemoteService,
    ManualOverride,
    Unresolved,
}

/// One source answer: probability the name belongs to a woman, and the
/// sample size behind it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceHit {
    pub p_woman: f64,
    pub count: u64,
}

pub trait GenderSource: Sync {
    fn kind(&self) -> GenderSourceKind;
    /// Looks up a folded name key. `None` means absent (or unreachable,
    /// which is treated the same way).
    fn lookup(&self, key: &str) -> Option<SourceHit>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenderAssignment {
    pub label: GenderLabel,
    pub p_woman: Option<f64>,
    pub source: GenderSourceKind,
}

impl GenderAssignment {
    fn unresolved() -> Self {
        GenderAssignment {
            label: GenderLabel::Unknown,
            p_woman: None,
            source: GenderSourceKind::Unresolved,
        }
    }
}

/// Lookup keys for a given name: the folded full string, then its first
/// token (hyphenated and compound names fall back to the head).
fn lookup_keys(given: &str) -> Vec<String> {
    let full = fold(given.trim());
    let head: String = full
        .split(['-', ' '])
        .next()
        .unwrap_or_default()
        .to_string();
    if head.is_empty() || head == full {
        vec![full]
    } else {
        vec![full, head]
    }
}

/// Assigns a label from ordered sources under a decision threshold
/// (woman iff `p >= threshold`, man iff `p <= 1 - threshold`). The first
/// decisive source wins; if every source is ambiguous or silent, the
/// first probability seen is kept with an unknown label.
pub fn assign_gender(
    given: &str,
    sources: &[&dyn GenderSource],
    threshold: f64,
) -> GenderAssignment {
    assert!(
        (0.5..=1.0).contains(&threshold),
        "threshold must lie in [0.5, 1]"
    );
    let keys = lookup_keys(given);
    let mut fallback: Option<GenderAssignment> = None;
    for source in sources {
        for key in &keys {
            let Some(hit) = source.lookup(key) else {
                continue;
            };
            let label = if hit.p_woman >= threshold {
                GenderLabel::Woman
            } else if hit.p_woman <= 1.0 - threshold {
                GenderLabel::Man
            } else {
                GenderLabel::Unknown
            };
            let assignment = GenderAssignment {
                label,
                p_woman: Some(hit.p_woman),
                source: source.kind(),
            };
            if label != GenderLabel::Unknown {
                return assignment;
            }
            fallback.get_or_insert(assignment);
            break; // ambiguous here; fall through to the next source
        }
    }
    fallback.unwrap_or_else(GenderAssignment::unresolved)
}

/// In-memory table loaded from `name,p_woman,count` CSV.
pub struct LocalTable {
    map: HashMap<String, SourceHit>,
}

impl LocalTable {
    pub fn from_reader<R: BufRead>(reader: R) -> std::io::Result<LocalTable> {
        let mut map = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split(',');
            let name = fields.next().unwrap_or_default().trim();
            let p: Option<f64> = fields.next().and_then(|p| p.trim().parse().ok());
            let count: u64 = fields
                .next()
                .and_then(|c| c.trim().parse().ok())
                .unwrap_or(0);
            match p {
                Some(p_woman) if (0.0..=1.0).contains(&p_woman) => {
                    map.insert(fold(name), SourceHit { p_woman, count });
                }
                _ if i == 0 => continue, // header row
                _ => {
                    return Err(std::io::Error::other(format!(
                        "gender table row {} is not `name,p_woman,count`",
                        i + 1
                    )))
                }
            }
        }
        Ok(LocalTable { map })
    }

    pub fn from_path(path: &Path) -> std::io::Result<LocalTable> {
        let file = std::fs::File::open(path)?;
        LocalTable::from_reader(std::io::BufReader::new(file))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl GenderSource for LocalTable {
    fn kind(&self) -> GenderSourceKind {
        GenderSourceKind::LocalTable
    }

    fn lookup(&self, key: &str) -> Option<SourceHit> {
        self.map.get(key).copied()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CacheEntry {
    name: String,
    p_woman: f64,
    count: u64,
    timestamp: u64,
}

/// Append-only JSON-lines cache of remote answers. Reads are shared;
/// writes go through a single writer.
pub struct GenderCache {
    path: Option<PathBuf>,
    map: Mutex<HashMap<String, SourceHit>>,
}

impl GenderCache {
    pub fn in_memory() -> GenderCache {
        GenderCache {
            path: None,
            map: Mutex::new(HashMap::new()),
        }
    }

    /// Opens (or prepares to create) a cache file.
    pub fn open(path: &Path) -> std::io::Result<GenderCache> {
        let mut map = HashMap::new();
        if path.exists() {
            let file = std::fs::File::open(path)?;
            for line in std::io::BufReader::new(file).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(e) => {
                        map.insert(
                            e.name.clone(),
                            SourceHit {
                                p_woman: e.p_woman,
                                count: e.count,
                            },
                        );
                    }
                    Err(e) => log::warn!("skipping malformed gender-cache line: {e}"),
                }
            }
        }
        Ok(GenderCache {
            path: Some(path.to_path_buf()),
            map: Mutex::new(map),
        })
    }

    pub fn get(&self, key: &str) -> Option<SourceHit> {
        self.map.lock().unwrap().get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records an answer in memory and appends it to the cache file.
    pub fn put(&self, key: &str, hit: SourceHit) {
        self.map.lock().unwrap().insert(key.to_string(), hit);
        let Some(path) = &self.path else { return };
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let entry = CacheEntry {
            name: key.to_string(),
            p_woman: hit.p_woman,
            count: hit.count,
            timestamp,
        };
        let result = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| {
                serde_json::to_writer(&mut f, &entry).map_err(std::io::Error::other)?;
                writeln!(f, "")?;
                Ok(())
            });
        if let Err(e) = result {
            log::warn!("could not append to gender cache {}: {e}", path.display());
        }
    }
}

/// HTTP JSON name-lookup endpoint behind the on-disk cache. The endpoint
/// is queried as `GET {endpoint}?name={key}` (plus `key={api_key}` when
/// configured) and must answer `{"p_woman": <0..1>, "count": <n>}`.
/// In offline mode only the cache answers. Network or decode failures
/// are logged and treated as absent names.
pub struct RemoteService {
    endpoint: String,
    api_key: Option<String>,
    offline: bool,
    cache: GenderCache,
    /// Names already found absent this run, to avoid repeat round trips.
    misses: Mutex<HashMap<String, ()>>,
}

#[derive(Deserialize)]
struct RemoteAnswer {
    p_woman: f64,
    #[serde(default)]
    count: u64,
}

impl RemoteService {
    pub fn new(
        endpoint: String,
        api_key: Option<String>,
        offline: bool,
        cache: GenderCache,
    ) -> RemoteService {
        RemoteService {
            endpoint,
            api_key,
            offline,
            cache,
            misses: Mutex::new(HashMap::new()),
        }
    }

    pub fn cache(&self) -> &GenderCache {
        &self.cache
    }

    fn fetch(&self, key: &str) -> Option<SourceHit> {
        let mut request = ureq::get(&self.endpoint).query("name", key);
        if let Some(api_key) = &self.api_key {
            request = request.query("key", api_key);
        }
        let answer: RemoteAnswer = match request.call() {
            Ok(mut response) => match response.body_mut().read_json() {
                Ok(a) => a,
                Err(e) => {
                    log::warn!("gender service returned undecodable body for {key:?}: {e}");
                    return None;
                }
            },
            Err(ureq::Error::StatusCode(404)) => return None,
            Err(e) => {
                log::warn!("gender service unreachable for {key:?}: {e}");
                return None;
            }
        };
        if !(0.0..=1.0).contains(&answer.p_woman) {
            log::warn!("gender service returned out-of-range p_woman for {key:?}");
            return None;
        }
        Some(SourceHit {
            p_woman: answer.p_woman,
            count: answer.count,
        })
    }
}

impl GenderSource for RemoteService {
    fn kind(&self) -> GenderSourceKind {
        GenderSourceKind::RemoteService
    }

    fn lookup(&self, key: &str) -> Option<SourceHit> {
        if let Some(hit) = self.cache.get(key) {
            return Some(hit);
        }
        if self.offline || self.misses.lock().unwrap().contains_key(key) {
            return None;
        }
        match self.fetch(key) {
            Some(hit) => {
                self.cache.put(key, hit);
                Some(hit)
            }
            None => {
                self.misses.lock().unwrap().insert(key.to_string(), ());
                None
            }
        }
    }
}

/// Manual corrections: name-level label overrides applied before any
/// source, and per-paper first/last overrides applied at categorisation.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Overrides {
    #[serde(default)]
    pub names: HashMap<String, GenderLabel>,
    #[serde(default)]
    pub papers: HashMap<String, PaperOverride>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PaperOverride {
    #[serde(default)]
    pub first: Option<GenderLabel>,
    #[serde(default)]
    pub last: Option<GenderLabel>,
}

impl Overrides {
    pub fn from_reader<R: std::io::Read>(reader: R) -> serde_json::Result<Overrides> {
        let mut parsed: Overrides = serde_json::from_reader(reader)?;
        parsed.names = parsed
            .names
            .into_iter()
            .map(|(k, v)| (fold(&k), v))
            .collect();
        parsed.papers = parsed
            .papers
            .into_iter()
            .map(|(k, v)| (crate::corpus::normalize_doi(&k), v))
            .collect();
        Ok(parsed)
    }

    fn name_label(&self, given: &str) -> Option<GenderLabel> {
        lookup_keys(given)
            .iter()
            .find_map(|k| self.names.get(k).copied())
    }
}

/// Per-record gender outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperGender {
    pub first: GenderLabel,
    pub last: GenderLabel,
    pub category: GenderCategory,
}

/// Full gender stage output: one assignment per identity, one category
/// per record.
pub struct GenderOutcome {
    pub assignments: Vec<GenderAssignment>,
    pub papers: Vec<PaperGender>,
}

/// Assigns a label to every identity and derives each record's category.
/// Identities without a spelled-out given name stay unknown. A
/// single-author paper takes its sole author's label for both roles.
pub fn assign_all(
    corpus: &Corpus,
    table: &AuthorTable,
    sources: &[&dyn GenderSource],
    overrides: &Overrides,
    threshold: f64,
) -> GenderOutcome {
    let assignments: Vec<GenderAssignment> = table
        .identities
        .iter()
        .map(|identity| match &identity.given {
            None => GenderAssignment::unresolved(),
            Some(given) => {
                if let Some(label) = overrides.name_label(given) {
                    GenderAssignment {
                        label,
                        p_woman: None,
                        source: GenderSourceKind::ManualOverride,
                    }
                } else {
                    assign_gender(given, sources, threshold)
                }
            }
        })
        .collect();
    let papers = (0..corpus.len())
        .map(|rec| {
            let mut first = assignments[table.first_author(rec) as usize].label;
            let mut last = assignments[table.last_author(rec) as usize].label;
            if let Some(paper_override) = overrides.papers.get(&corpus.record(rec).doi) {
                if let Some(f) = paper_override.first {
                    first = f;
                }
                if let Some(l) = paper_override.last {
                    last = l;
                }
            }
            PaperGender {
                first,
                last,
                category: categorize_paper(first, last),
            }
        })
        .collect();
    GenderOutcome {
        assignments,
        papers,
    }
}
