//! Patent metadata and the citation edge list.
//!
//! Input is pre-extracted CSV (see the README for columns). Validation
//! drops bad patent rows into a rejects report, or aborts on the first one
//! in strict mode. Citation edges are deduplicated, and edges pointing
//! outside the corpus are dropped and counted.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::ipc::{parse_ipc, IpcCode};

pub const PATENT_HEADER: [&str; 7] = [
    "patent_id",
    "grant_date",
    "abstract",
    "ipc_codes",
    "assignee_kind",
    "assignee_id",
    "is_utility",
];
pub const CITATION_HEADER: [&str; 2] = ["sender_id", "receiver_id"];

/// Calendar date stored as days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GrantDate(pub i32);

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

impl GrantDate {
    pub fn from_naive(date: NaiveDate) -> Self {
        GrantDate((date - epoch()).num_days() as i32)
    }

    pub fn from_ymd(y: i32, m: u32, d: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(y, m, d).map(Self::from_naive)
    }

    pub fn parse(s: &str) -> Option<Self> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .ok()
            .map(Self::from_naive)
    }

    pub fn to_naive(self) -> NaiveDate {
        epoch() + chrono::Duration::days(self.0 as i64)
    }

    pub fn year(self) -> i32 {
        self.to_naive().year()
    }

    pub fn days(self) -> i32 {
        self.0
    }
}

impl fmt::Display for GrantDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_naive().format("%Y-%m-%d"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssigneeKind {
    Organization,
    Individual,
    Unknown,
}

impl AssigneeKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "org" => Some(AssigneeKind::Organization),
            "individual" => Some(AssigneeKind::Individual),
            "unknown" => Some(AssigneeKind::Unknown),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AssigneeKind::Organization => "org",
            AssigneeKind::Individual => "individual",
            AssigneeKind::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentRecord {
    pub patent_id: String,
    pub grant_date: GrantDate,
    pub abstract_text: String,
    pub ipc_codes: Vec<IpcCode>,
    pub assignee_kind: AssigneeKind,
    /// Empty exactly when the kind is `Unknown`.
    pub assignee_id: String,
    pub is_utility: bool,
}

impl PatentRecord {
    pub fn is_org(&self) -> bool {
        self.assignee_kind == AssigneeKind::Organization
    }
}

/// Citing (sender) to cited (receiver).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CitationEdge {
    pub sender_id: String,
    pub receiver_id: String,
}

impl CitationEdge {
    pub fn new(sender: impl Into<String>, receiver: impl Into<String>) -> Self {
        CitationEdge {
            sender_id: sender.into(),
            receiver_id: receiver.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDigest {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
}

/// Validated patents and citations. Immutable once built; share by reference.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    patents: Vec<PatentRecord>,
    index: HashMap<String, usize>,
    edges: Vec<CitationEdge>,
    pub provenance: Vec<SourceDigest>,
}

impl CorpusStore {
    /// Builds a store from already-validated parts. Duplicate patent ids
    /// and edges with unknown endpoints are rejected.
    pub fn from_parts(patents: Vec<PatentRecord>, edges: Vec<CitationEdge>) -> Result<Self> {
        let mut store = CorpusStore::default();
        for p in patents {
            if store.index.contains_key(&p.patent_id) {
                return Err(CoreError::Invalid(format!("duplicate patent id `{}`", p.patent_id)));
            }
            store.index.insert(p.patent_id.clone(), store.patents.len());
            store.patents.push(p);
        }
        for e in &edges {
            if !store.contains(&e.sender_id) || !store.contains(&e.receiver_id) {
                return Err(CoreError::Invalid(format!(
                    "edge {} -> {} has an unknown endpoint",
                    e.sender_id, e.receiver_id
                )));
            }
        }
        store.edges = edges;
        Ok(store)
    }

    pub fn patents(&self) -> &[PatentRecord] {
        &self.patents
    }

    pub fn edges(&self) -> &[CitationEdge] {
        &self.edges
    }

    pub fn patent(&self, id: &str) -> Option<&PatentRecord> {
        self.index.get(id).map(|&i| &self.patents[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.patents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patents.is_empty()
    }

    /// Backward-citation count per sender in the validated edge set.
    pub fn out_degrees(&self) -> HashMap<&str, usize> {
        let mut deg = HashMap::new();
        for e in &self.edges {
            *deg.entry(e.sender_id.as_str()).or_insert(0) += 1;
        }
        deg
    }

    /// Order-insensitive equality of patents and edges.
    pub fn same_content(&self, other: &CorpusStore) -> bool {
        let mut a: Vec<&PatentRecord> = self.patents.iter().collect();
        let mut b: Vec<&PatentRecord> = other.patents.iter().collect();
        a.sort_by(|x, y| x.patent_id.cmp(&y.patent_id));
        b.sort_by(|x, y| x.patent_id.cmp(&y.patent_id));
        let mut ea = self.edges.clone();
        let mut eb = other.edges.clone();
        ea.sort();
        eb.sort();
        a == b && ea == eb
    }

    pub fn write_patents(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CoreError::csv(path, e))?;
        w.write_record(PATENT_HEADER).map_err(|e| CoreError::csv(path, e))?;
        for p in &self.patents {
            let codes: Vec<String> = p.ipc_codes.iter().map(|c| c.to_string()).collect();
            w.write_record([
                p.patent_id.as_str(),
                &p.grant_date.to_string(),
                &p.abstract_text,
                &codes.join(";"),
                p.assignee_kind.as_str(),
                &p.assignee_id,
                if p.is_utility { "true" } else { "false" },
            ])
            .map_err(|e| CoreError::csv(path, e))?;
        }
        w.flush().map_err(|e| CoreError::io(path, e))
    }

    pub fn write_citations(&self, path: &Path) -> Result<()> {
        write_edges(path, &self.edges)
    }
}

pub fn write_edges(path: &Path, edges: &[CitationEdge]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CoreError::csv(path, e))?;
    w.write_record(CITATION_HEADER).map_err(|e| CoreError::csv(path, e))?;
    for e in edges {
        w.write_record([&e.sender_id, &e.receiver_id])
            .map_err(|e| CoreError::csv(path, e))?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based data row number (the header is not counted).
    pub row_number: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub accepted: usize,
    pub rejects: Vec<Reject>,
}

impl IngestReport {
    pub fn write_rejects(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CoreError::csv(path, e))?;
        w.write_record(["row_number", "reason"])
            .map_err(|e| CoreError::csv(path, e))?;
        for r in &self.rejects {
            w.write_record([r.row_number.to_string(), r.reason.clone()])
                .map_err(|e| CoreError::csv(path, e))?;
        }
        w.flush().map_err(|e| CoreError::io(path, e))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub strict: bool,
    /// Latest acceptable grant date; defaults to the run date.
    pub max_date: GrantDate,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            strict: false,
            max_date: GrantDate::from_naive(chrono::Local::now().date_naive()),
        }
    }
}

fn min_date() -> GrantDate {
    GrantDate::from_ymd(1790, 1, 1).expect("valid date")
}

/// SHA-256 hex digest of a file.
pub fn file_digest(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CoreError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn open_csv(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(file);
    let header = reader.headers().map_err(|e| CoreError::csv(path, e))?.clone();
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(CoreError::MalformedHeader {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(reader)
}

fn parse_patent_row(record: &csv::StringRecord, max_date: GrantDate) -> std::result::Result<PatentRecord, String> {
    if record.len() != PATENT_HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            PATENT_HEADER.len(),
            record.len()
        ));
    }
    let patent_id = record[0].trim().to_string();
    if patent_id.is_empty() {
        return Err("empty patent_id".into());
    }
    let grant_date = GrantDate::parse(&record[1]).ok_or("invalid date")?;
    if grant_date < min_date() || grant_date > max_date {
        return Err("date out of range".into());
    }
    let ipc_codes = record[3]
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_ipc)
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let assignee_kind = AssigneeKind::parse(&record[4]).ok_or("invalid assignee_kind")?;
    let assignee_id = record[5].trim().to_string();
    if (assignee_kind == AssigneeKind::Unknown) != assignee_id.is_empty() {
        return Err("assignee_id must be empty exactly when assignee_kind is unknown".into());
    }
    let is_utility = match record[6].trim().to_ascii_lowercase().as_str() {
        "true" => true,
        "false" => false,
        _ => return Err("invalid is_utility".into()),
    };
    Ok(PatentRecord {
        patent_id,
        grant_date,
        abstract_text: record[2].to_string(),
        ipc_codes,
        assignee_kind,
        assignee_id,
        is_utility,
    })
}

/// Reads and validates `patents.csv`.
pub fn ingest_patents(path: &Path, options: &IngestOptions) -> Result<(CorpusStore, IngestReport)> {
    let digest = file_digest(path)?;
    let mut reader = open_csv(path, &PATENT_HEADER)?;
    let mut report = IngestReport::default();
    let mut patents = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let row_number = i + 1;
        report.rows_read += 1;
        let outcome = record
            .map_err(|e| format!("unreadable row: {e}"))
            .and_then(|r| parse_patent_row(&r, options.max_date))
            .and_then(|p| {
                if seen.contains(&p.patent_id) {
                    Err(format!("duplicate patent_id `{}`", p.patent_id))
                } else {
                    Ok(p)
                }
            });
        match outcome {
            Ok(p) => {
                seen.insert(p.patent_id.clone());
                patents.push(p);
            }
            Err(reason) if options.strict => {
                return Err(CoreError::InvalidRow {
                    path: path.to_path_buf(),
                    row: row_number,
                    reason,
                });
            }
            Err(reason) => report.rejects.push(Reject { row_number, reason }),
        }
    }
    report.accepted = patents.len();
    if !report.rejects.is_empty() {
        log::warn!("{}: rejected {} patent rows", path.display(), report.rejects.len());
    }
    let mut store = CorpusStore::from_parts(patents, Vec::new())?;
    store.provenance.push(SourceDigest {
        path: path.display().to_string(),
        sha256: digest,
        rows: report.rows_read,
    });
    Ok((store, report))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationReport {
    pub raw: usize,
    pub attached: usize,
    pub self_citations: usize,
    pub dangling: usize,
    pub duplicates: usize,
}

impl CitationReport {
    pub fn dropped(&self) -> usize {
        self.self_citations + self.dangling + self.duplicates
    }
}

/// Validates an edge list against the corpus: self-citations are rejected,
/// edges with an endpoint outside the corpus are dropped as dangling, and
/// repeated edges keep their first occurrence.
pub fn attach_edges(
    corpus: CorpusStore,
    raw_edges: impl IntoIterator<Item = CitationEdge>,
) -> (CorpusStore, CitationReport) {
    let mut corpus = corpus;
    let mut report = CitationReport::default();
    let mut seen: HashSet<CitationEdge> = corpus.edges.iter().cloned().collect();
    for edge in raw_edges {
        report.raw += 1;
        if edge.sender_id == edge.receiver_id {
            report.self_citations += 1;
        } else if !corpus.contains(&edge.sender_id) || !corpus.contains(&edge.receiver_id) {
            report.dangling += 1;
        } else if !seen.insert(edge.clone()) {
            report.duplicates += 1;
        } else {
            corpus.edges.push(edge);
            report.attached += 1;
        }
    }
    if report.dropped() > 0 {
        log::info!(
            "citations: {} attached, {} self, {} dangling, {} duplicate",
            report.attached,
            report.self_citations,
            report.dangling,
            report.duplicates
        );
    }
    (corpus, report)
}

/// Reads `citations.csv` and attaches its edges to `corpus`.
pub fn ingest_citations(path: &Path, corpus: CorpusStore) -> Result<(CorpusStore, CitationReport)> {
    let digest = file_digest(path)?;
    let mut reader = open_csv(path, &CITATION_HEADER)?;
    let mut edges = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CoreError::csv(path, e))?;
        if record.len() != 2 || record[0].trim().is_empty() || record[1].trim().is_empty() {
            return Err(CoreError::InvalidRow {
                path: path.to_path_buf(),
                row: i + 1,
                reason: "expected `sender_id,receiver_id`".into(),
            });
        }
        edges.push(CitationEdge::new(record[0].trim(), record[1].trim()));
    }
    let rows = edges.len();
    let (mut corpus, report) = attach_edges(corpus, edges);
    corpus.provenance.push(SourceDigest {
        path: path.display().to_string(),
        sha256: digest,
        rows,
    });
    Ok((corpus, report))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub removed_patents: usize,
    pub removed_edges: usize,
}

/// Drops non-utility patents and every edge touching them.
pub fn filter_utility(corpus: &CorpusStore) -> (CorpusStore, FilterReport) {
    let keep: Vec<PatentRecord> = corpus.patents.iter().filter(|p| p.is_utility).cloned().collect();
    let removed_patents = corpus.patents.len() - keep.len();
    let ids: HashSet<&str> = keep.iter().map(|p| p.patent_id.as_str()).collect();
    let edges: Vec<CitationEdge> = corpus
        .edges
        .iter()
        .filter(|e| ids.contains(e.sender_id.as_str()) && ids.contains(e.receiver_id.as_str()))
        .cloned()
        .collect();
    let removed_edges = corpus.edges.len() - edges.len();
    let mut out = CorpusStore::from_parts(keep, edges).expect("subset of a valid corpus");
    out.provenance = corpus.provenance.clone();
    (
        out,
        FilterReport {
            removed_patents,
            removed_edges,
        },
    )
}

/// Writes bytes to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = File::create(&tmp).map_err(|e| CoreError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| CoreError::io(&tmp, e))?;
        f.sync_all().map_err(|e| CoreError::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| CoreError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    const HEADER: &str = "patent_id,grant_date,abstract,ipc_codes,assignee_kind,assignee_id,is_utility\n";

    #[test]
    fn grant_date_arithmetic() {
        let a = GrantDate::parse("1990-01-11").unwrap();
        let b = GrantDate::parse("1990-01-01").unwrap();
        assert_eq!(a.days() - b.days(), 10);
        assert_eq!(GrantDate::parse("1970-01-01").unwrap().days(), 0);
        assert_eq!(a.to_string(), "1990-01-11");
        assert_eq!(a.year(), 1990);
        assert!(GrantDate::parse("1990-13-01").is_none());
    }

    #[test]
    fn parses_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "p.csv",
            &format!("{HEADER}P1,1990-06-01,\"A widget, with a comma\",A01C 3/04,org,IBM,true\n"),
        );
        let (store, report) = ingest_patents(&path, &IngestOptions::default()).unwrap();
        assert_eq!(report.accepted, 1);
        let p = store.patent("P1").unwrap();
        assert_eq!(p.ipc_codes.len(), 1);
        assert_eq!(p.abstract_text, "A widget, with a comma");
        assert_eq!(p.assignee_kind, AssigneeKind::Organization);
        assert_eq!(p.assignee_id, "IBM");
        assert!(p.is_utility);
        assert_eq!(store.provenance.len(), 1);
        assert_eq!(store.provenance[0].sha256.len(), 64);
    }

    #[test]
    fn invalid_date_and_duplicate_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{HEADER}P1,1990-13-01,x,,unknown,,true\nP2,1990-01-01,x,,unknown,,true\nP2,1991-01-01,y,,unknown,,true\n"
        );
        let path = write(&dir, "p.csv", &body);
        let (store, report) = ingest_patents(&path, &IngestOptions::default()).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(report.rejects.len(), 2);
        assert_eq!(report.rejects[0].row_number, 1);
        assert_eq!(report.rejects[0].reason, "invalid date");
        assert_eq!(report.rejects[1].row_number, 3);
        assert!(report.rejects[1].reason.contains("duplicate"));
    }

    #[test]
    fn strict_mode_aborts_with_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEADER}P1,1990-01-01,x,,unknown,,true\nP2,1789-12-31,x,,unknown,,true\n");
        let path = write(&dir, "p.csv", &body);
        let opts = IngestOptions {
            strict: true,
            ..IngestOptions::default()
        };
        let err = ingest_patents(&path, &opts).unwrap_err();
        assert!(matches!(err, CoreError::InvalidRow { row: 2, .. }), "{err}");
    }

    #[test]
    fn future_dates_and_bad_fields_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{HEADER}P1,2999-01-01,x,,unknown,,true\nP2,1990-01-01,x,Z99,unknown,,true\nP3,1990-01-01,x,,org,,true\nP4,1990-01-01,x,,robot,R,true\nP5,1990-01-01,x,,unknown,,maybe\nP6,1990-01-01,x\n"
        );
        let path = write(&dir, "p.csv", &body);
        let (store, report) = ingest_patents(&path, &IngestOptions::default()).unwrap();
        assert!(store.is_empty());
        assert_eq!(report.rejects.len(), 6);
    }

    #[test]
    fn malformed_header_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "p.csv", "id,date\nP1,1990-01-01\n");
        assert!(matches!(
            ingest_patents(&path, &IngestOptions::default()),
            Err(CoreError::MalformedHeader { .. })
        ));
        assert!(matches!(
            ingest_patents(&dir.path().join("missing.csv"), &IngestOptions::default()),
            Err(CoreError::Io { .. })
        ));
    }

    fn record(id: &str, utility: bool) -> PatentRecord {
        PatentRecord {
            patent_id: id.into(),
            grant_date: GrantDate::from_ymd(2000, 1, 1).unwrap(),
            abstract_text: String::new(),
            ipc_codes: vec![],
            assignee_kind: AssigneeKind::Unknown,
            assignee_id: String::new(),
            is_utility: utility,
        }
    }

    #[test]
    fn edges_validated() {
        let corpus = CorpusStore::from_parts(vec![record("P1", true), record("P2", true)], vec![]).unwrap();
        let raw = vec![
            CitationEdge::new("P1", "P2"),
            CitationEdge::new("P1", "P1"),
            CitationEdge::new("P1", "PX"),
            CitationEdge::new("P1", "P2"),
        ];
        let (corpus, report) = attach_edges(corpus, raw);
        assert_eq!(corpus.edges(), &[CitationEdge::new("P1", "P2")]);
        assert_eq!(report.self_citations, 1);
        assert_eq!(report.dangling, 1);
        assert_eq!(report.duplicates, 1);
        assert_eq!(report.attached + report.dropped(), report.raw);
    }

    #[test]
    fn malformed_citation_row_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "c.csv", "sender_id,receiver_id\nP1\n");
        let corpus = CorpusStore::from_parts(vec![record("P1", true)], vec![]).unwrap();
        assert!(matches!(
            ingest_citations(&path, corpus),
            Err(CoreError::InvalidRow { row: 1, .. })
        ));
    }

    #[test]
    fn utility_filter() {
        let patents = vec![record("P1", true), record("P2", true), record("P3", false)];
        let edges = vec![
            CitationEdge::new("P1", "P3"),
            CitationEdge::new("P3", "P2"),
            CitationEdge::new("P1", "P2"),
        ];
        let corpus = CorpusStore::from_parts(patents, edges).unwrap();
        let (filtered, report) = filter_utility(&corpus);
        assert_eq!(filtered.len(), 2);
        assert_eq!(filtered.edges(), &[CitationEdge::new("P1", "P2")]);
        assert_eq!(report.removed_patents, 1);
        assert_eq!(report.removed_edges, 2);

        let (again, report2) = filter_utility(&filtered);
        assert!(again.same_content(&filtered));
        assert_eq!(report2, FilterReport::default());

        let (empty, _) = filter_utility(&CorpusStore::default());
        assert!(empty.is_empty());
    }
}
