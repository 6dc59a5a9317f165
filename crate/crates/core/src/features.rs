//! Per-citation regression table: the similarity response plus every
//! covariate used by the model catalog.

use std::collections::HashMap;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use citesim_gam::Frame;

use crate::corpus::{AssigneeKind, CorpusStore, GrantDate};
use crate::embedding::{group_by_year, ScoredEdge, YearStat};
use crate::error::{CoreError, Result};
use crate::ipc::jaccard_profile;

pub const FEATURE_HEADER: [&str; 14] = [
    "sender_id",
    "receiver_id",
    "similarity",
    "pub_date",
    "temporal_diff_days",
    "log_sender_citations",
    "is_same_org",
    "is_sender_org",
    "is_receiver_org",
    "j_section",
    "j_class",
    "j_subclass",
    "j_maingroup",
    "j_subgroup",
];

/// Origin of the `pub_date` covariate.
pub fn pub_date_origin() -> GrantDate {
    GrantDate::from_ymd(1976, 1, 1).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub sender_id: String,
    pub receiver_id: String,
    pub similarity: f64,
    /// Sender grant date in days since 1976-01-01.
    pub pub_date: f64,
    pub temporal_diff_days: f64,
    pub log_sender_citations: f64,
    pub is_same_org: u8,
    pub is_sender_org: u8,
    pub is_receiver_org: u8,
    /// Section..subgroup Jaccard indices; `None` when either side is uncoded.
    pub jaccard: Option<[f64; 5]>,
}

impl FeatureRow {
    pub fn sender_year(&self) -> i32 {
        GrantDate(pub_date_origin().days() + self.pub_date.round() as i32).year()
    }
}

/// Counted drops sum with the row count to the number of scored edges;
/// the remaining fields are notes about rows that were kept.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    /// Scored edge with an endpoint missing from the corpus.
    pub unknown_endpoint: usize,
    /// Receiver granted after the sender.
    pub negative_lag: usize,
    /// Kept rows without IPC codes on one side (excluded from Jaccard fits).
    pub undefined_jaccard: usize,
    /// Kept rows with an unknown assignee on either side.
    pub unknown_assignee: usize,
}

impl DropReport {
    pub fn dropped(&self) -> usize {
        self.unknown_endpoint + self.negative_lag
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
    pub drops: DropReport,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

enum Built {
    Row(FeatureRow),
    UnknownEndpoint,
    NegativeLag,
}

/// Builds one row per scored edge. The sender citation count is its
/// out-degree in the validated edge set; negative lags are dropped unless
/// `keep_negative_lags` is set.
pub fn build_features(corpus: &CorpusStore, scored: &[ScoredEdge], keep_negative_lags: bool) -> FeatureTable {
    let degrees = corpus.out_degrees();
    let origin = pub_date_origin().days();
    let built: Vec<Built> = scored
        .par_iter()
        .map(|s| {
            let (Some(sender), Some(receiver)) = (corpus.patent(&s.sender_id), corpus.patent(&s.receiver_id)) else {
                return Built::UnknownEndpoint;
            };
            let lag = sender.grant_date.days() - receiver.grant_date.days();
            if lag < 0 && !keep_negative_lags {
                return Built::NegativeLag;
            }
            // a scored edge always counts towards its sender's out-degree
            let cites = degrees.get(sender.patent_id.as_str()).copied().unwrap_or(0).max(1);
            let known = sender.assignee_kind != AssigneeKind::Unknown && receiver.assignee_kind != AssigneeKind::Unknown;
            let same = known && sender.assignee_id == receiver.assignee_id;
            let profile = jaccard_profile(sender, receiver);
            Built::Row(FeatureRow {
                sender_id: s.sender_id.clone(),
                receiver_id: s.receiver_id.clone(),
                similarity: s.similarity,
                pub_date: (sender.grant_date.days() - origin) as f64,
                temporal_diff_days: lag as f64,
                log_sender_citations: (cites as f64).ln(),
                is_same_org: same as u8,
                is_sender_org: sender.is_org() as u8,
                is_receiver_org: receiver.is_org() as u8,
                jaccard: profile.defined.then(|| profile.values()),
            })
        })
        .collect();

    let mut table = FeatureTable::default();
    for b in built {
        match b {
            Built::Row(row) => {
                if row.jaccard.is_none() {
                    table.drops.undefined_jaccard += 1;
                }
                table.rows.push(row);
            }
            Built::UnknownEndpoint => table.drops.unknown_endpoint += 1,
            Built::NegativeLag => table.drops.negative_lag += 1,
        }
    }
    table.drops.unknown_assignee = table
        .rows
        .iter()
        .filter(|r| {
            let kind = |id: &str| corpus.patent(id).map(|p| p.assignee_kind);
            kind(&r.sender_id) == Some(AssigneeKind::Unknown) || kind(&r.receiver_id) == Some(AssigneeKind::Unknown)
        })
        .count();
    table
}

/// Mean temporal lag per sender grant year.
pub fn yearly_lag_stats(table: &FeatureTable) -> Vec<YearStat> {
    group_by_year(table.rows.iter().map(|r| (r.sender_year(), r.temporal_diff_days)))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub fn write_features(path: &Path, table: &FeatureTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CoreError::csv(path, e))?;
    w.write_record(FEATURE_HEADER).map_err(|e| CoreError::csv(path, e))?;
    for r in &table.rows {
        let j = |i: usize| fmt_opt(r.jaccard.map(|j| j[i]));
        w.write_record([
            r.sender_id.clone(),
            r.receiver_id.clone(),
            r.similarity.to_string(),
            r.pub_date.to_string(),
            r.temporal_diff_days.to_string(),
            r.log_sender_citations.to_string(),
            r.is_same_org.to_string(),
            r.is_sender_org.to_string(),
            r.is_receiver_org.to_string(),
            j(0),
            j(1),
            j(2),
            j(3),
            j(4),
        ])
        .map_err(|e| CoreError::csv(path, e))?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))
}

/// Reads a features CSV. The drop report is not stored in the file and
/// comes back empty.
pub fn read_features(path: &Path) -> Result<FeatureTable> {
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header = reader.headers().map_err(|e| CoreError::csv(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != FEATURE_HEADER {
        return Err(CoreError::MalformedHeader {
            path: path.to_path_buf(),
            expected: FEATURE_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CoreError::csv(path, e))?;
        let bad = |field: &str| CoreError::InvalidRow {
            path: path.to_path_buf(),
            row: i + 1,
            reason: format!("invalid {field}"),
        };
        let num = |k: usize| -> Result<f64> { rec[k].trim().parse::<f64>().map_err(|_| bad(FEATURE_HEADER[k])) };
        let flag = |k: usize| -> Result<u8> {
            match rec[k].trim() {
                "0" => Ok(0),
                "1" => Ok(1),
                _ => Err(bad(FEATURE_HEADER[k])),
            }
        };
        let jaccard = if (9..14).all(|k| rec[k].trim() == "NA") {
            None
        } else {
            Some([num(9)?, num(10)?, num(11)?, num(12)?, num(13)?])
        };
        rows.push(FeatureRow {
            sender_id: rec[0].to_string(),
            receiver_id: rec[1].to_string(),
            similarity: num(2)?,
            pub_date: num(3)?,
            temporal_diff_days: num(4)?,
            log_sender_citations: num(5)?,
            is_same_org: flag(6)?,
            is_sender_org: flag(7)?,
            is_receiver_org: flag(8)?,
            jaccard,
        });
    }
    Ok(FeatureTable {
        rows,
        drops: DropReport::default(),
    })
}

impl Frame for FeatureTable {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn response(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.similarity).collect()
    }

    fn column(&self, name: &str) -> Option<Vec<f64>> {
        let pick: fn(&FeatureRow) -> f64 = match name {
            "pub_date" => |r| r.pub_date,
            "temporal_diff_days" => |r| r.temporal_diff_days,
            "log_sender_citations" => |r| r.log_sender_citations,
            "is_same_org" => |r| r.is_same_org as f64,
            "is_sender_org" => |r| r.is_sender_org as f64,
            "is_receiver_org" => |r| r.is_receiver_org as f64,
            "j_section" => |r| r.jaccard.map_or(f64::NAN, |j| j[0]),
            "j_class" => |r| r.jaccard.map_or(f64::NAN, |j| j[1]),
            "j_subclass" => |r| r.jaccard.map_or(f64::NAN, |j| j[2]),
            "j_maingroup" => |r| r.jaccard.map_or(f64::NAN, |j| j[3]),
            "j_subgroup" => |r| r.jaccard.map_or(f64::NAN, |j| j[4]),
            _ => return None,
        };
        Some(self.rows.iter().map(pick).collect())
    }
}

/// Sender citation counts implied by a table, keyed by sender.
pub fn sender_counts(table: &FeatureTable) -> HashMap<&str, usize> {
    let mut out = HashMap::new();
    for r in &table.rows {
        *out.entry(r.sender_id.as_str()).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CitationEdge, PatentRecord};
    use crate::ipc::parse_ipc;

    fn patent(id: &str, date: &str, codes: &[&str], kind: AssigneeKind, assignee: &str) -> PatentRecord {
        PatentRecord {
            patent_id: id.into(),
            grant_date: GrantDate::parse(date).unwrap(),
            abstract_text: String::new(),
            ipc_codes: codes.iter().map(|c| parse_ipc(c).unwrap()).collect(),
            assignee_kind: kind,
            assignee_id: assignee.into(),
            is_utility: true,
        }
    }

    fn scored(a: &str, b: &str, v: f64) -> ScoredEdge {
        ScoredEdge {
            sender_id: a.into(),
            receiver_id: b.into(),
            similarity: v,
        }
    }

    fn corpus() -> CorpusStore {
        CorpusStore::from_parts(
            vec![
                patent("S", "1990-01-11", &["A01C 3/04"], AssigneeKind::Organization, "ACME"),
                patent("R", "1990-01-01", &["A01C 3/06"], AssigneeKind::Organization, "ACME"),
                patent("L", "1995-01-01", &[], AssigneeKind::Unknown, ""),
            ],
            vec![CitationEdge::new("S", "R"), CitationEdge::new("S", "L"), CitationEdge::new("R", "L")],
        )
        .unwrap()
    }

    #[test]
    fn row_fields() {
        let t = build_features(&corpus(), &[scored("S", "R", 50.0)], false);
        let r = &t.rows[0];
        assert_eq!(r.temporal_diff_days, 10.0);
        assert_eq!(r.log_sender_citations, 2f64.ln());
        assert_eq!((r.is_same_org, r.is_sender_org, r.is_receiver_org), (1, 1, 1));
        assert_eq!(r.jaccard, Some([1.0, 1.0, 1.0, 1.0, 0.0]));
        assert_eq!(r.pub_date, 5124.0);
        assert_eq!(r.sender_year(), 1990);
    }

    #[test]
    fn drop_policy() {
        let c = corpus();
        let edges = [scored("S", "L", 1.0), scored("R", "L", 2.0), scored("S", "X", 3.0)];
        let t = build_features(&c, &edges, false);
        assert_eq!(t.len(), 0);
        assert_eq!(t.drops.negative_lag, 2);
        assert_eq!(t.drops.unknown_endpoint, 1);
        assert_eq!(t.len() + t.drops.dropped(), edges.len());

        let kept = build_features(&c, &edges, true);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept.drops.undefined_jaccard, 2);
        assert_eq!(kept.drops.unknown_assignee, 2);
        assert_eq!(kept.rows[1].log_sender_citations, 0.0);
        assert_eq!(kept.rows[0].is_same_org, 0);
        assert!(kept.rows[0].jaccard.is_none());
    }

    #[test]
    fn csv_round_trip_and_frame() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let t = build_features(&corpus(), &[scored("S", "R", 50.25), scored("S", "L", -3.5)], true);
        write_features(&path, &t).unwrap();
        let back = read_features(&path).unwrap();
        assert_eq!(back.rows, t.rows);
        let j = back.column("j_subgroup").unwrap();
        assert_eq!(j[0], 0.0);
        assert!(j[1].is_nan());
        assert!(back.column("nope").is_none());
        assert_eq!(back.response(), vec![50.25, -3.5]);
    }

    #[test]
    fn lag_stats() {
        let row = |date: &str, lag: f64| FeatureRow {
            sender_id: "S".into(),
            receiver_id: "R".into(),
            similarity: 0.0,
            pub_date: (GrantDate::parse(date).unwrap().days() - pub_date_origin().days()) as f64,
            temporal_diff_days: lag,
            log_sender_citations: 0.0,
            is_same_org: 0,
            is_sender_org: 0,
            is_receiver_org: 0,
            jaccard: None,
        };
        let t = FeatureTable {
            rows: vec![row("2000-02-01", 100.0), row("2000-12-31", 300.0)],
            drops: DropReport::default(),
        };
        let s = yearly_lag_stats(&t);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].year, s[0].mean, s[0].count), (2000, 200.0, 2));
        assert!(yearly_lag_stats(&FeatureTable::default()).is_empty());
    }
}
