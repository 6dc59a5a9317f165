//! International Patent Classification codes: parsing, hierarchy keys, and
//! per-level Jaccard indices between patents.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStore, PatentRecord};
use crate::error::{CoreError, Result};

/// One IPC symbol such as `A01C 3/04`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IpcCode {
    section: char,
    class_num: u8,
    subclass: char,
    main_group: u32,
    /// Subgroup digits, at least two (`04`, `00`, `042`). Kept as digits
    /// because `3/04` and `3/040` are different symbols.
    sub_group: String,
}

/// The five nested levels of the IPC hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Section,
    Class,
    Subclass,
    MainGroup,
    SubGroup,
}

impl Level {
    pub const ALL: [Level; 5] = [
        Level::Section,
        Level::Class,
        Level::Subclass,
        Level::MainGroup,
        Level::SubGroup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Level::Section => "section",
            Level::Class => "class",
            Level::Subclass => "subclass",
            Level::MainGroup => "maingroup",
            Level::SubGroup => "subgroup",
        }
    }
}

impl FromStr for Level {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Level::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.replace(['-', '_'], "").as_str()))
            .ok_or_else(|| CoreError::Invalid(format!("unknown IPC level `{s}`")))
    }
}

impl IpcCode {
    pub fn section(&self) -> char {
        self.section
    }

    pub fn main_group(&self) -> u32 {
        self.main_group
    }

    pub fn sub_group(&self) -> &str {
        &self.sub_group
    }

    /// Key of this code at the given level. Each key starts with the
    /// coarser level's key; the main group renders as `A01C 3/00`, whose
    /// stem `A01C 3/` prefixes the subgroup key.
    pub fn key(&self, level: Level) -> String {
        match level {
            Level::Section => self.section.to_string(),
            Level::Class => format!("{}{:02}", self.section, self.class_num),
            Level::Subclass => format!("{}{:02}{}", self.section, self.class_num, self.subclass),
            Level::MainGroup => format!(
                "{}{:02}{} {}/00",
                self.section, self.class_num, self.subclass, self.main_group
            ),
            Level::SubGroup => self.to_string(),
        }
    }
}

impl fmt::Display for IpcCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{:02}{} {}/{}",
            self.section, self.class_num, self.subclass, self.main_group, self.sub_group
        )
    }
}

impl FromStr for IpcCode {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        parse_ipc(s)
    }
}

/// Parses `A01C 3/04`; internal whitespace is optional.
pub fn parse_ipc(raw: &str) -> Result<IpcCode> {
    let err = |reason: &str| CoreError::Ipc {
        raw: raw.to_string(),
        reason: reason.to_string(),
    };
    let compact: Vec<char> = raw.chars().filter(|c| !c.is_whitespace()).collect();
    let mut pos = 0;

    let section = match compact.first() {
        Some(&c) if ('A'..='H').contains(&c.to_ascii_uppercase()) => c.to_ascii_uppercase(),
        _ => return Err(err("invalid section or missing group")),
    };
    pos += 1;

    let class_digits: String = compact.iter().skip(pos).take(2).collect();
    if class_digits.len() != 2 || !class_digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(err("class must be two digits"));
    }
    let class_num: u8 = class_digits.parse().map_err(|_| err("class must be two digits"))?;
    pos += 2;

    let subclass = match compact.get(pos) {
        Some(&c) if c.is_ascii_alphabetic() => c.to_ascii_uppercase(),
        _ => return Err(err("subclass must be a letter")),
    };
    pos += 1;

    let rest: String = compact[pos..].iter().collect();
    let (main, sub) = rest
        .split_once('/')
        .ok_or_else(|| err("missing group (expected `main/sub`)"))?;
    if main.is_empty() || main.len() > 4 || !main.chars().all(|c| c.is_ascii_digit()) {
        return Err(err("main group must be 1-4 digits"));
    }
    let main_group: u32 = main.parse().map_err(|_| err("main group must be 1-4 digits"))?;
    if main_group == 0 {
        return Err(err("main group must be positive"));
    }
    if sub.is_empty() || sub.len() > 6 || !sub.chars().all(|c| c.is_ascii_digit()) {
        return Err(err("subgroup must be 1-6 digits"));
    }
    let sub_group = if sub.len() == 1 {
        format!("0{sub}")
    } else {
        sub.to_string()
    };
    Ok(IpcCode {
        section,
        class_num,
        subclass,
        main_group,
        sub_group,
    })
}

/// Distinct keys of `codes` at `level`.
pub fn level_keys(codes: &[IpcCode], level: Level) -> BTreeSet<String> {
    codes.iter().map(|c| c.key(level)).collect()
}

/// Exact Jaccard ratio `|A∩B| / |A∪B|` kept as integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JaccardRatio {
    pub intersection: usize,
    pub union: usize,
}

impl JaccardRatio {
    pub fn of<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Self {
        let intersection = a.intersection(b).count();
        JaccardRatio {
            intersection,
            union: a.len() + b.len() - intersection,
        }
    }

    /// Zero when both sets are empty.
    pub fn value(self) -> f64 {
        if self.union == 0 {
            0.0
        } else {
            self.intersection as f64 / self.union as f64
        }
    }
}

/// Jaccard index at each IPC level for a sender/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JaccardProfile {
    pub ratios: [JaccardRatio; 5],
    /// False when either patent carries no IPC codes.
    pub defined: bool,
}

impl JaccardProfile {
    pub fn at(&self, level: Level) -> f64 {
        self.ratios[level as usize].value()
    }

    pub fn values(&self) -> [f64; 5] {
        self.ratios.map(JaccardRatio::value)
    }
}

pub fn jaccard_profile(sender: &PatentRecord, receiver: &PatentRecord) -> JaccardProfile {
    jaccard_between(&sender.ipc_codes, &receiver.ipc_codes)
}

pub fn jaccard_between(a: &[IpcCode], b: &[IpcCode]) -> JaccardProfile {
    let ratios = Level::ALL.map(|level| JaccardRatio::of(&level_keys(a, level), &level_keys(b, level)));
    JaccardProfile {
        ratios,
        defined: !a.is_empty() && !b.is_empty(),
    }
}

/// Per sender-year counts of citations whose endpoints share a key at a level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithinLevelRow {
    pub year: i32,
    pub within: usize,
    pub outside: usize,
    /// Edges where either side has no IPC codes.
    pub excluded: usize,
}

/// An edge counts as within the level when the sender's and receiver's key
/// sets intersect; edges with an uncoded endpoint are excluded.
pub fn within_level_citation_counts(corpus: &CorpusStore, level: Level) -> Vec<WithinLevelRow> {
    let mut by_year: BTreeMap<i32, WithinLevelRow> = BTreeMap::new();
    for edge in corpus.edges() {
        let (Some(s), Some(r)) = (corpus.patent(&edge.sender_id), corpus.patent(&edge.receiver_id)) else {
            continue;
        };
        let year = s.grant_date.year();
        let row = by_year.entry(year).or_insert(WithinLevelRow {
            year,
            within: 0,
            outside: 0,
            excluded: 0,
        });
        if s.ipc_codes.is_empty() || r.ipc_codes.is_empty() {
            row.excluded += 1;
            continue;
        }
        let a = level_keys(&s.ipc_codes, level);
        let b = level_keys(&r.ipc_codes, level);
        if a.intersection(&b).next().is_some() {
            row.within += 1;
        } else {
            row.outside += 1;
        }
    }
    by_year.into_values().collect()
}
