//! Deterministic synthetic corpora with a known response generator, used
//! for recovery tests and desk-scale pipeline runs.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{AssigneeKind, CitationEdge, CorpusStore, GrantDate, PatentRecord};
use crate::error::{CoreError, Result};
use crate::features::FeatureTable;
use crate::ipc::{parse_ipc, IpcCode, Level};

/// A known one-dimensional effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curve {
    Zero,
    /// `amplitude · sin(2πx / period)`
    Sine { amplitude: f64, period: f64 },
    /// `amplitude · (1 − exp(−x / scale))`
    Saturating { amplitude: f64, scale: f64 },
    /// `amplitude · tanh((x − center) / scale)`
    Tanh { amplitude: f64, center: f64, scale: f64 },
}

impl Curve {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Curve::Zero => 0.0,
            Curve::Sine { amplitude, period } => amplitude * (std::f64::consts::TAU * x / period).sin(),
            Curve::Saturating { amplitude, scale } => amplitude * (1.0 - (-x / scale).exp()),
            Curve::Tanh { amplitude, center, scale } => amplitude * ((x - center) / scale).tanh(),
        }
    }
}

/// Generator for similarity responses:
/// `intercept + Σ smooths + Σ linear + N(0, noise_sd²)`, clamped to ±100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub intercept: f64,
    pub pub_date: Curve,
    pub temporal_diff_days: Curve,
    pub log_sender_citations: Curve,
    pub is_same_org: f64,
    pub is_sender_org: f64,
    pub is_receiver_org: f64,
    /// Section, class, subclass, main group, subgroup.
    pub jaccard: [f64; 5],
    pub noise_sd: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        SynthProfile {
            intercept: 45.0,
            pub_date: Curve::Sine {
                amplitude: 3.0,
                period: 12_000.0,
            },
            temporal_diff_days: Curve::Saturating {
                amplitude: -6.0,
                scale: 2_500.0,
            },
            log_sender_citations: Curve::Tanh {
                amplitude: 2.5,
                center: 1.5,
                scale: 0.7,
            },
            is_same_org: 8.0,
            is_sender_org: -1.2,
            is_receiver_org: 0.9,
            jaccard: [2.2, 1.9, 2.5, 3.6, 4.2],
            noise_sd: 12.0,
        }
    }
}

impl SynthProfile {
    /// Intercept plus noise only.
    pub fn null() -> Self {
        SynthProfile {
            pub_date: Curve::Zero,
            temporal_diff_days: Curve::Zero,
            log_sender_citations: Curve::Zero,
            is_same_org: 0.0,
            is_sender_org: 0.0,
            is_receiver_org: 0.0,
            jaccard: [0.0; 5],
            ..SynthProfile::default()
        }
    }

    pub fn curve(&self, term: &str) -> Option<Curve> {
        match term {
            "pub_date" => Some(self.pub_date),
            "temporal_diff_days" => Some(self.temporal_diff_days),
            "log_sender_citations" => Some(self.log_sender_citations),
            _ => None,
        }
    }

    pub fn linear(&self, term: &str) -> Option<f64> {
        match term {
            "is_same_org" => Some(self.is_same_org),
            "is_sender_org" => Some(self.is_sender_org),
            "is_receiver_org" => Some(self.is_receiver_org),
            "j_section" => Some(self.jaccard[0]),
            "j_class" => Some(self.jaccard[1]),
            "j_subclass" => Some(self.jaccard[2]),
            "j_maingroup" => Some(self.jaccard[3]),
            "j_subgroup" => Some(self.jaccard[4]),
            _ => None,
        }
    }
}

/// Ground-truth record written next to a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub seed: u64,
    pub n_patents: usize,
    pub n_edges: usize,
    pub date_range: [String; 2],
    pub profile: SynthProfile,
}

const SECTIONS: [char; 8] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H'];
const CLASSES_PER_SECTION: usize = 4;
const SUBCLASSES_PER_CLASS: usize = 3;
const GROUPS_PER_SUBCLASS: usize = 4;
const SUBGROUPS_PER_GROUP: usize = 5;

struct Vocabulary {
    codes: Vec<IpcCode>,
}

impl Vocabulary {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut codes = Vec::new();
        for &section in &SECTIONS {
            let mut classes: Vec<u8> = (1..=99).collect();
            shuffle_prefix(rng, &mut classes, CLASSES_PER_SECTION);
            for &class_num in &classes[..CLASSES_PER_SECTION] {
                let mut letters: Vec<char> = ('A'..='Z').collect();
                shuffle_prefix(rng, &mut letters, SUBCLASSES_PER_CLASS);
                for &subclass in &letters[..SUBCLASSES_PER_CLASS] {
                    let mut main_group = 0;
                    for _ in 0..GROUPS_PER_SUBCLASS {
                        main_group += rng.random_range(1..=7u32);
                        for s in 0..SUBGROUPS_PER_GROUP {
                            let raw = format!("{section}{class_num:02}{subclass} {main_group}/{:02}", s * 2);
                            codes.push(parse_ipc(&raw).expect("generated code is valid"));
                        }
                    }
                }
            }
        }
        Vocabulary { codes }
    }

    /// Codes sharing the given code's subclass.
    fn sibling(&self, rng: &mut ChaCha8Rng, of: usize) -> usize {
        let per_subclass = GROUPS_PER_SUBCLASS * SUBGROUPS_PER_GROUP;
        let base = of - of % per_subclass;
        base + rng.random_range(0..per_subclass)
    }
}

fn shuffle_prefix<T>(rng: &mut ChaCha8Rng, items: &mut [T], k: usize) {
    for i in 0..k.min(items.len()) {
        let j = rng.random_range(i..items.len());
        items.swap(i, j);
    }
}

fn first_date() -> GrantDate {
    GrantDate::from_ymd(1976, 1, 1).expect("valid date")
}

fn last_date() -> GrantDate {
    GrantDate::from_ymd(2021, 9, 30).expect("valid date")
}

/// Largest edge count accepted for `n_patents` patents.
pub fn max_edges(n_patents: usize) -> usize {
    n_patents.saturating_mul(n_patents.saturating_sub(1)) / 2
}

/// Builds a deterministic corpus of `n_patents` patents and `n_edges`
/// distinct citations. Receivers are biased toward earlier patents and
/// toward patents sharing the sender's technology field or assignee.
pub fn synth_corpus(
    seed: u64,
    n_patents: usize,
    n_edges: usize,
    profile: &SynthProfile,
) -> Result<(CorpusStore, SynthTruth)> {
    if n_edges > max_edges(n_patents) {
        return Err(CoreError::InconsistentSizes(format!(
            "{n_edges} edges requested but {n_patents} patents allow at most {}",
            max_edges(n_patents)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::new(&mut rng);

    let (lo, hi) = (first_date().days(), last_date().days());
    let mut dates: Vec<i32> = (0..n_patents).map(|_| rng.random_range(lo..=hi)).collect();
    dates.sort_unstable();

    let n_orgs = (n_patents / 25).max(1);
    let mut patents = Vec::with_capacity(n_patents);
    let mut primary = Vec::with_capacity(n_patents);
    for (i, &days) in dates.iter().enumerate() {
        let id = format!("P{:07}", i + 1);
        let code = rng.random_range(0..vocab.codes.len());
        let mut ipc = Vec::new();
        let coded = rng.random::<f64>() >= 0.02;
        if coded {
            ipc.push(code);
            let extra = rng.random::<f64>();
            if extra < 0.35 {
                ipc.push(vocab.sibling(&mut rng, code));
            } else if extra < 0.5 {
                ipc.push(rng.random_range(0..vocab.codes.len()));
            }
            ipc.sort_unstable();
            ipc.dedup();
        }
        let (kind, assignee) = match rng.random::<f64>() {
            u if u < 0.7 => (AssigneeKind::Organization, format!("ORG{:05}", rng.random_range(0..n_orgs))),
            u if u < 0.9 => (AssigneeKind::Individual, format!("IND{:07}", i + 1)),
            _ => (AssigneeKind::Unknown, String::new()),
        };
        let field = vocab.codes[code].key(Level::Subclass);
        patents.push(PatentRecord {
            patent_id: id.clone(),
            grant_date: GrantDate(days),
            abstract_text: format!("Synthetic invention {id} in field {field}."),
            ipc_codes: ipc.iter().map(|&c| vocab.codes[c].clone()).collect(),
            assignee_kind: kind,
            assignee_id: assignee,
            is_utility: rng.random::<f64>() >= 0.01,
        });
        primary.push(coded.then_some(code));
    }

    let edges = synth_edges(&mut rng, &patents, &primary, &vocab, n_edges)?;
    let corpus = CorpusStore::from_parts(patents, edges)?;
    let truth = SynthTruth {
        seed,
        n_patents,
        n_edges,
        date_range: [first_date().to_string(), last_date().to_string()],
        profile: profile.clone(),
    };
    Ok((corpus, truth))
}

/// Patent indices grouped by a key, each group in date order.
struct Groups(HashMap<String, Vec<usize>>);

impl Groups {
    fn build(keys: impl Iterator<Item = (usize, Option<String>)>) -> Self {
        let mut map: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, key) in keys {
            if let Some(k) = key {
                map.entry(k).or_default().push(i);
            }
        }
        Groups(map)
    }

    fn get(&self, key: Option<String>) -> Option<&[usize]> {
        key.and_then(|k| self.0.get(&k)).map(Vec::as_slice)
    }
}

fn synth_edges(
    rng: &mut ChaCha8Rng,
    patents: &[PatentRecord],
    primary: &[Option<usize>],
    vocab: &Vocabulary,
    n_edges: usize,
) -> Result<Vec<CitationEdge>> {
    let n = patents.len();
    if n_edges == 0 {
        return Ok(Vec::new());
    }
    let weight_dist = LogNormal::new(0.0, 1.0).expect("valid lognormal");
    let mut cumulative = Vec::with_capacity(n);
    let mut total = 0.0;
    for _ in 0..n {
        total += weight_dist.sample(rng);
        cumulative.push(total);
    }

    let key_at = |level: Level| {
        move |i: usize| primary[i].map(|c| vocab.codes[c].key(level))
    };
    let levels = [Level::Section, Level::Class, Level::Subclass, Level::MainGroup];
    let by_level: Vec<Groups> = levels
        .iter()
        .map(|&l| Groups::build((0..n).map(|i| (i, key_at(l)(i)))))
        .collect();
    let by_org = Groups::build(
        patents
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.is_org().then(|| p.assignee_id.clone()))),
    );
    let dates: Vec<i32> = patents.iter().map(|p| p.grant_date.days()).collect();

    let mut seen = HashSet::with_capacity(n_edges);
    let mut edges = Vec::with_capacity(n_edges);
    let mut attempts = 0usize;
    let budget = n_edges.saturating_mul(200).max(10_000);
    while edges.len() < n_edges {
        attempts += 1;
        if attempts > budget {
            return Err(CoreError::InconsistentSizes(format!(
                "could not place {n_edges} distinct edges among {n} patents"
            )));
        }
        let u = rng.random::<f64>() * total;
        let sender = cumulative.partition_point(|&c| c <= u).min(n - 1);
        let mode = rng.random::<f64>();
        let pool: Option<&[usize]> = if mode < 0.08 {
            by_org.get(patents[sender].is_org().then(|| patents[sender].assignee_id.clone()))
        } else if mode < 0.2 {
            by_level[3].get(key_at(Level::MainGroup)(sender))
        } else if mode < 0.35 {
            by_level[2].get(key_at(Level::Subclass)(sender))
        } else if mode < 0.45 {
            by_level[1].get(key_at(Level::Class)(sender))
        } else if mode < 0.55 {
            by_level[0].get(key_at(Level::Section)(sender))
        } else {
            None
        };
        let receiver = pick_receiver(rng, pool, &dates, sender);
        if receiver == sender {
            continue;
        }
        let edge = (sender, receiver);
        if seen.insert(edge) {
            edges.push(CitationEdge::new(
                patents[sender].patent_id.clone(),
                patents[receiver].patent_id.clone(),
            ));
        }
    }
    Ok(edges)
}

/// Mostly an earlier patent from `pool` (or the whole corpus), sometimes
/// any patent in it, which yields a small share of negative lags.
fn pick_receiver(rng: &mut ChaCha8Rng, pool: Option<&[usize]>, dates: &[i32], sender: usize) -> usize {
    let earlier_only = rng.random::<f64>() < 0.92;
    match pool {
        Some(pool) if pool.len() > 1 => {
            let end = if earlier_only {
                pool.partition_point(|&i| dates[i] <= dates[sender])
            } else {
                pool.len()
            };
            pool[rng.random_range(0..end.max(1))]
        }
        _ => {
            let end = if earlier_only {
                dates.partition_point(|&d| d <= dates[sender])
            } else {
                dates.len()
            };
            rng.random_range(0..end.max(1))
        }
    }
}

/// Noise-free generator value for a feature row; undefined Jaccard
/// contributes nothing.
pub fn synth_mean(profile: &SynthProfile, row: &crate::features::FeatureRow) -> f64 {
    let jaccard: f64 = row
        .jaccard
        .map_or(0.0, |j| j.iter().zip(profile.jaccard).map(|(x, b)| x * b).sum());
    profile.intercept
        + profile.pub_date.eval(row.pub_date)
        + profile.temporal_diff_days.eval(row.temporal_diff_days)
        + profile.log_sender_citations.eval(row.log_sender_citations)
        + profile.is_same_org * row.is_same_org as f64
        + profile.is_sender_org * row.is_sender_org as f64
        + profile.is_receiver_org * row.is_receiver_org as f64
        + jaccard
}

/// Draws a response per feature row from the profile, deterministic for a
/// fixed seed and row order, clamped to [−100, 100].
pub fn synth_responses(table: &FeatureTable, profile: &SynthProfile, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_5151);
    let noise = Normal::new(0.0, profile.noise_sd.max(0.0)).expect("finite noise sd");
    table
        .rows
        .iter()
        .map(|r| (synth_mean(profile, r) + noise.sample(&mut rng)).clamp(-100.0, 100.0))
        .collect()
}

/// Replaces the table's similarity column with `responses`.
pub fn with_responses(mut table: FeatureTable, responses: &[f64]) -> Result<FeatureTable> {
    if responses.len() != table.rows.len() {
        return Err(CoreError::InconsistentSizes(format!(
            "{} responses for {} rows",
            responses.len(),
            table.rows.len()
        )));
    }
    for (row, &y) in table.rows.iter_mut().zip(responses) {
        row.similarity = y;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let (a, ta) = synth_corpus(7, 300, 1000, &SynthProfile::default()).unwrap();
        let (b, tb) = synth_corpus(7, 300, 1000, &SynthProfile::default()).unwrap();
        assert_eq!(a.patents(), b.patents());
        assert_eq!(a.edges(), b.edges());
        assert_eq!(ta, tb);
        let (c, _) = synth_corpus(8, 300, 1000, &SynthProfile::default()).unwrap();
        assert_ne!(a.edges(), c.edges());
    }

    #[test]
    fn shape() {
        let (c, _) = synth_corpus(1, 500, 3000, &SynthProfile::default()).unwrap();
        assert_eq!(c.len(), 500);
        assert_eq!(c.edges().len(), 3000);
        let (lo, hi) = (first_date(), last_date());
        assert!(c.patents().iter().all(|p| p.grant_date >= lo && p.grant_date <= hi));
        let forward = c
            .edges()
            .iter()
            .filter(|e| c.patent(&e.sender_id).unwrap().grant_date >= c.patent(&e.receiver_id).unwrap().grant_date)
            .count();
        assert!(forward as f64 > 0.8 * 3000.0);
        assert!(c
            .patents()
            .iter()
            .all(|p| (p.assignee_kind == AssigneeKind::Unknown) == p.assignee_id.is_empty()));
    }

    #[test]
    fn sizes() {
        let (c, _) = synth_corpus(3, 10, 0, &SynthProfile::default()).unwrap();
        assert!(c.edges().is_empty());
        assert!(synth_corpus(3, 10, 46, &SynthProfile::default()).is_err());
        assert!(synth_corpus(3, 0, 1, &SynthProfile::default()).is_err());
        let (full, _) = synth_corpus(3, 10, 45, &SynthProfile::default()).unwrap();
        assert_eq!(full.edges().len(), 45);
    }

    #[test]
    fn curves() {
        assert_eq!(Curve::Zero.eval(5.0), 0.0);
        let s = Curve::Sine {
            amplitude: 2.0,
            period: 4.0,
        };
        assert!((s.eval(1.0) - 2.0).abs() < 1e-12);
        let json = serde_json::to_string(&SynthProfile::default()).unwrap();
        let back: SynthProfile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, SynthProfile::default());
    }
}
