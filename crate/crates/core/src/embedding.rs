//! Binary embedding matrices (PSIM) and cosine similarity scoring over
//! citation edges.
//!
//! PSIM layout, little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "PSIM"
//! 4       4     u32 version = 1
//! 8       8     u64 count
//! 16      4     u32 dim
//! 20      4     u32 dtype = 1 (float32)
//! 24      ...   count * dim float32, row-major
//! ```
//!
//! Row ids live in a sidecar text file with the `.ids` extension, one id
//! per line, line `i` naming row `i`.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{write_atomic, CitationEdge, CorpusStore};
use crate::error::{CoreError, Result};

pub const MAGIC: [u8; 4] = *b"PSIM";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 1;
pub const HEADER_LEN: usize = 24;
pub const DEFAULT_DIM: usize = 384;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::Invalid("dim must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(CoreError::Invalid(format!(
                "{} values for {} rows of dim {dim}",
                data.len(),
                ids.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::Invalid(format!("non-finite value in row {}", pos / dim)));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(CoreError::Invalid(format!("duplicate id `{id}`")));
            }
        }
        Ok(EmbeddingMatrix { dim, ids, index, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        self.row_of(id).map(|i| self.row(i))
    }

    /// Rescales every row to unit length (zero rows stay zero). Scoring
    /// never relies on this having been applied.
    pub fn normalize(&mut self) {
        let dim = self.dim;
        self.data.par_chunks_mut(dim).for_each(|row| {
            let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v = (*v as f64 / norm) as f32);
            }
        });
    }

    fn norms(&self) -> Vec<f64> {
        self.data
            .par_chunks(self.dim)
            .map(|row| row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt())
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.count() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&DTYPE_F32.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

/// Sidecar id file for a PSIM path: `vecs.psim` → `vecs.ids`.
pub fn ids_path(psim: &Path) -> PathBuf {
    psim.with_extension("ids")
}

/// Parses a PSIM payload, returning `(dim, count, values)`.
pub fn decode_psim(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(CoreError::format(path, "bad magic"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(CoreError::format(path, "truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(CoreError::format(path, format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let dim = u32_at(16) as usize;
    let dtype = u32_at(20);
    if dtype != DTYPE_F32 {
        return Err(CoreError::format(path, format!("unsupported dtype {dtype}")));
    }
    if dim == 0 {
        return Err(CoreError::format(path, "dim must be positive"));
    }
    let expected = count
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| CoreError::format(path, "dim/count mismatch: size overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(CoreError::format(
            path,
            format!("truncated: payload has {} bytes, header implies {expected}", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(CoreError::format(
            path,
            format!(
                "dim/count mismatch: payload has {} bytes, header implies {expected}",
                payload.len()
            ),
        ));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(CoreError::format(path, format!("non-finite value in row {}", pos / dim)));
    }
    Ok((dim, count, data))
}

/// Reads a PSIM file and its `.ids` sidecar.
pub fn read_matrix(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    let (dim, count, data) = decode_psim(path, &bytes)?;
    let sidecar = ids_path(path);
    let file = std::fs::File::open(&sidecar).map_err(|e| CoreError::io(&sidecar, e))?;
    let ids: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| CoreError::io(&sidecar, e))?;
    if ids.len() != count {
        return Err(CoreError::format(
            &sidecar,
            format!("{} ids for {count} rows", ids.len()),
        ));
    }
    EmbeddingMatrix::new(dim, ids, data).map_err(|e| CoreError::format(path, e.to_string()))
}

/// Writes the matrix and its sidecar, each through a temp file and rename.
pub fn write_matrix(path: &Path, matrix: &EmbeddingMatrix) -> Result<()> {
    write_atomic(path, &matrix.to_bytes())?;
    let mut ids = String::with_capacity(matrix.count() * 12);
    for id in matrix.ids() {
        ids.push_str(id);
        ids.push('\n');
    }
    write_atomic(&ids_path(path), ids.as_bytes())
}

/// Deterministic pseudo-random unit vector keyed by `(seed, id)`.
pub fn mock_vector(seed: u64, id: &str, dim: usize) -> Vec<f32> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(id.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(key);
    let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.iter().map(|v| (v / norm) as f32).collect()
}

/// Mock embeddings for the given ids; rows are unit-norm and depend only on
/// `(seed, id)`.
pub fn mock_embeddings(seed: u64, ids: &[String], dim: usize) -> Result<EmbeddingMatrix> {
    if dim == 0 {
        return Err(CoreError::Invalid("dim must be positive".into()));
    }
    let data: Vec<f32> = ids
        .par_iter()
        .flat_map_iter(|id| mock_vector(seed, id, dim))
        .collect();
    EmbeddingMatrix::new(dim, ids.to_vec(), data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEdge {
    pub sender_id: String,
    pub receiver_id: String,
    /// `100 · cos(sender, receiver)`.
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    pub missing_row: usize,
    pub zero_norm: usize,
}

impl SkipReport {
    pub fn total(&self) -> usize {
        self.missing_row + self.zero_norm
    }

    fn add(&mut self, other: SkipReport) {
        self.missing_row += other.missing_row;
        self.zero_norm += other.zero_norm;
    }
}

/// Scorer over a resident matrix with precomputed row norms.
pub struct Scorer<'a> {
    matrix: &'a EmbeddingMatrix,
    norms: Vec<f64>,
}

impl<'a> Scorer<'a> {
    pub fn new(matrix: &'a EmbeddingMatrix) -> Self {
        Scorer {
            norms: matrix.norms(),
            matrix,
        }
    }

    /// `100 · (u·v) / (‖u‖‖v‖)` with 64-bit accumulation.
    pub fn score(&self, edge: &CitationEdge) -> std::result::Result<f64, SkipReason> {
        let (Some(a), Some(b)) = (
            self.matrix.row_of(&edge.sender_id),
            self.matrix.row_of(&edge.receiver_id),
        ) else {
            return Err(SkipReason::MissingRow);
        };
        let (na, nb) = (self.norms[a], self.norms[b]);
        if na == 0.0 || nb == 0.0 {
            return Err(SkipReason::ZeroNorm);
        }
        let dot: f64 = self
            .matrix
            .row(a)
            .iter()
            .zip(self.matrix.row(b))
            .map(|(&x, &y)| x as f64 * y as f64)
            .sum();
        Ok((100.0 * dot / (na * nb)).clamp(-100.0, 100.0))
    }

    fn score_chunk(&self, chunk: &[CitationEdge]) -> (Vec<ScoredEdge>, SkipReport) {
        let mut out = Vec::with_capacity(chunk.len());
        let mut skips = SkipReport::default();
        for edge in chunk {
            match self.score(edge) {
                Ok(similarity) => out.push(ScoredEdge {
                    sender_id: edge.sender_id.clone(),
                    receiver_id: edge.receiver_id.clone(),
                    similarity,
                }),
                Err(SkipReason::MissingRow) => skips.missing_row += 1,
                Err(SkipReason::ZeroNorm) => skips.zero_norm += 1,
            }
        }
        (out, skips)
    }

    /// Scores a batch of edges split into `chunk_size` pieces scored in
    /// parallel; output order follows input order.
    pub fn score_batch(&self, edges: &[CitationEdge], chunk_size: usize) -> (Vec<ScoredEdge>, SkipReport) {
        let parts: Vec<(Vec<ScoredEdge>, SkipReport)> = edges
            .par_chunks(chunk_size.max(1))
            .map(|c| self.score_chunk(c))
            .collect();
        let mut scored = Vec::with_capacity(edges.len());
        let mut skips = SkipReport::default();
        for (s, k) in parts {
            scored.extend(s);
            skips.add(k);
        }
        (scored, skips)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    MissingRow,
    ZeroNorm,
}

/// Scores `edges` with `chunk_size` edges per work unit on `workers`
/// threads (0 = rayon default).
pub fn score_edges(
    matrix: &EmbeddingMatrix,
    edges: &[CitationEdge],
    chunk_size: usize,
    workers: usize,
) -> Result<(Vec<ScoredEdge>, SkipReport)> {
    let scorer = Scorer::new(matrix);
    if workers == 0 {
        return Ok(scorer.score_batch(edges, chunk_size));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CoreError::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| scorer.score_batch(edges, chunk_size)))
}

/// Streams edges through the scorer `batch` at a time, handing each scored
/// batch to `sink` in input order, so the full pair list is never resident.
pub fn score_edge_stream<I, F>(
    matrix: &EmbeddingMatrix,
    edges: I,
    batch: usize,
    chunk_size: usize,
    mut sink: F,
) -> Result<SkipReport>
where
    I: IntoIterator<Item = CitationEdge>,
    F: FnMut(&[ScoredEdge]) -> Result<()>,
{
    let scorer = Scorer::new(matrix);
    let mut skips = SkipReport::default();
    let mut buf = Vec::with_capacity(batch.max(1));
    let mut flush = |buf: &mut Vec<CitationEdge>, skips: &mut SkipReport| -> Result<()> {
        let (scored, k) = scorer.score_batch(buf, chunk_size);
        skips.add(k);
        buf.clear();
        sink(&scored)
    };
    for edge in edges {
        buf.push(edge);
        if buf.len() >= batch.max(1) {
            flush(&mut buf, &mut skips)?;
        }
    }
    if !buf.is_empty() {
        flush(&mut buf, &mut skips)?;
    }
    Ok(skips)
}

pub const SCORED_HEADER: [&str; 3] = ["sender_id", "receiver_id", "similarity"];

pub struct ScoredWriter<W: Write> {
    inner: csv::Writer<W>,
    path: PathBuf,
}

impl ScoredWriter<BufWriter<std::fs::File>> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
        let mut inner = csv::Writer::from_writer(BufWriter::new(file));
        inner
            .write_record(SCORED_HEADER)
            .map_err(|e| CoreError::csv(path, e))?;
        Ok(ScoredWriter {
            inner,
            path: path.to_path_buf(),
        })
    }
}

impl<W: Write> ScoredWriter<W> {
    pub fn write(&mut self, rows: &[ScoredEdge]) -> Result<()> {
        for r in rows {
            self.inner
                .write_record([&r.sender_id, &r.receiver_id, &r.similarity.to_string()])
                .map_err(|e| CoreError::csv(&self.path, e))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| CoreError::io(&self.path, e))
    }
}

pub fn write_scored(path: &Path, rows: &[ScoredEdge]) -> Result<()> {
    let mut w = ScoredWriter::create(path)?;
    w.write(rows)?;
    w.finish()
}

pub fn read_scored(path: &Path) -> Result<Vec<ScoredEdge>> {
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header = reader.headers().map_err(|e| CoreError::csv(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != SCORED_HEADER {
        return Err(CoreError::MalformedHeader {
            path: path.to_path_buf(),
            expected: SCORED_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CoreError::csv(path, e))?;
        let similarity: f64 = rec[2].parse().map_err(|_| CoreError::InvalidRow {
            path: path.to_path_buf(),
            row: i + 1,
            reason: format!("invalid similarity `{}`", &rec[2]),
        })?;
        out.push(ScoredEdge {
            sender_id: rec[0].to_string(),
            receiver_id: rec[1].to_string(),
            similarity,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearStat {
    pub year: i32,
    pub mean: f64,
    pub count: usize,
    /// Sample standard deviation; 0 for single-row groups.
    pub stddev: f64,
}

/// Groups values by year and reports mean, count and standard deviation,
/// sorted by year.
pub fn group_by_year(values: impl IntoIterator<Item = (i32, f64)>) -> Vec<YearStat> {
    let mut groups: BTreeMap<i32, (usize, f64, f64)> = BTreeMap::new();
    for (year, v) in values {
        let (n, mean, m2) = groups.entry(year).or_insert((0, 0.0, 0.0));
        *n += 1;
        let delta = v - *mean;
        *mean += delta / *n as f64;
        *m2 += delta * (v - *mean);
    }
    groups
        .into_iter()
        .map(|(year, (count, mean, m2))| YearStat {
            year,
            mean,
            count,
            stddev: if count > 1 {
                (m2 / (count - 1) as f64).sqrt()
            } else {
                0.0
            },
        })
        .collect()
}

/// Mean similarity per sender grant year. Edges whose sender is not in the
/// corpus are skipped.
pub fn yearly_similarity_stats(scored: &[ScoredEdge], corpus: &CorpusStore) -> Vec<YearStat> {
    group_by_year(scored.iter().filter_map(|s| {
        corpus
            .patent(&s.sender_id)
            .map(|p| (p.grant_date.year(), s.similarity))
    }))
}
