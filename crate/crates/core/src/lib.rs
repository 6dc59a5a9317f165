//! Patent corpus handling, embedding storage and similarity scoring, IPC
//! hierarchy analytics, and the per-citation feature table.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod features;
pub mod ipc;
pub mod synth;

pub use corpus::{
    attach_edges, file_digest, filter_utility, ingest_citations, ingest_patents, write_atomic, AssigneeKind,
    CitationEdge, CitationReport, CorpusStore, FilterReport, GrantDate, IngestOptions, IngestReport, PatentRecord,
};
pub use embedding::{
    mock_embeddings, read_matrix, score_edges, write_matrix, yearly_similarity_stats, EmbeddingMatrix, ScoredEdge,
    SkipReport, YearStat,
};
pub use error::{CoreError, Result};
pub use features::{build_features, read_features, write_features, yearly_lag_stats, DropReport, FeatureRow, FeatureTable};
pub use ipc::{jaccard_between, jaccard_profile, level_keys, parse_ipc, IpcCode, JaccardProfile, Level};
pub use synth::{synth_corpus, synth_responses, Curve, SynthProfile, SynthTruth};
