use thiserror::Error;

#[derive(Debug, Error)]
pub enum GamError {
    #[error("smooth `{term}`: too few distinct values ({distinct}, need at least {required})")]
    TooFewDistinct {
        term: String,
        distinct: usize,
        required: usize,
    },
    #[error("design is rank deficient; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("no usable rows to fit")]
    EmptyTable,
    #[error("covariate `{0}` is not present in the table")]
    UnknownCovariate(String),
    #[error("unknown smooth term `{0}`")]
    UnknownTerm(String),
    #[error("invalid model level {0}; expected 0, 1, 2 or 3")]
    InvalidLevel(u8),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
