use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Pipeline stage, used to tag errors that cross stage boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Screening,
    PsiScores,
    Integration,
    Detection,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Ingest => "data_ingest",
            Stage::Screening => "screening",
            Stage::PsiScores => "psi_scores",
            Stage::Integration => "bayes_integration",
            Stage::Detection => "edge_detection",
            Stage::Output => "output",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum FbiaError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error in {file} at row {row}, column {column} ({name}): {message}")]
    Parse {
        file: PathBuf,
        row: usize,
        column: usize,
        name: String,
        message: String,
    },

    #[error("size error: condition '{condition}' has {n} observations, at least {min} required")]
    Size {
        condition: String,
        n: usize,
        min: usize,
    },

    #[error("degenerate variable '{variable}' in condition '{condition}': zero sample variance")]
    DegenerateVariable { variable: String, condition: String },

    #[error("degenerate separator for pair ({i}, {j}): correlation submatrix is singular")]
    DegenerateSeparator { i: usize, j: usize },

    #[error("degenerate regression for pair ({i}, {j}): {reason}")]
    DegenerateRegression { i: usize, j: usize, reason: String },

    #[error("capacity error: {configurations} configurations exceed the enumeration cap of {cap}; use the gibbs engine")]
    Capacity { configurations: u128, cap: u64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient support: {0}")]
    InsufficientSupport(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("edge {edge} in condition {condition}: {inner}")]
    AtEdge {
        edge: usize,
        condition: usize,
        inner: Box<FbiaError>,
    },

    #[error("[{stage}] {inner}")]
    InStage {
        stage: Stage,
        inner: Box<FbiaError>,
    },

    #[error("i/o error on {path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl FbiaError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FbiaError::Io {
            path: path.into(),
            err: source,
        }
    }

    pub fn in_stage(self, stage: Stage) -> Self {
        FbiaError::InStage {
            stage,
            inner: Box::new(self),
        }
    }

    pub fn at_edge(self, edge: usize, condition: usize) -> Self {
        FbiaError::AtEdge {
            edge,
            condition,
            inner: Box::new(self),
        }
    }
}

pub type Result<T, E = FbiaError> = std::result::Result<T, E>;
