//! Parsing and encoding of user records, follow edges, and text embeddings.

mod dataset;
mod edges;
mod embeddings;
mod features;
mod hashing;
mod texts;
mod users;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use dataset::{
    assemble_dataset, prepare_dataset, Dataset, FeatureBundle, SplitMasks, TextSource, BUNDLE_MAGIC,
};
pub use edges::{build_graph, build_typed_graph, parse_edges, parse_edges_from_reader, EdgeRecord};
pub use embeddings::{
    load_embeddings, read_embeddings, save_embeddings, write_embeddings, EmbeddingMatrix,
};
pub use features::{
    compute_numeric_stats, encode_categorical, encode_numerical, NumericStats, ZERO_VARIANCE_EPS,
};
pub use hashing::hash_embed;
pub use texts::{hash_embed_texts, parse_texts, parse_texts_from_reader, UserTexts};
pub use users::{
    parse_users, parse_users_from_reader, Label, Split, UserRecord, CATEGORICAL_COLUMNS,
    NUMERIC_COLUMNS,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}I/O error: {source}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Io {
        path: Option<PathBuf>,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("line {line}: invalid `{field}`: {reason}")]
    InvalidValue {
        line: usize,
        field: &'static str,
        reason: String,
    },
    #[error("line {line}: duplicate user id `{id}`")]
    DuplicateUser { id: String, first: usize, line: usize },
    #[error("edge endpoint `{0}` is not a known user")]
    UnknownUser(String),
    #[error("empty train mask: no user has split \"train\"")]
    EmptyTrainSplit,
    #[error("numerical column `{column}` has no values on the train split")]
    NoTrainValues { column: &'static str },
    #[error("embedding file: bad magic {0:?}, expected \"BRGE\"")]
    EmbeddingMagic([u8; 4]),
    #[error("embedding file: payload truncated")]
    EmbeddingTruncated,
    #[error("embedding file: holds {found} rows, dataset has {expected} users")]
    EmbeddingCount { expected: usize, found: usize },
    #[error("embedding file: {0}")]
    Embedding(String),
    #[error("split masks: {0}")]
    Masks(String),
    #[error("features: {0}")]
    Features(String),
    #[error("dataset bundle: {0}")]
    Bundle(String),
    #[error("{}: {inner}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        inner: Box<IngestError>,
    },
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io {
            path: Some(path.to_path_buf()),
            source,
        }
    }

    /// Attaches a file path unless the error already names one.
    pub(crate) fn with_path(self, path: &Path) -> Self {
        match self {
            e @ (IngestError::Io { path: Some(_), .. } | IngestError::InFile { .. }) => e,
            IngestError::Io { path: None, source } => IngestError::io(path, source),
            e => IngestError::InFile {
                path: path.to_path_buf(),
                inner: Box::new(e),
            },
        }
    }

    /// The error with any file-path wrapper removed.
    pub fn root(&self) -> &IngestError {
        match self {
            IngestError::InFile { inner, .. } => inner.root(),
            e => e,
        }
    }
}
