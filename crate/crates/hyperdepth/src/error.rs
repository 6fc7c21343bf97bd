//! Crate-wide error type. Variants carry file/line or byte-offset context so
//! the CLI can point at the exact spot in an input that broke.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A title that is empty (or whitespace/underscores only) after
    /// normalization.
    #[error("invalid title {0:?}: empty after normalization")]
    InvalidTitle(String),

    /// A malformed line in a line-oriented input file (corpus, dataset,
    /// embeddings).
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Two articles mapping to the same normalized title (or sharing an id)
    /// within one corpus file.
    #[error("{}:{line}: duplicate article {title:?}", path.display())]
    Duplicate {
        path: PathBuf,
        line: usize,
        title: String,
    },

    /// Programmatic insertion of an article whose key is already taken.
    #[error("duplicate article {0:?}")]
    DuplicateArticle(String),

    /// An article with no units and no redirect target carries no usable
    /// content and is rejected at insertion.
    #[error("article {0:?} has no units and no redirect target")]
    EmptyArticle(String),

    /// Broken XML in a dump stream.
    #[error("malformed XML near byte {offset}: {message}")]
    Xml { offset: u64, message: String },

    /// A depth request that has no defined answer (e.g. a unit-less
    /// article reached the depth engine).
    #[error("depth undefined: {0}")]
    NotComputable(String),

    /// An index sidecar that cannot be read back.
    #[error("{}: not a usable index file: {message}", path.display())]
    BadIndex { path: PathBuf, message: String },

    /// A metric whose definition has no value for the given input
    /// (empty pair list, zero positive labels, filter matching nothing).
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// Raised in strict mode when a queried word has no article and no
    /// retrievable occurrences.
    #[error("word {0:?} not found in the corpus")]
    MissingWord(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// Attach a path to an I/O error: `File::open(p).map_err(Error::io_at(p))`.
    pub fn io_at(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
