use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error categories shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Malformed input file; `line` is 1-based when known.
    #[error("parse error{}: {message}", location(*.line, .field.as_deref()))]
    Parse {
        line: Option<usize>,
        field: Option<String>,
        message: String,
    },

    /// Well-formed data that violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("range error: {0}")]
    Range(String),

    /// Quadrature refinement failed to converge.
    #[error("assembly error: {kind} did not converge after {halvings} panel halvings (last relative change {change:.3e})")]
    Assembly {
        kind: &'static str,
        halvings: usize,
        change: f64,
    },

    #[error("problem error: {0}")]
    Problem(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("iteration limit reached after {iterations} iterations: {detail}")]
    IterationLimit { iterations: usize, detail: String },

    /// Wire geometry violates the thin-wire kernel assumptions.
    #[error("model error: {0}")]
    Model(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Another error annotated with where it happened.
    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn location(line: Option<usize>, field: Option<&str>) -> String {
    match (line, field) {
        (Some(l), Some(f)) => format!(" at line {l}, field `{f}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(f)) => format!(" in field `{f}`"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub fn parse(line: Option<usize>, field: Option<&str>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.map(str::to_owned),
            message: message.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 validation, 3 numerical failure, 4 infeasible.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Dimension { .. }
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Range(_)
            | Error::Model(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::Assembly { .. }
            | Error::Problem(_)
            | Error::IterationLimit { .. }
            | Error::Numerical(_) => 3,
            Error::Infeasible(_) => 4,
            Error::Context { source, .. } => source.exit_code(),
        }
    }
}
