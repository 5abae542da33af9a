use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem in an input file. `line` is 1-based when known.
    #[error("format error{}: {message}", at_line(*.line))]
    Format { line: Option<u64>, message: String },

    /// A well-formed cell holding an unusable value.
    #[error("value error{}: {message}", at_line(*.line))]
    Value { line: Option<u64>, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A similarity lookup hit a table entry that training never produced.
    #[error("missing similarity entry: {0}")]
    MissingEntry(String),

    #[error("model file: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn at_line(line: Option<u64>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn format(line: Option<u64>, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn value(line: Option<u64>, message: impl Into<String>) -> Self {
        Error::Value {
            line,
            message: message.into(),
        }
    }
}
