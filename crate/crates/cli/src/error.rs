use std::io;
use std::path::PathBuf;

use nsc_core::baselines::BaselineError;
use nsc_core::benchkit::BenchError;
use nsc_core::corpus::CorpusError;
use nsc_core::hypernet::HypernetError;
use nsc_core::quantize::QuantizeError;
use nsc_core::surrogate::SurrogateError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("no such file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Io(io::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MissingFile(_) => "missing-file",
            CliError::Schema(_) => "schema",
            CliError::Data(_) => "data",
            CliError::Io(_) => "io",
            CliError::Runtime(_) => "runtime",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::MissingFile(_) => 3,
            CliError::Schema(_) => 4,
            CliError::Data(_) => 5,
            CliError::Io(_) => 6,
        }
    }

    /// `error[<category>]: <message>` on one line.
    pub fn render(&self) -> String {
        let msg = self.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{}]: {}", self.category(), msg)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::UnexpectedEof => CliError::Schema(format!("truncated file: {e}")),
            _ => CliError::Io(e),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(e) => e.into(),
            e @ CorpusError::Json { .. } => CliError::Schema(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<SurrogateError> for CliError {
    fn from(e: SurrogateError) -> Self {
        match e {
            SurrogateError::Io(e) => e.into(),
            e @ (SurrogateError::BadMagic | SurrogateError::UnsupportedVersion(_) | SurrogateError::WrongLength { .. }) => {
                CliError::Schema(e.to_string())
            }
            e => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<HypernetError> for CliError {
    fn from(e: HypernetError) -> Self {
        match e {
            HypernetError::Io(e) => e.into(),
            HypernetError::Surrogate(e) => e.into(),
            e @ HypernetError::BadCheckpoint(_) => CliError::Schema(e.to_string()),
            e @ (HypernetError::EmptyCorpus | HypernetError::NoRows(_) | HypernetError::TooLong { .. }) => CliError::Data(e.to_string()),
            e @ HypernetError::Config(_) => CliError::Usage(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Surrogate(e) => e.into(),
            e @ (BaselineError::EmptyCorpus | BaselineError::NoRows(_)) => CliError::Data(e.to_string()),
            e @ BaselineError::Config(_) => CliError::Usage(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<QuantizeError> for CliError {
    fn from(e: QuantizeError) -> Self {
        match e {
            QuantizeError::Io(e) => e.into(),
            e @ QuantizeError::Codec(_) => CliError::Schema(e.to_string()),
            e @ QuantizeError::Config(_) => CliError::Usage(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Schema(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
