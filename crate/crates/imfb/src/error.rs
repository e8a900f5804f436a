use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty edge list input")]
    EmptyInput,

    #[error("node id {0} out of range (graph has {1} nodes)")]
    NodeOutOfRange(usize, usize),

    #[error("edge id {0} out of range (graph has {1} edges)")]
    EdgeOutOfRange(usize, usize),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("enumeration cap exceeded: {edges} edges > cap {cap}")]
    EnumerationCap { edges: usize, cap: usize },

    #[error("seed-subset cap exceeded: C({n},{k}) > {cap}")]
    SubsetCap { n: usize, k: usize, cap: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("run {run}, round {round}: {source}")]
    InRun {
        run: usize,
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
