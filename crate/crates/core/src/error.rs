use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus source {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate problem id `{0}`")]
    DuplicateProblem(String),
    #[error("problem `{problem}`: cannot load test cases from {path}: {reason}")]
    TestCases {
        problem: String,
        path: PathBuf,
        reason: String,
    },
    #[error("invalid threshold {0}; expected a value in [0, 1]")]
    InvalidThreshold(f64),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffError {
    #[error("correct code has no lines after canonicalization; score is undefined")]
    EmptyTarget,
    #[error("malformed patch: {0}")]
    MalformedPatch(String),
    #[error("patch does not apply at line {0}")]
    PatchMismatch(usize),
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model returned an empty response")]
    EmptyResponse,
    #[error("prompt of ~{estimated} tokens exceeds the budget of {budget}")]
    Budget { estimated: usize, budget: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unexpected response payload: {0}")]
    Payload(String),
    #[error("cache i/o error at {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimsMismatch { left: usize, right: usize },
    #[error("no retrieval candidates for problem `{0}`")]
    NoCandidates(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("index file error: {0}")]
    IndexFormat(String),
    #[error("pair `{pair_id}` has no matching record for problem `{problem_id}`")]
    UnknownPair { pair_id: String, problem_id: String },
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("response has no fenced code block")]
    Parse { raw: String, cache_key: String },
    #[error("prompt needs at least one reference context")]
    NoContexts,
    #[error("{given} contexts given but k = {k}")]
    TooManyContexts { given: usize, k: usize },
    #[error("a single reference context already exceeds the budget ({estimated} > {budget} tokens)")]
    Budget { estimated: usize, budget: usize },
    #[error("template error: {0}")]
    Template(String),
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("no runner configured for language `{0}`")]
    MissingRunner(String),
    #[error("sandbox infrastructure failure: {0}")]
    Infrastructure(String),
    #[error("problem `{0}` has no test cases")]
    NoTestCases(String),
    #[error("pass vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("metric undefined over zero samples")]
    NoSamples,
    #[error("runner config error: {0}")]
    Config(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("metric undefined over zero samples")]
    NoSamples,
    #[error("ground-truth description set must be non-empty")]
    EmptyGroundTruth,
}

/// Top-level error for pipeline and CLI entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category tag used by the CLI when reporting failures.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Corpus(_) => "corpus",
            Error::Diff(_) => "diff",
            Error::Gateway(_) => "gateway",
            Error::Retrieval(_) => "retrieval",
            Error::Generation(_) => "generation",
            Error::Judge(_) => "judge",
            Error::Metric(_) => "metric",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
