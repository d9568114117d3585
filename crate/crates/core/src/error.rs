use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid automaton `{automaton}`: {reason}")]
    InvalidAutomaton { automaton: String, reason: String },

    #[error("event `{event}` is declared controllable in one automaton and uncontrollable in another")]
    ControllabilityConflict { event: String },

    #[error("unresolved model reference: {0}")]
    ModelReference(String),

    #[error("requirement `{requirement}` constrains uncontrollable event `{event}`")]
    UncontrollableRequirement { requirement: String, event: String },

    #[error("no supervisor exists{}", node.as_ref().map(|n| format!(" for node `{n}`")).unwrap_or_default())]
    NoSupervisor { node: Option<String> },

    #[error("node supervisors are conflicting: the global product is blocking")]
    Conflicting,

    #[error("matrix shape mismatch: {0}")]
    Shape(String),

    #[error("markov clustering did not converge after {iterations} iterations (last change {last_change:e})")]
    Convergence { iterations: usize, last_change: f64 },

    #[error("invalid clustering parameters: {0}")]
    Params(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("cannot cut hierarchy into {requested} clusters, only {available} leaves")]
    Cardinality { requested: usize, available: usize },

    #[error("duplicate channel for event `{event}` from `{source_cluster}` to `{destination}`")]
    DuplicateChannel { source_cluster: String, event: String, destination: String },

    #[error("naming collision: {0}")]
    Naming(String),

    #[error("unrepairable delay-critical combination(s): {0}")]
    Unrepairable(String),

    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("scenario error at tick {tick}: {message}")]
    Scenario { tick: u64, message: String },

    #[error("state space limit of {limit} states exceeded")]
    StateLimit { limit: usize },

    #[error("stage `{stage}` failed")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
