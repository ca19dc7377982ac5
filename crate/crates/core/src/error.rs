use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("arithmetic overflow while composing intervals")]
    Overflow,

    #[error("self-loop constraint on variable {0}")]
    SelfLoop(usize),

    #[error("unknown variable {0}")]
    UnknownVar(usize),

    #[error("domain of variable {0} must be finite on both ends")]
    InfiniteDomain(usize),

    #[error("domain of variable {0} is empty")]
    EmptyDomain(usize),

    #[error("bound {value} exceeds the supported magnitude {cap}")]
    Magnitude { value: i64, cap: i64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unknown agent {0}")]
    UnknownAgent(usize),

    #[error("external constraint must span two different agents (agent {0} used twice)")]
    SameAgentExternal(usize),

    #[error("invalid generator parameter: {0}")]
    InvalidParam(String),

    #[error("protocol violation at agent {agent}: {detail}")]
    Protocol { agent: usize, detail: String },

    #[error("deadlock: no message in flight, blocked agents: {blocked}")]
    Deadlock { blocked: String },

    #[error("runaway simulation: exceeded {0} steps")]
    Runaway(u64),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
