use thiserror::Error;

use crate::jointree::{join_attrs, GyoViolation};
use crate::planalg::NiceViolation;
use crate::relmodel::{AttrSet, Attr, Value};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a pipeline refused to build in validating mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationFailure {
    ReverseGyo(GyoViolation),
    NotNice(NiceViolation),
    Cartesian { relation: String },
    InvalidTree(Vec<String>),
}

impl std::fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationFailure::ReverseGyo(v) => write!(f, "reverse-GYO order violated: {v}"),
            ValidationFailure::NotNice(v) => write!(f, "plan is not nice: {v}"),
            ValidationFailure::Cartesian { relation } => {
                write!(f, "Cartesian product: {relation} shares no attribute with its predecessors")
            }
            ValidationFailure::InvalidTree(failures) => {
                write!(f, "invalid join tree: {}", failures.join("; "))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("conflicting binding for {attr}: {left} vs {right}")]
    ConflictingBinding { attr: Attr, left: Value, right: Value },
    #[error("missing attribute {attr}")]
    MissingAttribute { attr: Attr },
    #[error("bags bind different attributes: {{{}}} vs {{{}}}", join_attrs(left), join_attrs(right))]
    SchemaMismatch { left: AttrSet, right: AttrSet },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("tuple does not conform to schema of {relation}: {detail}")]
    NonConformingTuple { relation: String, detail: String },
    #[error("no preceding relation covers the key {{{}}} of {relation}", join_attrs(key))]
    NoCoveringParent { relation: String, key: AttrSet },
    #[error("malformed join tree: {0}")]
    MalformedTree(String),
    #[error("merge requires exactly one shared node, found {shared}")]
    BadOverlap { shared: usize },
    #[error("plan is terminal")]
    PlanIsTerminal,
    #[error("plan is not nice: {0}")]
    NotNice(NiceViolation),
    #[error("plan parse error at byte {pos}: {msg}")]
    PlanParse { pos: usize, msg: String },
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("leaf order is not a linear extension of the join tree: {0}")]
    InvalidLinearization(String),
    #[error("validation failed: {0}")]
    ValidationFailed(ValidationFailure),
    #[error("iterator protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("query join graph is disconnected")]
    DisconnectedQuery,
    #[error("case does not produce the target verdict")]
    NotFailing,
    #[error("case file: {0}")]
    CaseFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable name used in reports and exit diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ConflictingBinding { .. } => "ConflictingBinding",
            Error::MissingAttribute { .. } => "MissingAttribute",
            Error::SchemaMismatch { .. } => "SchemaMismatch",
            Error::InvalidSchema(_) => "InvalidSchema",
            Error::NonConformingTuple { .. } => "NonConformingTuple",
            Error::NoCoveringParent { .. } => "NoCoveringParent",
            Error::MalformedTree(_) => "MalformedTree",
            Error::BadOverlap { .. } => "BadOverlap",
            Error::PlanIsTerminal => "PlanIsTerminal",
            Error::NotNice(_) => "NotNice",
            Error::PlanParse { .. } => "PlanParse",
            Error::UnknownRelation(_) => "UnknownRelation",
            Error::InvalidLinearization(_) => "InvalidLinearization",
            Error::ValidationFailed(_) => "ValidationFailed",
            Error::ProtocolViolation(_) => "ProtocolViolation",
            Error::DisconnectedQuery => "DisconnectedQuery",
            Error::NotFailing => "NotFailing",
            Error::CaseFormat(_) => "CaseFormat",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
