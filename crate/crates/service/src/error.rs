use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use goalplan_core::automaton::{AutomatonError, EditError, ValidationIssue};
use goalplan_core::compiler::BranchError;
use goalplan_core::domain::DomainError;
use goalplan_core::executor::ExecutionError;
use goalplan_core::metrics::{EvaluationError, MetricsError, ScenarioError};
use goalplan_core::world::WorldError;
use serde::Serialize;

/// An error response: `{"error": {...}}` with a machine-readable code and,
/// for parse failures, the location in the submitted document.
#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub issues: Option<Vec<ValidationIssue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revision: Option<u64>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            line: None,
            column: None,
            issues: None,
            revision: None,
        }
    }

    pub fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, code, message)
    }

    pub fn not_found(what: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("no such {what}"))
    }

    pub fn stale(expected: u64, current: u64) -> Self {
        let mut e = ApiError::conflict(
            "STALE_REVISION",
            format!("edit was based on revision {expected}, but the session is at revision {current}"),
        );
        e.revision = Some(current);
        e
    }

    fn at(mut self, line: usize, column: usize) -> Self {
        self.line = Some(line);
        self.column = Some(column);
        self
    }

    /// A malformed JSON request body.
    pub fn body(e: serde_json::Error) -> Self {
        ApiError::invalid("SYNTAX", e.to_string()).at(e.line(), e.column())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self }))).into_response()
    }
}

impl From<DomainError> for ApiError {
    fn from(e: DomainError) -> Self {
        let (line, column) = (e.pos.line, e.pos.column);
        ApiError::invalid("DOMAIN", e.to_string()).at(line, column)
    }
}

impl From<WorldError> for ApiError {
    fn from(e: WorldError) -> Self {
        match e {
            WorldError::Syntax { line, column, .. } => ApiError::invalid("WORLD", e.to_string()).at(line, column),
            _ => ApiError::invalid("WORLD", e.to_string()),
        }
    }
}

impl From<AutomatonError> for ApiError {
    fn from(e: AutomatonError) -> Self {
        match e {
            AutomatonError::Syntax { line, column, .. } => {
                ApiError::invalid("AUTOMATON", e.to_string()).at(line, column)
            }
            AutomatonError::Structure(ref issues) => {
                let mut out = ApiError::invalid("AUTOMATON", e.to_string());
                out.issues = Some(issues.clone());
                out
            }
        }
    }
}

impl From<ScenarioError> for ApiError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Syntax { line, column, .. } => ApiError::invalid("SCENARIO", e.to_string()).at(line, column),
            ScenarioError::Action { ref error, .. } => {
                let (line, column) = (error.pos.line, error.pos.column);
                ApiError::invalid("SCENARIO", e.to_string()).at(line, column)
            }
            _ => ApiError::invalid("SCENARIO", e.to_string()),
        }
    }
}

impl From<EditError> for ApiError {
    fn from(e: EditError) -> Self {
        ApiError::invalid("EDIT", e.to_string())
    }
}

impl From<BranchError> for ApiError {
    fn from(e: BranchError) -> Self {
        ApiError::invalid("BRANCH", e.to_string())
    }
}

impl From<ExecutionError> for ApiError {
    fn from(e: ExecutionError) -> Self {
        match e {
            ExecutionError::InvalidConditional(_) | ExecutionError::UnknownAtoms(_) => {
                ApiError::invalid("EXECUTION", e.to_string())
            }
            ExecutionError::Blocked => ApiError::conflict("BLOCKED", e.to_string()),
            ExecutionError::Terminal(_) => ApiError::conflict("TERMINAL", e.to_string()),
            ExecutionError::Waiting | ExecutionError::NotWaiting => ApiError::conflict("WRONG_STATE", e.to_string()),
        }
    }
}

impl From<EvaluationError> for ApiError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::Scenario(e) => e.into(),
            EvaluationError::Metrics(MetricsError::Blocked) => ApiError::conflict("BLOCKED", e.to_string()),
            EvaluationError::Metrics(MetricsError::ResourceLimit { .. }) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "RESOURCE_LIMIT", e.to_string())
            }
        }
    }
}
