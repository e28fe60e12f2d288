use std::path::Path;
use std::process::ExitCode;

use forestquiz::corpus::CorpusError;
use forestquiz::pipeline::PipelineError;
use forestquiz::quizkit::QuizError;
use forestquiz_service::ServiceError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Usage,
    Validation,
    Io,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Usage => 1,
            Kind::Validation => 2,
            Kind::Io => 3,
        }
    }
}

/// Printed to stderr as one JSON line:
/// `{"error":"validation","exit_code":2,"message":"…"}`.
#[derive(Debug, Serialize)]
pub struct Failure {
    pub error: Kind,
    pub exit_code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Failure {
            error: kind,
            exit_code: kind.code(),
            message: message.into().replace('\n', " "),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure::new(Kind::Usage, message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Failure::new(Kind::Validation, message)
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Failure::new(Kind::Io, format!("{}: {err}", path.display()))
    }

    pub fn report(&self) -> ExitCode {
        eprintln!("{}", serde_json::to_string(self).expect("failure serializes"));
        ExitCode::from(self.exit_code)
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        let kind = if e.is_io() { Kind::Io } else { Kind::Validation };
        Failure::new(kind, e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::validation(e.to_string())
    }
}

impl From<QuizError> for Failure {
    fn from(e: QuizError) -> Self {
        let kind = if matches!(e, QuizError::Io { .. }) { Kind::Io } else { Kind::Validation };
        Failure::new(kind, e.to_string())
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        let kind = match &e {
            ServiceError::Io(_) | ServiceError::Quiz(QuizError::Io { .. }) | ServiceError::Forest { .. } => Kind::Io,
            ServiceError::Store(forestquiz_service::StoreError::Log(_)) => Kind::Io,
            _ => Kind::Validation,
        };
        Failure::new(kind, e.to_string())
    }
}
