//! Failure classes and their exit codes.

use std::fmt;
use std::path::Path;

use primeball::generator::GeneratorError;
use primeball::metadata::MetadataError;
use primeball::metrics::MetricError;
use primeball::query::QueryError;
use primeball::scenario::ScenarioError;
use primeball::BackendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Usage,
    Config,
    Precondition,
    Internal,
}

impl Class {
    pub fn exit_code(self) -> u8 {
        match self {
            Class::Usage => 2,
            Class::Config => 3,
            Class::Precondition => 4,
            Class::Internal => 5,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Class::Usage => "usage",
            Class::Config => "config",
            Class::Precondition => "precondition",
            Class::Internal => "internal",
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub message: String,
}

impl Failure {
    pub fn new(class: Class, message: impl Into<String>) -> Failure {
        Failure { class, message: message.into() }
    }

    pub fn usage(m: impl Into<String>) -> Failure {
        Failure::new(Class::Usage, m)
    }

    pub fn config(m: impl Into<String>) -> Failure {
        Failure::new(Class::Config, m)
    }

    pub fn precondition(m: impl Into<String>) -> Failure {
        Failure::new(Class::Precondition, m)
    }

    pub fn internal(m: impl Into<String>) -> Failure {
        Failure::new(Class::Internal, m)
    }

    /// Failure to write an output artifact.
    pub fn write(path: &Path, e: impl fmt::Display) -> Failure {
        Failure::internal(format!("writing {}: {e}", path.display()))
    }
}

/// `error class=<class> code=<n> message="<json string>"`, on one line.
impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = serde_json::to_string(&self.message).unwrap_or_else(|_| "\"\"".into());
        write!(f, "error class={} code={} message={msg}", self.class.name(), self.class.exit_code())
    }
}

impl From<BackendError> for Failure {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Config(_) => Failure::config(e.to_string()),
            _ => Failure::precondition(e.to_string()),
        }
    }
}

impl From<GeneratorError> for Failure {
    fn from(e: GeneratorError) -> Self {
        match e {
            GeneratorError::Config(_) => Failure::config(e.to_string()),
            GeneratorError::Argument(_) => Failure::usage(e.to_string()),
            _ => Failure::precondition(e.to_string()),
        }
    }
}

impl From<MetadataError> for Failure {
    fn from(e: MetadataError) -> Self {
        match e {
            MetadataError::Argument(_) => Failure::config(e.to_string()),
            _ => Failure::precondition(e.to_string()),
        }
    }
}

impl From<QueryError> for Failure {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Argument(_) => Failure::usage(e.to_string()),
            QueryError::State(_) => Failure::precondition(e.to_string()),
            QueryError::Backend(b) => b.into(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(_) => Failure::config(e.to_string()),
            ScenarioError::Precondition(_) | ScenarioError::NoExtraData(_) => Failure::precondition(e.to_string()),
            ScenarioError::Backend(b) => b.into(),
            ScenarioError::Generator(g) => g.into(),
            ScenarioError::Metadata(m) => m.into(),
            ScenarioError::Query(q) => q.into(),
        }
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Pricing(_) => Failure::config(e.to_string()),
            _ => Failure::precondition(e.to_string()),
        }
    }
}
