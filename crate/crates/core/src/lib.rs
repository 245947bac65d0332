//! Data generation, storage, metadata extraction, query execution and
//! measurement for a versioned news-hub benchmark.

pub mod backend;
pub mod clock;
pub mod model;
pub mod query;
pub mod generator;
pub mod metadata;
pub mod scenario;
pub mod metrics;

pub use backend::{Backend, BackendError, ClusterConfig, ConsistencyMode, SimCluster};
pub use generator::{Corpus, GeneratorConfig};
pub use metrics::{PricingModel, PropertyReport};
pub use query::{QueryKind, QueryParams, QueryResult, QuerySpec};
pub use scenario::{Harness, ScenarioConfig, ScenarioId, ScenarioReport};
