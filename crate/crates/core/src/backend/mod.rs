//! The storage interface every system under test implements, and a
//! reference implementation simulating a replicated cluster.
//!
//! Adapters for external systems implement [`Backend`] and should pass
//! [`contract::check_all`], the same suite the simulated cluster runs.

pub mod contract;
mod persist;
mod ring;
mod sim;

pub use ring::{NodeId, Ring, StoreKey};
pub use sim::SimCluster;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::Slice;
use crate::metadata::MetadataState;
use crate::model::*;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("metadata index not built")]
    IndexNotBuilt,
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

impl BackendError {
    pub fn is_not_found(&self) -> bool {
        matches!(self, BackendError::NotFound(_))
    }

    pub fn is_unavailable(&self) -> bool {
        matches!(self, BackendError::Unavailable(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsistencyMode {
    Strong,
    Eventual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub nodes: u32,
    pub replication: u32,
    pub vnodes: u32,
    pub consistency: ConsistencyMode,
    /// Upper bound on replica lag in eventual mode.
    pub staleness_ms: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { nodes: 5, replication: 3, vnodes: 64, consistency: ConsistencyMode::Strong, staleness_ms: 500 }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.nodes == 0 {
            return Err(BackendError::Config("nodes must be >= 1".into()));
        }
        if self.replication == 0 || self.replication > self.nodes {
            return Err(BackendError::Config(format!(
                "replication must lie in [1, nodes]; got {} with {} nodes",
                self.replication, self.nodes
            )));
        }
        if self.vnodes == 0 {
            return Err(BackendError::Config("vnodes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn staleness_us(&self) -> u64 {
        match self.consistency {
            ConsistencyMode::Strong => 0,
            ConsistencyMode::Eventual => self.staleness_ms * 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub article: ArticleId,
    pub version: u32,
    pub write_ts_us: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VersionedValue {
    pub article_id: ArticleId,
    pub version: u32,
    pub payload: Arc<Article>,
    pub write_ts_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionInfo {
    pub version: u32,
    pub write_ts_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadMode {
    Latest,
    AtVersion(u32),
}

/// Full-text search with conjunctive filters. An empty `terms` string
/// returns every article passing the filters, in id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchQuery {
    pub terms: String,
    pub author: Option<AuthorId>,
    pub country: Option<CountryId>,
    pub topic: Option<TopicId>,
    pub date_from: Option<NaiveDate>,
    pub date_to: Option<NaiveDate>,
}

impl SearchQuery {
    pub fn matches(&self, a: &Article) -> bool {
        self.author.is_none_or(|x| a.author_id == x)
            && self.country.is_none_or(|x| a.country_id == x)
            && self.topic.is_none_or(|x| a.topic_ids.contains(&x))
            && self.date_from.is_none_or(|d| a.publish_date >= d)
            && self.date_to.is_none_or(|d| a.publish_date <= d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchHit {
    pub article: ArticleId,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub articles: u64,
    pub authors: u64,
    pub media: u64,
    pub reference_entities: u64,
    pub bytes: u64,
    /// Time spent in the load, in the backend's clock domain.
    pub elapsed_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStatus {
    pub id: NodeId,
    pub live: bool,
    pub stored_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardInfo {
    pub index: usize,
    /// Inclusive key-hash range; a range with `start > end` wraps.
    pub start: u64,
    pub end: u64,
    pub replicas: Vec<NodeId>,
    pub keys: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterState {
    pub nodes: Vec<NodeStatus>,
    pub replication: u32,
    pub consistency: ConsistencyMode,
    pub staleness_ms: u64,
    pub shards: Vec<ShardInfo>,
}

impl ClusterState {
    pub fn live_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.live).count()
    }

    fn is_live(&self, n: NodeId) -> bool {
        self.nodes.iter().any(|s| s.id == n && s.live)
    }

    /// Non-empty shards without a live replica.
    pub fn unreachable_shards(&self) -> Vec<usize> {
        self.shards
            .iter()
            .filter(|s| s.keys > 0 && !s.replicas.iter().any(|r| self.is_live(*r)))
            .map(|s| s.index)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RebalanceReport {
    pub total_keys: u64,
    pub moved_keys: u64,
    pub total_bytes: u64,
    pub moved_bytes: u64,
}

impl RebalanceReport {
    pub fn moved_fraction(&self) -> f64 {
        if self.total_bytes == 0 {
            0.0
        } else {
            self.moved_bytes as f64 / self.total_bytes as f64
        }
    }
}

/// Read-only view of the whole store used by the query engine.
#[derive(Debug, Clone)]
pub struct StoreSnapshot {
    pub taken_at_us: u64,
    pub reference: Arc<ReferenceData>,
    pub authors: Arc<BTreeMap<AuthorId, Author>>,
    pub articles: BTreeMap<ArticleId, Arc<Article>>,
    /// Length of each article's version history.
    pub versions: BTreeMap<ArticleId, u32>,
    pub media: BTreeMap<MediaId, Arc<MediaRef>>,
    pub metadata: Option<Arc<MetadataState>>,
}

impl StoreSnapshot {
    /// Approximate bytes scanned by a full pass, used by the cost model.
    pub fn approx_bytes(&self) -> u64 {
        self.articles.values().map(|a| approx_article_bytes(a)).sum()
    }
}

/// Rough stored size of an article: its text plus a fixed overhead for the
/// structured fields.
pub fn approx_article_bytes(a: &Article) -> u64 {
    (a.title.len() + a.body.len()) as u64 + 256 + 8 * (a.citations.len() + a.monthly_views.len()) as u64
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    /// Stores a new article as version 1.
    fn write(&self, article: Article) -> Result<Ack, BackendError>;
    /// Replaces the body, producing the next version.
    fn update(&self, id: ArticleId, new_body: String) -> Result<Ack, BackendError>;
    fn read(&self, id: ArticleId, mode: ReadMode) -> Result<VersionedValue, BackendError>;
    fn delete(&self, id: ArticleId) -> Result<(), BackendError>;
    fn search(&self, query: &SearchQuery) -> Result<Vec<SearchHit>, BackendError>;
    fn version_history(&self, id: ArticleId) -> Result<Vec<VersionInfo>, BackendError>;

    fn bulk_load(&self, slice: &Slice) -> Result<LoadReport, BackendError>;
    fn snapshot(&self) -> Result<StoreSnapshot, BackendError>;
    fn article_count(&self) -> u64;
    fn is_empty(&self) -> bool;

    fn install_metadata(&self, state: MetadataState);
    fn metadata(&self) -> Option<Arc<MetadataState>>;

    fn kill_node(&self, node: NodeId) -> Result<ClusterState, BackendError>;
    fn recover_node(&self, node: NodeId) -> Result<ClusterState, BackendError>;
    fn add_node(&self, node: NodeId) -> Result<ClusterState, BackendError>;
    fn rebalance(&self) -> Result<RebalanceReport, BackendError>;
    fn cluster_state(&self) -> ClusterState;
}
