//! The seven benchmark scenarios, their configuration and reports.
//!
//! A scenario runs against a [`Harness`]: a generated corpus, a backend and
//! a clock. Under the virtual clock every operation is scheduled by a
//! discrete-event loop and takes a modeled duration, so a fixed seed yields
//! identical reports. Under the real clock each worker is an OS thread and
//! durations are measured.

mod harness;
mod report;
mod runs;
mod sched;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, ClusterConfig, ConsistencyMode, NodeId};
use crate::generator::{GeneratorConfig, GeneratorError};
use crate::metadata::{MetadataError, PipelineConfig};
use crate::query::QueryError;

pub use harness::Harness;
pub use report::{
    audit, containment, AuditError, Counters, Findings, OpKind, OpRecord, Outcome, ScenarioReport,
    REPORT_SCHEMA_VERSION,
};
pub use runs::{analytic_sequence, run_scenario};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario configuration: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no extra data: {0}")]
    NoExtraData(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Generator(GeneratorError),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

impl From<GeneratorError> for ScenarioError {
    fn from(e: GeneratorError) -> Self {
        match e {
            GeneratorError::NoExtraData { .. } => ScenarioError::NoExtraData(e.to_string()),
            other => ScenarioError::Generator(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ScenarioId {
    S1 = 1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 7] =
        [ScenarioId::S1, ScenarioId::S2, ScenarioId::S3, ScenarioId::S4, ScenarioId::S5, ScenarioId::S6, ScenarioId::S7];

    pub fn number(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for ScenarioId {
    type Error = ScenarioError;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        Self::ALL
            .get((n as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| ScenarioError::Config(format!("scenario must lie in 1..=7, got {n}")))
    }
}

impl From<ScenarioId> for u8 {
    fn from(s: ScenarioId) -> u8 {
        s.number()
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "S{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    Realtime,
    Virtual,
}

/// Durations charged to operations under the virtual clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// Fixed cost of every request.
    pub op_overhead_us: u64,
    /// Client-to-replica transfer rate for single-article operations.
    pub transfer_mb_per_s: f64,
    /// Per-node scan rate of queries; scans run on all live nodes at once.
    pub scan_mb_per_s_per_node: f64,
    pub load_mb_per_s_per_node: f64,
    pub index_mb_per_s_per_node: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            op_overhead_us: 500,
            transfer_mb_per_s: 100.0,
            scan_mb_per_s_per_node: 200.0,
            load_mb_per_s_per_node: 50.0,
            index_mb_per_s_per_node: 5.0,
        }
    }
}

impl CostModel {
    fn validate(&self) -> Result<(), ScenarioError> {
        let rates = [
            self.transfer_mb_per_s,
            self.scan_mb_per_s_per_node,
            self.load_mb_per_s_per_node,
            self.index_mb_per_s_per_node,
        ];
        if rates.iter().all(|r| r.is_finite() && *r > 0.0) {
            Ok(())
        } else {
            Err(ScenarioError::Config("cost model rates must be positive".into()))
        }
    }

    fn over(&self, bytes: u64, mb_per_s: f64) -> u64 {
        self.op_overhead_us + (bytes as f64 / (mb_per_s * 1e6) * 1e6).round() as u64
    }

    pub fn single(&self, bytes: u64) -> u64 {
        self.over(bytes, self.transfer_mb_per_s)
    }

    pub fn scan(&self, bytes: u64, live_nodes: usize) -> u64 {
        self.over(bytes, self.scan_mb_per_s_per_node * live_nodes.max(1) as f64)
    }

    pub fn load(&self, bytes: u64, nodes: usize) -> u64 {
        self.over(bytes, self.load_mb_per_s_per_node * nodes.max(1) as f64)
    }

    pub fn index(&self, bytes: u64, nodes: usize) -> u64 {
        self.over(bytes, self.index_mb_per_s_per_node * nodes.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct S1Params {
    /// The baseline date, then the extra date queried after doubling.
    pub dates: [NaiveDate; 2],
    /// Q14 takes a birth year; it is the query date's year minus this.
    pub birth_year_offset: i32,
}

impl Default for S1Params {
    fn default() -> Self {
        S1Params {
            dates: [NaiveDate::from_ymd_opt(2001, 9, 12).unwrap(), NaiveDate::from_ymd_opt(2008, 11, 5).unwrap()],
            birth_year_offset: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct S2Params {
    pub reads_per_second: f64,
    pub update_interval_s: f64,
    pub duration_s: f64,
    pub readers: u32,
    /// Article to read and update; the smallest stored id when unset.
    pub article: Option<u64>,
}

impl Default for S2Params {
    fn default() -> Self {
        S2Params { reads_per_second: 100.0, update_interval_s: 5.0, duration_s: 120.0, readers: 1, article: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct S3Params {
    /// Nodes in removal order; a seeded shuffle of all nodes when unset.
    pub removal_order: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct S4Params {
    pub repetitions: u32,
    pub query_workers: u32,
    pub mutation_workers: u32,
    pub updates_per_second: f64,
    pub deletes_per_second: f64,
    pub inserts_per_second: f64,
    /// How long each mutation worker runs per repetition.
    pub mutation_seconds: f64,
}

impl Default for S4Params {
    fn default() -> Self {
        S4Params {
            repetitions: 300,
            query_workers: 10,
            mutation_workers: 5,
            updates_per_second: 10.0,
            deletes_per_second: 10.0,
            inserts_per_second: 10.0,
            mutation_seconds: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct S5Params {
    pub executions: u32,
}

impl Default for S5Params {
    fn default() -> Self {
        S5Params { executions: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct S7Params {
    /// Fraction of the corpus loaded by one run.
    pub delta: f64,
}

impl Default for S7Params {
    fn default() -> Self {
        S7Params { delta: 0.25 }
    }
}

/// Everything a scenario run depends on. The corpus is generated from
/// `generator` with `seed` and a size of `corpus_factor * sf` GB; the
/// initial state holds the first `sf` GB of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub sf: f64,
    pub corpus_factor: f64,
    pub nodes: u32,
    pub replication: u32,
    pub vnodes: u32,
    pub consistency: ConsistencyMode,
    pub staleness_ms: u64,
    pub clock: ClockMode,
    /// Virtual clock only: paces the run to at most this many virtual
    /// seconds per wall second. Unset runs as fast as possible.
    pub speedup: Option<f64>,
    /// The current date for queries that look back from now.
    pub today: NaiveDate,
    pub generator: GeneratorConfig,
    pub pipeline: PipelineConfig,
    pub cost: CostModel,
    pub s1: S1Params,
    pub s2: S2Params,
    pub s3: S3Params,
    pub s4: S4Params,
    pub s5: S5Params,
    pub s7: S7Params,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let cluster = ClusterConfig::default();
        ScenarioConfig {
            seed: 42,
            sf: 0.01,
            corpus_factor: 4.0,
            nodes: cluster.nodes,
            replication: cluster.replication,
            vnodes: cluster.vnodes,
            consistency: cluster.consistency,
            staleness_ms: cluster.staleness_ms,
            clock: ClockMode::Virtual,
            speedup: None,
            today: NaiveDate::from_ymd_opt(2013, 12, 31).unwrap(),
            generator: GeneratorConfig::default(),
            pipeline: PipelineConfig::default(),
            cost: CostModel::default(),
            s1: S1Params::default(),
            s2: S2Params::default(),
            s3: S3Params::default(),
            s4: S4Params::default(),
            s5: S5Params::default(),
            s7: S7Params::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn cluster(&self) -> ClusterConfig {
        ClusterConfig {
            nodes: self.nodes,
            replication: self.replication,
            vnodes: self.vnodes,
            consistency: self.consistency,
            staleness_ms: self.staleness_ms,
        }
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig { seed: self.seed, scale_factor_gb: self.sf * self.corpus_factor, ..self.generator.clone() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |m: String| Err(ScenarioError::Config(m));
        if !(self.sf.is_finite() && self.sf > 0.0) {
            return fail(format!("sf must be positive, got {}", self.sf));
        }
        if !(self.corpus_factor.is_finite() && self.corpus_factor >= 1.0) {
            return fail(format!("corpus_factor must be >= 1, got {}", self.corpus_factor));
        }
        self.cluster().validate()?;
        if let Some(s) = self.speedup {
            if !(s.is_finite() && s >= 1.0) {
                return fail(format!("speedup must be >= 1, got {s}"));
            }
        }
        self.cost.validate()?;
        let s2 = &self.s2;
        for (name, v) in [
            ("s2.reads_per_second", s2.reads_per_second),
            ("s2.update_interval_s", s2.update_interval_s),
            ("s4.updates_per_second", self.s4.updates_per_second),
            ("s4.deletes_per_second", self.s4.deletes_per_second),
            ("s4.inserts_per_second", self.s4.inserts_per_second),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("s2.duration_s", s2.duration_s), ("s4.mutation_seconds", self.s4.mutation_seconds)] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be >= 0, got {v}"));
            }
        }
        if s2.readers == 0 {
            return fail("s2.readers must be >= 1".into());
        }
        if !(self.s7.delta.is_finite() && self.s7.delta >= 0.0) {
            return fail(format!("s7.delta must be >= 0, got {}", self.s7.delta));
        }
        if let Some(order) = &self.s3.removal_order {
            let mut seen = std::collections::BTreeSet::new();
            for n in order {
                if *n >= self.nodes || !seen.insert(*n) {
                    return fail(format!("s3.removal_order must list distinct nodes below {}", self.nodes));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn removal_order(&self, rng: &mut impl rand::Rng) -> Vec<NodeId> {
        use rand::seq::SliceRandom;
        match &self.s3.removal_order {
            Some(o) => o.iter().map(|n| NodeId(*n)).collect(),
            None => {
                let mut all: Vec<NodeId> = (0..self.nodes).map(NodeId).collect();
                all.shuffle(rng);
                all
            }
        }
    }
}
