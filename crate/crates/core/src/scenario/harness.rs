//! The system under test plus the data and clock a scenario runs on.

use std::path::Path;
use std::sync::Arc;

use super::report::{OpKind, OpRecord, Outcome};
use super::sched::Time;
use super::{ClockMode, ScenarioConfig, ScenarioError};
use crate::backend::{Backend, BackendError, SimCluster, StoreSnapshot};
use crate::clock::{Clock, ManualClock, SystemClock};
use crate::generator::{Corpus, Slice, GIB};
use crate::metadata::MetadataState;
use crate::model::{Article, MediaRef};
use crate::query::{execute_on, QueryKind, QueryParams, QueryResult, QuerySpec};

pub struct Harness {
    pub(crate) config: ScenarioConfig,
    pub(crate) corpus: Arc<Corpus>,
    pub(crate) backend: Arc<dyn Backend>,
    sim: Arc<SimCluster>,
    pub(crate) time: Time,
    /// Fraction of the corpus stream loaded so far.
    pub(crate) loaded: f64,
}

pub(crate) fn outcome_of(e: &BackendError) -> Outcome {
    match e {
        BackendError::NotFound(_) => Outcome::NotFound,
        BackendError::Unavailable(_) => Outcome::Unavailable,
        BackendError::Conflict(_) => Outcome::Conflict,
        _ => Outcome::Failed,
    }
}

fn indexed_bytes(articles: &[Article], media: &[MediaRef]) -> u64 {
    articles.iter().map(|a| (a.title.len() + a.body.len()) as u64).sum::<u64>()
        + media.iter().map(|m| m.transcript.len() as u64).sum::<u64>()
}

fn slice_media(slice: &Slice) -> Vec<MediaRef> {
    slice.media().map(|m| m.descriptor.clone()).collect()
}

impl Harness {
    /// Generates the corpus and starts an empty reference cluster.
    pub fn new(config: ScenarioConfig) -> Result<Harness, ScenarioError> {
        config.validate()?;
        let corpus = Corpus::generate(&config.generator_config())?;
        Harness::with_corpus(config, Arc::new(corpus))
    }

    /// Uses an existing corpus, which should hold at least `sf` GB.
    pub fn with_corpus(config: ScenarioConfig, corpus: Arc<Corpus>) -> Result<Harness, ScenarioError> {
        config.validate()?;
        let (time, clock): (Time, Arc<dyn Clock>) = match config.clock {
            ClockMode::Virtual => {
                let c = Arc::new(ManualClock::new(0));
                (Time::Virtual { clock: c.clone(), speedup: config.speedup }, c)
            }
            ClockMode::Realtime => {
                let c: Arc<dyn Clock> = Arc::new(SystemClock::new());
                (Time::Real { clock: c.clone() }, c)
            }
        };
        let sim = Arc::new(SimCluster::new(config.cluster(), clock)?);
        Ok(Harness { config, corpus, backend: sim.clone(), sim, time, loaded: 0.0 })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn backend(&self) -> &Arc<dyn Backend> {
        &self.backend
    }

    /// Writes the store to `dir`; see [`SimCluster::save`].
    pub fn save_store(&self, dir: &Path) -> Result<(), ScenarioError> {
        Ok(self.sim.save(dir)?)
    }

    pub fn loaded_fraction(&self) -> f64 {
        self.loaded
    }

    pub fn now_us(&self) -> u64 {
        self.time.now()
    }

    /// Fraction of the corpus that makes up `sf` GB.
    pub fn initial_fraction(&self) -> Result<f64, ScenarioError> {
        let f = self.config.sf * GIB / self.corpus.total_bytes() as f64;
        if f > 1.0 + 1e-9 {
            return Err(ScenarioError::Precondition(format!(
                "corpus of {} bytes is smaller than sf = {} GB",
                self.corpus.total_bytes(),
                self.config.sf
            )));
        }
        Ok(f.min(1.0))
    }

    /// Loads the first `sf` GB and builds the metadata: the initial state of
    /// every scenario but the sixth, which times this step.
    pub fn initialize(&mut self) -> Result<Vec<OpRecord>, ScenarioError> {
        if !self.backend.is_empty() || self.loaded > 0.0 {
            return Err(ScenarioError::Precondition("backend is not empty".into()));
        }
        let f = self.initial_fraction()?;
        let slice = self.corpus.take_slice(0.0, f)?;
        let mut records = vec![self.bulk_load(&slice)?];
        let snap = self.backend.snapshot()?;
        let articles: Vec<Article> = snap.articles.values().map(|a| (**a).clone()).collect();
        let media: Vec<MediaRef> = snap.media.values().map(|m| (**m).clone()).collect();
        let start = self.time.now();
        let meta = MetadataState::build(&articles, &media, self.config.pipeline)?;
        self.backend.install_metadata(meta);
        let end = self.time.finish(start, self.config.cost.index(indexed_bytes(&articles, &media), self.live_nodes()));
        self.time.reach(end);
        let mut r = OpRecord::new(OpKind::IndexBuild, start, end, Outcome::Ok);
        r.count = Some(articles.len() as u64);
        records.push(r);
        self.loaded = f;
        Ok(records)
    }

    /// Loads the next `delta` of the corpus and updates the metadata
    /// incrementally.
    pub fn grow(&mut self, delta: f64) -> Result<Vec<OpRecord>, ScenarioError> {
        let Some(current) = self.backend.metadata() else {
            return Err(ScenarioError::Precondition("no metadata: the store is not in a consistent state".into()));
        };
        if self.loaded == 0.0 {
            return Err(ScenarioError::Precondition("nothing loaded yet".into()));
        }
        let slice = self.corpus.next_slice(self.loaded, delta)?;
        if slice.is_empty() {
            self.loaded = slice.to.max(self.loaded);
            return Ok(Vec::new());
        }
        let mut records = vec![self.bulk_load(&slice)?];
        let articles: Vec<Article> = slice.articles().cloned().collect();
        let media = slice_media(&slice);
        let start = self.time.now();
        let mut meta = (*current).clone();
        meta.incremental_update(&articles, &media)?;
        // The refresh recomputes weights, PageRank and topics over everything.
        let all_bytes = self.backend.snapshot()?.approx_bytes();
        self.backend.install_metadata(meta);
        let end = self.time.finish(start, self.config.cost.index(all_bytes, self.live_nodes()));
        self.time.reach(end);
        let mut r = OpRecord::new(OpKind::IndexUpdate, start, end, Outcome::Ok);
        r.count = Some(articles.len() as u64);
        records.push(r);
        self.loaded = slice.to;
        Ok(records)
    }

    fn bulk_load(&self, slice: &Slice) -> Result<OpRecord, ScenarioError> {
        let start = self.time.now();
        let report = self.backend.bulk_load(slice)?;
        let copies = slice.byte_size * self.config.replication as u64;
        let end = self.time.finish(start, self.config.cost.load(copies, self.live_nodes()));
        self.time.reach(end);
        let mut r = OpRecord::new(OpKind::BulkLoad, start, end, Outcome::Ok);
        r.count = Some(report.articles);
        r.detail = Some(format!("{} bytes", slice.byte_size));
        Ok(r)
    }

    /// Waits out the replica lag so loaded data is visible everywhere.
    pub fn settle(&self) {
        let c = self.backend.cluster_state();
        if c.consistency == crate::backend::ConsistencyMode::Eventual {
            self.time.pass(c.staleness_ms * 1000 + 1);
        }
    }

    pub(crate) fn live_nodes(&self) -> usize {
        self.backend.cluster_state().live_nodes()
    }

    pub(crate) fn stored_bytes(&self) -> u64 {
        self.backend.cluster_state().nodes.iter().map(|n| n.stored_bytes).sum()
    }
}

/// Snapshots the store and evaluates one query, charging a scan over the
/// live nodes. Parameters are drawn from the snapshot by `params`.
pub(crate) fn timed_query(
    time: &Time,
    backend: &dyn Backend,
    config: &ScenarioConfig,
    live_nodes: usize,
    kind: QueryKind,
    limit: Option<usize>,
    params: impl FnOnce(&StoreSnapshot) -> QueryParams,
) -> (OpRecord, Option<QueryResult>) {
    let start = time.now();
    let (outcome, result, scanned, detail) = match backend.snapshot() {
        Err(e) => (outcome_of(&e), None, 0, Some(e.to_string())),
        Ok(snap) => {
            let spec = QuerySpec { kind, params: params(&snap), limit };
            match execute_on(&spec, &snap, config.today) {
                Ok(r) => (Outcome::Ok, Some(r), snap.approx_bytes(), None),
                Err(e) => (Outcome::Failed, None, snap.approx_bytes(), Some(e.to_string())),
            }
        }
    };
    let end = time.finish(start, config.cost.scan(scanned, live_nodes));
    let mut r = OpRecord::new(OpKind::Query(kind), start, end, outcome);
    if let Some(res) = &result {
        r.count = Some(res.rows.len() as u64);
        r.bytes = Some(serde_json::to_vec(&res.rows).map_or(0, |v| v.len() as u64));
    }
    r.detail = detail;
    (r, result)
}
