//! In-process simulated cluster.
//!
//! Data lives once in memory; placement decides only which nodes would hold
//! a key and therefore whether the key is reachable. Killing a node keeps its
//! state, so recovery is lossless. In eventual mode each non-primary replica
//! applies every version after a deterministic lag of at most the staleness
//! window, and a read is served by one live replica chosen from the key and
//! the current time.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use super::*;
use crate::clock::Clock;
use crate::generator::vocab::mix;
use crate::generator::MediaFile;

pub(super) struct StoredVersion {
    pub article: Arc<Article>,
    pub write_ts_us: u64,
}

#[derive(Default)]
pub(super) struct Entry {
    pub versions: Vec<StoredVersion>,
    pub deleted: bool,
}

impl Entry {
    fn live(&self) -> bool {
        !self.deleted && !self.versions.is_empty()
    }
}

#[derive(Clone)]
pub(super) struct StoredMedia {
    pub descriptor: Arc<MediaRef>,
    pub payload: Arc<Vec<u8>>,
}

pub(super) struct Topology {
    pub ring: Ring,
    /// Every registered node and its liveness.
    pub members: BTreeMap<NodeId, bool>,
}

impl Topology {
    fn new(config: &ClusterConfig) -> Self {
        let members: BTreeMap<NodeId, bool> = (0..config.nodes).map(|n| (NodeId(n), true)).collect();
        Topology { ring: Ring::new(members.keys().copied(), config.vnodes), members }
    }

    fn replicas(&self, key: StoreKey, r: u32) -> Vec<NodeId> {
        self.ring.replicas(self.ring.shard_of(key.hash()), r as usize)
    }

    fn is_live(&self, n: NodeId) -> bool {
        self.members.get(&n).copied().unwrap_or(false)
    }

    fn reachable(&self, key: StoreKey, r: u32) -> bool {
        self.replicas(key, r).iter().any(|n| self.is_live(*n))
    }
}

pub struct SimCluster {
    pub(super) config: ClusterConfig,
    pub(super) clock: Arc<dyn Clock>,
    pub(super) topology: RwLock<Topology>,
    pub(super) articles: RwLock<HashMap<ArticleId, Arc<Mutex<Entry>>>>,
    pub(super) reference: RwLock<Arc<ReferenceData>>,
    pub(super) authors: RwLock<Arc<BTreeMap<AuthorId, Author>>>,
    pub(super) dates: RwLock<BTreeSet<DateInfo>>,
    pub(super) media: RwLock<BTreeMap<MediaId, StoredMedia>>,
    pub(super) metadata: RwLock<Option<Arc<MetadataState>>>,
}

impl std::fmt::Debug for SimCluster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimCluster").field("config", &self.config).finish_non_exhaustive()
    }
}

fn not_found(id: ArticleId) -> BackendError {
    BackendError::NotFound(format!("article {id}"))
}

fn unavailable(key: StoreKey) -> BackendError {
    BackendError::Unavailable(format!("no live replica for {key:?}"))
}

impl SimCluster {
    pub fn new(config: ClusterConfig, clock: Arc<dyn Clock>) -> Result<Self, BackendError> {
        config.validate()?;
        Ok(SimCluster {
            config,
            clock,
            topology: RwLock::new(Topology::new(&config)),
            articles: RwLock::new(HashMap::new()),
            reference: RwLock::new(Arc::new(ReferenceData::default())),
            authors: RwLock::new(Arc::new(BTreeMap::new())),
            dates: RwLock::new(BTreeSet::new()),
            media: RwLock::new(BTreeMap::new()),
            metadata: RwLock::new(None),
        })
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn media_payload(&self, id: MediaId) -> Option<Arc<Vec<u8>>> {
        self.media.read().get(&id).map(|m| m.payload.clone())
    }

    fn check_reachable(&self, key: StoreKey) -> Result<(), BackendError> {
        if self.topology.read().reachable(key, self.config.replication) {
            Ok(())
        } else {
            Err(unavailable(key))
        }
    }

    fn entry(&self, id: ArticleId) -> Option<Arc<Mutex<Entry>>> {
        self.articles.read().get(&id).cloned()
    }

    /// Lag after which the replica at `position` of a key's replica list
    /// has applied `version`. The primary never lags.
    fn lag_us(&self, id: ArticleId, version: u32, position: usize) -> u64 {
        let window = self.config.staleness_us();
        if position == 0 || window == 0 {
            return 0;
        }
        mix(mix(id.0) ^ ((version as u64) << 32) ^ position as u64) % (window + 1)
    }

    /// Index into the version list served to a reader at `now`.
    fn served_index(&self, id: ArticleId, entry: &Entry, now: u64) -> Result<usize, BackendError> {
        let key = StoreKey::Article(id.0);
        let topo = self.topology.read();
        let replicas = topo.replicas(key, self.config.replication);
        let live: Vec<usize> = (0..replicas.len()).filter(|i| topo.is_live(replicas[*i])).collect();
        if live.is_empty() {
            return Err(unavailable(key));
        }
        let latest = entry.versions.len() - 1;
        if self.config.staleness_us() == 0 {
            return Ok(latest);
        }
        let position = live[(mix(id.0 ^ mix(now)) % live.len() as u64) as usize];
        (0..=latest)
            .rev()
            .find(|&i| entry.versions[i].write_ts_us + self.lag_us(id, i as u32 + 1, position) <= now)
            .ok_or_else(|| not_found(id))
    }

    fn live_article_ids(&self) -> Vec<ArticleId> {
        let map = self.articles.read();
        let mut ids: Vec<ArticleId> = map.iter().filter(|(_, e)| e.lock().live()).map(|(id, _)| *id).collect();
        ids.sort();
        ids
    }

    fn latest(&self, id: ArticleId) -> Option<(Arc<Article>, u32)> {
        let e = self.entry(id)?;
        let e = e.lock();
        e.live().then(|| (e.versions.last().unwrap().article.clone(), e.versions.len() as u32))
    }

    /// Every stored key with its approximate size.
    fn keys(&self) -> Vec<(StoreKey, u64)> {
        let mut out: Vec<(StoreKey, u64)> = Vec::new();
        for (id, e) in self.articles.read().iter() {
            let e = e.lock();
            if e.live() {
                let size = e.versions.iter().map(|v| approx_article_bytes(&v.article)).sum();
                out.push((StoreKey::Article(id.0), size));
            }
        }
        for (id, m) in self.media.read().iter() {
            out.push((StoreKey::Media(id.0), m.descriptor.byte_size + m.descriptor.transcript.len() as u64));
        }
        out.sort();
        out
    }

    fn validate_slice(&self, slice: &Slice) -> Result<(), BackendError> {
        let reference = self.reference.read().clone();
        if slice.reference.is_some() && !reference.is_empty() {
            return Err(BackendError::Conflict("reference data already loaded".into()));
        }
        let reference = slice.reference.as_ref().unwrap_or(&reference);
        let authors = self.authors.read().clone();
        let media = self.media.read();
        let articles = self.articles.read();
        let mut new_authors = BTreeSet::new();
        for a in slice.authors() {
            if authors.contains_key(&a.id) || !new_authors.insert(a.id) {
                return Err(BackendError::Conflict(format!("author {} already loaded", a.id)));
            }
            for c in [a.citizenship_country_id, a.work_country_id] {
                if !reference.countries.contains_key(&c) {
                    return Err(BackendError::DanglingReference(format!("author {} -> country {c}", a.id)));
                }
            }
            if let AuthorKind::Professional { specialty_topic_id } = &a.kind {
                if !reference.topics.contains_key(specialty_topic_id) {
                    return Err(BackendError::DanglingReference(format!(
                        "author {} -> topic {specialty_topic_id}",
                        a.id
                    )));
                }
            }
        }
        let mut new_media = BTreeSet::new();
        for m in slice.media() {
            if media.contains_key(&m.descriptor.id) || !new_media.insert(m.descriptor.id) {
                return Err(BackendError::Conflict(format!("media {} already loaded", m.descriptor.id)));
            }
            if !m.descriptor.matches_payload(&m.payload) {
                return Err(BackendError::Corrupt(format!("media {} payload does not match its digest", m.descriptor.id)));
            }
        }
        let mut new_articles = BTreeSet::new();
        for a in slice.articles() {
            let dangling = |what: String| Err(BackendError::DanglingReference(format!("article {} -> {what}", a.id)));
            if articles.get(&a.id).is_some_and(|e| e.lock().live()) || !new_articles.insert(a.id) {
                return Err(BackendError::Conflict(format!("article {} already loaded", a.id)));
            }
            if !authors.contains_key(&a.author_id) && !new_authors.contains(&a.author_id) {
                return dangling(format!("author {}", a.author_id));
            }
            if let Some(t) = a.topic_ids.iter().find(|t| !reference.topics.contains_key(t)) {
                return dangling(format!("topic {t}"));
            }
            if let Some(k) = a.keyword_ids.iter().find(|k| !reference.keywords.contains_key(k)) {
                return dangling(format!("keyword {k}"));
            }
            if !reference.languages.contains_key(&a.language_id) {
                return dangling(format!("language {}", a.language_id));
            }
            if !reference.countries.contains_key(&a.country_id) {
                return dangling(format!("country {}", a.country_id));
            }
            if let Some(m) = a.media_refs.iter().find(|m| !media.contains_key(m) && !new_media.contains(m)) {
                return dangling(format!("media {m}"));
            }
        }
        let topo = self.topology.read();
        let r = self.config.replication;
        for key in new_articles.iter().map(|a| StoreKey::Article(a.0)).chain(new_media.iter().map(|m| StoreKey::Media(m.0))) {
            if !topo.reachable(key, r) {
                return Err(unavailable(key));
            }
        }
        Ok(())
    }

    pub(super) fn insert_media(&self, m: &MediaFile) {
        self.media.write().insert(
            m.descriptor.id,
            StoredMedia { descriptor: Arc::new(m.descriptor.clone()), payload: Arc::new(m.payload.clone()) },
        );
    }

    fn state_of(&self, topo: &Topology) -> ClusterState {
        let r = self.config.replication;
        let mut keys = vec![0u64; topo.ring.shard_count()];
        let mut stored: BTreeMap<NodeId, u64> = topo.members.keys().map(|n| (*n, 0)).collect();
        for (key, size) in self.keys() {
            let shard = topo.ring.shard_of(key.hash());
            keys[shard] += 1;
            for n in topo.ring.replicas(shard, r as usize) {
                *stored.entry(n).or_default() += size;
            }
        }
        let shards = (0..topo.ring.shard_count())
            .map(|i| {
                let (start, end) = topo.ring.range(i);
                ShardInfo { index: i, start, end, replicas: topo.ring.replicas(i, r as usize), keys: keys[i] }
            })
            .collect();
        ClusterState {
            nodes: topo
                .members
                .iter()
                .map(|(id, live)| NodeStatus { id: *id, live: *live, stored_bytes: stored[id] })
                .collect(),
            replication: r,
            consistency: self.config.consistency,
            staleness_ms: self.config.staleness_ms,
            shards,
        }
    }
}

impl Backend for SimCluster {
    fn name(&self) -> &str {
        "sim"
    }

    fn write(&self, article: Article) -> Result<Ack, BackendError> {
        let id = article.id;
        self.check_reachable(StoreKey::Article(id.0))?;
        let entry = {
            let mut map = self.articles.write();
            map.entry(id).or_default().clone()
        };
        let mut e = entry.lock();
        if e.live() {
            return Err(BackendError::Conflict(format!("article {id} already exists")));
        }
        let ts = self.clock.now_us();
        let mut article = article;
        article.version = 1;
        e.versions = vec![StoredVersion { article: Arc::new(article), write_ts_us: ts }];
        e.deleted = false;
        Ok(Ack { article: id, version: 1, write_ts_us: ts })
    }

    fn update(&self, id: ArticleId, new_body: String) -> Result<Ack, BackendError> {
        let entry = self.entry(id).ok_or_else(|| not_found(id))?;
        let mut e = entry.lock();
        if !e.live() {
            return Err(not_found(id));
        }
        self.check_reachable(StoreKey::Article(id.0))?;
        let version = e.versions.len() as u32 + 1;
        let mut next = (*e.versions.last().unwrap().article).clone();
        next.body = new_body;
        next.version = version;
        let ts = self.clock.now_us();
        e.versions.push(StoredVersion { article: Arc::new(next), write_ts_us: ts });
        Ok(Ack { article: id, version, write_ts_us: ts })
    }

    fn read(&self, id: ArticleId, mode: ReadMode) -> Result<VersionedValue, BackendError> {
        let entry = self.entry(id).ok_or_else(|| not_found(id))?;
        let e = entry.lock();
        if !e.live() {
            return Err(not_found(id));
        }
        let i = match mode {
            ReadMode::Latest => self.served_index(id, &e, self.clock.now_us())?,
            ReadMode::AtVersion(v) => {
                self.check_reachable(StoreKey::Article(id.0))?;
                if v == 0 || v as usize > e.versions.len() {
                    return Err(BackendError::NotFound(format!("article {id} version {v}")));
                }
                v as usize - 1
            }
        };
        let sv = &e.versions[i];
        Ok(VersionedValue { article_id: id, version: i as u32 + 1, payload: sv.article.clone(), write_ts_us: sv.write_ts_us })
    }

    fn delete(&self, id: ArticleId) -> Result<(), BackendError> {
        let entry = self.entry(id).ok_or_else(|| not_found(id))?;
        let mut e = entry.lock();
        if !e.live() {
            return Err(not_found(id));
        }
        self.check_reachable(StoreKey::Article(id.0))?;
        e.deleted = true;
        e.versions.clear();
        Ok(())
    }

    fn search(&self, query: &SearchQuery) -> Result<Vec<SearchHit>, BackendError> {
        let r = self.config.replication;
        let candidates: Vec<(ArticleId, f64)> = if query.terms.trim().is_empty() {
            self.live_article_ids().into_iter().map(|id| (id, 0.0)).collect()
        } else {
            let meta = self.metadata.read().clone().ok_or(BackendError::IndexNotBuilt)?;
            meta.index.search(&query.terms).into_iter().filter_map(|(d, s)| d.article().map(|a| (a, s))).collect()
        };
        let mut hits = Vec::new();
        for (id, score) in candidates {
            // Tombstoned articles stay in the index until it is rebuilt.
            let Some((article, _)) = self.latest(id) else { continue };
            if !query.matches(&article) {
                continue;
            }
            if !self.topology.read().reachable(StoreKey::Article(id.0), r) {
                return Err(unavailable(StoreKey::Article(id.0)));
            }
            hits.push(SearchHit { article: id, score });
        }
        Ok(hits)
    }

    fn version_history(&self, id: ArticleId) -> Result<Vec<VersionInfo>, BackendError> {
        let entry = self.entry(id).ok_or_else(|| not_found(id))?;
        let e = entry.lock();
        if !e.live() {
            return Err(not_found(id));
        }
        self.check_reachable(StoreKey::Article(id.0))?;
        Ok(e.versions
            .iter()
            .enumerate()
            .map(|(i, v)| VersionInfo { version: i as u32 + 1, write_ts_us: v.write_ts_us })
            .collect())
    }

    fn bulk_load(&self, slice: &Slice) -> Result<LoadReport, BackendError> {
        let start = self.clock.now_us();
        if slice.is_empty() {
            return Ok(LoadReport::default());
        }
        self.validate_slice(slice)?;
        let mut report = LoadReport { bytes: slice.byte_size, ..LoadReport::default() };
        if let Some(r) = &slice.reference {
            report.reference_entities = r.len() as u64;
            *self.reference.write() = Arc::new(r.clone());
        }
        {
            let mut authors = self.authors.write();
            let map = Arc::make_mut(&mut authors);
            for a in slice.authors() {
                map.insert(a.id, a.clone());
                report.authors += 1;
            }
        }
        {
            let mut dates = self.dates.write();
            dates.extend(slice.units.iter().filter_map(|u| u.date));
        }
        for m in slice.media() {
            self.insert_media(m);
            report.media += 1;
        }
        let ts = self.clock.now_us();
        let mut map = self.articles.write();
        for a in slice.articles() {
            let mut a = a.clone();
            a.version = 1;
            let e = Entry { versions: vec![StoredVersion { article: Arc::new(a.clone()), write_ts_us: ts }], deleted: false };
            map.insert(a.id, Arc::new(Mutex::new(e)));
            report.articles += 1;
        }
        report.elapsed_us = self.clock.now_us() - start;
        Ok(report)
    }

    fn snapshot(&self) -> Result<StoreSnapshot, BackendError> {
        {
            let topo = self.topology.read();
            let r = self.config.replication;
            if let Some((key, _)) = self.keys().into_iter().find(|(k, _)| !topo.reachable(*k, r)) {
                return Err(unavailable(key));
            }
        }
        let mut articles = BTreeMap::new();
        let mut versions = BTreeMap::new();
        for id in self.live_article_ids() {
            if let Some((a, n)) = self.latest(id) {
                articles.insert(id, a);
                versions.insert(id, n);
            }
        }
        Ok(StoreSnapshot {
            taken_at_us: self.clock.now_us(),
            reference: self.reference.read().clone(),
            authors: self.authors.read().clone(),
            articles,
            versions,
            media: self.media.read().iter().map(|(id, m)| (*id, m.descriptor.clone())).collect(),
            metadata: self.metadata.read().clone(),
        })
    }

    fn article_count(&self) -> u64 {
        self.articles.read().values().filter(|e| e.lock().live()).count() as u64
    }

    fn is_empty(&self) -> bool {
        self.article_count() == 0
            && self.reference.read().is_empty()
            && self.authors.read().is_empty()
            && self.media.read().is_empty()
    }

    fn install_metadata(&self, state: MetadataState) {
        *self.metadata.write() = Some(Arc::new(state));
    }

    fn metadata(&self) -> Option<Arc<MetadataState>> {
        self.metadata.read().clone()
    }

    fn kill_node(&self, node: NodeId) -> Result<ClusterState, BackendError> {
        let mut topo = self.topology.write();
        *topo.members.get_mut(&node).ok_or_else(|| BackendError::NotFound(node.to_string()))? = false;
        Ok(self.state_of(&topo))
    }

    fn recover_node(&self, node: NodeId) -> Result<ClusterState, BackendError> {
        let mut topo = self.topology.write();
        *topo.members.get_mut(&node).ok_or_else(|| BackendError::NotFound(node.to_string()))? = true;
        Ok(self.state_of(&topo))
    }

    /// Registers a live node. It takes ownership of keys at the next
    /// [`Backend::rebalance`].
    fn add_node(&self, node: NodeId) -> Result<ClusterState, BackendError> {
        let mut topo = self.topology.write();
        if topo.members.contains_key(&node) {
            return Err(BackendError::Conflict(format!("{node} already exists")));
        }
        topo.members.insert(node, true);
        Ok(self.state_of(&topo))
    }

    /// Rebuilds the ring over all registered nodes. Moved bytes count every
    /// replica a node must receive because it did not hold the key before.
    fn rebalance(&self) -> Result<RebalanceReport, BackendError> {
        let mut topo = self.topology.write();
        let r = self.config.replication as usize;
        let next = Ring::new(topo.members.keys().copied(), self.config.vnodes);
        let mut report = RebalanceReport { total_keys: 0, moved_keys: 0, total_bytes: 0, moved_bytes: 0 };
        for (key, size) in self.keys() {
            let h = key.hash();
            let old = topo.ring.replicas(topo.ring.shard_of(h), r);
            let new = next.replicas(next.shard_of(h), r);
            let fresh = new.iter().filter(|n| !old.contains(n)).count() as u64;
            report.total_keys += 1;
            report.total_bytes += size * new.len() as u64;
            if fresh > 0 {
                report.moved_keys += 1;
                report.moved_bytes += size * fresh;
            }
        }
        topo.ring = next;
        Ok(report)
    }

    fn cluster_state(&self) -> ClusterState {
        self.state_of(&self.topology.read())
    }
}
