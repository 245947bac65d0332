//! On-disk form of a simulated cluster.
//!
//! ```text
//! cluster.json                 config, node liveness, ring members, pipeline config
//! reference/<kind>/<id>.xml    topics, keywords, languages, countries
//! authors/<id>.xml
//! dates/<date>.xml
//! media/<id>.xml, <id>.bin     descriptor and payload
//! articles/<id>/v<N>.xml       every retained version
//! articles/<id>/history.json   write timestamps, one per version
//! metadata/<document>.xml      one record per indexed document
//! ```
//!
//! Deleted articles are not written. On open, the text index is rebuilt
//! from the latest version of each indexed document.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sim::{Entry, StoredVersion, Topology};
use super::*;
use crate::clock::Clock;
use crate::generator::{entity_path, payload_path, MediaFile};
use crate::metadata::{load_records, persist_records, PipelineConfig};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ClusterFile {
    format_version: u32,
    config: ClusterConfig,
    nodes: Vec<NodeLiveness>,
    /// Nodes the ring was last built from.
    ring_members: Vec<NodeId>,
    pipeline: Option<PipelineConfig>,
}

#[derive(Serialize, Deserialize)]
struct NodeLiveness {
    id: NodeId,
    live: bool,
}

#[derive(Serialize, Deserialize)]
struct History {
    write_ts_us: Vec<u64>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BackendError + '_ {
    move |source| BackendError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), BackendError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io(parent))?;
    }
    fs::write(path, bytes).map_err(io(path))
}

fn write_entity(root: &Path, rel: &str, e: &Entity) -> Result<(), BackendError> {
    let bytes = serialize_entity(e).map_err(|err| BackendError::Corrupt(err.to_string()))?;
    write_file(&root.join(rel), &bytes)
}

fn read_entity(path: &Path) -> Result<Entity, BackendError> {
    let bytes = fs::read(path).map_err(io(path))?;
    parse_entity(&bytes).map_err(|e| BackendError::Corrupt(format!("{}: {e}", path.display())))
}

/// XML files directly inside `dir`, sorted; a missing directory is empty.
fn xml_files(dir: &Path) -> Result<Vec<std::path::PathBuf>, BackendError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(io(dir))? {
        let p = e.map_err(io(dir))?.path();
        if p.extension().is_some_and(|x| x == "xml") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

impl SimCluster {
    /// Writes the whole store into `dir`, which must be empty or absent.
    pub fn save(&self, dir: &Path) -> Result<(), BackendError> {
        if dir.exists() && fs::read_dir(dir).map_err(io(dir))?.next().is_some() {
            return Err(BackendError::Config(format!("{} is not empty", dir.display())));
        }
        fs::create_dir_all(dir).map_err(io(dir))?;
        let meta = self.metadata.read().clone();
        {
            let topo = self.topology.read();
            let file = ClusterFile {
                format_version: FORMAT_VERSION,
                config: self.config,
                nodes: topo.members.iter().map(|(id, live)| NodeLiveness { id: *id, live: *live }).collect(),
                ring_members: topo.ring.nodes().into_iter().collect(),
                pipeline: meta.as_ref().map(|m| m.config),
            };
            let json = serde_json::to_vec_pretty(&file).expect("cluster file serializes");
            write_file(&dir.join("cluster.json"), &json)?;
        }
        for e in self.reference.read().entities() {
            write_entity(dir, &entity_path(&e), &e)?;
        }
        for a in self.authors.read().values() {
            let e = Entity::Author(a.clone());
            write_entity(dir, &entity_path(&e), &e)?;
        }
        for d in self.dates.read().iter() {
            let e = Entity::Date(*d);
            write_entity(dir, &entity_path(&e), &e)?;
        }
        for (id, m) in self.media.read().iter() {
            let e = Entity::Media((*m.descriptor).clone());
            write_entity(dir, &entity_path(&e), &e)?;
            write_file(&dir.join(payload_path(*id)), &m.payload)?;
        }
        let articles: Vec<(ArticleId, Arc<parking_lot::Mutex<Entry>>)> =
            self.articles.read().iter().map(|(id, e)| (*id, e.clone())).collect();
        for (id, entry) in articles {
            let e = entry.lock();
            if e.deleted || e.versions.is_empty() {
                continue;
            }
            let adir = dir.join("articles").join(id.0.to_string());
            for (i, v) in e.versions.iter().enumerate() {
                let bytes = serialize_entity(&Entity::Article((*v.article).clone()))
                    .map_err(|err| BackendError::Corrupt(err.to_string()))?;
                write_file(&adir.join(format!("v{}.xml", i + 1)), &bytes)?;
            }
            let history = History { write_ts_us: e.versions.iter().map(|v| v.write_ts_us).collect() };
            write_file(&adir.join("history.json"), &serde_json::to_vec(&history).expect("history serializes"))?;
        }
        if let Some(m) = meta {
            let mdir = dir.join("metadata");
            persist_records(&m.records(), &mdir).map_err(|e| BackendError::Corrupt(e.to_string()))?;
        }
        Ok(())
    }

    /// Restores a store written by [`SimCluster::save`].
    pub fn open(dir: &Path, clock: Arc<dyn Clock>) -> Result<SimCluster, BackendError> {
        let path = dir.join("cluster.json");
        let bytes = fs::read(&path).map_err(io(&path))?;
        let file: ClusterFile =
            serde_json::from_slice(&bytes).map_err(|e| BackendError::Corrupt(format!("{}: {e}", path.display())))?;
        if file.format_version != FORMAT_VERSION {
            return Err(BackendError::Corrupt(format!("unsupported store format {}", file.format_version)));
        }
        let sim = SimCluster::new(file.config, clock)?;
        {
            let mut topo = sim.topology.write();
            *topo = Topology {
                ring: Ring::new(file.ring_members.iter().copied(), file.config.vnodes),
                members: file.nodes.iter().map(|n| (n.id, n.live)).collect(),
            };
        }

        let mut reference = ReferenceData::default();
        for kind in ["topics", "keywords", "languages", "countries"] {
            for p in xml_files(&dir.join("reference").join(kind))? {
                match read_entity(&p)? {
                    Entity::Topic(t) => drop(reference.topics.insert(t.id, t)),
                    Entity::Keyword(k) => drop(reference.keywords.insert(k.id, k)),
                    Entity::Language(l) => drop(reference.languages.insert(l.id, l)),
                    Entity::Country(c) => drop(reference.countries.insert(c.id, c)),
                    other => return Err(BackendError::Corrupt(format!("{}: unexpected {}", p.display(), other.kind()))),
                }
            }
        }
        *sim.reference.write() = Arc::new(reference);

        let mut authors = BTreeMap::new();
        for p in xml_files(&dir.join("authors"))? {
            let Entity::Author(a) = read_entity(&p)? else {
                return Err(BackendError::Corrupt(format!("{}: expected an author", p.display())));
            };
            authors.insert(a.id, a);
        }
        *sim.authors.write() = Arc::new(authors);

        for p in xml_files(&dir.join("dates"))? {
            let Entity::Date(d) = read_entity(&p)? else {
                return Err(BackendError::Corrupt(format!("{}: expected a date", p.display())));
            };
            sim.dates.write().insert(d);
        }

        let mut media = Vec::new();
        for p in xml_files(&dir.join("media"))? {
            let Entity::Media(m) = read_entity(&p)? else {
                return Err(BackendError::Corrupt(format!("{}: expected media", p.display())));
            };
            let bin = dir.join(payload_path(m.id));
            let payload = fs::read(&bin).map_err(io(&bin))?;
            if !m.matches_payload(&payload) {
                return Err(BackendError::Corrupt(format!("{}: payload digest mismatch", bin.display())));
            }
            media.push(m.clone());
            sim.insert_media(&MediaFile { descriptor: m, payload });
        }

        let adir = dir.join("articles");
        if adir.exists() {
            let mut map = sim.articles.write();
            for e in fs::read_dir(&adir).map_err(io(&adir))? {
                let d = e.map_err(io(&adir))?.path();
                let id: u64 = d
                    .file_name()
                    .and_then(|n| n.to_str())
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| BackendError::Corrupt(format!("{}: not an article directory", d.display())))?;
                let hpath = d.join("history.json");
                let history: History = serde_json::from_slice(&fs::read(&hpath).map_err(io(&hpath))?)
                    .map_err(|e| BackendError::Corrupt(format!("{}: {e}", hpath.display())))?;
                let mut versions = Vec::with_capacity(history.write_ts_us.len());
                for (i, ts) in history.write_ts_us.iter().enumerate() {
                    let p = d.join(format!("v{}.xml", i + 1));
                    let Entity::Article(a) = read_entity(&p)? else {
                        return Err(BackendError::Corrupt(format!("{}: expected an article", p.display())));
                    };
                    if a.id.0 != id || a.version as usize != i + 1 {
                        return Err(BackendError::Corrupt(format!("{}: id or version mismatch", p.display())));
                    }
                    versions.push(StoredVersion { article: Arc::new(a), write_ts_us: *ts });
                }
                if versions.is_empty() {
                    return Err(BackendError::Corrupt(format!("{}: empty history", d.display())));
                }
                map.insert(ArticleId(id), Arc::new(parking_lot::Mutex::new(Entry { versions, deleted: false })));
            }
        }

        if let Some(pipeline) = file.pipeline {
            let records = load_records(&dir.join("metadata")).map_err(|e| BackendError::Corrupt(e.to_string()))?;
            let indexed: BTreeSet<DocumentId> = records.iter().map(|r| r.document).collect();
            let mut articles: Vec<Article> = Vec::new();
            for d in &indexed {
                if let DocumentId::Article(a) = *d {
                    if let Some(e) = sim.articles.read().get(&a) {
                        articles.push((*e.lock().versions.last().unwrap().article).clone());
                    }
                }
            }
            media.retain(|m| indexed.contains(&DocumentId::Transcript(m.id)));
            sim.install_metadata(MetadataState::restore(&articles, &media, &records, pipeline));
        }
        Ok(sim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::generator::{Corpus, GeneratorConfig};
    use crate::metadata::lda::LdaConfig;

    #[test]
    fn save_and_open_round_trip() {
        let corpus = Corpus::generate(&GeneratorConfig { scale_factor_gb: 0.0005, ..GeneratorConfig::default() }).unwrap();
        let clock = Arc::new(ManualClock::new(5));
        let sim = SimCluster::new(ClusterConfig::default(), clock.clone()).unwrap();
        sim.bulk_load(&corpus.take_slice(0.0, 1.0).unwrap()).unwrap();
        let ids: Vec<ArticleId> = corpus.articles().map(|a| a.id).collect();
        clock.advance(10);
        sim.update(ids[0], "rewritten body".into()).unwrap();
        sim.delete(ids[1]).unwrap();
        sim.kill_node(NodeId(2)).unwrap();
        let snap = sim.snapshot().unwrap();
        let articles: Vec<Article> = snap.articles.values().map(|a| (**a).clone()).collect();
        let media: Vec<MediaRef> = snap.media.values().map(|m| (**m).clone()).collect();
        let pipeline = PipelineConfig { lda: LdaConfig { iterations: 5, ..LdaConfig::default() }, ..PipelineConfig::default() };
        sim.install_metadata(MetadataState::build(&articles, &media, pipeline).unwrap());

        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("store");
        sim.save(&root).unwrap();
        assert!(sim.save(&root).is_err());
        let back = SimCluster::open(&root, clock).unwrap();

        assert_eq!(back.cluster_state(), sim.cluster_state());
        let a = back.snapshot().unwrap();
        assert_eq!(a.articles, snap.articles);
        assert_eq!(a.versions, snap.versions);
        assert_eq!(*a.authors, *snap.authors);
        assert_eq!(*a.reference, *snap.reference);
        assert_eq!(a.media, snap.media);
        assert_eq!(back.version_history(ids[0]).unwrap(), sim.version_history(ids[0]).unwrap());
        assert!(back.read(ids[1], ReadMode::Latest).unwrap_err().is_not_found());
        assert_eq!(*back.dates.read(), *sim.dates.read());
        let (m0, m1) = (sim.metadata().unwrap(), back.metadata().unwrap());
        assert_eq!(m0.index, m1.index);
        assert_eq!(m0.pagerank, m1.pagerank);
        assert_eq!(m0.topics, m1.topics);
    }

    #[test]
    fn open_rejects_tampered_payload() {
        let corpus = Corpus::generate(&GeneratorConfig { scale_factor_gb: 0.0005, ..GeneratorConfig::default() }).unwrap();
        let sim = SimCluster::new(ClusterConfig::default(), Arc::new(ManualClock::new(0))).unwrap();
        sim.bulk_load(&corpus.take_slice(0.0, 1.0).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        sim.save(dir.path()).unwrap();
        let Some(id) = corpus.units.iter().flat_map(|u| &u.media).map(|m| m.descriptor.id).next() else { return };
        fs::write(dir.path().join(payload_path(id)), b"xx").unwrap();
        assert!(matches!(SimCluster::open(dir.path(), Arc::new(ManualClock::new(0))), Err(BackendError::Corrupt(_))));
    }
}
