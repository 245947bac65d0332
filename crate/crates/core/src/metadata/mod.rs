//! Metadata extraction: TF-IDF index, citation PageRank and LDA topics over
//! articles and media transcripts, with incremental refresh on insert.
//!
//! Documents are articles (title and body) and media transcripts. Bigram
//! counts and the citation graph cover articles only. Topic modelling reads
//! each document as its term-frequency bag expanded in term order, so the
//! result depends only on the indexed content, not on insertion history.

pub mod lda;
pub mod pagerank;
pub mod text;
pub mod tfidf;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::*;
use lda::{extract_topics, LdaConfig};
use pagerank::{compute_pagerank, CitationGraph, PageRankConfig};
use text::Bigram;
use tfidf::InvertedIndex;

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {error}")]
    Parse { path: PathBuf, error: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub damping: f64,
    pub epsilon: f64,
    pub max_iterations: u32,
    pub lda: LdaConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let pr = PageRankConfig::default();
        PipelineConfig {
            damping: pr.damping,
            epsilon: pr.epsilon,
            max_iterations: pr.max_iterations,
            lda: LdaConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn pagerank(&self) -> PageRankConfig {
        PageRankConfig { damping: self.damping, epsilon: self.epsilon, max_iterations: self.max_iterations }
    }
}

/// Corpus-wide bigram counts plus the bigram bag of every article.
#[derive(Debug, Clone, Default)]
pub struct BigramIndex {
    counts: BTreeMap<Bigram, u64>,
    per_article: BTreeMap<ArticleId, BTreeMap<Bigram, u64>>,
    /// All bigrams by descending count, built on first use.
    ranked: OnceLock<Arc<Vec<(Bigram, u64)>>>,
}

impl PartialEq for BigramIndex {
    fn eq(&self, other: &Self) -> bool {
        self.counts == other.counts && self.per_article == other.per_article
    }
}

impl BigramIndex {
    pub fn insert(&mut self, id: ArticleId, text: &str) {
        self.remove(id);
        self.ranked = OnceLock::new();
        let mut bag: BTreeMap<Bigram, u64> = BTreeMap::new();
        for b in text::bigrams(text) {
            *bag.entry(b).or_default() += 1;
        }
        for (b, n) in &bag {
            *self.counts.entry(b.clone()).or_default() += n;
        }
        self.per_article.insert(id, bag);
    }

    pub fn remove(&mut self, id: ArticleId) {
        let Some(bag) = self.per_article.remove(&id) else { return };
        self.ranked = OnceLock::new();
        for (b, n) in bag {
            if let Some(c) = self.counts.get_mut(&b) {
                *c -= n;
                if *c == 0 {
                    self.counts.remove(&b);
                }
            }
        }
    }

    pub fn count(&self, b: &Bigram) -> u64 {
        self.counts.get(b).copied().unwrap_or(0)
    }

    /// The `limit` most frequent bigrams, ties in lexicographic order.
    pub fn top(&self, limit: usize) -> Vec<(Bigram, u64)> {
        let ranked = self.ranked.get_or_init(|| {
            let mut all: Vec<(Bigram, u64)> = self.counts.iter().map(|(b, c)| (b.clone(), *c)).collect();
            all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            Arc::new(all)
        });
        ranked.iter().take(limit).cloned().collect()
    }

    /// Articles containing at least one of `wanted`.
    pub fn articles_containing(&self, wanted: &BTreeSet<Bigram>) -> Vec<ArticleId> {
        self.per_article
            .iter()
            .filter(|(_, bag)| bag.keys().any(|b| wanted.contains(b)))
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn article_bigrams(&self, id: ArticleId) -> Option<&BTreeMap<Bigram, u64>> {
        self.per_article.get(&id)
    }
}

/// Everything the pipeline derives from the loaded documents.
#[derive(Debug, Clone, PartialEq)]
pub struct MetadataState {
    pub config: PipelineConfig,
    pub index: InvertedIndex,
    pub bigrams: BigramIndex,
    /// Citation lists of indexed articles, the input of PageRank.
    pub citations: BTreeMap<ArticleId, Vec<ArticleId>>,
    pub pagerank: BTreeMap<ArticleId, f64>,
    pub topics: BTreeMap<DocumentId, Vec<f64>>,
    pub pagerank_iterations: u32,
}

impl MetadataState {
    fn empty(config: PipelineConfig) -> Self {
        MetadataState {
            config,
            index: InvertedIndex::default(),
            bigrams: BigramIndex::default(),
            citations: BTreeMap::new(),
            pagerank: BTreeMap::new(),
            topics: BTreeMap::new(),
            pagerank_iterations: 0,
        }
    }

    fn add_documents(&mut self, articles: &[Article], media: &[MediaRef]) {
        for a in articles {
            let text = a.text();
            self.index.insert(DocumentId::Article(a.id), &text);
            self.bigrams.insert(a.id, &text);
            self.citations.insert(a.id, a.citations.clone());
        }
        for m in media {
            self.index.insert(DocumentId::Transcript(m.id), &m.transcript);
        }
    }

    /// Batch run over a full document set.
    pub fn build(articles: &[Article], media: &[MediaRef], config: PipelineConfig) -> Result<Self, MetadataError> {
        let mut s = Self::empty(config);
        s.add_documents(articles, media);
        s.recompute_global()?;
        Ok(s)
    }

    /// Adds newly loaded documents, then recomputes PageRank and topics over
    /// the union. Document frequencies and the corpus size refresh with the
    /// index, so the result equals a batch run over everything.
    pub fn incremental_update(&mut self, articles: &[Article], media: &[MediaRef]) -> Result<(), MetadataError> {
        if articles.is_empty() && media.is_empty() {
            return Ok(());
        }
        self.add_documents(articles, media);
        self.recompute_global()
    }

    fn recompute_global(&mut self) -> Result<(), MetadataError> {
        self.pagerank.clear();
        self.topics.clear();
        self.pagerank_iterations = 0;
        if !self.citations.is_empty() {
            let edges = self.citations.iter().flat_map(|(a, cs)| cs.iter().map(move |c| (*a, *c, 1.0)));
            let graph = CitationGraph::from_edges(self.citations.keys().copied(), edges);
            let pr = compute_pagerank(&graph, self.config.pagerank())?;
            self.pagerank = pr.scores;
            self.pagerank_iterations = pr.iterations;
        }
        let docs: Vec<(DocumentId, Vec<String>)> = self
            .index
            .documents()
            .map(|d| {
                let tf = self.index.term_frequencies(d).expect("indexed document");
                let tokens = tf.iter().flat_map(|(t, n)| std::iter::repeat_n(t.clone(), *n as usize)).collect();
                (d, tokens)
            })
            .collect();
        if !docs.is_empty() {
            let model = extract_topics(&docs, self.config.lda)?;
            self.topics = model.documents.into_iter().zip(model.theta).collect();
        }
        Ok(())
    }

    /// Rebuilds the text indexes from the documents and takes PageRank and
    /// topics from persisted records, avoiding a new sampling run.
    pub fn restore(
        articles: &[Article],
        media: &[MediaRef],
        records: &[MetadataRecord],
        config: PipelineConfig,
    ) -> Self {
        let mut s = Self::empty(config);
        s.add_documents(articles, media);
        for r in records {
            if let (DocumentId::Article(a), Some(p)) = (r.document, r.pagerank) {
                s.pagerank.insert(a, p);
            }
            if !r.topic_distribution.is_empty() {
                s.topics.insert(r.document, r.topic_distribution.clone());
            }
        }
        s
    }

    /// One record per indexed document, in document order.
    pub fn records(&self) -> Vec<MetadataRecord> {
        self.index
            .documents()
            .map(|d| MetadataRecord {
                document: d,
                tfidf: self.index.vector(d),
                pagerank: d.article().and_then(|a| self.pagerank.get(&a).copied()),
                topic_distribution: self.topics.get(&d).cloned().unwrap_or_default(),
            })
            .collect()
    }

    pub fn n_documents(&self) -> usize {
        self.index.n_docs()
    }
}

/// Writes one canonical XML file per record into `dir`.
pub fn persist_records(records: &[MetadataRecord], dir: &Path) -> Result<(), MetadataError> {
    fs::create_dir_all(dir).map_err(|source| MetadataError::Io { path: dir.to_path_buf(), source })?;
    for r in records {
        let path = dir.join(format!("{}.xml", r.document));
        let bytes = serialize_entity(&Entity::Metadata(r.clone()))
            .map_err(|e| MetadataError::Argument(e.to_string()))?;
        fs::write(&path, bytes).map_err(|source| MetadataError::Io { path, source })?;
    }
    Ok(())
}

/// Reads every record in `dir`, ordered by document id.
pub fn load_records(dir: &Path) -> Result<Vec<MetadataRecord>, MetadataError> {
    let entries = fs::read_dir(dir).map_err(|source| MetadataError::Io { path: dir.to_path_buf(), source })?;
    let mut out = Vec::new();
    for e in entries {
        let path = e.map_err(|source| MetadataError::Io { path: dir.to_path_buf(), source })?.path();
        if path.extension().is_none_or(|x| x != "xml") {
            continue;
        }
        let bytes = fs::read(&path).map_err(|source| MetadataError::Io { path: path.clone(), source })?;
        match parse_entity(&bytes) {
            Ok(Entity::Metadata(r)) => out.push(r),
            Ok(other) => {
                return Err(MetadataError::Parse { path, error: format!("expected metadata, found {}", other.kind()) })
            }
            Err(e) => return Err(MetadataError::Parse { path, error: e.to_string() }),
        }
    }
    out.sort_by_key(|r| r.document);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{Corpus, GeneratorConfig};

    fn fast() -> PipelineConfig {
        PipelineConfig { lda: LdaConfig { iterations: 20, ..LdaConfig::default() }, ..PipelineConfig::default() }
    }

    fn corpus(n: u64) -> Corpus {
        Corpus::generate(&GeneratorConfig { article_limit: Some(n), scale_factor_gb: 1.0, ..GeneratorConfig::default() })
            .unwrap()
    }

    fn docs(units: &[crate::generator::ArticleUnit]) -> (Vec<Article>, Vec<MediaRef>) {
        let a = units.iter().map(|u| u.article.clone()).collect();
        let m = units.iter().flat_map(|u| u.media.iter().map(|m| m.descriptor.clone())).collect();
        (a, m)
    }

    #[test]
    fn incremental_equals_batch() {
        let c = corpus(120);
        let (all_a, all_m) = docs(&c.units);
        let (a1, m1) = docs(&c.units[..70]);
        let (a2, m2) = docs(&c.units[70..]);
        let mut inc = MetadataState::build(&a1, &m1, fast()).unwrap();
        let before = inc.index.n_docs();
        inc.incremental_update(&a2, &m2).unwrap();
        let batch = MetadataState::build(&all_a, &all_m, fast()).unwrap();
        assert_eq!(inc, batch);
        assert_eq!(inc.index.n_docs(), before + a2.len() + m2.len());
    }

    #[test]
    fn empty_increment_is_a_no_op() {
        let c = corpus(30);
        let (a, m) = docs(&c.units);
        let mut s = MetadataState::build(&a, &m, fast()).unwrap();
        let before = s.clone();
        s.incremental_update(&[], &[]).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn records_are_valid_and_round_trip() {
        let c = corpus(40);
        let (a, m) = docs(&c.units);
        let s = MetadataState::build(&a, &m, fast()).unwrap();
        let records = s.records();
        assert_eq!(records.len(), a.len() + m.len());
        for r in &records {
            r.check().unwrap();
        }
        let total: f64 = s.pagerank.values().sum();
        assert!((total - 1.0).abs() < 1e-6);
        let dir = tempfile::tempdir().unwrap();
        persist_records(&records, dir.path()).unwrap();
        assert_eq!(load_records(dir.path()).unwrap(), records);
        let restored = MetadataState::restore(&a, &m, &records, fast());
        assert_eq!(restored.records(), records);
    }

    #[test]
    fn empty_record_set_leaves_empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("metadata");
        persist_records(&[], &out).unwrap();
        assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
        assert!(load_records(&out).unwrap().is_empty());
    }

    #[test]
    fn empty_corpus_builds_empty_state() {
        let s = MetadataState::build(&[], &[], fast()).unwrap();
        assert_eq!(s.n_documents(), 0);
        assert!(s.records().is_empty());
    }

    #[test]
    fn top_bigrams_break_ties_lexicographically() {
        let mut b = BigramIndex::default();
        b.insert(ArticleId(1), "zz yy aa bb");
        b.insert(ArticleId(2), "aa bb");
        let top = b.top(2);
        assert_eq!(top[0], (("aa".into(), "bb".into()), 2));
        assert_eq!(top[1], (("yy".into(), "aa".into()), 1));
        b.remove(ArticleId(1));
        assert_eq!(b.top(5).len(), 1);
    }
}
