//! Materialized corpora: manifest, on-disk layout and slicing.
//!
//! Layout under the corpus root:
//!
//! ```text
//! manifest.json          CorpusManifest
//! units.jsonl            one line per article unit, in stream order
//! reference/{topics,keywords,languages,countries}/<id>.xml
//! authors/<id>.xml
//! dates/<yyyy-mm-dd>.xml
//! media/<id>.xml, media/<id>.bin
//! articles/<id>.xml
//! ```
//!
//! The manifest digest is the SHA-256 of every document concatenated in
//! stream order, so it identifies the corpus bytes independently of paths.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::*;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceBoundary {
    pub slice_index: u32,
    pub first_article_id: ArticleId,
    pub last_article_id: ArticleId,
    pub byte_size: u64,
    /// SHA-256 of the slice's documents in stream order.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub config: GeneratorConfig,
    pub total_bytes: u64,
    /// Size of the reference block at the head of slice 0.
    pub reference_bytes: u64,
    pub article_count: u64,
    pub slice_boundaries: Vec<SliceBoundary>,
    pub per_entity_counts: BTreeMap<String, u64>,
    pub digest: String,
}

#[derive(Serialize, Deserialize)]
struct UnitIndex {
    article: u64,
    offset: u64,
    bytes: u64,
    authors: Vec<u32>,
    date: Option<NaiveDate>,
    media: Vec<u64>,
}

/// A generated corpus held in memory.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub reference: ReferenceData,
    pub units: Vec<ArticleUnit>,
}

/// A contiguous portion of the corpus stream. Only a slice starting at
/// fraction 0 carries the reference block; later slices are closed once
/// joined with everything before them.
#[derive(Debug, Clone)]
pub struct Slice {
    pub manifest_digest: String,
    pub from: f64,
    pub to: f64,
    pub reference: Option<ReferenceData>,
    pub units: Vec<ArticleUnit>,
    pub byte_size: u64,
}

impl Slice {
    pub fn is_empty(&self) -> bool {
        self.units.is_empty() && self.reference.is_none()
    }

    pub fn article_ids(&self) -> Vec<ArticleId> {
        self.units.iter().map(|u| u.article.id).collect()
    }

    pub fn articles(&self) -> impl Iterator<Item = &Article> {
        self.units.iter().map(|u| &u.article)
    }

    pub fn authors(&self) -> impl Iterator<Item = &Author> {
        self.units.iter().flat_map(|u| u.authors.iter())
    }

    pub fn media(&self) -> impl Iterator<Item = &MediaFile> {
        self.units.iter().flat_map(|u| u.media.iter())
    }
}

struct SliceBuilder {
    boundaries: Vec<SliceBoundary>,
    open: Option<(ArticleId, ArticleId, Sha256)>,
    bytes: u64,
    pending: Sha256,
    limit: u64,
}

impl SliceBuilder {
    fn new(limit: u64) -> Self {
        SliceBuilder { boundaries: Vec::new(), open: None, bytes: 0, pending: Sha256::new(), limit }
    }

    fn reference(&mut self, doc: &[u8]) {
        self.pending.update(doc);
        self.bytes += doc.len() as u64;
    }

    fn unit(&mut self, id: ArticleId, docs: &[Encoded]) {
        let (_, last, h) = self.open.get_or_insert_with(|| (id, id, std::mem::take(&mut self.pending)));
        *last = id;
        for d in docs {
            h.update(&d.bytes);
            self.bytes += d.bytes.len() as u64;
        }
        if self.bytes >= self.limit {
            self.close();
        }
    }

    fn close(&mut self) {
        if let Some((first, last, h)) = self.open.take() {
            self.boundaries.push(SliceBoundary {
                slice_index: self.boundaries.len() as u32,
                first_article_id: first,
                last_article_id: last,
                byte_size: self.bytes,
                digest: hex::encode(h.finalize()),
            });
            self.bytes = 0;
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GeneratorError + '_ {
    move |source| GeneratorError::Io { path: path.to_path_buf(), source }
}

impl Corpus {
    /// Generates a corpus in memory.
    pub fn generate(config: &GeneratorConfig) -> Result<Corpus, GeneratorError> {
        Self::build(config, &mut |_| Ok(()))
    }

    /// Generates a corpus and writes it under `dir`, which must be absent or empty.
    pub fn generate_to_dir(config: &GeneratorConfig, dir: &Path) -> Result<Corpus, GeneratorError> {
        config.validate()?;
        if dir.exists() {
            let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
            if entries.next().is_some() {
                return Err(GeneratorError::Config(format!("output directory {} is not empty", dir.display())));
            }
        }
        for sub in [
            "reference/topics",
            "reference/keywords",
            "reference/languages",
            "reference/countries",
            "authors",
            "dates",
            "media",
            "articles",
        ] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        let corpus = Self::build(config, &mut |doc| {
            let p = dir.join(&doc.path);
            fs::write(&p, &doc.bytes).map_err(io_err(&p))
        })?;
        let mut lines = String::new();
        for u in &corpus.units {
            let idx = UnitIndex {
                article: u.article.id.0,
                offset: u.offset,
                bytes: u.bytes,
                authors: u.authors.iter().map(|a| a.id.0).collect(),
                date: u.date.map(|d| d.date),
                media: u.media.iter().map(|m| m.descriptor.id.0).collect(),
            };
            lines.push_str(&serde_json::to_string(&idx).expect("plain data"));
            lines.push('\n');
        }
        let p = dir.join("units.jsonl");
        fs::write(&p, lines).map_err(io_err(&p))?;
        let p = dir.join("manifest.json");
        let mut json = serde_json::to_string_pretty(&corpus.manifest).expect("plain data");
        json.push('\n');
        fs::write(&p, json).map_err(io_err(&p))?;
        Ok(corpus)
    }

    fn build(
        config: &GeneratorConfig,
        sink: &mut dyn FnMut(&Encoded) -> Result<(), GeneratorError>,
    ) -> Result<Corpus, GeneratorError> {
        let mut gen = Generator::new(config.clone())?;
        let target = config.target_bytes();
        let upper = (target as f64 * 1.01).floor() as u64;
        let mut stream = Sha256::new();
        let mut slices = SliceBuilder::new(config.slice_bytes);
        for doc in gen.reference_block() {
            stream.update(&doc.bytes);
            slices.reference(&doc.bytes);
            sink(&doc)?;
        }
        let reference_bytes = gen.offset();
        let mut units: Vec<ArticleUnit> = Vec::new();
        let mut by_budget = true;
        loop {
            if config.article_limit.is_some_and(|n| units.len() as u64 >= n) {
                by_budget = false;
                break;
            }
            if gen.offset() >= target {
                break;
            }
            let (unit, docs) = gen.next_encoded();
            if !units.is_empty() && unit.offset + unit.bytes > upper {
                break;
            }
            for d in &docs {
                stream.update(&d.bytes);
                sink(d)?;
            }
            slices.unit(unit.article.id, &docs);
            units.push(unit);
        }
        slices.close();
        let total_bytes = units.last().map_or(reference_bytes, |u| u.offset + u.bytes);
        if by_budget && ((total_bytes as f64) < target as f64 * 0.99 || total_bytes > upper) {
            return Err(GeneratorError::Config(format!(
                "scale factor {} GB is too small to hold the reference data and one article within 1% ({} bytes needed)",
                config.scale_factor_gb, total_bytes
            )));
        }
        let mut counts = BTreeMap::new();
        let reference = gen.reference().clone();
        counts.insert("topic".to_string(), reference.topics.len() as u64);
        counts.insert("keyword".to_string(), reference.keywords.len() as u64);
        counts.insert("language".to_string(), reference.languages.len() as u64);
        counts.insert("country".to_string(), reference.countries.len() as u64);
        counts.insert("author".to_string(), units.iter().map(|u| u.authors.len() as u64).sum());
        counts.insert("date".to_string(), units.iter().filter(|u| u.date.is_some()).count() as u64);
        counts.insert("media".to_string(), units.iter().map(|u| u.media.len() as u64).sum());
        counts.insert("article".to_string(), units.len() as u64);
        let manifest = CorpusManifest {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            total_bytes,
            reference_bytes,
            article_count: units.len() as u64,
            slice_boundaries: slices.boundaries,
            per_entity_counts: counts,
            digest: hex::encode(stream.finalize()),
        };
        Ok(Corpus { manifest, reference, units })
    }

    /// Reads a corpus directory, checking every document against the
    /// manifest digest.
    pub fn open(dir: &Path) -> Result<Corpus, GeneratorError> {
        let read = |rel: &str| -> Result<Vec<u8>, GeneratorError> {
            let p: PathBuf = dir.join(rel);
            fs::read(&p).map_err(io_err(&p))
        };
        let manifest: CorpusManifest = serde_json::from_slice(&read("manifest.json")?)
            .map_err(|e| GeneratorError::Corrupt(format!("manifest.json: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(GeneratorError::Corrupt(format!(
                "unsupported corpus format version {}",
                manifest.format_version
            )));
        }
        let mut stream = Sha256::new();
        let parse = |stream: &mut Sha256, rel: String| -> Result<Entity, GeneratorError> {
            let bytes = read(&rel)?;
            stream.update(&bytes);
            parse_entity(&bytes).map_err(|e| GeneratorError::Corrupt(format!("{rel}: {e}")))
        };
        let count = |k: &str| manifest.per_entity_counts.get(k).copied().unwrap_or(0) as u32;
        let mut reference = ReferenceData::default();
        for i in 1..=count("topic") {
            if let Entity::Topic(t) = parse(&mut stream, format!("reference/topics/{i}.xml"))? {
                reference.topics.insert(t.id, t);
            }
        }
        for i in 1..=count("keyword") {
            if let Entity::Keyword(k) = parse(&mut stream, format!("reference/keywords/{i}.xml"))? {
                reference.keywords.insert(k.id, k);
            }
        }
        for i in 1..=count("language") {
            if let Entity::Language(l) = parse(&mut stream, format!("reference/languages/{i}.xml"))? {
                reference.languages.insert(l.id, l);
            }
        }
        for i in 1..=count("country") {
            if let Entity::Country(c) = parse(&mut stream, format!("reference/countries/{i}.xml"))? {
                reference.countries.insert(c.id, c);
            }
        }
        let index = String::from_utf8(read("units.jsonl")?)
            .map_err(|_| GeneratorError::Corrupt("units.jsonl is not UTF-8".into()))?;
        let mut units = Vec::new();
        for (n, line) in index.lines().enumerate() {
            let idx: UnitIndex = serde_json::from_str(line)
                .map_err(|e| GeneratorError::Corrupt(format!("units.jsonl line {}: {e}", n + 1)))?;
            let mut authors = Vec::new();
            for a in &idx.authors {
                match parse(&mut stream, format!("authors/{a}.xml"))? {
                    Entity::Author(a) => authors.push(a),
                    other => return Err(GeneratorError::Corrupt(format!("expected author, found {}", other.kind()))),
                }
            }
            let date = match idx.date {
                Some(d) => match parse(&mut stream, format!("dates/{d}.xml"))? {
                    Entity::Date(d) => Some(d),
                    other => return Err(GeneratorError::Corrupt(format!("expected date, found {}", other.kind()))),
                },
                None => None,
            };
            let mut media = Vec::new();
            for m in &idx.media {
                let descriptor = match parse(&mut stream, format!("media/{m}.xml"))? {
                    Entity::Media(d) => d,
                    other => return Err(GeneratorError::Corrupt(format!("expected media, found {}", other.kind()))),
                };
                let payload = read(&payload_path(MediaId(*m)))?;
                stream.update(&payload);
                if !descriptor.matches_payload(&payload) {
                    return Err(GeneratorError::Corrupt(format!("media {m}: payload does not match its descriptor")));
                }
                media.push(MediaFile { descriptor, payload });
            }
            let article = match parse(&mut stream, format!("articles/{}.xml", idx.article))? {
                Entity::Article(a) => a,
                other => return Err(GeneratorError::Corrupt(format!("expected article, found {}", other.kind()))),
            };
            units.push(ArticleUnit { offset: idx.offset, bytes: idx.bytes, authors, date, media, article });
        }
        let digest = hex::encode(stream.finalize());
        if digest != manifest.digest {
            return Err(GeneratorError::Corrupt(format!(
                "content digest {digest} does not match manifest digest {}",
                manifest.digest
            )));
        }
        if units.len() as u64 != manifest.article_count {
            return Err(GeneratorError::Corrupt("unit index does not match the manifest article count".into()));
        }
        Ok(Corpus { manifest, reference, units })
    }

    pub fn total_bytes(&self) -> u64 {
        self.manifest.total_bytes
    }

    /// Units whose stream offset lies in `[from, to) * total_bytes`.
    pub fn take_slice(&self, from: f64, to: f64) -> Result<Slice, GeneratorError> {
        if !(from.is_finite() && to.is_finite() && 0.0 <= from && from < to && to <= 1.0) {
            return Err(GeneratorError::Argument(format!(
                "slice range [{from}, {to}) must satisfy 0 <= from < to <= 1"
            )));
        }
        let total = self.manifest.total_bytes as f64;
        let lo = from * total;
        let hi = to * total;
        let a = self.units.partition_point(|u| (u.offset as f64) < lo);
        let b = if to == 1.0 { self.units.len() } else { self.units.partition_point(|u| (u.offset as f64) < hi) };
        let units = self.units[a..b.max(a)].to_vec();
        let reference = (from == 0.0).then(|| self.reference.clone());
        let byte_size = units.iter().map(|u| u.bytes).sum::<u64>()
            + if reference.is_some() { self.manifest.reference_bytes } else { 0 };
        Ok(Slice { manifest_digest: self.manifest.digest.clone(), from, to, reference, units, byte_size })
    }

    /// The slice following `loaded`, of width `delta`.
    pub fn next_slice(&self, loaded: f64, delta: f64) -> Result<Slice, GeneratorError> {
        if !(loaded.is_finite() && delta.is_finite() && loaded >= 0.0 && delta >= 0.0) {
            return Err(GeneratorError::Argument(format!("invalid fractions loaded={loaded} delta={delta}")));
        }
        if loaded >= 1.0 || loaded + delta > 1.0 + 1e-12 {
            return Err(GeneratorError::NoExtraData { loaded, delta });
        }
        if delta == 0.0 {
            return Ok(Slice {
                manifest_digest: self.manifest.digest.clone(),
                from: loaded,
                to: loaded,
                reference: None,
                units: Vec::new(),
                byte_size: 0,
            });
        }
        self.take_slice(loaded, (loaded + delta).min(1.0))
    }

    pub fn authors(&self) -> impl Iterator<Item = &Author> {
        self.units.iter().flat_map(|u| u.authors.iter())
    }

    pub fn articles(&self) -> impl Iterator<Item = &Article> {
        self.units.iter().map(|u| &u.article)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn small(seed: u64) -> GeneratorConfig {
        GeneratorConfig { seed, scale_factor_gb: 0.002, slice_bytes: 256 * 1024, ..GeneratorConfig::default() }
    }

    #[test]
    fn byte_total_within_one_percent() {
        let cfg = small(42);
        let c = Corpus::generate(&cfg).unwrap();
        let t = cfg.target_bytes() as f64;
        let got = c.manifest.total_bytes as f64;
        assert!((got - t).abs() <= 0.01 * t, "{got} vs {t}");
        let slices: u64 = c.manifest.slice_boundaries.iter().map(|s| s.byte_size).sum();
        assert_eq!(slices, c.manifest.total_bytes);
    }

    #[test]
    fn tiny_scale_factor_is_a_config_error() {
        let cfg = GeneratorConfig { scale_factor_gb: 1e-6, ..GeneratorConfig::default() };
        assert!(matches!(Corpus::generate(&cfg), Err(GeneratorError::Config(_))));
    }

    #[test]
    fn halves_partition_the_corpus() {
        let c = Corpus::generate(&small(7)).unwrap();
        let a: BTreeSet<_> = c.take_slice(0.0, 0.5).unwrap().article_ids().into_iter().collect();
        let b: BTreeSet<_> = c.take_slice(0.5, 1.0).unwrap().article_ids().into_iter().collect();
        assert!(a.is_disjoint(&b));
        let all: BTreeSet<_> = c.articles().map(|a| a.id).collect();
        assert_eq!(&a | &b, all);
    }

    #[test]
    fn slice_size_within_one_article() {
        let c = Corpus::generate(&small(9)).unwrap();
        let max_unit = c.units.iter().map(|u| u.bytes).max().unwrap() as f64;
        for (f, t) in [(0.0, 0.3), (0.3, 0.55), (0.1, 1.0), (0.0, 1.0)] {
            let s = c.take_slice(f, t).unwrap();
            let want = (t - f) * c.total_bytes() as f64;
            assert!((s.byte_size as f64 - want).abs() <= max_unit, "[{f},{t}) {} vs {want}", s.byte_size);
        }
    }

    #[test]
    fn slice_arguments_checked() {
        let c = Corpus::generate(&small(1)).unwrap();
        assert!(matches!(c.take_slice(0.25, 0.25), Err(GeneratorError::Argument(_))));
        assert!(matches!(c.take_slice(-0.1, 0.5), Err(GeneratorError::Argument(_))));
        assert!(matches!(c.take_slice(0.5, 1.1), Err(GeneratorError::Argument(_))));
        assert!(matches!(c.next_slice(1.0, 0.1), Err(GeneratorError::NoExtraData { .. })));
        assert!(c.next_slice(0.5, 0.0).unwrap().is_empty());
    }

    #[test]
    fn directory_round_trip_checks_digest() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("corpus");
        let cfg = GeneratorConfig { article_limit: Some(40), ..small(3) };
        let written = Corpus::generate_to_dir(&cfg, &root).unwrap();
        let read = Corpus::open(&root).unwrap();
        assert_eq!(read.manifest, written.manifest);
        assert_eq!(read.units, written.units);
        assert_eq!(read.reference, written.reference);

        let victim = root.join("articles/5.xml");
        let text = fs::read_to_string(&victim).unwrap().replace("<version>1</version>", "<version>2</version>");
        fs::write(&victim, text).unwrap();
        assert!(matches!(Corpus::open(&root), Err(GeneratorError::Corrupt(_))));

        assert!(matches!(Corpus::generate_to_dir(&cfg, &root), Err(GeneratorError::Config(_))));
    }
}
