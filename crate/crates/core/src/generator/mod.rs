//! Deterministic synthetic corpus generator.
//!
//! The corpus is a single stream: a block of reference entities, then one
//! unit per article in publish-date order. A unit carries the article, its
//! media files, any authors first used by it and the calendar entry of a
//! newly reached date. All randomness comes from one seeded stream and the
//! scale factor only decides where the stream stops, so a larger corpus
//! always extends a smaller one with the same seed.

mod corpus;
mod names;
pub mod vocab;

pub use corpus::{Corpus, CorpusManifest, Slice, SliceBoundary};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use chrono::{Datelike, Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::*;
use vocab::{mix, topic_shift, word, RankSampler};

pub const GIB: f64 = (1u64 << 30) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl TimeWindow {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    pub fn days(&self) -> i64 {
        (self.end - self.start).num_days()
    }
}

impl Default for TimeWindow {
    fn default() -> Self {
        TimeWindow {
            start: NaiveDate::from_ymd_opt(1974, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2013, 12, 31).unwrap(),
        }
    }
}

/// Generator settings. Defaults are tuned so a 0.01 GB corpus spans most of
/// the 40-year window and contains articles on the burst dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub scale_factor_gb: f64,
    pub time_window: TimeWindow,
    pub vocabulary_size: usize,
    pub zipf_exponent: f64,
    /// Probability that a body word is drawn from the topic-shifted law
    /// rather than the global one.
    pub topic_mix: f64,
    /// When set, the vocabulary is split into this many disjoint blocks and
    /// every article uses the block of its single topic only.
    pub planted_topics: Option<u32>,
    pub authors_initial: u32,
    pub authors_per_gb: u32,
    pub topics_total: u32,
    pub keywords_total: u32,
    pub languages_total: u32,
    pub countries_total: u32,
    /// Probability that an article carries media.
    pub media_ratio: f64,
    /// The n-th non-burst article is published at
    /// `start + floor(days * (1 - exp(-n / date_scale_articles)))`.
    pub date_scale_articles: f64,
    /// Days on which `burst_articles` extra articles are published.
    pub burst_dates: Vec<NaiveDate>,
    pub burst_articles: u32,
    pub body_words_min: u32,
    pub body_words_max: u32,
    /// Target size of one manifest slice.
    pub slice_bytes: u64,
    /// Stops after this many articles even if the byte budget is not reached.
    pub article_limit: Option<u64>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 42,
            scale_factor_gb: 0.01,
            time_window: TimeWindow::default(),
            vocabulary_size: 5000,
            zipf_exponent: 1.0,
            topic_mix: 0.5,
            planted_topics: None,
            authors_initial: 40,
            authors_per_gb: 20_000,
            topics_total: 24,
            keywords_total: 400,
            languages_total: 12,
            countries_total: 40,
            media_ratio: 0.15,
            date_scale_articles: 500.0,
            burst_dates: vec![
                NaiveDate::from_ymd_opt(2001, 9, 12).unwrap(),
                NaiveDate::from_ymd_opt(2008, 11, 5).unwrap(),
            ],
            burst_articles: 12,
            body_words_min: 120,
            body_words_max: 480,
            slice_bytes: 1 << 20,
            article_limit: None,
        }
    }
}

impl GeneratorConfig {
    pub fn target_bytes(&self) -> u64 {
        (self.scale_factor_gb * GIB).round() as u64
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let fail = |m: &str| Err(GeneratorError::Config(m.to_string()));
        if !(self.scale_factor_gb.is_finite() && self.scale_factor_gb > 0.0) {
            return fail("scale_factor_gb must be a positive number");
        }
        if self.time_window.start >= self.time_window.end {
            return fail("time_window.start must precede time_window.end");
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent > 0.0) {
            return fail("zipf_exponent must be > 0");
        }
        if !(0.0..=1.0).contains(&self.topic_mix) {
            return fail("topic_mix must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.media_ratio) {
            return fail("media_ratio must lie in [0, 1]");
        }
        if !(self.date_scale_articles.is_finite() && self.date_scale_articles > 0.0) {
            return fail("date_scale_articles must be > 0");
        }
        if self.topics_total == 0 || self.languages_total == 0 || self.countries_total == 0 {
            return fail("topics_total, languages_total and countries_total must be >= 1");
        }
        if self.keywords_total == 0 || self.keywords_total as usize > self.vocabulary_size {
            return fail("keywords_total must lie in [1, vocabulary_size]");
        }
        if self.authors_initial == 0 {
            return fail("authors_initial must be >= 1");
        }
        if self.body_words_min == 0 || self.body_words_min > self.body_words_max {
            return fail("body word bounds must satisfy 1 <= min <= max");
        }
        if self.article_limit == Some(0) {
            return fail("article_limit must be >= 1");
        }
        if self.slice_bytes == 0 {
            return fail("slice_bytes must be > 0");
        }
        if let Some(p) = self.planted_topics {
            if p < 2 || p > self.topics_total {
                return fail("planted_topics must lie in [2, topics_total]");
            }
            if self.vocabulary_size < 2 * p as usize {
                return fail("vocabulary too small for the planted topic blocks");
            }
        }
        if self.vocabulary_size < 2 {
            return fail("vocabulary_size must be >= 2");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("no extra data available: {loaded} of the corpus already loaded, {delta} more requested")]
    NoExtraData { loaded: f64, delta: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt corpus: {0}")]
    Corrupt(String),
}

/// A generated media file: descriptor plus opaque payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaFile {
    pub descriptor: MediaRef,
    pub payload: Vec<u8>,
}

/// One article together with everything first introduced alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticleUnit {
    /// Byte offset of the unit in the corpus stream.
    pub offset: u64,
    /// Serialized size of every document in the unit, payloads included.
    pub bytes: u64,
    pub authors: Vec<Author>,
    pub date: Option<DateInfo>,
    pub media: Vec<MediaFile>,
    pub article: Article,
}

/// A document of the corpus stream with its path relative to the corpus root.
pub(crate) struct Encoded {
    pub path: String,
    pub bytes: Vec<u8>,
}

pub(crate) fn entity_path(e: &Entity) -> String {
    match e {
        Entity::Article(a) => format!("articles/{}.xml", a.id.0),
        Entity::Author(a) => format!("authors/{}.xml", a.id.0),
        Entity::Topic(t) => format!("reference/topics/{}.xml", t.id.0),
        Entity::Keyword(k) => format!("reference/keywords/{}.xml", k.id.0),
        Entity::Language(l) => format!("reference/languages/{}.xml", l.id.0),
        Entity::Country(c) => format!("reference/countries/{}.xml", c.id.0),
        Entity::Date(d) => format!("dates/{}.xml", d.date),
        Entity::Media(m) => format!("media/{}.xml", m.id.0),
        Entity::Metadata(r) => format!("metadata/{}.xml", r.document),
    }
}

pub(crate) fn payload_path(id: MediaId) -> String {
    format!("media/{}.bin", id.0)
}

pub(crate) fn encode(e: &Entity) -> Encoded {
    let bytes = serialize_entity(e).expect("generated entities satisfy their invariants");
    Encoded { path: entity_path(e), bytes }
}

/// Encodes a unit's documents in stream order.
pub(crate) fn encode_unit(u: &ArticleUnit) -> Vec<Encoded> {
    let mut out = Vec::new();
    for a in &u.authors {
        out.push(encode(&Entity::Author(a.clone())));
    }
    if let Some(d) = u.date {
        out.push(encode(&Entity::Date(d)));
    }
    for m in &u.media {
        out.push(encode(&Entity::Media(m.descriptor.clone())));
        out.push(Encoded { path: payload_path(m.descriptor.id), bytes: m.payload.clone() });
    }
    out.push(encode(&Entity::Article(u.article.clone())));
    out
}

/// Builds the reference vocabularies from the configuration alone.
pub fn reference_data(cfg: &GeneratorConfig) -> ReferenceData {
    let mut r = ReferenceData::default();
    for i in 0..cfg.topics_total {
        let label = match names::TOPICS.get(i as usize) {
            Some(l) => l.to_string(),
            None => format!("topic {}", i + 1),
        };
        r.topics.insert(TopicId(i + 1), Topic { id: TopicId(i + 1), label });
    }
    for i in 0..cfg.keywords_total {
        let id = KeywordId(i + 1);
        // keywords are the most frequent words of the vocabulary
        r.keywords.insert(id, Keyword { id, word: word(i as usize) });
    }
    for i in 0..cfg.languages_total {
        let id = LanguageId(i + 1);
        let (code, dialect) = match names::LANGUAGES.get(i as usize) {
            Some((c, d)) => (c.to_string(), d.to_string()),
            None => ("xx".to_string(), format!("xx-{}", i + 1)),
        };
        r.languages.insert(id, Language { id, code, dialect });
    }
    for i in 0..cfg.countries_total {
        let id = CountryId(i + 1);
        let (name, iso) = match names::COUNTRIES.get(i as usize) {
            Some((n, c)) => (n.to_string(), c.to_string()),
            None => (format!("Country {}", i + 1), format!("X{}", i + 1)),
        };
        r.countries.insert(id, Country { id, name, iso_code: iso });
    }
    r
}

/// Streaming generator of article units.
pub struct Generator {
    cfg: GeneratorConfig,
    rng: ChaCha8Rng,
    words: RankSampler,
    keywords: RankSampler,
    views: LogNormal<f64>,
    reference: ReferenceData,
    authors: Vec<Author>,
    next_article: u64,
    next_media: u64,
    regular_index: u64,
    last_date: Option<NaiveDate>,
    pending_bursts: VecDeque<NaiveDate>,
    burst: Option<(NaiveDate, u32)>,
    offset: u64,
}

impl Generator {
    pub fn new(cfg: GeneratorConfig) -> Result<Self, GeneratorError> {
        cfg.validate()?;
        let block = match cfg.planted_topics {
            Some(p) => cfg.vocabulary_size / p as usize,
            None => cfg.vocabulary_size,
        };
        let words = RankSampler::new(block, cfg.zipf_exponent).map_err(GeneratorError::Config)?;
        let keywords =
            RankSampler::new(cfg.keywords_total as usize, cfg.zipf_exponent).map_err(GeneratorError::Config)?;
        let views = LogNormal::new(6.0, 1.0).expect("constant parameters");
        let mut bursts: Vec<NaiveDate> =
            cfg.burst_dates.iter().copied().filter(|d| cfg.time_window.contains(*d)).collect();
        bursts.sort();
        bursts.dedup();
        let reference = reference_data(&cfg);
        Ok(Generator {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            words,
            keywords,
            views,
            reference,
            authors: Vec::new(),
            next_article: 1,
            next_media: 1,
            regular_index: 0,
            last_date: None,
            pending_bursts: if cfg.burst_articles > 0 { bursts.into() } else { VecDeque::new() },
            burst: None,
            offset: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    pub fn reference(&self) -> &ReferenceData {
        &self.reference
    }

    /// Reference documents in stream order. Must be consumed before the
    /// first unit so offsets account for them.
    pub(crate) fn reference_block(&mut self) -> Vec<Encoded> {
        let docs: Vec<Encoded> = self.reference.entities().map(|e| encode(&e)).collect();
        self.offset += docs.iter().map(|d| d.bytes.len() as u64).sum::<u64>();
        docs
    }

    pub(crate) fn offset(&self) -> u64 {
        self.offset
    }

    fn regular_date(&self, n: u64) -> NaiveDate {
        let w = self.cfg.time_window;
        let frac = 1.0 - (-(n as f64) / self.cfg.date_scale_articles).exp();
        let days = ((w.days() as f64) * frac).floor() as u64;
        w.start + Days::new(days.min(w.days() as u64))
    }

    fn next_date(&mut self) -> NaiveDate {
        if let Some((d, left)) = self.burst {
            self.burst = if left > 1 { Some((d, left - 1)) } else { None };
            return d;
        }
        let d = self.regular_date(self.regular_index);
        if let Some(&b) = self.pending_bursts.front() {
            if b <= d {
                self.pending_bursts.pop_front();
                let left = self.cfg.burst_articles - 1;
                self.burst = if left > 0 { Some((b, left)) } else { None };
                return b;
            }
        }
        self.regular_index += 1;
        d
    }

    fn author_target(&self) -> usize {
        let extra = (self.cfg.authors_per_gb as f64 * self.offset as f64 / GIB).floor() as usize;
        self.cfg.authors_initial as usize + extra
    }

    fn new_author(&mut self, first_use: NaiveDate) -> Author {
        let id = AuthorId(self.authors.len() as u32 + 1);
        let lo = NaiveDate::from_ymd_opt(1940, 1, 1).unwrap();
        let mut hi = NaiveDate::from_ymd_opt(1990, 12, 31).unwrap();
        let latest = first_use.with_year(first_use.year() - 15).unwrap_or_else(|| {
            // Feb 29 of a year whose minus-15 counterpart is not leap
            NaiveDate::from_ymd_opt(first_use.year() - 15, 2, 28).unwrap()
        });
        hi = hi.min(latest);
        let lo = lo.min(hi);
        let span = (hi - lo).num_days() as u64;
        let birth_date = lo + Days::new(self.rng.random_range(0..=span));
        let name = format!("{} {}", capitalize(&word(self.rng.random_range(0..900))), capitalize(&word(self.rng.random_range(900..4500))));
        let nc = self.cfg.countries_total;
        let citizenship = CountryId(self.rng.random_range(1..=nc));
        let work = if self.rng.random_bool(0.8) { citizenship } else { CountryId(self.rng.random_range(1..=nc)) };
        let kind = if self.rng.random_bool(0.7) {
            AuthorKind::Journalist {
                employer_journal: names::JOURNALS.choose(&mut self.rng).unwrap().to_string(),
                interview_count: self.rng.random_range(0..=200),
            }
        } else {
            AuthorKind::Professional { specialty_topic_id: TopicId(self.rng.random_range(1..=self.cfg.topics_total)) }
        };
        Author { id, name, birth_date, citizenship_country_id: citizenship, work_country_id: work, kind }
    }

    /// Draws one body word for an article whose primary topic is `topic` (0-based).
    fn draw_word(&mut self, topic: u32, out: &mut String) {
        if let Some(p) = self.cfg.planted_topics {
            let r = self.words.sample(&mut self.rng);
            out.push_str(&word(topic as usize % p as usize + p as usize * r));
            return;
        }
        if self.rng.random_bool(0.002) {
            out.push_str(names::NOTABLE_TERMS.choose(&mut self.rng).unwrap());
            return;
        }
        let r = self.words.sample(&mut self.rng);
        let r = if self.rng.random_bool(self.cfg.topic_mix) { topic_shift(r, topic, self.words.len()) } else { r };
        out.push_str(&word(r));
    }

    fn text(&mut self, topic: u32, words: u32, sentences: bool) -> String {
        let mut s = String::new();
        let mut sep = None;
        let mut capital = true;
        let mut left = if sentences { self.rng.random_range(8..=20) } else { 0 };
        let mut count = 0u32;
        for i in 0..words {
            if let Some(c) = sep {
                s.push(c);
            }
            let start = s.len();
            self.draw_word(topic, &mut s);
            if capital {
                let first = s[start..start + 1].to_ascii_uppercase();
                s.replace_range(start..start + 1, &first);
                capital = false;
            }
            sep = Some(' ');
            if sentences {
                left -= 1;
                if left == 0 || i + 1 == words {
                    s.push('.');
                    capital = true;
                    count += 1;
                    left = self.rng.random_range(8..=20);
                    if count.is_multiple_of(5) {
                        sep = Some('\n');
                    }
                }
            }
        }
        s
    }

    fn media_file(&mut self, topic: u32) -> MediaFile {
        let id = MediaId(self.next_media);
        self.next_media += 1;
        let kind = if self.rng.random_bool(0.6) { MediaKind::Audio } else { MediaKind::Video };
        let size = self.rng.random_range(1024..=32 * 1024) as usize;
        let mut payload = vec![0u8; size];
        ChaCha8Rng::seed_from_u64(mix(self.cfg.seed ^ mix(id.0))).fill_bytes(&mut payload);
        let comment_words = self.rng.random_range(2..=6);
        let internal_comment = self.text(topic, comment_words, false);
        let transcript_words = self.rng.random_range(20..=60);
        let transcript = self.text(topic, transcript_words, true);
        MediaFile {
            descriptor: MediaRef {
                id,
                kind,
                byte_size: size as u64,
                internal_comment,
                payload_digest: digest_hex(&payload),
                transcript,
            },
            payload,
        }
    }

    /// Generates the next unit and advances the stream offset past it.
    pub fn next_unit(&mut self) -> ArticleUnit {
        self.next_encoded().0
    }

    pub(crate) fn next_encoded(&mut self) -> (ArticleUnit, Vec<Encoded>) {
        let date = self.next_date();
        let mut new_authors = Vec::new();
        while self.authors.len() < self.author_target() {
            let a = self.new_author(date);
            self.authors.push(a.clone());
            new_authors.push(a);
        }
        let new_date = (self.last_date != Some(date)).then(|| DateInfo::new(date));
        self.last_date = Some(date);

        let id = ArticleId(self.next_article);
        self.next_article += 1;
        let author = self.authors.choose(&mut self.rng).unwrap().clone();

        let topics_total = self.cfg.topics_total;
        let primary = match (&author.kind, self.cfg.planted_topics) {
            (_, Some(p)) => self.rng.random_range(0..p),
            (AuthorKind::Professional { specialty_topic_id }, None) if self.rng.random_bool(0.5) => {
                specialty_topic_id.0 - 1
            }
            _ => self.rng.random_range(0..topics_total),
        };
        let mut topic_ids = BTreeSet::from([TopicId(primary + 1)]);
        if self.cfg.planted_topics.is_none() {
            for _ in 0..self.rng.random_range(0..=2) {
                topic_ids.insert(TopicId(self.rng.random_range(1..=topics_total)));
            }
        }
        let mut keyword_ids = BTreeSet::new();
        let nk = self.keywords.len();
        for _ in 0..self.rng.random_range(3..=6) {
            let r = topic_shift(self.keywords.sample(&mut self.rng), primary, nk);
            keyword_ids.insert(KeywordId(r as u32 + 1));
        }
        let language_id = if self.rng.random_bool(0.6) {
            LanguageId(1)
        } else {
            LanguageId(self.rng.random_range(1..=self.cfg.languages_total))
        };
        let country_id = if self.rng.random_bool(0.7) {
            author.work_country_id
        } else {
            CountryId(self.rng.random_range(1..=self.cfg.countries_total))
        };

        let title_words = self.rng.random_range(4..=9);
        let title = self.text(primary, title_words, false);
        let body_words = self.rng.random_range(self.cfg.body_words_min..=self.cfg.body_words_max);
        let body = self.text(primary, body_words, true);

        let mut citations = Vec::new();
        let earlier = id.0 - 1;
        if earlier > 0 {
            for _ in 0..self.rng.random_range(0..=4) {
                let c = if self.rng.random_bool(0.5) {
                    let lo = earlier.saturating_sub(199).max(1);
                    self.rng.random_range(lo..=earlier)
                } else {
                    self.rng.random_range(1..=earlier)
                };
                citations.push(ArticleId(c));
            }
            citations.sort();
        }

        let page_count = self.rng.random_range(1..=30);
        let mut monthly_views = BTreeMap::new();
        let mut month = YearMonth::of(date);
        let mut decay = 1.0;
        for _ in 0..24 {
            if month.first_day().is_none_or(|d| d > self.cfg.time_window.end) {
                break;
            }
            let v = (self.views.sample(&mut self.rng) * decay).round() as u64;
            monthly_views.insert(month, v);
            decay *= 0.85;
            month = month.next();
        }

        let mut media = Vec::new();
        if self.rng.random_bool(self.cfg.media_ratio) {
            let n = if self.rng.random_bool(0.2) { 2 } else { 1 };
            for _ in 0..n {
                media.push(self.media_file(primary));
            }
        }

        let article = Article {
            id,
            title,
            body,
            version: 1,
            author_id: author.id,
            topic_ids,
            keyword_ids,
            language_id,
            country_id,
            publish_date: date,
            media_refs: media.iter().map(|m| m.descriptor.id).collect(),
            citations,
            page_count,
            monthly_views,
        };
        let mut unit = ArticleUnit { offset: self.offset, bytes: 0, authors: new_authors, date: new_date, media, article };
        let docs = encode_unit(&unit);
        unit.bytes = docs.iter().map(|d| d.bytes.len() as u64).sum();
        self.offset += unit.bytes;
        (unit, docs)
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
