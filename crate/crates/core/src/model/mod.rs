//! Domain entities of the news hub: articles, the author hierarchy, the
//! reference vocabularies, media descriptors and per-document metadata.
//!
//! Every entity is an immutable value once built. Mutation of stored
//! articles goes through the backend's versioned `update`.

mod xml;

pub use xml::{parse_entity, serialize_entity, ParseError, ParseErrorKind};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident($inner:ty), $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $prefix, self.0)
            }
        }

        impl From<$inner> for $name {
            fn from(v: $inner) -> Self {
                $name(v)
            }
        }
    };
}

id_type!(
    /// Identifier of an article. Generated ids are assigned in publish order.
    ArticleId(u64),
    "article-"
);
id_type!(AuthorId(u32), "author-");
id_type!(TopicId(u32), "topic-");
id_type!(KeywordId(u32), "keyword-");
id_type!(LanguageId(u32), "language-");
id_type!(CountryId(u32), "country-");
id_type!(MediaId(u64), "media-");

/// A calendar month, used as the key of an article's view history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        YearMonth { year, month }
    }

    pub fn of(date: NaiveDate) -> Self {
        YearMonth { year: date.year(), month: date.month() }
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            YearMonth { year: self.year + 1, month: 1 }
        } else {
            YearMonth { year: self.year, month: self.month + 1 }
        }
    }

    pub fn first_day(self) -> Option<NaiveDate> {
        NaiveDate::from_ymd_opt(self.year, self.month, 1)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl std::str::FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s.split_once('-').ok_or_else(|| format!("bad month `{s}`"))?;
        let year = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
        let month: u32 = m.parse().map_err(|_| format!("bad month in `{s}`"))?;
        if !(1..=12).contains(&month) {
            return Err(format!("month out of range in `{s}`"));
        }
        Ok(YearMonth { year, month })
    }
}

/// A versioned news article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: ArticleId,
    pub title: String,
    pub body: String,
    pub version: u32,
    pub author_id: AuthorId,
    pub topic_ids: BTreeSet<TopicId>,
    pub keyword_ids: BTreeSet<KeywordId>,
    pub language_id: LanguageId,
    /// Country the article reports from.
    pub country_id: CountryId,
    pub publish_date: NaiveDate,
    /// Sorted by id.
    pub media_refs: Vec<MediaId>,
    /// Articles this one references. Sorted; repeats encode citation multiplicity.
    pub citations: Vec<ArticleId>,
    pub page_count: u32,
    pub monthly_views: BTreeMap<YearMonth, u64>,
}

impl Article {
    /// Text fed to the tokenizer: title and body.
    pub fn text(&self) -> String {
        let mut s = String::with_capacity(self.title.len() + self.body.len() + 1);
        s.push_str(&self.title);
        s.push('\n');
        s.push_str(&self.body);
        s
    }

    /// Checks the invariants that can be verified on the article alone.
    pub fn check(&self) -> Result<(), ModelError> {
        let fail = |inv: &str| Err(ModelError::invariant("article", self.id.0, inv));
        if self.version < 1 {
            return fail("version >= 1");
        }
        if self.page_count < 1 {
            return fail("pageCount >= 1");
        }
        if self.citations.contains(&self.id) {
            return fail("citations never include the article's own id");
        }
        if !self.citations.windows(2).all(|w| w[0] <= w[1]) {
            return fail("citations sorted by id");
        }
        if !self.media_refs.windows(2).all(|w| w[0] < w[1]) {
            return fail("mediaRefs sorted and distinct");
        }
        check_text("article", self.id.0, &self.title)?;
        check_text("article", self.id.0, &self.body)?;
        Ok(())
    }
}

/// Concrete kind of an author. The hierarchy is closed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "subtype", rename_all = "lowercase")]
pub enum AuthorKind {
    Journalist { employer_journal: String, interview_count: u32 },
    Professional { specialty_topic_id: TopicId },
}

impl AuthorKind {
    pub fn discriminator(&self) -> &'static str {
        match self {
            AuthorKind::Journalist { .. } => "journalist",
            AuthorKind::Professional { .. } => "professional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Author {
    pub id: AuthorId,
    pub name: String,
    pub birth_date: NaiveDate,
    pub citizenship_country_id: CountryId,
    pub work_country_id: CountryId,
    pub kind: AuthorKind,
}

impl Author {
    pub fn is_journalist(&self) -> bool {
        matches!(self.kind, AuthorKind::Journalist { .. })
    }

    pub fn is_professional(&self) -> bool {
        matches!(self.kind, AuthorKind::Professional { .. })
    }

    /// Age in completed years at `date`.
    pub fn age_at(&self, date: NaiveDate) -> i32 {
        let mut age = date.year() - self.birth_date.year();
        if (date.month(), date.day()) < (self.birth_date.month(), self.birth_date.day()) {
            age -= 1;
        }
        age
    }

    pub fn check(&self) -> Result<(), ModelError> {
        check_text("author", self.id.0 as u64, &self.name)?;
        if let AuthorKind::Journalist { employer_journal, .. } = &self.kind {
            check_text("author", self.id.0 as u64, employer_journal)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub id: TopicId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyword {
    pub id: KeywordId,
    pub word: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Language {
    pub id: LanguageId,
    pub code: String,
    pub dialect: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Country {
    pub id: CountryId,
    pub name: String,
    pub iso_code: String,
}

/// Calendar information about a publishing day. Only the date is stored;
/// day-of-year and weekday are derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DateInfo {
    pub date: NaiveDate,
}

impl DateInfo {
    pub fn new(date: NaiveDate) -> Self {
        DateInfo { date }
    }

    pub fn day_of_year(&self) -> u32 {
        self.date.ordinal()
    }

    pub fn weekday(&self) -> Weekday {
        self.date.weekday()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Audio,
    Video,
}

impl MediaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MediaKind::Audio => "audio",
            MediaKind::Video => "video",
        }
    }
}

/// Descriptor of a binary media file. The payload itself is opaque.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaRef {
    pub id: MediaId,
    pub kind: MediaKind,
    pub byte_size: u64,
    pub internal_comment: String,
    /// Lowercase hex SHA-256 of the payload.
    pub payload_digest: String,
    pub transcript: String,
}

impl MediaRef {
    pub fn check(&self) -> Result<(), ModelError> {
        let fail = |inv: &str| Err(ModelError::invariant("media", self.id.0, inv));
        if self.byte_size == 0 {
            return fail("byteSize > 0");
        }
        if self.transcript.trim().is_empty() {
            return fail("transcript is non-empty");
        }
        if self.payload_digest.len() != 64
            || !self.payload_digest.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
        {
            return fail("payloadDigest is a lowercase hex sha-256");
        }
        check_text("media", self.id.0, &self.internal_comment)?;
        check_text("media", self.id.0, &self.transcript)
    }

    /// Verifies the descriptor against an actual payload.
    pub fn matches_payload(&self, payload: &[u8]) -> bool {
        payload.len() as u64 == self.byte_size && digest_hex(payload) == self.payload_digest
    }
}

/// A document indexed by the metadata pipeline: an article or a media transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum DocumentId {
    Article(ArticleId),
    Transcript(MediaId),
}

impl DocumentId {
    pub fn article(self) -> Option<ArticleId> {
        match self {
            DocumentId::Article(a) => Some(a),
            DocumentId::Transcript(_) => None,
        }
    }
}

impl fmt::Display for DocumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocumentId::Article(a) => write!(f, "article-{}", a.0),
            DocumentId::Transcript(m) => write!(f, "transcript-{}", m.0),
        }
    }
}

impl std::str::FromStr for DocumentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(n) = s.strip_prefix("article-") {
            n.parse().map(|v| DocumentId::Article(ArticleId(v))).map_err(|_| s.to_string())
        } else if let Some(n) = s.strip_prefix("transcript-") {
            n.parse().map(|v| DocumentId::Transcript(MediaId(v))).map_err(|_| s.to_string())
        } else {
            Err(format!("unknown document id `{s}`"))
        }
    }
}

/// Information-retrieval metadata extracted for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub document: DocumentId,
    pub tfidf: BTreeMap<String, f64>,
    /// Present for articles only; transcripts are not part of the citation graph.
    pub pagerank: Option<f64>,
    /// Topic index to probability.
    pub topic_distribution: Vec<f64>,
}

impl MetadataRecord {
    pub fn check(&self) -> Result<(), ModelError> {
        let key = match self.document {
            DocumentId::Article(a) => a.0,
            DocumentId::Transcript(m) => m.0,
        };
        let fail = |inv: &str| Err(ModelError::invariant("metadata", key, inv));
        if self.tfidf.values().any(|w| !w.is_finite()) {
            return fail("tfidf weights are finite");
        }
        for term in self.tfidf.keys() {
            check_text("metadata", key, term)?;
        }
        if let Some(p) = self.pagerank {
            if !(p > 0.0 && p <= 1.0) {
                return fail("pagerankScore in (0, 1]");
            }
        }
        if !self.topic_distribution.is_empty() {
            if self.topic_distribution.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return fail("topic probabilities are finite and non-negative");
            }
            let sum: f64 = self.topic_distribution.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return fail("topicDistribution sums to 1");
            }
        }
        Ok(())
    }
}

/// Any entity that can be written as one XML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Entity {
    Article(Article),
    Author(Author),
    Topic(Topic),
    Keyword(Keyword),
    Language(Language),
    Country(Country),
    Date(DateInfo),
    Media(MediaRef),
    Metadata(MetadataRecord),
}

impl Entity {
    pub fn kind(&self) -> &'static str {
        match self {
            Entity::Article(_) => "article",
            Entity::Author(_) => "author",
            Entity::Topic(_) => "topic",
            Entity::Keyword(_) => "keyword",
            Entity::Language(_) => "language",
            Entity::Country(_) => "country",
            Entity::Date(_) => "date",
            Entity::Media(_) => "media",
            Entity::Metadata(_) => "metadata",
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        match self {
            Entity::Article(a) => a.check(),
            Entity::Author(a) => a.check(),
            Entity::Topic(t) => check_text("topic", t.id.0 as u64, &t.label),
            Entity::Keyword(k) => check_text("keyword", k.id.0 as u64, &k.word),
            Entity::Language(l) => {
                check_text("language", l.id.0 as u64, &l.code)?;
                check_text("language", l.id.0 as u64, &l.dialect)
            }
            Entity::Country(c) => {
                check_text("country", c.id.0 as u64, &c.name)?;
                check_text("country", c.id.0 as u64, &c.iso_code)
            }
            Entity::Date(_) => Ok(()),
            Entity::Media(m) => m.check(),
            Entity::Metadata(m) => m.check(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{entity} {id} violates invariant: {invariant}")]
    InvariantViolation { entity: &'static str, id: u64, invariant: String },
}

impl ModelError {
    pub fn invariant(entity: &'static str, id: u64, invariant: &str) -> Self {
        ModelError::InvariantViolation { entity, id, invariant: invariant.to_string() }
    }
}

/// XML 1.0 cannot carry most control characters, even escaped.
fn check_text(entity: &'static str, id: u64, s: &str) -> Result<(), ModelError> {
    if s.chars().any(|c| (c < ' ' && c != '\n' && c != '\t' && c != '\r') || c == '\u{FFFE}' || c == '\u{FFFF}') {
        return Err(ModelError::invariant(entity, id, "text contains only XML characters"));
    }
    Ok(())
}

/// Lowercase hex SHA-256.
pub fn digest_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Reference vocabularies shared by every article.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceData {
    pub topics: BTreeMap<TopicId, Topic>,
    pub keywords: BTreeMap<KeywordId, Keyword>,
    pub languages: BTreeMap<LanguageId, Language>,
    pub countries: BTreeMap<CountryId, Country>,
}

impl ReferenceData {
    pub fn entities(&self) -> impl Iterator<Item = Entity> + '_ {
        self.topics
            .values()
            .cloned()
            .map(Entity::Topic)
            .chain(self.keywords.values().cloned().map(Entity::Keyword))
            .chain(self.languages.values().cloned().map(Entity::Language))
            .chain(self.countries.values().cloned().map(Entity::Country))
    }

    pub fn len(&self) -> usize {
        self.topics.len() + self.keywords.len() + self.languages.len() + self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks label uniqueness within each class.
    pub fn check(&self) -> Result<(), ModelError> {
        fn unique<'a>(kind: &'static str, it: impl Iterator<Item = (u64, &'a str)>) -> Result<(), ModelError> {
            let mut seen = BTreeSet::new();
            for (id, label) in it {
                if !seen.insert(label) {
                    return Err(ModelError::invariant(kind, id, "labels unique within each entity class"));
                }
            }
            Ok(())
        }
        unique("topic", self.topics.values().map(|t| (t.id.0 as u64, t.label.as_str())))?;
        unique("keyword", self.keywords.values().map(|k| (k.id.0 as u64, k.word.as_str())))?;
        unique("language", self.languages.values().map(|l| (l.id.0 as u64, l.dialect.as_str())))?;
        unique("country", self.countries.values().map(|c| (c.id.0 as u64, c.name.as_str())))
    }
}
