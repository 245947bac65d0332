//! The fourteen generic queries and four analytical queries, executed over a
//! store snapshot.
//!
//! Every ordering breaks ties by ascending id. `limit` defaults to 20 (10 for
//! A1) and 0 means unlimited. For Q3 and A1 the limit applies within each
//! group; for every other kind it truncates the row list, and
//! `total_matched` reports the length before truncation.

mod format;
mod params;

pub use format::{write_csv, write_json, OutputFormat};
pub use params::sample_params;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, StoreSnapshot};
use crate::metadata::text::tokenize;
use crate::metadata::MetadataState;
use crate::model::*;

pub const DEFAULT_LIMIT: usize = 20;
pub const DEFAULT_MONTHLY_TOP: usize = 10;
/// Largest journalist count Q10 accepts.
pub const MAX_GROUP_JOURNALISTS: u32 = 3;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QueryKind {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
    Q8,
    Q9,
    Q10,
    Q11,
    Q12,
    Q13,
    Q14,
    A1,
    A2,
    A3,
    A4,
}

impl QueryKind {
    pub const ALL: [QueryKind; 18] = [
        QueryKind::Q1,
        QueryKind::Q2,
        QueryKind::Q3,
        QueryKind::Q4,
        QueryKind::Q5,
        QueryKind::Q6,
        QueryKind::Q7,
        QueryKind::Q8,
        QueryKind::Q9,
        QueryKind::Q10,
        QueryKind::Q11,
        QueryKind::Q12,
        QueryKind::Q13,
        QueryKind::Q14,
        QueryKind::A1,
        QueryKind::A2,
        QueryKind::A3,
        QueryKind::A4,
    ];

    pub fn generic() -> &'static [QueryKind] {
        &Self::ALL[..14]
    }

    pub fn analytic() -> &'static [QueryKind] {
        &Self::ALL[14..]
    }

    /// Output columns, matching [`Row::fields`].
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            QueryKind::Q1 | QueryKind::Q12 | QueryKind::Q13 => &["article", "title", "score"],
            QueryKind::Q7 | QueryKind::Q8 => &["article", "title", "count"],
            QueryKind::Q2 => &["article", "title", "topic", "label"],
            QueryKind::Q3 => &["country", "name", "word", "count"],
            QueryKind::Q4 | QueryKind::Q5 | QueryKind::Q6 => &["keyword", "word", "count"],
            QueryKind::Q9 => &["journalist", "professional", "topic", "day"],
            QueryKind::Q10 => &["topics", "journalists", "articles"],
            QueryKind::Q11 => &["language", "code", "count"],
            QueryKind::Q14 => &["before", "after"],
            QueryKind::A1 => &["month", "rank", "article", "views"],
            QueryKind::A2 => &["journalist", "name", "articles", "mean_pages"],
            QueryKind::A3 => &["authors", "mean", "stddev"],
            QueryKind::A4 => &["article", "versions"],
        }
    }

    pub fn needs_metadata(self) -> bool {
        matches!(self, QueryKind::Q1 | QueryKind::Q12 | QueryKind::Q13)
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for QueryKind {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.to_string() == up)
            .ok_or_else(|| QueryError::Argument(format!("unknown query kind {s:?}")))
    }
}

/// Parameters of a query; each kind reads the subset it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryParams {
    pub date: Option<NaiveDate>,
    /// Inclusive interval start.
    pub from: Option<NaiveDate>,
    /// Inclusive interval end.
    pub to: Option<NaiveDate>,
    pub journalist: Option<AuthorId>,
    pub author: Option<AuthorId>,
    pub topic: Option<TopicId>,
    pub country: Option<CountryId>,
    pub month: Option<u32>,
    pub year: Option<i32>,
    pub year1: Option<i32>,
    pub year2: Option<i32>,
    pub day_of_year: Option<u32>,
    /// Q8 look-back window ending at the current date.
    pub days: Option<u32>,
    /// Q10 minimum number of distinct journalists.
    pub min_journalists: Option<u32>,
    /// Q10 minimum number of common topics.
    pub min_topics: Option<u32>,
    pub term: Option<String>,
    pub document: Option<ArticleId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub kind: QueryKind,
    #[serde(default)]
    pub params: QueryParams,
    #[serde(default)]
    pub limit: Option<usize>,
}

impl QuerySpec {
    pub fn new(kind: QueryKind, params: QueryParams) -> Self {
        QuerySpec { kind, params, limit: None }
    }

    fn effective_limit(&self) -> usize {
        let default = if self.kind == QueryKind::A1 { DEFAULT_MONTHLY_TOP } else { DEFAULT_LIMIT };
        match self.limit.unwrap_or(default) {
            0 => usize::MAX,
            n => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Row {
    /// Q1 (PageRank), Q12 (TF-IDF score), Q13 (cosine similarity).
    ArticleScore { article: ArticleId, title: String, score: f64 },
    /// Q7 (citations to the previous year), Q8 (recent in-citations).
    ArticleCount { article: ArticleId, title: String, count: u64 },
    /// Q2.
    TitleTopic { article: ArticleId, title: String, topic: TopicId, label: String },
    /// Q3.
    CountryWord { country: CountryId, name: String, word: String, count: u64 },
    /// Q4, Q5, Q6.
    KeywordCount { keyword: KeywordId, word: String, count: u64 },
    /// Q9.
    Collaboration { journalist: AuthorId, professional: AuthorId, topic: TopicId, day: NaiveDate },
    /// Q10.
    TopicGroup { topics: Vec<TopicId>, journalists: Vec<AuthorId>, articles: Vec<ArticleId> },
    /// Q11.
    LanguageCount { language: LanguageId, code: String, count: u64 },
    /// Q14: `before` is by a journalist born before the year, `after` by one born after it.
    ArticlePair { before: ArticleId, after: ArticleId },
    /// A1.
    MonthlyTop { month: YearMonth, rank: u32, article: ArticleId, views: u64 },
    /// A2.
    JournalistPages { journalist: AuthorId, name: String, articles: u64, mean_pages: f64 },
    /// A3.
    AgeStats { authors: u64, mean: f64, stddev: f64 },
    /// A4.
    MaxVersions { article: ArticleId, versions: u32 },
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

impl Row {
    /// Column names and values, for tabular output.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        match self {
            Row::ArticleScore { article, title, score } => {
                vec![("article", article.to_string()), ("title", title.clone()), ("score", score.to_string())]
            }
            Row::ArticleCount { article, title, count } => {
                vec![("article", article.to_string()), ("title", title.clone()), ("count", count.to_string())]
            }
            Row::TitleTopic { article, title, topic, label } => vec![
                ("article", article.to_string()),
                ("title", title.clone()),
                ("topic", topic.to_string()),
                ("label", label.clone()),
            ],
            Row::CountryWord { country, name, word, count } => vec![
                ("country", country.to_string()),
                ("name", name.clone()),
                ("word", word.clone()),
                ("count", count.to_string()),
            ],
            Row::KeywordCount { keyword, word, count } => {
                vec![("keyword", keyword.to_string()), ("word", word.clone()), ("count", count.to_string())]
            }
            Row::Collaboration { journalist, professional, topic, day } => vec![
                ("journalist", journalist.to_string()),
                ("professional", professional.to_string()),
                ("topic", topic.to_string()),
                ("day", day.to_string()),
            ],
            Row::TopicGroup { topics, journalists, articles } => vec![
                ("topics", join(topics)),
                ("journalists", join(journalists)),
                ("articles", join(articles)),
            ],
            Row::LanguageCount { language, code, count } => {
                vec![("language", language.to_string()), ("code", code.clone()), ("count", count.to_string())]
            }
            Row::ArticlePair { before, after } => vec![("before", before.to_string()), ("after", after.to_string())],
            Row::MonthlyTop { month, rank, article, views } => vec![
                ("month", month.to_string()),
                ("rank", rank.to_string()),
                ("article", article.to_string()),
                ("views", views.to_string()),
            ],
            Row::JournalistPages { journalist, name, articles, mean_pages } => vec![
                ("journalist", journalist.to_string()),
                ("name", name.clone()),
                ("articles", articles.to_string()),
                ("mean_pages", mean_pages.to_string()),
            ],
            Row::AgeStats { authors, mean, stddev } => {
                vec![("authors", authors.to_string()), ("mean", mean.to_string()), ("stddev", stddev.to_string())]
            }
            Row::MaxVersions { article, versions } => {
                vec![("article", article.to_string()), ("versions", versions.to_string())]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    pub kind: QueryKind,
    pub rows: Vec<Row>,
    pub total_matched: u64,
    /// Articles or index entries examined; the cost model's work measure.
    pub scanned: u64,
    /// Wall time of the evaluation.
    pub execution_us: u64,
}

/// Takes a snapshot of `backend` and evaluates `spec` on it.
pub fn execute(spec: &QuerySpec, backend: &dyn Backend, today: NaiveDate) -> Result<QueryResult, QueryError> {
    let snap = backend.snapshot()?;
    execute_on(spec, &snap, today)
}

fn need<T: Clone>(v: &Option<T>, name: &str, kind: QueryKind) -> Result<T, QueryError> {
    v.clone().ok_or_else(|| QueryError::Argument(format!("{kind} requires parameter {name}")))
}

fn metadata(snap: &StoreSnapshot, kind: QueryKind) -> Result<&MetadataState, QueryError> {
    snap.metadata
        .as_deref()
        .ok_or_else(|| QueryError::State(format!("{kind} needs the metadata index, which has not been built")))
}

fn interval(p: &QueryParams, kind: QueryKind) -> Result<(NaiveDate, NaiveDate), QueryError> {
    let (from, to) = (need(&p.from, "from", kind)?, need(&p.to, "to", kind)?);
    if from > to {
        return Err(QueryError::Argument(format!("interval start {from} is after its end {to}")));
    }
    Ok((from, to))
}

fn journalist(snap: &StoreSnapshot, id: AuthorId) -> Result<&Author, QueryError> {
    match snap.authors.get(&id) {
        Some(a) if a.is_journalist() => Ok(a),
        Some(_) => Err(QueryError::Argument(format!("{id} is not a journalist"))),
        None => Err(QueryError::Argument(format!("{id} does not exist"))),
    }
}

fn is_journalist(snap: &StoreSnapshot, id: AuthorId) -> bool {
    snap.authors.get(&id).is_some_and(Author::is_journalist)
}

fn is_professional(snap: &StoreSnapshot, id: AuthorId) -> bool {
    snap.authors.get(&id).is_some_and(Author::is_professional)
}

fn keyword_rows<'a>(snap: &StoreSnapshot, articles: impl Iterator<Item = &'a Article>) -> Vec<Row> {
    let mut counts: BTreeMap<KeywordId, u64> = BTreeMap::new();
    for a in articles {
        for k in &a.keyword_ids {
            *counts.entry(*k).or_default() += 1;
        }
    }
    let mut v: Vec<(KeywordId, u64)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter()
        .map(|(k, count)| Row::KeywordCount {
            keyword: k,
            word: snap.reference.keywords.get(&k).map(|w| w.word.clone()).unwrap_or_default(),
            count,
        })
        .collect()
}

fn by_count_then_id(v: &mut [(ArticleId, u64)]) {
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
}

fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(t, x)| b.get(t).map(|y| x * y)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Evaluates `spec` against a snapshot. `today` is the current date for the
/// queries that look back from now (Q8, A3).
pub fn execute_on(spec: &QuerySpec, snap: &StoreSnapshot, today: NaiveDate) -> Result<QueryResult, QueryError> {
    let started = Instant::now();
    let kind = spec.kind;
    let p = &spec.params;
    let limit = spec.effective_limit();
    let articles = || snap.articles.values().map(|a| a.as_ref());
    let mut scanned = snap.articles.len() as u64;
    let title = |id: ArticleId| snap.articles[&id].title.clone();

    let mut rows: Vec<Row> = match kind {
        QueryKind::Q1 => {
            let meta = metadata(snap, kind)?;
            let wanted: BTreeSet<_> = meta.bigrams.top(limit).into_iter().map(|(b, _)| b).collect();
            let mut hits: Vec<(ArticleId, f64)> = meta
                .bigrams
                .articles_containing(&wanted)
                .into_iter()
                .filter(|id| snap.articles.contains_key(id))
                .map(|id| (id, meta.pagerank.get(&id).copied().unwrap_or(0.0)))
                .collect();
            hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            hits.into_iter().map(|(id, score)| Row::ArticleScore { article: id, title: title(id), score }).collect()
        }
        QueryKind::Q2 => {
            let (from, to) = interval(p, kind)?;
            let mut v: Vec<(String, String, ArticleId, TopicId)> = Vec::new();
            for a in articles().filter(|a| a.publish_date >= from && a.publish_date <= to) {
                for t in &a.topic_ids {
                    let label = snap.reference.topics.get(t).map(|x| x.label.clone()).unwrap_or_default();
                    v.push((label, a.title.clone(), a.id, *t));
                }
            }
            v.sort();
            v.into_iter()
                .map(|(label, title, article, topic)| Row::TitleTopic { article, title, topic, label })
                .collect()
        }
        QueryKind::Q3 => {
            let j = journalist(snap, need(&p.journalist, "journalist", kind)?)?.id;
            let (from, to) = interval(p, kind)?;
            let mut groups: BTreeMap<CountryId, BTreeMap<String, u64>> = BTreeMap::new();
            for a in articles().filter(|a| a.author_id == j && a.publish_date >= from && a.publish_date <= to) {
                let g = groups.entry(a.country_id).or_default();
                for w in tokenize(&a.text()) {
                    *g.entry(w).or_default() += 1;
                }
            }
            let mut out = Vec::new();
            for (c, words) in groups {
                let name = snap.reference.countries.get(&c).map(|x| x.name.clone()).unwrap_or_default();
                let mut v: Vec<(String, u64)> = words.into_iter().collect();
                v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                out.extend(v.into_iter().take(limit).map(|(word, count)| Row::CountryWord {
                    country: c,
                    name: name.clone(),
                    word,
                    count,
                }));
            }
            out
        }
        QueryKind::Q4 => {
            let d = need(&p.date, "date", kind)?;
            keyword_rows(snap, articles().filter(|a| a.publish_date == d))
        }
        QueryKind::Q5 => {
            let (m, y) = (need(&p.month, "month", kind)?, need(&p.year, "year", kind)?);
            if !(1..=12).contains(&m) {
                return Err(QueryError::Argument(format!("month {m} outside 1..=12")));
            }
            keyword_rows(snap, articles().filter(|a| a.publish_date.month() == m && a.publish_date.year() == y))
        }
        QueryKind::Q6 => {
            let d = need(&p.day_of_year, "day_of_year", kind)?;
            let (y1, y2) = (need(&p.year1, "year1", kind)?, need(&p.year2, "year2", kind)?);
            if !(1..=366).contains(&d) {
                return Err(QueryError::Argument(format!("day of year {d} outside 1..=366")));
            }
            keyword_rows(
                snap,
                articles().filter(|a| {
                    let y = a.publish_date.year();
                    a.publish_date.ordinal() == d && (y == y1 || y == y2)
                }),
            )
        }
        QueryKind::Q7 => {
            let d = need(&p.date, "date", kind)?;
            let prev = d.year() - 1;
            let mut v: Vec<(ArticleId, u64)> = articles()
                .filter(|a| a.publish_date == d)
                .map(|a| {
                    let n = a
                        .citations
                        .iter()
                        .filter(|c| snap.articles.get(c).is_some_and(|x| x.publish_date.year() == prev))
                        .count();
                    (a.id, n as u64)
                })
                .collect();
            by_count_then_id(&mut v);
            v.into_iter().map(|(id, count)| Row::ArticleCount { article: id, title: title(id), count }).collect()
        }
        QueryKind::Q8 => {
            let t = need(&p.topic, "topic", kind)?;
            let days = need(&p.days, "days", kind)?;
            let start = today - Duration::days(days as i64);
            let mut received: BTreeMap<ArticleId, u64> = BTreeMap::new();
            for a in articles().filter(|a| a.publish_date >= start && a.publish_date <= today) {
                for c in &a.citations {
                    *received.entry(*c).or_default() += 1;
                }
            }
            let mut v: Vec<(ArticleId, u64)> = received
                .into_iter()
                .filter(|(id, _)| snap.articles.get(id).is_some_and(|a| a.topic_ids.contains(&t)))
                .collect();
            by_count_then_id(&mut v);
            v.into_iter().map(|(id, count)| Row::ArticleCount { article: id, title: title(id), count }).collect()
        }
        QueryKind::Q9 => {
            let range = match (p.from, p.to) {
                (None, None) => None,
                _ => Some(interval(p, kind)?),
            };
            // (topic, month) -> author -> first day that author wrote on it
            let mut j: BTreeMap<(TopicId, YearMonth), BTreeMap<AuthorId, NaiveDate>> = BTreeMap::new();
            let mut pr: BTreeMap<(TopicId, YearMonth), BTreeMap<AuthorId, NaiveDate>> = BTreeMap::new();
            for a in articles().filter(|a| range.is_none_or(|(f, t)| a.publish_date >= f && a.publish_date <= t)) {
                let side = if is_journalist(snap, a.author_id) {
                    &mut j
                } else if is_professional(snap, a.author_id) {
                    &mut pr
                } else {
                    continue;
                };
                for t in &a.topic_ids {
                    let first = side.entry((*t, YearMonth::of(a.publish_date))).or_default();
                    let d = first.entry(a.author_id).or_insert(a.publish_date);
                    *d = (*d).min(a.publish_date);
                }
            }
            let mut v: Vec<(NaiveDate, AuthorId, AuthorId, TopicId)> = Vec::new();
            for (key, js) in &j {
                let Some(ps) = pr.get(key) else { continue };
                for (ja, jd) in js {
                    for (pa, pd) in ps {
                        v.push(((*jd).max(*pd), *ja, *pa, key.0));
                    }
                }
            }
            v.sort();
            v.into_iter()
                .map(|(day, journalist, professional, topic)| Row::Collaboration { journalist, professional, topic, day })
                .collect()
        }
        QueryKind::Q10 => {
            let (from, to) = interval(p, kind)?;
            let x = need(&p.min_journalists, "min_journalists", kind)?;
            let y = need(&p.min_topics, "min_topics", kind)? as usize;
            if x == 0 || x > MAX_GROUP_JOURNALISTS {
                return Err(QueryError::Argument(format!(
                    "min_journalists must lie in 1..={MAX_GROUP_JOURNALISTS}, got {x}"
                )));
            }
            if y == 0 {
                return Err(QueryError::Argument("min_topics must be >= 1".into()));
            }
            topic_groups(snap, from, to, x as usize, y)
        }
        QueryKind::Q11 => {
            let mut counts: BTreeMap<LanguageId, u64> = BTreeMap::new();
            for a in articles() {
                *counts.entry(a.language_id).or_default() += 1;
            }
            let mut v: Vec<(LanguageId, u64)> = counts.into_iter().collect();
            v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            v.into_iter()
                .map(|(l, count)| Row::LanguageCount {
                    language: l,
                    code: snap.reference.languages.get(&l).map(|x| x.code.clone()).unwrap_or_default(),
                    count,
                })
                .collect()
        }
        QueryKind::Q12 => {
            let term = need(&p.term, "term", kind)?;
            let author = need(&p.author, "author", kind)?;
            let country = need(&p.country, "country", kind)?;
            let meta = metadata(snap, kind)?;
            let found = meta.index.search(&term);
            scanned = found.len() as u64;
            found
                .into_iter()
                .filter_map(|(d, score)| d.article().map(|a| (a, score)))
                .filter(|(id, _)| snap.articles.get(id).is_some_and(|a| a.author_id == author && a.country_id == country))
                .map(|(id, score)| Row::ArticleScore { article: id, title: title(id), score })
                .collect()
        }
        QueryKind::Q13 => {
            let doc = need(&p.document, "document", kind)?;
            let meta = metadata(snap, kind)?;
            let src = snap.articles.get(&doc).ok_or_else(|| QueryError::Argument(format!("{doc} is not in the store")))?;
            match src.publish_date.with_year(src.publish_date.year() + 1) {
                None => Vec::new(),
                Some(target) => {
                    let v0 = meta.index.vector(DocumentId::Article(doc));
                    let mut v: Vec<(ArticleId, f64)> = articles()
                        .filter(|a| a.publish_date == target)
                        .map(|a| (a.id, cosine(&v0, &meta.index.vector(DocumentId::Article(a.id)))))
                        .collect();
                    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                    v.into_iter().map(|(id, score)| Row::ArticleScore { article: id, title: title(id), score }).collect()
                }
            }
        }
        QueryKind::Q14 => {
            let y = need(&p.year, "year", kind)?;
            let born = |a: &Article| {
                snap.authors.get(&a.author_id).filter(|x| x.is_journalist()).map(|x| x.birth_date.year())
            };
            let mut before: BTreeMap<TopicId, Vec<ArticleId>> = BTreeMap::new();
            let mut after: BTreeMap<TopicId, Vec<ArticleId>> = BTreeMap::new();
            for a in articles() {
                let side = match born(a) {
                    Some(b) if b < y => &mut before,
                    Some(b) if b > y => &mut after,
                    _ => continue,
                };
                for t in &a.topic_ids {
                    side.entry(*t).or_default().push(a.id);
                }
            }
            let mut pairs: BTreeSet<(ArticleId, ArticleId)> = BTreeSet::new();
            for (t, bs) in &before {
                let Some(afs) = after.get(t) else { continue };
                for b in bs {
                    for a in afs {
                        pairs.insert((*b, *a));
                    }
                }
            }
            pairs.into_iter().map(|(before, after)| Row::ArticlePair { before, after }).collect()
        }
        QueryKind::A1 => {
            let year = p.year.unwrap_or(2010);
            let mut out = Vec::new();
            for m in 1..=12 {
                let ym = YearMonth::new(year, m);
                let mut v: Vec<(ArticleId, u64)> =
                    articles().filter_map(|a| a.monthly_views.get(&ym).map(|n| (a.id, *n))).collect();
                by_count_then_id(&mut v);
                out.extend(v.into_iter().take(limit).enumerate().map(|(i, (article, views))| Row::MonthlyTop {
                    month: ym,
                    rank: i as u32 + 1,
                    article,
                    views,
                }));
            }
            out
        }
        QueryKind::A2 => {
            let mut pages: BTreeMap<AuthorId, (u64, u64)> = BTreeMap::new();
            for a in articles().filter(|a| is_journalist(snap, a.author_id)) {
                let e = pages.entry(a.author_id).or_default();
                e.0 += 1;
                e.1 += a.page_count as u64;
            }
            pages
                .into_iter()
                .map(|(id, (n, total))| Row::JournalistPages {
                    journalist: id,
                    name: snap.authors[&id].name.clone(),
                    articles: n,
                    mean_pages: total as f64 / n as f64,
                })
                .collect()
        }
        QueryKind::A3 => {
            scanned = snap.authors.len() as u64;
            let ages: Vec<f64> = snap.authors.values().map(|a| a.age_at(today) as f64).collect();
            if ages.is_empty() {
                Vec::new()
            } else {
                let n = ages.len() as f64;
                let mean = ages.iter().sum::<f64>() / n;
                let var = ages.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                vec![Row::AgeStats { authors: ages.len() as u64, mean, stddev: var.sqrt() }]
            }
        }
        QueryKind::A4 => {
            let best = snap.versions.iter().fold(None, |best: Option<(ArticleId, u32)>, (id, v)| match best {
                Some((_, bv)) if bv >= *v => best,
                _ => Some((*id, *v)),
            });
            best.map(|(article, versions)| Row::MaxVersions { article, versions }).into_iter().collect()
        }
    };

    let total_matched = rows.len() as u64;
    if !matches!(kind, QueryKind::Q3 | QueryKind::A1) {
        rows.truncate(limit);
    }
    Ok(QueryResult { kind, rows, total_matched, scanned, execution_us: started.elapsed().as_micros() as u64 })
}

/// Maximal groups of journalist articles in `[from, to]` that share at
/// least `y` topics and involve at least `x` distinct journalists.
fn topic_groups(snap: &StoreSnapshot, from: NaiveDate, to: NaiveDate, x: usize, y: usize) -> Vec<Row> {
    let pool: Vec<&Article> = snap
        .articles
        .values()
        .map(|a| a.as_ref())
        .filter(|a| a.publish_date >= from && a.publish_date <= to && is_journalist(snap, a.author_id))
        .collect();
    // Every group is the set of articles covering some y-subset of topics.
    let mut by_subset: BTreeMap<Vec<TopicId>, Vec<usize>> = BTreeMap::new();
    for (i, a) in pool.iter().enumerate() {
        let topics: Vec<TopicId> = a.topic_ids.iter().copied().collect();
        for s in subsets(&topics, y) {
            by_subset.entry(s).or_default().push(i);
        }
    }
    let mut groups: BTreeSet<Vec<usize>> = BTreeSet::new();
    for members in by_subset.into_values() {
        let journalists: BTreeSet<AuthorId> = members.iter().map(|i| pool[*i].author_id).collect();
        if journalists.len() >= x {
            groups.insert(members);
        }
    }
    let groups: Vec<Vec<usize>> = groups.into_iter().collect();
    let sets: Vec<BTreeSet<usize>> = groups.iter().map(|g| g.iter().copied().collect()).collect();
    let mut out: Vec<Row> = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        let contained = sets.iter().enumerate().any(|(k, s)| k != i && s.len() > sets[i].len() && sets[i].is_subset(s));
        if contained {
            continue;
        }
        let mut common: BTreeSet<TopicId> = pool[g[0]].topic_ids.clone();
        for m in &g[1..] {
            common = common.intersection(&pool[*m].topic_ids).copied().collect();
        }
        let journalists: BTreeSet<AuthorId> = g.iter().map(|m| pool[*m].author_id).collect();
        out.push(Row::TopicGroup {
            topics: common.into_iter().collect(),
            journalists: journalists.into_iter().collect(),
            articles: g.iter().map(|m| pool[*m].id).collect(),
        });
    }
    out.sort_by(|a, b| match (a, b) {
        (
            Row::TopicGroup { journalists: ja, articles: aa, .. },
            Row::TopicGroup { journalists: jb, articles: ab, .. },
        ) => jb.len().cmp(&ja.len()).then(ab.len().cmp(&aa.len())).then_with(|| aa.cmp(ab)),
        _ => unreachable!(),
    });
    out
}

/// All `k`-element subsets of a sorted slice, in lexicographic order.
fn subsets<T: Copy>(items: &[T], k: usize) -> Vec<Vec<T>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        if items.len() - i < k {
            break;
        }
        for mut rest in subsets(&items[i + 1..], k - 1) {
            rest.insert(0, items[i]);
            out.push(rest);
        }
    }
    out
}
