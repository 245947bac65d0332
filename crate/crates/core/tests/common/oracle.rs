//! Naive full-scan evaluation of every query kind. Written independently of
//! the engine: no shared helpers, no indexes, quadratic loops where simple.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{Datelike, Duration, NaiveDate};
use primeball::backend::StoreSnapshot;
use primeball::model::*;
use primeball::query::{QueryKind, QuerySpec, Row};

pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else {
            if cur.chars().count() >= 2 {
                out.push(cur.clone());
            }
            cur.clear();
        }
    }
    if cur.chars().count() >= 2 {
        out.push(cur);
    }
    out
}

fn full_text(a: &Article) -> String {
    format!("{}\n{}", a.title, a.body)
}

fn all(s: &StoreSnapshot) -> Vec<&Article> {
    s.articles.values().map(|a| a.as_ref()).collect()
}

fn kind_of(s: &StoreSnapshot, id: AuthorId) -> Option<bool> {
    s.authors.get(&id).map(|a| matches!(a.kind, AuthorKind::Journalist { .. }))
}

/// TF-IDF weights of every document, from raw text.
fn tfidf(s: &StoreSnapshot) -> BTreeMap<DocumentId, BTreeMap<String, f64>> {
    let mut tf: BTreeMap<DocumentId, BTreeMap<String, u32>> = BTreeMap::new();
    for a in all(s) {
        let bag = tf.entry(DocumentId::Article(a.id)).or_default();
        for w in words(&full_text(a)) {
            *bag.entry(w).or_insert(0) += 1;
        }
    }
    for m in s.media.values() {
        let bag = tf.entry(DocumentId::Transcript(m.id)).or_default();
        for w in words(&m.transcript) {
            *bag.entry(w).or_insert(0) += 1;
        }
    }
    let n = tf.len();
    let mut df: HashMap<String, usize> = HashMap::new();
    for bag in tf.values() {
        for t in bag.keys() {
            *df.entry(t.clone()).or_insert(0) += 1;
        }
    }
    tf.into_iter()
        .map(|(d, bag)| {
            let w = bag.into_iter().map(|(t, c)| {
                let idf = (n as f64 / df[&t] as f64).ln();
                (t, c as f64 * idf)
            });
            (d, w.collect())
        })
        .collect()
}

fn keyword_counts(s: &StoreSnapshot, pick: impl Fn(&Article) -> bool) -> Vec<Row> {
    let mut rows: Vec<Row> = Vec::new();
    for k in s.reference.keywords.values() {
        let count = all(s).into_iter().filter(|a| pick(a) && a.keyword_ids.contains(&k.id)).count() as u64;
        if count > 0 {
            rows.push(Row::KeywordCount { keyword: k.id, word: k.word.clone(), count });
        }
    }
    rows.sort_by_key(|r| match r {
        Row::KeywordCount { keyword, count, .. } => (u64::MAX - count, *keyword),
        _ => unreachable!(),
    });
    rows
}

fn counted(s: &StoreSnapshot, mut v: Vec<(ArticleId, u64)>) -> Vec<Row> {
    v.sort_by_key(|(id, n)| (std::cmp::Reverse(*n), *id));
    v.into_iter()
        .map(|(id, count)| Row::ArticleCount { article: id, title: s.articles[&id].title.clone(), count })
        .collect()
}

fn scored(s: &StoreSnapshot, mut v: Vec<(ArticleId, f64)>) -> Vec<Row> {
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    v.into_iter()
        .map(|(id, score)| Row::ArticleScore { article: id, title: s.articles[&id].title.clone(), score })
        .collect()
}

fn subsets_of(universe: &[TopicId], k: usize) -> Vec<BTreeSet<TopicId>> {
    // Bitmask enumeration; the topic universe is small.
    assert!(universe.len() < 31);
    (0u32..(1 << universe.len()))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..universe.len()).filter(|i| m & (1 << i) != 0).map(|i| universe[i]).collect())
        .collect()
}

/// Rows and pre-truncation match count.
pub fn evaluate(spec: &QuerySpec, s: &StoreSnapshot, today: NaiveDate) -> (Vec<Row>, u64) {
    let p = &spec.params;
    let default = if spec.kind == QueryKind::A1 { 10 } else { 20 };
    let limit = match spec.limit.unwrap_or(default) {
        0 => usize::MAX,
        n => n,
    };
    let rows: Vec<Row> = match spec.kind {
        QueryKind::Q1 => {
            let meta = s.metadata.as_ref().unwrap();
            let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
            let mut per: BTreeMap<ArticleId, BTreeSet<(String, String)>> = BTreeMap::new();
            for a in all(s) {
                let w = words(&full_text(a));
                for i in 1..w.len() {
                    let b = (w[i - 1].clone(), w[i].clone());
                    *counts.entry(b.clone()).or_insert(0) += 1;
                    per.entry(a.id).or_default().insert(b);
                }
            }
            let mut ranked: Vec<((String, String), u64)> = counts.into_iter().collect();
            ranked.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
            let top: Vec<(String, String)> = ranked.into_iter().take(limit).map(|x| x.0).collect();
            let hits = per
                .into_iter()
                .filter(|(_, bs)| top.iter().any(|b| bs.contains(b)))
                .map(|(id, _)| (id, meta.pagerank.get(&id).copied().unwrap_or(0.0)))
                .collect();
            scored(s, hits)
        }
        QueryKind::Q2 => {
            let (f, t) = (p.from.unwrap(), p.to.unwrap());
            let mut v = Vec::new();
            for a in all(s) {
                if f <= a.publish_date && a.publish_date <= t {
                    for topic in &a.topic_ids {
                        v.push((s.reference.topics[topic].label.clone(), a.title.clone(), a.id, *topic));
                    }
                }
            }
            v.sort();
            v.into_iter().map(|(label, title, article, topic)| Row::TitleTopic { article, title, topic, label }).collect()
        }
        QueryKind::Q3 => {
            let j = p.journalist.unwrap();
            let (f, t) = (p.from.unwrap(), p.to.unwrap());
            let mut rows = Vec::new();
            for c in s.reference.countries.values() {
                let mut counts: HashMap<String, u64> = HashMap::new();
                for a in all(s) {
                    if a.author_id == j && a.country_id == c.id && f <= a.publish_date && a.publish_date <= t {
                        for w in words(&full_text(a)) {
                            *counts.entry(w).or_insert(0) += 1;
                        }
                    }
                }
                let mut v: Vec<(String, u64)> = counts.into_iter().collect();
                v.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
                for (word, count) in v.into_iter().take(limit) {
                    rows.push(Row::CountryWord { country: c.id, name: c.name.clone(), word, count });
                }
            }
            rows
        }
        QueryKind::Q4 => {
            let d = p.date.unwrap();
            keyword_counts(s, |a| a.publish_date == d)
        }
        QueryKind::Q5 => {
            let (m, y) = (p.month.unwrap(), p.year.unwrap());
            keyword_counts(s, |a| a.publish_date.month() == m && a.publish_date.year() == y)
        }
        QueryKind::Q6 => {
            let (d, y1, y2) = (p.day_of_year.unwrap(), p.year1.unwrap(), p.year2.unwrap());
            keyword_counts(s, |a| a.publish_date.ordinal() == d && [y1, y2].contains(&a.publish_date.year()))
        }
        QueryKind::Q7 => {
            let d = p.date.unwrap();
            let v = all(s)
                .into_iter()
                .filter(|a| a.publish_date == d)
                .map(|a| {
                    let mut n = 0;
                    for c in &a.citations {
                        if let Some(x) = s.articles.get(c) {
                            if x.publish_date.year() + 1 == d.year() {
                                n += 1;
                            }
                        }
                    }
                    (a.id, n)
                })
                .collect();
            counted(s, v)
        }
        QueryKind::Q8 => {
            let t = p.topic.unwrap();
            let start = today - Duration::days(p.days.unwrap() as i64);
            let mut v = Vec::new();
            for x in all(s).into_iter().filter(|x| x.topic_ids.contains(&t)) {
                let mut n = 0u64;
                for a in all(s) {
                    if start <= a.publish_date && a.publish_date <= today {
                        n += a.citations.iter().filter(|c| **c == x.id).count() as u64;
                    }
                }
                if n > 0 {
                    v.push((x.id, n));
                }
            }
            counted(s, v)
        }
        QueryKind::Q9 => {
            let inside = |a: &Article| match (p.from, p.to) {
                (Some(f), Some(t)) => f <= a.publish_date && a.publish_date <= t,
                _ => true,
            };
            let mut best: BTreeMap<(AuthorId, AuthorId, TopicId, i32, u32), NaiveDate> = BTreeMap::new();
            for a in all(s).into_iter().filter(|a| inside(a) && kind_of(s, a.author_id) == Some(true)) {
                for b in all(s).into_iter().filter(|b| inside(b) && kind_of(s, b.author_id) == Some(false)) {
                    if (a.publish_date.year(), a.publish_date.month()) != (b.publish_date.year(), b.publish_date.month()) {
                        continue;
                    }
                    for t in a.topic_ids.intersection(&b.topic_ids) {
                        let key = (a.author_id, b.author_id, *t, a.publish_date.year(), a.publish_date.month());
                        let day = a.publish_date.max(b.publish_date);
                        best.entry(key).and_modify(|d| *d = (*d).min(day)).or_insert(day);
                    }
                }
            }
            let mut v: Vec<(NaiveDate, AuthorId, AuthorId, TopicId)> =
                best.into_iter().map(|((j, pr, t, _, _), d)| (d, j, pr, t)).collect();
            v.sort();
            v.into_iter()
                .map(|(day, journalist, professional, topic)| Row::Collaboration { journalist, professional, topic, day })
                .collect()
        }
        QueryKind::Q10 => {
            let (f, t) = (p.from.unwrap(), p.to.unwrap());
            let (x, y) = (p.min_journalists.unwrap() as usize, p.min_topics.unwrap() as usize);
            let pool: Vec<&Article> = all(s)
                .into_iter()
                .filter(|a| f <= a.publish_date && a.publish_date <= t && kind_of(s, a.author_id) == Some(true))
                .collect();
            let universe: Vec<TopicId> = s.reference.topics.keys().copied().collect();
            let mut groups: Vec<Vec<ArticleId>> = Vec::new();
            for sub in subsets_of(&universe, y) {
                let members: Vec<ArticleId> =
                    pool.iter().filter(|a| sub.is_subset(&a.topic_ids)).map(|a| a.id).collect();
                let js: BTreeSet<AuthorId> =
                    pool.iter().filter(|a| members.contains(&a.id)).map(|a| a.author_id).collect();
                if js.len() >= x && !groups.contains(&members) {
                    groups.push(members);
                }
            }
            let maximal: Vec<Vec<ArticleId>> = groups
                .iter()
                .filter(|g| !groups.iter().any(|h| h.len() > g.len() && g.iter().all(|m| h.contains(m))))
                .cloned()
                .collect();
            let mut rows: Vec<(usize, usize, Vec<ArticleId>, Row)> = maximal
                .into_iter()
                .map(|g| {
                    let arts: Vec<&Article> = g.iter().map(|id| s.articles[id].as_ref()).collect();
                    let topics: Vec<TopicId> = universe
                        .iter()
                        .copied()
                        .filter(|t| arts.iter().all(|a| a.topic_ids.contains(t)))
                        .collect();
                    let journalists: Vec<AuthorId> =
                        arts.iter().map(|a| a.author_id).collect::<BTreeSet<_>>().into_iter().collect();
                    (journalists.len(), g.len(), g.clone(), Row::TopicGroup { topics, journalists, articles: g })
                })
                .collect();
            rows.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
            rows.into_iter().map(|r| r.3).collect()
        }
        QueryKind::Q11 => {
            let mut rows: Vec<(u64, LanguageId, String)> = s
                .reference
                .languages
                .values()
                .map(|l| (all(s).into_iter().filter(|a| a.language_id == l.id).count() as u64, l.id, l.code.clone()))
                .filter(|r| r.0 > 0)
                .collect();
            rows.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            rows.into_iter().map(|(count, language, code)| Row::LanguageCount { language, code, count }).collect()
        }
        QueryKind::Q12 => {
            let terms: BTreeSet<String> = words(p.term.as_ref().unwrap()).into_iter().collect();
            let (author, country) = (p.author.unwrap(), p.country.unwrap());
            let w = tfidf(s);
            let mut v = Vec::new();
            for a in all(s) {
                if a.author_id != author || a.country_id != country {
                    continue;
                }
                let vec = &w[&DocumentId::Article(a.id)];
                if !terms.iter().any(|t| vec.contains_key(t)) {
                    continue;
                }
                let mut score = 0.0;
                for t in &terms {
                    if let Some(x) = vec.get(t) {
                        score += x;
                    }
                }
                v.push((a.id, score));
            }
            scored(s, v)
        }
        QueryKind::Q13 => {
            let src = &s.articles[&p.document.unwrap()];
            let w = tfidf(s);
            let target = NaiveDate::from_ymd_opt(src.publish_date.year() + 1, src.publish_date.month(), src.publish_date.day());
            let a_vec = &w[&DocumentId::Article(src.id)];
            let norm = |v: &BTreeMap<String, f64>| {
                let mut acc = 0.0;
                for x in v.values() {
                    acc += x * x;
                }
                acc.sqrt()
            };
            let mut v = Vec::new();
            for b in all(s) {
                if Some(b.publish_date) != target {
                    continue;
                }
                let b_vec = &w[&DocumentId::Article(b.id)];
                let mut dot = 0.0;
                for (t, x) in a_vec {
                    if let Some(y) = b_vec.get(t) {
                        dot += x * y;
                    }
                }
                let (na, nb) = (norm(a_vec), norm(b_vec));
                v.push((b.id, if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb) }));
            }
            scored(s, v)
        }
        QueryKind::Q14 => {
            let y = p.year.unwrap();
            let born = |a: &Article| match s.authors.get(&a.author_id) {
                Some(x) if matches!(x.kind, AuthorKind::Journalist { .. }) => Some(x.birth_date.year()),
                _ => None,
            };
            let mut rows = Vec::new();
            for a in all(s) {
                for b in all(s) {
                    let ok = matches!((born(a), born(b)), (Some(x), Some(z)) if x < y && z > y);
                    if ok && a.topic_ids.iter().any(|t| b.topic_ids.contains(t)) {
                        rows.push(Row::ArticlePair { before: a.id, after: b.id });
                    }
                }
            }
            rows
        }
        QueryKind::A1 => {
            let year = p.year.unwrap_or(2010);
            let mut rows = Vec::new();
            for m in 1..=12 {
                let ym = YearMonth::new(year, m);
                let mut v: Vec<(u64, ArticleId)> =
                    all(s).into_iter().filter_map(|a| a.monthly_views.get(&ym).map(|n| (*n, a.id))).collect();
                v.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
                for (i, (views, article)) in v.into_iter().take(limit).enumerate() {
                    rows.push(Row::MonthlyTop { month: ym, rank: i as u32 + 1, article, views });
                }
            }
            rows
        }
        QueryKind::A2 => s
            .authors
            .values()
            .filter(|a| matches!(a.kind, AuthorKind::Journalist { .. }))
            .filter_map(|j| {
                let pages: Vec<u32> = all(s).into_iter().filter(|a| a.author_id == j.id).map(|a| a.page_count).collect();
                (!pages.is_empty()).then(|| Row::JournalistPages {
                    journalist: j.id,
                    name: j.name.clone(),
                    articles: pages.len() as u64,
                    mean_pages: pages.iter().map(|x| *x as u64).sum::<u64>() as f64 / pages.len() as f64,
                })
            })
            .collect(),
        QueryKind::A3 => {
            let ages: Vec<f64> = s
                .authors
                .values()
                .map(|a| today.years_since(a.birth_date).expect("born before today") as f64)
                .collect();
            if ages.is_empty() {
                Vec::new()
            } else {
                let n = ages.len() as f64;
                let mut sum = 0.0;
                for a in &ages {
                    sum += a;
                }
                let mean = sum / n;
                let mut sq = 0.0;
                for a in &ages {
                    sq += (a - mean) * (a - mean);
                }
                vec![Row::AgeStats { authors: ages.len() as u64, mean, stddev: (sq / n).sqrt() }]
            }
        }
        QueryKind::A4 => {
            let max = s.versions.values().copied().max();
            max.map(|m| {
                let first = s.versions.iter().find(|(_, v)| **v == m).unwrap().0;
                Row::MaxVersions { article: *first, versions: m }
            })
            .into_iter()
            .collect()
        }
    };
    let total = rows.len() as u64;
    let rows = if matches!(spec.kind, QueryKind::Q3 | QueryKind::A1) { rows } else { rows.into_iter().take(limit).collect() };
    (rows, total)
}
