//! Random query parameters drawn from the stored data, so that most queries
//! have non-empty answers.

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::IndexedRandom;
use rand::Rng;

use super::{QueryKind, QueryParams};
use crate::backend::StoreSnapshot;
use crate::metadata::text::tokenize;
use crate::model::*;

fn fallback_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2001, 9, 12).unwrap()
}

pub fn sample_params<R: Rng + ?Sized>(kind: QueryKind, snap: &StoreSnapshot, rng: &mut R) -> QueryParams {
    let ids: Vec<&ArticleId> = snap.articles.keys().collect();
    let pick = |rng: &mut R| ids.choose(rng).map(|id| snap.articles[*id].clone());
    let article = pick(rng);
    let date = article.as_ref().map_or_else(fallback_date, |a| a.publish_date);
    let interval = |rng: &mut R| {
        let len = rng.random_range(30..=365);
        (date - Duration::days(len / 2), date + Duration::days(len - len / 2))
    };
    let mut p = QueryParams::default();
    match kind {
        QueryKind::Q1 | QueryKind::Q11 | QueryKind::A2 | QueryKind::A3 | QueryKind::A4 => {}
        QueryKind::Q2 | QueryKind::Q9 => {
            let (f, t) = interval(rng);
            p.from = Some(f);
            p.to = Some(t);
        }
        QueryKind::Q3 => {
            let journalist_article = (0..50).filter_map(|_| pick(rng)).find(|a| {
                snap.authors.get(&a.author_id).is_some_and(Author::is_journalist)
            });
            let d = journalist_article.as_ref().map_or(date, |a| a.publish_date);
            p.journalist = journalist_article
                .map(|a| a.author_id)
                .or_else(|| snap.authors.values().find(|a| a.is_journalist()).map(|a| a.id));
            let span = Duration::days(rng.random_range(365..=3650));
            p.from = Some(d - span);
            p.to = Some(d + span);
        }
        QueryKind::Q4 | QueryKind::Q7 => p.date = Some(date),
        QueryKind::Q5 => {
            p.month = Some(date.month());
            p.year = Some(date.year());
        }
        QueryKind::Q6 => {
            p.day_of_year = Some(date.ordinal());
            p.year1 = Some(date.year());
            p.year2 = Some(pick(rng).map_or(date.year() + 1, |a| a.publish_date.year()));
        }
        QueryKind::Q8 => {
            p.topic = article.as_ref().and_then(|a| a.topic_ids.iter().next().copied()).or(Some(TopicId(1)));
            p.days = Some(rng.random_range(365..=3650));
        }
        QueryKind::Q10 => {
            let (f, t) = interval(rng);
            p.from = Some(f);
            p.to = Some(t);
            p.min_journalists = Some(rng.random_range(2..=3));
            p.min_topics = Some(1);
        }
        QueryKind::Q12 => {
            let words = article.as_ref().map(|a| tokenize(&a.body)).unwrap_or_default();
            p.term = Some(words.choose(rng).cloned().unwrap_or_else(|| "news".into()));
            p.author = Some(article.as_ref().map_or(AuthorId(1), |a| a.author_id));
            p.country = Some(article.as_ref().map_or(CountryId(1), |a| a.country_id));
        }
        QueryKind::Q13 => p.document = Some(article.as_ref().map_or(ArticleId(1), |a| a.id)),
        QueryKind::Q14 => {
            let births: Vec<i32> =
                snap.authors.values().filter(|a| a.is_journalist()).map(|a| a.birth_date.year()).collect();
            p.year = Some(births.choose(rng).copied().unwrap_or(1960));
        }
        QueryKind::A1 => p.year = Some(2010),
    }
    p
}
