//! Textbook versions of the metadata computations.

use std::collections::BTreeMap;

use primeball::generator::{Corpus, GeneratorConfig};
use primeball::metadata::lda::{extract_topics, LdaConfig};
use primeball::metadata::MetadataState;
use primeball::model::{Article, ArticleId, DocumentId, MediaRef};

use super::oracle::words;

/// Every document of a load, with the text the pipeline indexes.
pub fn documents(articles: &[Article], media: &[MediaRef]) -> Vec<(DocumentId, String)> {
    let mut out: Vec<(DocumentId, String)> =
        articles.iter().map(|a| (DocumentId::Article(a.id), format!("{}\n{}", a.title, a.body))).collect();
    out.extend(media.iter().map(|m| (DocumentId::Transcript(m.id), m.transcript.clone())));
    out
}

/// `tf * ln(N / df)` for every (document, term), counting by direct scans.
pub fn tfidf(docs: &[(DocumentId, String)]) -> BTreeMap<(DocumentId, String), f64> {
    let tokens: Vec<Vec<String>> = docs.iter().map(|(_, t)| words(t)).collect();
    let n = docs.len() as f64;
    let mut out = BTreeMap::new();
    for (i, (id, _)) in docs.iter().enumerate() {
        for term in &tokens[i] {
            if out.contains_key(&(*id, term.clone())) {
                continue;
            }
            let tf = tokens[i].iter().filter(|t| *t == term).count();
            let df = tokens.iter().filter(|doc| doc.contains(term)).count();
            out.insert((*id, term.clone()), tf as f64 * (n / df as f64).ln());
        }
    }
    out
}

/// Power iteration on the explicit Google matrix. Column j holds the
/// out-weights of node j normalized to one, or 1/n for a node with none.
pub fn dense_pagerank(articles: &[Article], damping: f64) -> BTreeMap<ArticleId, f64> {
    let ids: Vec<ArticleId> = {
        let mut v: Vec<ArticleId> = articles.iter().map(|a| a.id).collect();
        v.sort();
        v
    };
    let n = ids.len();
    let at = |id: ArticleId| ids.binary_search(&id).ok();
    let mut g = vec![vec![0.0f64; n]; n];
    for a in articles {
        let j = at(a.id).unwrap();
        let targets: Vec<usize> = a.citations.iter().filter_map(|c| at(*c)).collect();
        if targets.is_empty() {
            for row in g.iter_mut() {
                row[j] = 1.0 / n as f64;
            }
        } else {
            for i in &targets {
                g[*i][j] += 1.0 / targets.len() as f64;
            }
        }
    }
    for row in g.iter_mut() {
        for v in row.iter_mut() {
            *v = damping * *v + (1.0 - damping) / n as f64;
        }
    }
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..10_000 {
        let next: Vec<f64> = g.iter().map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        let delta: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    ids.into_iter().zip(x).collect()
}

/// Number of (document, term) weights that differ from the scan oracle,
/// plus the number of weights compared.
pub fn tfidf_mismatches(seed: u64, articles: u64) -> (usize, usize) {
    let c = super::corpus(seed, articles);
    let (arts, media) = super::documents_of(&c);
    let meta = MetadataState::build(&arts, &media, super::quick_pipeline()).unwrap();
    let want = tfidf(&documents(&arts, &media));
    let mut bad = 0;
    for ((doc, term), w) in &want {
        if meta.index.weight(term, *doc) != *w {
            bad += 1;
        }
    }
    // The index must not hold terms the oracle lacks.
    for (doc, _) in documents(&arts, &media) {
        let vector = meta.index.vector(doc);
        bad += vector.keys().filter(|t| !want.contains_key(&(doc, (*t).clone()))).count();
    }
    (bad, want.len())
}

/// L1 distance between the pipeline's PageRank and the dense oracle.
pub fn pagerank_l1(seed: u64, articles: u64) -> f64 {
    let c = super::corpus(seed, articles);
    let (arts, media) = super::documents_of(&c);
    let meta = MetadataState::build(&arts, &media, super::quick_pipeline()).unwrap();
    let want = dense_pagerank(&arts, meta.config.damping);
    assert_eq!(want.len(), meta.pagerank.len());
    want.iter().map(|(id, w)| (meta.pagerank[id] - w).abs()).sum()
}

/// Builds the first half, adds the second incrementally and compares with
/// a batch build of everything.
pub fn incremental_equals_batch(seed: u64, articles: u64) -> bool {
    let c = super::corpus(seed, articles);
    let (arts, media) = super::documents_of(&c);
    let half = arts.len() / 2;
    let first: Vec<MediaRef> =
        media.iter().filter(|m| arts[..half].iter().any(|a| a.media_refs.contains(&m.id))).cloned().collect();
    let rest: Vec<MediaRef> = media.iter().filter(|m| !first.contains(m)).cloned().collect();
    let cfg = super::quick_pipeline();
    let mut inc = MetadataState::build(&arts[..half], &first, cfg).unwrap();
    inc.incremental_update(&arts[half..], &rest).unwrap();
    let batch = MetadataState::build(&arts, &media, cfg).unwrap();
    inc.index == batch.index && inc == batch
}

/// Share of documents whose dominant LDA topic matches the planted topic,
/// under the better of the two label assignments.
pub fn planted_topic_accuracy(seed: u64, articles: u64) -> f64 {
    let c = Corpus::generate(&GeneratorConfig {
        seed,
        planted_topics: Some(2),
        media_ratio: 0.0,
        article_limit: Some(articles),
        ..GeneratorConfig::default()
    })
    .unwrap();
    let arts: Vec<Article> = c.articles().cloned().collect();
    let docs: Vec<(DocumentId, Vec<String>)> = documents(&arts, &[]).into_iter().map(|(d, t)| (d, words(&t))).collect();
    let model = extract_topics(&docs, LdaConfig { topics: 2, seed, ..LdaConfig::default() }).unwrap();
    let dominant = model.dominant_topics();
    let agree = arts
        .iter()
        .filter(|a| {
            let planted = (a.topic_ids.iter().next().unwrap().0 - 1) as usize;
            dominant[&DocumentId::Article(a.id)] == planted
        })
        .count();
    let agree = agree.max(arts.len() - agree);
    agree as f64 / arts.len() as f64
}
