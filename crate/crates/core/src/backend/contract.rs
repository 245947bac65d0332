//! Behavioural contract every [`Backend`] must satisfy.
//!
//! Each check receives a fresh, empty backend from the caller's factory and
//! returns a description of the first violation it finds. Checks assume
//! strong consistency and a cluster of at least one node per replica.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::thread;

use super::*;
use crate::generator::{ArticleUnit, Corpus, GeneratorConfig};
use crate::metadata::lda::LdaConfig;
use crate::metadata::PipelineConfig;

pub type CheckResult = Result<(), String>;

pub struct Check {
    pub name: &'static str,
    pub run: fn(&dyn Fn() -> Box<dyn Backend>, &Corpus) -> CheckResult,
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T>(r: Result<T, BackendError>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: unexpected error {e}"))
}

/// Small corpus the checks load.
pub fn fixture() -> Corpus {
    Corpus::generate(&GeneratorConfig { article_limit: Some(40), ..GeneratorConfig::default() })
        .expect("fixture corpus generates")
}

fn loaded(make: &dyn Fn() -> Box<dyn Backend>, c: &Corpus) -> Result<Box<dyn Backend>, String> {
    let b = make();
    ensure!(b.is_empty(), "factory returned a non-empty backend");
    ok(b.bulk_load(&c.take_slice(0.0, 1.0).map_err(|e| e.to_string())?), "bulk load")?;
    Ok(b)
}

/// An article absent from the fixture, resolving to its reference data.
fn new_article(c: &Corpus, id: u64) -> Article {
    let mut a = c.units[0].article.clone();
    a.id = ArticleId(id);
    a.citations.clear();
    a
}

fn check_write_read(make: &dyn Fn() -> Box<dyn Backend>, c: &Corpus) -> CheckResult {
    let b = loaded(make, c)?;
    let a = new_article(c, 1_000_001);
    let ack = ok(b.write(a.clone()), "write")?;
    ensure!(ack.version == 1, "write acknowledged version {}", ack.version);
    let v = ok(b.read(a.id, ReadMode::Latest), "read")?;
    ensure!(v.version == 1 && v.payload.body == a.body, "read did not return the written article");
    ensure!(matches!(b.write(a), Err(BackendError::Conflict(_))), "duplicate write was not a conflict");
    Ok(())
}

fn check_updates(make: &dyn Fn() -> Box<dyn Backend>, c: &Corpus) -> CheckResult {
    let b = loaded(make, c)?;
    let id = c.units[0].article.id;
    let first = ok(b.update(id, "second".into()), "update")?;
    ensure!(first.version == 2, "first update gave version {}", first.version);
    for i in 0..99 {
        ok(b.update(id, format!("body {i}")), "update")?;
    }
    let h = ok(b.version_history(id), "history")?;
    ensure!(h.len() == 101, "history length {} after 100 updates", h.len());
    ensure!(h.iter().enumerate().all(|(i, v)| v.version == i as u32 + 1), "history has gaps");
    ensure!(h.windows(2).all(|w| w[0].write_ts_us <= w[1].write_ts_us), "history timestamps decrease");
    let latest = ok(b.read(id, ReadMode::Latest), "read")?;
    ensure!(latest.version == 101 && latest.payload.body == "body 98", "latest read is not version 101");
    let v2 = ok(b.read(id, ReadMode::AtVersion(2)), "read at version")?;
    ensure!(v2.payload.body == "second" && v2.payload.version == 2, "version 2 not retained");
    let v1 = ok(b.read(id, ReadMode::AtVersion(1)), "read at version")?;
    ensure!(v1.payload.body == c.units[0].article.body, "version 1 not retained");
    ensure!(b.read(id, ReadMode::AtVersion(102)).is_err_and(|e| e.is_not_found()), "future version readable");
    Ok(())
}

fn check_concurrent_updates(make: &dyn Fn() -> Box<dyn Backend>, c: &Corpus) -> CheckResult {
    let b: Arc<dyn Backend> = Arc::from(loaded(make, c)?);
    let id = c.units[0].article.id;
    let acks: Vec<Vec<u32>> = thread::scope(|s| {
        let handles: Vec<_> = (0..5)
            .map(|w| {
                let b = b.clone();
                s.spawn(move || {
                    (0..10)
                        .map(|i| b.update(id, format!("w{w} u{i}")).map(|a| a.version))
                        .collect::<Result<Vec<u32>, _>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker").unwrap_or_default()).collect()
    });
    let versions: BTreeSet<u32> = acks.iter().flatten().copied().collect();
    ensure!(acks.iter().map(Vec::len).sum::<usize>() == 50, "some concurrent updates failed");
    ensure!(versions == (2..=51).collect(), "acknowledged versions are not exactly 2..=51");
    let h = ok(b.version_history(id), "history")?;
    ensure!(h.len() == 51, "final history length {}", h.len());
    Ok(())
}

fn check_unknown_ids(make: &dyn Fn() -> Box<dyn Backend>, c: &Corpus) -> CheckResult {
    let b = loaded(make, c)?;
    let id = ArticleId(9_999_999);
    ensure!(b.read(id, ReadMode::Latest).is_err_and(|e| e.is_not_found()), "read of unknown id");
    ensure!(b.update(id, "x".into()).is_err_and(|e| e.is_not_found()), "update of unknown id");
    ensure!(b.delete(id).is_err_and(|e| e.is_not_found()), "delete of unknown id");
    ensure!(b.version_history(id).is_err_and(|e| e.is_not_found()), "history of unknown id");
    Ok(())
}

fn check_delete(make: &dyn Fn() -> Box<dyn Backend>, c: &Corpus) -> CheckResult {
    let b = loaded(make, c)?;
    let a = c.units[1].article.clone();
    ok(b.update(a.id, "edited".into()), "update")?;
    ok(b.delete(a.id), "delete")?;
    ensure!(b.read(a.id, ReadMode::Latest).is_err_and(|e| e.is_not_found()), "deleted article readable");
    ensure!(b.delete(a.id).is_err_and(|e| e.is_not_found()), "second delete did not report not-found");
    ensure!(b.article_count() == c.manifest.article_count - 1, "count after delete");
    let ack = ok(b.write(a.clone()), "rewrite")?;
    ensure!(ack.version == 1, "rewrite restarted at version {}", ack.version);
    let h = ok(b.version_history(a.id), "history")?;
    ensure!(h.len() == 1, "rewritten article kept {} versions", h.len());
    Ok(())
}

fn check_bulk_load(make: &dyn Fn() -> Box<dyn Backend>, c: &Corpus) -> CheckResult {
    let b = make();
    let empty = c.next_slice(0.0, 0.0).map_err(|e| e.to_string())?;
    let r = ok(b.bulk_load(&empty), "empty load")?;
    ensure!(r.articles == 0 && r.bytes == 0 && b.is_empty(), "empty slice changed the store");

    let tail = c.take_slice(0.5, 1.0).map_err(|e| e.to_string())?;
    ensure!(
        matches!(b.bulk_load(&tail), Err(BackendError::DanglingReference(_))),
        "slice without its reference data loaded"
    );
    ensure!(b.is_empty(), "rejected load left data behind");

    let head = c.take_slice(0.0, 0.5).map_err(|e| e.to_string())?;
    let r = ok(b.bulk_load(&head), "head load")?;
    ensure!(r.articles == head.units.len() as u64, "load report article count");
    ok(b.bulk_load(&tail), "tail load")?;
    ensure!(b.article_count() == c.manifest.article_count, "article count after both halves");
    ensure!(matches!(b.bulk_load(&tail), Err(BackendError::Conflict(_))), "overlapping load accepted");

    let snap = ok(b.snapshot(), "snapshot")?;
    ensure!(snap.authors.len() as u64 == c.manifest.per_entity_counts["author"], "author count");
    ensure!(snap.media.len() as u64 == c.manifest.per_entity_counts["media"], "media count");

    let mut bad = c.take_slice(0.0, 1.0).map_err(|e| e.to_string())?;
    bad.reference = None;
    let mut unit: ArticleUnit = bad.units[0].clone();
    unit.authors.clear();
    unit.media.clear();
    unit.article.id = ArticleId(2_000_000);
    unit.article.author_id = AuthorId(9_999);
    bad.units = vec![unit];
    let err = b.bulk_load(&bad);
    ensure!(
        matches!(&err, Err(BackendError::DanglingReference(m)) if m.contains("9999")),
        "dangling author not reported: {err:?}"
    );
    Ok(())
}

fn check_search(make: &dyn Fn() -> Box<dyn Backend>, c: &Corpus) -> CheckResult {
    let b = loaded(make, c)?;
    let q = SearchQuery { terms: "anything".into(), ..SearchQuery::default() };
    ensure!(matches!(b.search(&q), Err(BackendError::IndexNotBuilt)), "search without an index");

    let author = c.units[0].article.author_id;
    let by_author = ok(b.search(&SearchQuery { author: Some(author), ..SearchQuery::default() }), "filter search")?;
    let expected: Vec<ArticleId> = c.articles().filter(|a| a.author_id == author).map(|a| a.id).collect();
    ensure!(by_author.iter().map(|h| h.article).collect::<Vec<_>>() == expected, "author filter results");

    let mut unique = c.units[3].article.clone();
    unique.id = ArticleId(3_000_000);
    unique.body.push_str(" zyzzyvaunique");
    ok(b.write(unique.clone()), "write")?;
    let snap = ok(b.snapshot(), "snapshot")?;
    let articles: Vec<Article> = snap.articles.values().map(|a| (**a).clone()).collect();
    let media: Vec<MediaRef> = snap.media.values().map(|m| (**m).clone()).collect();
    let cfg = PipelineConfig { lda: LdaConfig { iterations: 5, ..LdaConfig::default() }, ..PipelineConfig::default() };
    b.install_metadata(MetadataState::build(&articles, &media, cfg).map_err(|e| e.to_string())?);

    let hits = ok(b.search(&SearchQuery { terms: "zyzzyvaunique".into(), ..SearchQuery::default() }), "search")?;
    ensure!(hits.len() == 1 && hits[0].article == unique.id, "singleton term search: {hits:?}");
    ensure!(hits[0].score > 0.0, "singleton hit has no score");

    let word = crate::metadata::text::tokenize(&c.units[0].article.body).remove(0);
    let all = ok(b.search(&SearchQuery { terms: word.clone(), ..SearchQuery::default() }), "search")?;
    ensure!(!all.is_empty(), "common word found nothing");
    ensure!(
        all.windows(2).all(|w| w[0].score > w[1].score || (w[0].score == w[1].score && w[0].article < w[1].article)),
        "ranking not by score then id"
    );
    let first = all[0].article;
    let filtered = ok(
        b.search(&SearchQuery { terms: word, author: Some(snap.articles[&first].author_id), ..SearchQuery::default() }),
        "filtered search",
    )?;
    ensure!(filtered.iter().all(|h| snap.articles[&h.article].author_id == snap.articles[&first].author_id), "filter ignored");

    ok(b.delete(unique.id), "delete")?;
    let hits = ok(b.search(&SearchQuery { terms: "zyzzyvaunique".into(), ..SearchQuery::default() }), "search")?;
    ensure!(hits.is_empty(), "deleted article still returned by search");
    Ok(())
}

fn check_admin(make: &dyn Fn() -> Box<dyn Backend>, c: &Corpus) -> CheckResult {
    let b = loaded(make, c)?;
    let state = b.cluster_state();
    let first = state.nodes.first().ok_or("cluster has no nodes")?.id;
    let fresh = NodeId(state.nodes.iter().map(|n| n.id.0).max().unwrap_or(0) + 1);
    ensure!(b.kill_node(NodeId(u32::MAX)).is_err_and(|e| e.is_not_found()), "kill of unknown node");
    ensure!(b.recover_node(NodeId(u32::MAX)).is_err_and(|e| e.is_not_found()), "recover of unknown node");
    ensure!(matches!(b.add_node(first), Err(BackendError::Conflict(_))), "duplicate node accepted");
    for sh in &state.shards {
        ensure!(sh.replicas.len() == state.replication as usize, "shard {} has {} replicas", sh.index, sh.replicas.len());
    }
    let st = ok(b.kill_node(first), "kill")?;
    ensure!(st.nodes.iter().any(|n| n.id == first && !n.live), "killed node still live");
    let st = ok(b.recover_node(first), "recover")?;
    ensure!(st.unreachable_shards().is_empty(), "recovery left shards unreachable");
    for a in c.articles() {
        ok(b.read(a.id, ReadMode::Latest), "read after recovery")?;
    }
    ok(b.add_node(fresh), "add node")?;
    ok(b.rebalance(), "rebalance")?;
    let again = ok(b.rebalance(), "rebalance")?;
    ensure!(again.moved_bytes == 0, "rebalancing an unchanged ring moved data");
    for a in c.articles() {
        ok(b.read(a.id, ReadMode::Latest), "read after rebalance")?;
    }
    Ok(())
}

pub const CHECKS: &[Check] = &[
    Check { name: "write then read", run: check_write_read },
    Check { name: "versioned updates", run: check_updates },
    Check { name: "concurrent updates", run: check_concurrent_updates },
    Check { name: "unknown ids", run: check_unknown_ids },
    Check { name: "delete and rewrite", run: check_delete },
    Check { name: "bulk load", run: check_bulk_load },
    Check { name: "search", run: check_search },
    Check { name: "administration", run: check_admin },
];

/// Runs every check, returning `(name, outcome)` pairs in order.
pub fn check_all(make: &dyn Fn() -> Box<dyn Backend>) -> Vec<(&'static str, CheckResult)> {
    let corpus = fixture();
    CHECKS.iter().map(|c| (c.name, (c.run)(make, &corpus))).collect()
}
