//! The seven scenarios.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::Datelike;
use parking_lot::Mutex;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::harness::{outcome_of, timed_query, Harness};
use super::report::{containment, Findings, OpKind, OpRecord, Outcome, ScenarioReport};
use super::sched::{self, Actor, Time};
use super::{ScenarioConfig, ScenarioError, ScenarioId};
use crate::backend::{approx_article_bytes, Backend, ClusterState, ReadMode};
use crate::model::{Article, ArticleId};
use crate::query::{sample_params, QueryKind, QueryParams};

/// Independent random stream for one scenario and purpose.
fn stream(seed: u64, scenario: ScenarioId, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((scenario.number() as u64) << 48) | k);
    rng
}

/// The analytic queries run by Scenario 5, drawn uniformly.
pub fn analytic_sequence(seed: u64, n: usize) -> Vec<QueryKind> {
    let mut rng = stream(seed, ScenarioId::S5, 0);
    (0..n).map(|_| *QueryKind::analytic().choose(&mut rng).unwrap()).collect()
}

/// Runs one scenario on `h`. Scenario 6 needs an empty backend; the others
/// first bring an empty one to the initial state, which is not reported.
pub fn run_scenario(id: ScenarioId, h: &mut Harness) -> Result<ScenarioReport, ScenarioError> {
    if id != ScenarioId::S6 && h.backend.is_empty() {
        h.initialize()?;
        h.settle();
    }
    if id != ScenarioId::S6 && h.backend.metadata().is_none() {
        return Err(ScenarioError::Precondition("the store has no metadata".into()));
    }
    let (records, findings, panic) = match id {
        ScenarioId::S1 => s1(h)?,
        ScenarioId::S2 => s2(h)?,
        ScenarioId::S3 => s3(h)?,
        ScenarioId::S4 => s4(h)?,
        ScenarioId::S5 => s5(h)?,
        ScenarioId::S6 => s6(h)?,
        ScenarioId::S7 => s7(h)?,
    };
    let findings = Findings {
        store_articles: Some(h.backend.article_count()),
        loaded_fraction: Some(h.loaded),
        ..findings
    };
    Ok(ScenarioReport::seal(id, &h.config, records, findings, h.stored_bytes(), panic))
}

type Outputs = (Vec<OpRecord>, Findings, Option<String>);

/// Numbers a sequential worker's records and moves its clock past each.
struct Sequence<'a> {
    time: &'a Time,
    phase: u32,
    records: Vec<OpRecord>,
}

impl<'a> Sequence<'a> {
    fn new(time: &'a Time) -> Self {
        Sequence { time, phase: 0, records: Vec::new() }
    }

    fn push(&mut self, mut r: OpRecord) -> &mut OpRecord {
        r.seq = self.records.len() as u32;
        r.phase = self.phase;
        self.time.reach(r.end_us);
        self.records.push(r);
        self.records.last_mut().unwrap()
    }

    fn extend(&mut self, rs: Vec<OpRecord>) {
        for r in rs {
            self.push(r);
        }
    }
}

fn loaded_bytes(rs: &[OpRecord]) -> u64 {
    rs.iter()
        .filter(|r| r.kind == OpKind::BulkLoad)
        .filter_map(|r| r.detail.as_deref()?.strip_suffix(" bytes")?.parse::<u64>().ok())
        .sum()
}

fn recompute_us(rs: &[OpRecord]) -> u64 {
    rs.iter().filter(|r| matches!(r.kind, OpKind::IndexBuild | OpKind::IndexUpdate)).map(|r| r.duration_us()).sum()
}

fn s1_queries(config: &ScenarioConfig, date: chrono::NaiveDate) -> [(QueryKind, QueryParams); 3] {
    let on = QueryParams { date: Some(date), ..QueryParams::default() };
    let year = QueryParams { year: Some(date.year() - config.s1.birth_year_offset), ..QueryParams::default() };
    [(QueryKind::Q4, on.clone()), (QueryKind::Q7, on), (QueryKind::Q14, year)]
}

/// Queries at a date, doubles the data, repeats them, then queries a
/// second date.
fn s1(h: &mut Harness) -> Result<Outputs, ScenarioError> {
    let config = h.config.clone();
    let [d1, d2] = config.s1.dates;
    let time = h.time.clone();
    let mut seq = Sequence::new(&time);
    let mut baseline = Vec::new();
    let live = h.live_nodes();
    for (kind, params) in s1_queries(&config, d1) {
        let (r, res) = timed_query(&time, h.backend.as_ref(), &config, live, kind, Some(0), |_| params);
        seq.push(r);
        baseline.push(res.map(|r| r.rows));
    }
    seq.phase = 1;
    let grown = h.grow(h.loaded)?;
    h.settle();
    seq.extend(grown);
    seq.phase = 2;
    let live = h.live_nodes();
    for ((kind, params), before) in s1_queries(&config, d1).into_iter().zip(&baseline) {
        let (r, res) = timed_query(&time, h.backend.as_ref(), &config, live, kind, Some(0), |_| params);
        let ok = match (before, &res) {
            (Some(b), Some(a)) => containment(b, &a.rows),
            _ => false,
        };
        seq.push(r).verdict = Some(ok);
    }
    seq.phase = 3;
    for (kind, params) in s1_queries(&config, d2) {
        let (r, _) = timed_query(&time, h.backend.as_ref(), &config, live, kind, Some(0), |_| params);
        seq.push(r);
    }
    let findings = Findings {
        loaded_bytes: Some(loaded_bytes(&seq.records)),
        recompute_us: Some(recompute_us(&seq.records)),
        ..Findings::default()
    };
    Ok((seq.records, findings, None))
}

fn period_us(per_second: f64) -> u64 {
    ((1e6 / per_second).round() as u64).max(1)
}

struct Reader {
    id: u32,
    backend: Arc<dyn Backend>,
    cost: super::CostModel,
    article: ArticleId,
    next: u64,
    period: u64,
    until: u64,
    out: Vec<OpRecord>,
}

impl Actor for Reader {
    fn next_at(&self) -> Option<u64> {
        (self.next < self.until).then_some(self.next)
    }

    fn fire(&mut self, time: &Time) {
        let start = time.now();
        let res = self.backend.read(self.article, ReadMode::Latest);
        let (outcome, version, bytes) = match &res {
            Ok(v) => (Outcome::Ok, Some(v.version), approx_article_bytes(&v.payload)),
            Err(e) => (outcome_of(e), None, 0),
        };
        let end = time.finish(start, self.cost.single(bytes));
        let mut r = OpRecord::new(OpKind::Read, start, end, outcome);
        r.worker = self.id;
        r.seq = self.out.len() as u32;
        r.article = Some(self.article.0);
        r.version = version;
        r.bytes = Some(bytes);
        self.out.push(r);
        self.next = (self.next + self.period).max(end);
    }

    fn take_records(&mut self) -> Vec<OpRecord> {
        std::mem::take(&mut self.out)
    }
}

struct Updater {
    id: u32,
    backend: Arc<dyn Backend>,
    cost: super::CostModel,
    article: ArticleId,
    body: String,
    next: u64,
    period: u64,
    until: u64,
    out: Vec<OpRecord>,
}

impl Actor for Updater {
    fn next_at(&self) -> Option<u64> {
        (self.next < self.until).then_some(self.next)
    }

    fn fire(&mut self, time: &Time) {
        let start = time.now();
        let n = self.out.len() + 1;
        let body = format!("{}\n\nRevision {n}.", self.body);
        let bytes = body.len() as u64;
        let res = self.backend.update(self.article, body);
        let end = time.finish(start, self.cost.single(bytes));
        let mut r = OpRecord::new(OpKind::Update, start, end, res.as_ref().map_or_else(outcome_of, |_| Outcome::Ok));
        r.worker = self.id;
        r.seq = self.out.len() as u32;
        r.article = Some(self.article.0);
        r.version = res.ok().map(|a| a.version);
        self.out.push(r);
        self.next = (self.next + self.period).max(end);
    }

    fn take_records(&mut self) -> Vec<OpRecord> {
        std::mem::take(&mut self.out)
    }
}

/// Readers poll one article while a writer keeps updating it.
fn s2(h: &mut Harness) -> Result<Outputs, ScenarioError> {
    let p = h.config.s2.clone();
    let article = match p.article {
        Some(a) => ArticleId(a),
        None => *h
            .backend
            .snapshot()?
            .articles
            .keys()
            .next()
            .ok_or_else(|| ScenarioError::Precondition("the store holds no articles".into()))?,
    };
    let body = h.backend.read(article, ReadMode::Latest)?.payload.body.clone();
    let t0 = h.time.now();
    let until = t0 + (p.duration_s * 1e6).round() as u64;
    let mut actors: Vec<Box<dyn Actor>> = (0..p.readers)
        .map(|id| {
            Box::new(Reader {
                id,
                backend: h.backend.clone(),
                cost: h.config.cost,
                article,
                next: t0,
                period: period_us(p.reads_per_second),
                until,
                out: Vec::new(),
            }) as Box<dyn Actor>
        })
        .collect();
    let period = period_us(1.0 / p.update_interval_s);
    actors.push(Box::new(Updater {
        id: p.readers,
        backend: h.backend.clone(),
        cost: h.config.cost,
        article,
        body,
        next: t0 + period,
        period,
        until,
        out: Vec::new(),
    }));
    let out = sched::run(&h.time, actors);
    if let Some(end) = out.records.iter().map(|r| r.end_us).max() {
        h.time.reach(end);
    }
    Ok((out.records, Findings::default(), out.panic))
}

fn unreachable_keys(state: &ClusterState) -> u64 {
    let dead = state.unreachable_shards();
    state.shards.iter().filter(|s| dead.contains(&s.index)).map(|s| s.keys).sum()
}

/// Runs every generic query, removes a node, and repeats until a query
/// fails. Removed nodes are brought back at the end.
fn s3(h: &mut Harness) -> Result<Outputs, ScenarioError> {
    let config = h.config.clone();
    let mut rng = stream(config.seed, ScenarioId::S3, 0);
    let order = config.removal_order(&mut rng);
    let time = h.time.clone();
    let mut seq = Sequence::new(&time);
    let mut survivable = 0;
    let mut killed = Vec::new();
    let mut result = Ok(());
    for round in 0..=order.len() {
        seq.phase = round as u32;
        let live = h.live_nodes();
        let mut all_ok = true;
        for kind in QueryKind::generic() {
            let (r, _) = timed_query(&time, h.backend.as_ref(), &config, live, *kind, None, |s| {
                sample_params(*kind, s, &mut rng)
            });
            all_ok &= r.outcome == Outcome::Ok;
            let unavailable = r.outcome == Outcome::Unavailable;
            seq.push(r);
            if unavailable {
                break;
            }
        }
        if !all_ok {
            break;
        }
        survivable = round as u32;
        let Some(node) = order.get(round) else { break };
        let start = time.now();
        match h.backend.kill_node(*node) {
            Ok(state) => {
                killed.push(*node);
                let mut r = OpRecord::new(OpKind::KillNode, start, start, Outcome::Ok);
                r.count = Some(unreachable_keys(&state));
                r.detail = Some(node.to_string());
                seq.push(r);
            }
            Err(e) => {
                result = Err(e);
                break;
            }
        }
    }
    for node in killed {
        h.backend.recover_node(node)?;
    }
    result?;
    let findings = Findings {
        survivable_removals: Some(survivable),
        removal_order: Some(order.iter().map(|n| n.0).collect()),
        ..Findings::default()
    };
    Ok((seq.records, findings, None))
}

/// Articles the mutation workers may still touch, and fresh ids for inserts.
struct Pool {
    live: Mutex<Vec<ArticleId>>,
    next_id: AtomicU64,
    templates: Vec<Arc<Article>>,
}

impl Pool {
    fn pick(&self, rng: &mut ChaCha8Rng, remove: bool) -> Option<ArticleId> {
        let mut live = self.live.lock();
        if live.is_empty() {
            return None;
        }
        let i = rng.random_range(0..live.len());
        Some(if remove { live.swap_remove(i) } else { live[i] })
    }
}

struct QueryWorker {
    id: u32,
    phase: u32,
    backend: Arc<dyn Backend>,
    config: Arc<ScenarioConfig>,
    live_nodes: usize,
    rng: ChaCha8Rng,
    next: Option<u64>,
    left: std::slice::Iter<'static, QueryKind>,
    out: Vec<OpRecord>,
}

impl Actor for QueryWorker {
    fn next_at(&self) -> Option<u64> {
        self.next
    }

    fn fire(&mut self, time: &Time) {
        let Some(kind) = self.left.next().copied() else {
            self.next = None;
            return;
        };
        let rng = &mut self.rng;
        let (mut r, _) = timed_query(time, self.backend.as_ref(), &self.config, self.live_nodes, kind, None, |s| {
            sample_params(kind, s, rng)
        });
        r.worker = self.id;
        r.phase = self.phase;
        r.seq = self.out.len() as u32;
        let end = r.end_us;
        self.out.push(r);
        self.next = (self.left.len() > 0).then_some(end);
    }

    fn take_records(&mut self) -> Vec<OpRecord> {
        std::mem::take(&mut self.out)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Mutation {
    Update,
    Delete,
    Insert,
}

struct MutationWorker {
    id: u32,
    phase: u32,
    backend: Arc<dyn Backend>,
    cost: super::CostModel,
    pool: Arc<Pool>,
    rng: ChaCha8Rng,
    /// Pending operations by scheduled time; popped from the back.
    plan: Vec<(u64, Mutation)>,
    /// Earliest time the worker is free again.
    free_at: u64,
    out: Vec<OpRecord>,
}

impl MutationWorker {
    fn plan(t0: u64, seconds: f64, rates: [(f64, Mutation); 3]) -> Vec<(u64, Mutation)> {
        let mut plan = Vec::new();
        for (rate, m) in rates {
            let n = (rate * seconds).round() as u64;
            let period = period_us(rate);
            plan.extend((0..n).map(|k| (t0 + k * period, m)));
        }
        plan.sort();
        plan.reverse();
        plan
    }

    fn perform(&mut self, m: Mutation) -> Option<(OpKind, Option<ArticleId>, Result<Option<u32>, Outcome>, u64)> {
        let b = &self.backend;
        Some(match m {
            Mutation::Update => {
                let id = self.pool.pick(&mut self.rng, false)?;
                let body = format!("Correction {} from worker {}.", self.out.len(), self.id);
                let bytes = body.len() as u64;
                let res = b.update(id, body).map(|a| Some(a.version)).map_err(|e| outcome_of(&e));
                (OpKind::Update, Some(id), res, bytes)
            }
            Mutation::Delete => {
                let id = self.pool.pick(&mut self.rng, true)?;
                (OpKind::Delete, Some(id), b.delete(id).map(|_| None).map_err(|e| outcome_of(&e)), 0)
            }
            Mutation::Insert => {
                let template = self.pool.templates.choose(&mut self.rng)?;
                let mut a = (**template).clone();
                a.id = ArticleId(self.pool.next_id.fetch_add(1, Ordering::SeqCst));
                let id = a.id;
                let bytes = approx_article_bytes(&a);
                let res = b.write(a).map(|ack| Some(ack.version)).map_err(|e| outcome_of(&e));
                if res.is_ok() {
                    self.pool.live.lock().push(id);
                }
                (OpKind::Insert, Some(id), res, bytes)
            }
        })
    }
}

impl Actor for MutationWorker {
    fn next_at(&self) -> Option<u64> {
        self.plan.last().map(|(t, _)| (*t).max(self.free_at))
    }

    fn fire(&mut self, time: &Time) {
        let Some((_, m)) = self.plan.pop() else { return };
        let start = time.now();
        let Some((kind, article, res, bytes)) = self.perform(m) else { return };
        let end = time.finish(start, self.cost.single(bytes));
        let (outcome, version) = match res {
            Ok(v) => (Outcome::Ok, v),
            Err(o) => (o, None),
        };
        let mut r = OpRecord::new(kind, start, end, outcome);
        r.worker = self.id;
        r.phase = self.phase;
        r.seq = self.out.len() as u32;
        r.article = article.map(|a| a.0);
        r.version = version;
        self.out.push(r);
        self.free_at = end;
    }

    fn take_records(&mut self) -> Vec<OpRecord> {
        std::mem::take(&mut self.out)
    }
}

/// Query workers run every generic query while mutation workers update,
/// delete and insert articles, repeated a number of times.
fn s4(h: &mut Harness) -> Result<Outputs, ScenarioError> {
    let config = Arc::new(h.config.clone());
    let p = config.s4.clone();
    let snap = h.backend.snapshot()?;
    let max_id = h.corpus.articles().map(|a| a.id.0).max().unwrap_or(0);
    let pool = Arc::new(Pool {
        live: Mutex::new(snap.articles.keys().copied().collect()),
        next_id: AtomicU64::new(max_id + 1),
        templates: snap.articles.values().cloned().collect(),
    });
    drop(snap);
    let rates = [
        (p.updates_per_second, Mutation::Update),
        (p.deletes_per_second, Mutation::Delete),
        (p.inserts_per_second, Mutation::Insert),
    ];
    let mut records = Vec::new();
    let mut panic = None;
    for rep in 0..p.repetitions {
        let t0 = h.time.now();
        let live_nodes = h.live_nodes();
        let mut actors: Vec<Box<dyn Actor>> = Vec::new();
        for w in 0..p.query_workers {
            actors.push(Box::new(QueryWorker {
                id: w,
                phase: rep,
                backend: h.backend.clone(),
                config: config.clone(),
                live_nodes,
                rng: stream(config.seed, ScenarioId::S4, ((rep as u64) << 16) | w as u64),
                next: Some(t0),
                left: QueryKind::generic().iter(),
                out: Vec::new(),
            }));
        }
        for m in 0..p.mutation_workers {
            let id = p.query_workers + m;
            actors.push(Box::new(MutationWorker {
                id,
                phase: rep,
                backend: h.backend.clone(),
                cost: config.cost,
                pool: pool.clone(),
                rng: stream(config.seed, ScenarioId::S4, ((rep as u64) << 16) | id as u64),
                plan: MutationWorker::plan(t0, p.mutation_seconds, rates),
                free_at: t0,
                out: Vec::new(),
            }));
        }
        let out = sched::run(&h.time, actors);
        if let Some(end) = out.records.iter().map(|r| r.end_us).max() {
            h.time.reach(end);
        }
        records.extend(out.records);
        if out.panic.is_some() {
            panic = out.panic;
            break;
        }
    }
    Ok((records, Findings::default(), panic))
}

/// A seeded sequence of analytic queries.
fn s5(h: &mut Harness) -> Result<Outputs, ScenarioError> {
    let config = h.config.clone();
    let time = h.time.clone();
    let mut rng = stream(config.seed, ScenarioId::S5, 1);
    let mut seq = Sequence::new(&time);
    let live = h.live_nodes();
    for kind in analytic_sequence(config.seed, config.s5.executions as usize) {
        let (r, _) =
            timed_query(&time, h.backend.as_ref(), &config, live, kind, None, |s| sample_params(kind, s, &mut rng));
        seq.push(r);
    }
    Ok((seq.records, Findings::default(), None))
}

/// Loads the initial data into an empty store and builds the metadata,
/// then checks a full-text query works.
fn s6(h: &mut Harness) -> Result<Outputs, ScenarioError> {
    let config = h.config.clone();
    let time = h.time.clone();
    let mut seq = Sequence::new(&time);
    seq.extend(h.initialize()?);
    h.settle();
    seq.phase = 1;
    let mut rng = stream(config.seed, ScenarioId::S6, 0);
    let live = h.live_nodes();
    let (r, _) = timed_query(&time, h.backend.as_ref(), &config, live, QueryKind::Q12, None, |s| {
        sample_params(QueryKind::Q12, s, &mut rng)
    });
    seq.push(r);
    let findings = Findings {
        loaded_bytes: Some(loaded_bytes(&seq.records)),
        recompute_us: Some(recompute_us(&seq.records)),
        ..Findings::default()
    };
    Ok((seq.records, findings, None))
}

/// Loads a further fraction of the corpus and updates the metadata.
fn s7(h: &mut Harness) -> Result<Outputs, ScenarioError> {
    let time = h.time.clone();
    let mut seq = Sequence::new(&time);
    let delta = h.config.s7.delta;
    seq.extend(h.grow(delta)?);
    h.settle();
    let findings = Findings {
        loaded_bytes: Some(loaded_bytes(&seq.records)),
        recompute_us: Some(recompute_us(&seq.records)),
        ..Findings::default()
    };
    Ok((seq.records, findings, None))
}
