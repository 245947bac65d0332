//! Per-operation records, derived counters and the sealed report.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{ClockMode, ScenarioConfig, ScenarioId};
use crate::query::{QueryKind, Row};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Query(QueryKind),
    Read,
    Update,
    Insert,
    Delete,
    BulkLoad,
    IndexBuild,
    IndexUpdate,
    KillNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    NotFound,
    Unavailable,
    Conflict,
    Failed,
    Panicked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpRecord {
    pub worker: u32,
    /// Position in the worker's own sequence.
    pub seq: u32,
    /// Scenario-specific grouping: S1 step, S3 removal round, S4 repetition.
    pub phase: u32,
    pub kind: OpKind,
    pub start_us: u64,
    pub end_us: u64,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub article: Option<u64>,
    /// Version served by a read or created by a write.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    /// Rows returned, articles loaded, or keys unreachable after a removal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    /// Bytes returned to the client.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes: Option<u64>,
    /// Scenario 1 check of a repeated query against its baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl OpRecord {
    pub fn new(kind: OpKind, start_us: u64, end_us: u64, outcome: Outcome) -> Self {
        OpRecord {
            worker: 0,
            seq: 0,
            phase: 0,
            kind,
            start_us,
            end_us,
            outcome,
            article: None,
            version: None,
            count: None,
            bytes: None,
            verdict: None,
            detail: None,
        }
    }

    pub fn duration_us(&self) -> u64 {
        self.end_us - self.start_us
    }

    fn touches_article(&self) -> bool {
        matches!(self.kind, OpKind::Read | OpKind::Update | OpKind::Delete)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub correct_reads: u64,
    pub consistent_reads: u64,
    pub total_reads: u64,
    /// Successful reads that returned an older version than one the same
    /// worker had already seen.
    pub regressions: u64,
    pub successful_ops: u64,
    pub total_ops: u64,
    pub unreachable_keys: u64,
}

impl Counters {
    /// Derives every counter from the records.
    ///
    /// Reads are `Read` operations plus checked repetitions of Scenario 1.
    /// An operation succeeds when its outcome is `Ok`, or when it found no
    /// article that a successful delete had removed before it finished.
    pub fn from_records(records: &[OpRecord]) -> Counters {
        let mut c = Counters::default();
        let mut deleted_by: HashMap<u64, u64> = HashMap::new();
        for r in records {
            if r.kind == OpKind::Delete && r.outcome == Outcome::Ok {
                if let Some(a) = r.article {
                    let t = deleted_by.entry(a).or_insert(u64::MAX);
                    *t = (*t).min(r.start_us);
                }
            }
        }
        let mut order: Vec<&OpRecord> = records.iter().filter(|r| r.kind == OpKind::Read).collect();
        order.sort_by_key(|r| (r.worker, r.start_us, r.seq));
        let mut seen: BTreeMap<(u32, Option<u64>), u32> = BTreeMap::new();
        for r in order {
            c.total_reads += 1;
            if r.outcome != Outcome::Ok {
                continue;
            }
            let v = r.version.unwrap_or(0);
            let max = seen.entry((r.worker, r.article)).or_insert(0);
            if v < *max {
                c.regressions += 1;
            } else {
                c.consistent_reads += 1;
                *max = v;
            }
        }
        for r in records {
            if let Some(ok) = r.verdict {
                c.total_reads += 1;
                c.correct_reads += u64::from(ok);
            }
            c.total_ops += 1;
            let excused = r.outcome == Outcome::NotFound
                && r.touches_article()
                && r.article.and_then(|a| deleted_by.get(&a)).is_some_and(|t| *t <= r.end_us);
            if r.outcome == Outcome::Ok || excused {
                c.successful_ops += 1;
            }
            if r.kind == OpKind::KillNode {
                c.unreachable_keys = c.unreachable_keys.max(r.count.unwrap_or(0));
            }
        }
        c
    }
}

/// Results a scenario derives beyond the counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Findings {
    /// Scenario 3: nodes removed while every query still succeeded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survivable_removals: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removal_order: Option<Vec<u32>>,
    /// Articles stored when the scenario ended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store_articles: Option<u64>,
    /// Scenarios 1, 6 and 7: bytes of corpus data loaded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loaded_bytes: Option<u64>,
    /// Scenarios 1, 6 and 7: time spent rebuilding or updating metadata.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recompute_us: Option<u64>,
    /// Fraction of the corpus loaded when the scenario ended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loaded_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub scenario: ScenarioId,
    pub clock: ClockMode,
    pub sealed: bool,
    /// False when a worker panicked; the records are then partial.
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_reason: Option<String>,
    pub started_us: u64,
    pub finished_us: u64,
    /// `finished_us - started_us`, in realtime-equivalent microseconds.
    pub total_us: u64,
    pub nodes: u32,
    /// Bytes held by all nodes at the end, replicas included.
    pub stored_bytes: u64,
    pub egress_bytes: u64,
    pub counters: Counters,
    pub findings: Findings,
    pub config: ScenarioConfig,
    pub records: Vec<OpRecord>,
}

impl ScenarioReport {
    /// Sorts the records and derives the totals from them.
    pub(crate) fn seal(
        scenario: ScenarioId,
        config: &ScenarioConfig,
        mut records: Vec<OpRecord>,
        findings: Findings,
        stored_bytes: u64,
        invalid_reason: Option<String>,
    ) -> ScenarioReport {
        records.sort_by_key(|r| (r.start_us, r.worker, r.seq));
        let (started_us, finished_us) = span(&records);
        ScenarioReport {
            schema_version: REPORT_SCHEMA_VERSION,
            scenario,
            clock: config.clock,
            sealed: true,
            valid: invalid_reason.is_none(),
            invalid_reason,
            started_us,
            finished_us,
            total_us: finished_us - started_us,
            nodes: config.nodes,
            stored_bytes,
            egress_bytes: records.iter().filter_map(|r| r.bytes).sum(),
            counters: Counters::from_records(&records),
            findings,
            config: config.clone(),
            records,
        }
    }

    pub fn records_of(&self, kind: OpKind) -> impl Iterator<Item = &OpRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }
}

fn span(records: &[OpRecord]) -> (u64, u64) {
    let start = records.iter().map(|r| r.start_us).min();
    let end = records.iter().map(|r| r.end_us).max();
    match (start, end) {
        (Some(s), Some(e)) => (s, e),
        _ => (0, 0),
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AuditError {
    #[error("report is not sealed")]
    Unsealed,
    #[error("unsupported report schema version {0}")]
    Schema(u32),
    #[error("{field} is {stored} but the records give {derived}")]
    Mismatch { field: &'static str, stored: String, derived: String },
    #[error("record {index} ends before it starts")]
    Backwards { index: usize },
}

/// Recomputes the counters and totals of `report` from its records.
pub fn audit(report: &ScenarioReport) -> Result<(), AuditError> {
    if !report.sealed {
        return Err(AuditError::Unsealed);
    }
    if report.schema_version != REPORT_SCHEMA_VERSION {
        return Err(AuditError::Schema(report.schema_version));
    }
    if let Some(index) = report.records.iter().position(|r| r.end_us < r.start_us) {
        return Err(AuditError::Backwards { index });
    }
    let check = |field: &'static str, stored: String, derived: String| {
        if stored == derived {
            Ok(())
        } else {
            Err(AuditError::Mismatch { field, stored, derived })
        }
    };
    let (s, e) = span(&report.records);
    check("started_us", report.started_us.to_string(), s.to_string())?;
    check("finished_us", report.finished_us.to_string(), e.to_string())?;
    check("total_us", report.total_us.to_string(), (e - s).to_string())?;
    let egress: u64 = report.records.iter().filter_map(|r| r.bytes).sum();
    check("egress_bytes", report.egress_bytes.to_string(), egress.to_string())?;
    let derived = Counters::from_records(&report.records);
    check("counters", format!("{:?}", report.counters), format!("{derived:?}"))?;
    check("valid", report.valid.to_string(), report.invalid_reason.is_none().to_string())
}

/// Splits a row into an identity and, for counting rows, the count.
fn keyed(row: &Row) -> (Vec<String>, Option<u64>) {
    let count = match row {
        Row::ArticleCount { count, .. }
        | Row::CountryWord { count, .. }
        | Row::KeywordCount { count, .. }
        | Row::LanguageCount { count, .. } => Some(*count),
        _ => None,
    };
    let fields = row.fields().into_iter().filter(|(k, _)| count.is_none() || *k != "count").map(|(_, v)| v).collect();
    (fields, count)
}

/// Whether `after` still holds every row of `baseline`. Counting rows may
/// have grown: they match a row with the same identity and a count at least
/// as large.
pub fn containment(baseline: &[Row], after: &[Row]) -> bool {
    let mut exact: HashSet<Vec<String>> = HashSet::new();
    let mut counted: HashMap<Vec<String>, u64> = HashMap::new();
    for r in after {
        match keyed(r) {
            (k, Some(n)) => {
                let e = counted.entry(k).or_insert(0);
                *e = (*e).max(n);
            }
            (k, None) => {
                exact.insert(k);
            }
        }
    }
    baseline.iter().all(|r| match keyed(r) {
        (k, Some(n)) => counted.get(&k).is_some_and(|m| *m >= n),
        (k, None) => exact.contains(&k),
    })
}
