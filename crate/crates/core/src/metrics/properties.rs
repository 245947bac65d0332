//! The per-property summary over a set of scenario reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    concurrency_ratio, consistency_ratio, durability_ratio, increase_ratio, throughput, MetricError, MetricSet,
    PricingModel, Ratio,
};
use crate::query::QueryKind;
use crate::scenario::{OpKind, ScenarioId, ScenarioReport};

pub const PROPERTY_REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    ScaleUp,
    ElasticSpeedup,
    HorizontalScalability,
    Latency,
    Durability,
    Consistency,
    Availability,
    Concurrency,
    PathTraversals,
    ComplexResults,
    Polymorphism,
    Analysis,
    FullText,
}

impl Property {
    pub const ALL: [Property; 13] = [
        Property::ScaleUp,
        Property::ElasticSpeedup,
        Property::HorizontalScalability,
        Property::Latency,
        Property::Durability,
        Property::Consistency,
        Property::Availability,
        Property::Concurrency,
        Property::PathTraversals,
        Property::ComplexResults,
        Property::Polymorphism,
        Property::Analysis,
        Property::FullText,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Property::ScaleUp => "Scale up",
            Property::ElasticSpeedup => "Elastic speedup",
            Property::HorizontalScalability => "Horizontal scalability",
            Property::Latency => "Latency",
            Property::Durability => "Durability",
            Property::Consistency => "Consistency",
            Property::Availability => "Availability",
            Property::Concurrency => "Concurrency",
            Property::PathTraversals => "Path traversals",
            Property::ComplexResults => "Complex results",
            Property::Polymorphism => "Polymorphism",
            Property::Analysis => "Analysis",
            Property::FullText => "Full text",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Measured,
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRow {
    pub property: Property,
    pub status: RowStatus,
    /// Named values, e.g. `S4.throughput_s` or `Q3.seconds`.
    pub metrics: BTreeMap<String, f64>,
    /// Reports and records the values come from.
    pub evidence: Vec<String>,
    /// Required evidence that was not found.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pricing_provider: Option<String>,
    pub rows: Vec<PropertyRow>,
    /// One entry per input report, in input order.
    pub metric_sets: Vec<MetricSet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(format!("unknown report format {s:?}; expected json, csv or markdown")),
        }
    }
}

/// Collects a row's values and notes what is missing.
struct Row<'a> {
    reports: &'a [ScenarioReport],
    out: PropertyRow,
}

impl<'a> Row<'a> {
    fn new(property: Property, reports: &'a [ScenarioReport]) -> Self {
        Row {
            reports,
            out: PropertyRow {
                property,
                status: RowStatus::Measured,
                metrics: BTreeMap::new(),
                evidence: Vec::new(),
                missing: Vec::new(),
            },
        }
    }

    fn first(&mut self, s: ScenarioId) -> Option<(usize, &'a ScenarioReport)> {
        let found = self.reports.iter().enumerate().find(|(_, r)| r.scenario == s);
        let missing = format!("{s} report");
        if found.is_none() && !self.out.missing.contains(&missing) {
            self.out.missing.push(missing);
        }
        found
    }

    fn throughput(&mut self, s: ScenarioId) {
        if let Some((i, r)) = self.first(s) {
            match throughput(r) {
                Ok(t) => {
                    self.out.metrics.insert(format!("{s}.throughput_s"), t);
                    self.out.evidence.push(format!("report {i} ({s})"));
                }
                Err(e) => self.out.missing.push(format!("{s} report {i}: {e}")),
            }
        }
    }

    fn ratio(&mut self, s: ScenarioId, name: &str, f: fn(&ScenarioReport) -> Result<Ratio, MetricError>) {
        if let Some((i, r)) = self.first(s) {
            match f(r) {
                Ok(q) => {
                    self.out.metrics.insert(format!("{s}.{name}"), q.value);
                    let note = if q.vacuous { ", vacuous: nothing counted" } else { "" };
                    self.out.evidence.push(format!("report {i} ({s}{note})"));
                }
                Err(e) => self.out.missing.push(format!("{s} report {i}: {e}")),
            }
        }
    }

    /// Increase ratio over the first ordered pair of reports of `s` whose
    /// configurations relate as `related(before, after)`.
    fn increase(&mut self, s: ScenarioId, what: &str, related: fn(&ScenarioReport, &ScenarioReport) -> bool) {
        let runs: Vec<(usize, &ScenarioReport)> = self.reports.iter().enumerate().filter(|(_, r)| r.scenario == s).collect();
        let pair = runs.iter().flat_map(|b| runs.iter().map(move |a| (*b, *a))).find(|(b, a)| related(b.1, a.1));
        match pair.map(|((i, b), (j, a))| (i, j, increase_ratio(b, a))) {
            Some((i, j, Ok(v))) => {
                self.out.metrics.insert(format!("{s}.increase_ratio"), v);
                self.out.evidence.push(format!("reports {i} -> {j} ({s}, {what})"));
            }
            Some((i, j, Err(e))) => self.out.missing.push(format!("{s} reports {i} -> {j}: {e}")),
            None => self.out.missing.push(format!("{s} report pair with {what}")),
        }
    }

    fn queries(&mut self, kinds: &[QueryKind]) {
        let mut total = 0.0;
        for k in kinds {
            let durations: Vec<u64> = self
                .reports
                .iter()
                .flat_map(|r| r.records_of(OpKind::Query(*k)))
                .map(|r| r.duration_us())
                .collect();
            if durations.is_empty() {
                self.out.missing.push(format!("{k} timings"));
                continue;
            }
            let secs = durations.iter().sum::<u64>() as f64 / 1e6;
            total += secs;
            self.out.metrics.insert(format!("{k}.seconds"), secs);
            self.out.metrics.insert(format!("{k}.mean_seconds"), secs / durations.len() as f64);
            self.out.evidence.push(format!("{} {k} executions", durations.len()));
        }
        self.out.metrics.insert("queries.seconds".into(), total);
    }

    fn finish(mut self) -> PropertyRow {
        if !self.out.missing.is_empty() {
            self.out.status = RowStatus::InsufficientData;
        }
        self.out
    }
}

fn same_sf(a: &ScenarioReport, b: &ScenarioReport) -> bool {
    (a.config.sf - b.config.sf).abs() <= 1e-9 * a.config.sf.max(b.config.sf)
}

fn doubled(b: &ScenarioReport, a: &ScenarioReport) -> bool {
    (a.config.sf - 2.0 * b.config.sf).abs() <= 1e-9 * a.config.sf && a.nodes == 2 * b.nodes
}

fn more_nodes(b: &ScenarioReport, a: &ScenarioReport) -> bool {
    same_sf(a, b) && a.nodes > b.nodes
}

fn more_data(b: &ScenarioReport, a: &ScenarioReport) -> bool {
    a.nodes == b.nodes && a.config.sf > b.config.sf && !same_sf(a, b)
}

/// One row per property. A row lacking any required report, report pair or
/// query timing is marked as having insufficient data but keeps the values
/// it could compute.
pub fn property_report(
    reports: &[ScenarioReport],
    pricing: Option<&PricingModel>,
) -> Result<PropertyReport, MetricError> {
    use ScenarioId::*;
    if let Some(m) = pricing {
        m.validate()?;
    }
    let metric_sets = reports.iter().map(|r| MetricSet::of(r, pricing)).collect::<Result<Vec<_>, _>>()?;
    let rows = Property::ALL
        .iter()
        .map(|p| {
            let mut row = Row::new(*p, reports);
            match p {
                Property::ScaleUp => {
                    for s in [S4, S5] {
                        row.increase(s, "2x SF and 2x nodes", doubled);
                    }
                }
                Property::ElasticSpeedup => {
                    for s in [S2, S4, S5] {
                        row.increase(s, "same SF and more nodes", more_nodes);
                    }
                }
                Property::HorizontalScalability => {
                    for s in [S4, S5] {
                        row.increase(s, "same nodes and more SF", more_data);
                    }
                }
                Property::Latency => [S4, S5, S6].into_iter().for_each(|s| row.throughput(s)),
                Property::Durability => row.ratio(S1, "durability_ratio", durability_ratio),
                Property::Consistency => row.ratio(S2, "consistency_ratio", consistency_ratio),
                Property::Availability => {
                    row.throughput(S3);
                    row.throughput(S6);
                    if let Some(n) = reports.iter().find_map(|r| r.findings.survivable_removals) {
                        row.out.metrics.insert("S3.survivable_removals".into(), n as f64);
                    }
                }
                Property::Concurrency => {
                    row.throughput(S4);
                    row.ratio(S4, "concurrency_ratio", concurrency_ratio);
                }
                Property::PathTraversals => {
                    row.queries(&[QueryKind::Q3, QueryKind::Q4, QueryKind::Q7, QueryKind::Q10, QueryKind::Q12])
                }
                Property::ComplexResults => {
                    row.queries(&[QueryKind::Q2, QueryKind::Q3, QueryKind::Q6, QueryKind::Q11]);
                    row.throughput(S6);
                }
                Property::Polymorphism => {
                    row.queries(&[QueryKind::Q3, QueryKind::Q9, QueryKind::Q12, QueryKind::Q14])
                }
                Property::Analysis => row.throughput(S5),
                Property::FullText => row.queries(&[QueryKind::Q12]),
            }
            row.finish()
        })
        .collect();
    Ok(PropertyReport {
        schema_version: PROPERTY_REPORT_SCHEMA_VERSION,
        pricing_provider: pricing.map(|m| m.provider.clone()),
        rows,
        metric_sets,
    })
}

fn joined_metrics(m: &BTreeMap<String, f64>) -> String {
    let mut s = String::new();
    for (k, v) in m {
        if !s.is_empty() {
            s.push_str("; ");
        }
        let _ = write!(s, "{k}={v}");
    }
    s
}

impl PropertyReport {
    pub fn row(&self, p: Property) -> &PropertyRow {
        self.rows.iter().find(|r| r.property == p).expect("every property has a row")
    }

    pub fn write(&self, format: ReportFormat, mut out: impl Write) -> std::io::Result<()> {
        let status = |s: RowStatus| match s {
            RowStatus::Measured => "measured",
            RowStatus::InsufficientData => "insufficient data",
        };
        match format {
            ReportFormat::Json => {
                serde_json::to_writer_pretty(&mut out, self)?;
                writeln!(out)
            }
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(["property", "status", "metrics", "evidence", "missing"])?;
                for r in &self.rows {
                    w.write_record([
                        r.property.label(),
                        status(r.status),
                        &joined_metrics(&r.metrics),
                        &r.evidence.join("; "),
                        &r.missing.join("; "),
                    ])?;
                }
                w.flush()
            }
            ReportFormat::Markdown => {
                writeln!(out, "| Property | Status | Metrics | Evidence |")?;
                writeln!(out, "|---|---|---|---|")?;
                for r in &self.rows {
                    let mut evidence = r.evidence.join("; ");
                    if !r.missing.is_empty() {
                        if !evidence.is_empty() {
                            evidence.push_str("; ");
                        }
                        let _ = write!(evidence, "missing: {}", r.missing.join(", "));
                    }
                    writeln!(
                        out,
                        "| {} | {} | {} | {} |",
                        r.property.label(),
                        status(r.status),
                        joined_metrics(&r.metrics).replace('|', "\\|"),
                        evidence.replace('|', "\\|")
                    )?;
                }
                Ok(())
            }
        }
    }
}
