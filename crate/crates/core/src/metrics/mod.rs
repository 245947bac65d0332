//! Metrics computed from scenario reports, and the pricing model.
//!
//! "Throughput" is the total time a scenario took, in seconds, so a larger
//! value is worse; it is also emitted as `completion_time_seconds`. Price
//! performance is throughput divided by price as defined, without inverting.

mod properties;

use serde::{Deserialize, Serialize};

use crate::generator::GIB;
use crate::scenario::{ScenarioId, ScenarioReport};

pub use properties::{
    property_report, Property, PropertyReport, PropertyRow, ReportFormat, RowStatus, PROPERTY_REPORT_SCHEMA_VERSION,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("report is not sealed")]
    Unsealed,
    #[error("price is zero: price performance is undefined")]
    ZeroPrice,
    #[error("throughput before is zero: the increase ratio is undefined")]
    ZeroBaseline,
    #[error("cannot compare {before} with {after}: different scenarios")]
    ScenarioMismatch { before: ScenarioId, after: ScenarioId },
    #[error("{metric} is not applicable to {scenario}")]
    NotApplicable { metric: &'static str, scenario: ScenarioId },
    #[error("invalid pricing model: {0}")]
    Pricing(String),
}

/// Rates of a cloud provider. All amounts in USD; sizes in GB of 2^30 bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingModel {
    pub provider: String,
    pub per_node_hour_usd: f64,
    pub per_gb_month_storage_usd: f64,
    pub per_gb_egress_usd: f64,
    pub fixed_platform_usd: f64,
}

impl Default for PricingModel {
    fn default() -> Self {
        PricingModel {
            provider: "unpriced".into(),
            per_node_hour_usd: 0.0,
            per_gb_month_storage_usd: 0.0,
            per_gb_egress_usd: 0.0,
            fixed_platform_usd: 0.0,
        }
    }
}

impl PricingModel {
    pub fn validate(&self) -> Result<(), MetricError> {
        let rates = [
            ("per_node_hour_usd", self.per_node_hour_usd),
            ("per_gb_month_storage_usd", self.per_gb_month_storage_usd),
            ("per_gb_egress_usd", self.per_gb_egress_usd),
            ("fixed_platform_usd", self.fixed_platform_usd),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MetricError::Pricing(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

const HOURS_PER_MONTH: f64 = 30.0 * 24.0;

/// Total scenario time in seconds. Virtual-clock reports are already in
/// realtime-equivalent microseconds.
pub fn throughput(report: &ScenarioReport) -> Result<f64, MetricError> {
    if !report.sealed {
        return Err(MetricError::Unsealed);
    }
    Ok(report.total_us as f64 / 1e6)
}

/// Cost of a run: node time, storage prorated over the run, egress and a
/// fixed platform fee.
pub fn price(report: &ScenarioReport, model: &PricingModel) -> Result<f64, MetricError> {
    model.validate()?;
    let hours = throughput(report)? / 3600.0;
    let stored_gb = report.stored_bytes as f64 / GIB;
    let egress_gb = report.egress_bytes as f64 / GIB;
    Ok(report.nodes as f64 * hours * model.per_node_hour_usd
        + stored_gb * (hours / HOURS_PER_MONTH) * model.per_gb_month_storage_usd
        + egress_gb * model.per_gb_egress_usd
        + model.fixed_platform_usd)
}

pub fn price_performance(report: &ScenarioReport, model: &PricingModel) -> Result<f64, MetricError> {
    let p = price(report, model)?;
    if p == 0.0 {
        return Err(MetricError::ZeroPrice);
    }
    Ok(throughput(report)? / p)
}

/// Throughput after divided by throughput before, for two runs of one scenario.
pub fn increase_ratio(before: &ScenarioReport, after: &ScenarioReport) -> Result<f64, MetricError> {
    if before.scenario != after.scenario {
        return Err(MetricError::ScenarioMismatch { before: before.scenario, after: after.scenario });
    }
    let b = throughput(before)?;
    let a = throughput(after)?;
    if b == 0.0 {
        return Err(MetricError::ZeroBaseline);
    }
    Ok(a / b)
}

/// A counter quotient. With nothing counted the value is 1 and `vacuous` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub vacuous: bool,
}

impl Ratio {
    pub fn of(num: u64, den: u64) -> Ratio {
        if den == 0 {
            Ratio { value: 1.0, vacuous: true }
        } else {
            Ratio { value: num as f64 / den as f64, vacuous: false }
        }
    }
}

fn only(report: &ScenarioReport, metric: &'static str, scenario: ScenarioId) -> Result<(), MetricError> {
    if !report.sealed {
        return Err(MetricError::Unsealed);
    }
    if report.scenario != scenario {
        return Err(MetricError::NotApplicable { metric, scenario: report.scenario });
    }
    Ok(())
}

/// Correct reads over total reads.
pub fn durability_ratio(report: &ScenarioReport) -> Result<Ratio, MetricError> {
    only(report, "durability ratio", ScenarioId::S1)?;
    Ok(Ratio::of(report.counters.correct_reads, report.counters.total_reads))
}

/// Consistent reads over total reads.
pub fn consistency_ratio(report: &ScenarioReport) -> Result<Ratio, MetricError> {
    only(report, "consistency ratio", ScenarioId::S2)?;
    Ok(Ratio::of(report.counters.consistent_reads, report.counters.total_reads))
}

/// Successful operations over total operations.
pub fn concurrency_ratio(report: &ScenarioReport) -> Result<Ratio, MetricError> {
    only(report, "concurrency ratio", ScenarioId::S4)?;
    Ok(Ratio::of(report.counters.successful_ops, report.counters.total_ops))
}

/// Every metric that applies to one report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub scenario: ScenarioId,
    pub throughput: f64,
    /// Same value as `throughput`.
    pub completion_time_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price_usd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price_performance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub durability_ratio: Option<Ratio>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency_ratio: Option<Ratio>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concurrency_ratio: Option<Ratio>,
}

impl MetricSet {
    /// Price fields are left out without a model, and price performance
    /// when the price is zero.
    pub fn of(report: &ScenarioReport, model: Option<&PricingModel>) -> Result<MetricSet, MetricError> {
        let t = throughput(report)?;
        let price_usd = model.map(|m| price(report, m)).transpose()?;
        Ok(MetricSet {
            scenario: report.scenario,
            throughput: t,
            completion_time_seconds: t,
            price_usd,
            price_performance: price_usd.filter(|p| *p > 0.0).map(|p| t / p),
            durability_ratio: durability_ratio(report).ok(),
            consistency_ratio: consistency_ratio(report).ok(),
            concurrency_ratio: concurrency_ratio(report).ok(),
        })
    }
}
