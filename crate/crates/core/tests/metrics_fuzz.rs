use primeball::metrics::{
    concurrency_ratio, consistency_ratio, durability_ratio, price, price_performance, throughput, PricingModel,
};
use primeball::scenario::{
    ClockMode, Counters, Findings, ScenarioConfig, ScenarioId, ScenarioReport, REPORT_SCHEMA_VERSION,
};
use proptest::prelude::*;

fn report(scenario: ScenarioId, nodes: u32, total_us: u64, stored: u64, egress: u64, c: Counters) -> ScenarioReport {
    ScenarioReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario,
        clock: ClockMode::Virtual,
        sealed: true,
        valid: true,
        invalid_reason: None,
        started_us: 0,
        finished_us: total_us,
        total_us,
        nodes,
        stored_bytes: stored,
        egress_bytes: egress,
        counters: c,
        findings: Findings::default(),
        config: ScenarioConfig::default(),
        records: Vec::new(),
    }
}

fn model(r: [f64; 4]) -> PricingModel {
    PricingModel {
        provider: "fuzz".into(),
        per_node_hour_usd: r[0],
        per_gb_month_storage_usd: r[1],
        per_gb_egress_usd: r[2],
        fixed_platform_usd: r[3],
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12)
}

/// Numerator and denominator with the numerator never above it.
fn fraction() -> impl Strategy<Value = (u64, u64)> {
    (0u64..1_000_000).prop_flat_map(|d| (0..=d, Just(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn price_is_linear_in_each_rate(
        nodes in 1u32..64,
        total_us in 0u64..10_000_000_000,
        stored in 0u64..1 << 42,
        egress in 0u64..1 << 40,
        rates in prop::array::uniform4(0.0f64..100.0),
        k in 0.0f64..50.0,
    ) {
        let r = report(ScenarioId::S4, nodes, total_us, stored, egress, Counters::default());
        let whole = price(&r, &model(rates)).unwrap();
        // Additive over rates.
        let parts: f64 = (0..4)
            .map(|i| {
                let mut only = [0.0; 4];
                only[i] = rates[i];
                price(&r, &model(only)).unwrap()
            })
            .sum();
        prop_assert!(close(whole, parts), "{whole} vs {parts}");
        // Homogeneous in each rate separately.
        for i in 0..4 {
            let mut only = [0.0; 4];
            only[i] = rates[i];
            let mut scaled = only;
            scaled[i] *= k;
            prop_assert!(close(price(&r, &model(scaled)).unwrap(), k * price(&r, &model(only)).unwrap()));
        }
        // The node term by hand.
        let hours = total_us as f64 / 3.6e9;
        let node_only = price(&r, &model([rates[0], 0.0, 0.0, 0.0])).unwrap();
        prop_assert!(close(node_only, nodes as f64 * hours * rates[0]));
        if whole > 0.0 {
            let pp = price_performance(&r, &model(rates)).unwrap();
            prop_assert!(close(pp, throughput(&r).unwrap() / whole));
        }
    }

    #[test]
    fn ratios_recompute_from_counters_and_stay_in_bounds(
        (ok, total) in fraction(),
        (consistent, reads) in fraction(),
        (correct, checked) in fraction(),
    ) {
        let c = Counters {
            correct_reads: correct,
            consistent_reads: consistent,
            total_reads: reads.max(checked),
            successful_ops: ok,
            total_ops: total,
            ..Counters::default()
        };
        let c1 = Counters { total_reads: checked, ..c };
        let c2 = Counters { total_reads: reads, ..c };
        let d = durability_ratio(&report(ScenarioId::S1, 5, 1, 0, 0, c1)).unwrap();
        let s = consistency_ratio(&report(ScenarioId::S2, 5, 1, 0, 0, c2)).unwrap();
        let q = concurrency_ratio(&report(ScenarioId::S4, 5, 1, 0, 0, c)).unwrap();
        for (r, num, den) in [(d, correct, checked), (s, consistent, reads), (q, ok, total)] {
            prop_assert!((0.0..=1.0).contains(&r.value));
            prop_assert_eq!(r.vacuous, den == 0);
            let expect = if den == 0 { 1.0 } else { num as f64 / den as f64 };
            prop_assert_eq!(r.value, expect);
        }
    }
}
