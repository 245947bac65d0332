use std::sync::Arc;

use primeball::backend::contract::check_all;
use primeball::backend::{Backend, ClusterConfig, SimCluster};
use primeball::clock::{ManualClock, SystemClock};

fn run(make: &dyn Fn() -> Box<dyn Backend>) {
    let failures: Vec<String> = check_all(make)
        .into_iter()
        .filter_map(|(name, r)| r.err().map(|e| format!("{name}: {e}")))
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn simulated_cluster_passes_contract() {
    run(&|| Box::new(SimCluster::new(ClusterConfig::default(), Arc::new(SystemClock::new())).unwrap()));
}

#[test]
fn single_node_cluster_passes_contract() {
    let cfg = ClusterConfig { nodes: 1, replication: 1, ..ClusterConfig::default() };
    run(&|| Box::new(SimCluster::new(cfg, Arc::new(ManualClock::new(0))).unwrap()));
}
