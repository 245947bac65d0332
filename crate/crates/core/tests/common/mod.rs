//! Helpers shared by the integration tests, including brute-force
//! reimplementations used as oracles.
#![allow(dead_code)]

pub mod metadata_oracle;
pub mod oracle;

use std::sync::Arc;

use primeball::backend::{Backend, ClusterConfig, SimCluster, StoreSnapshot};
use primeball::clock::ManualClock;
use primeball::generator::{Corpus, GeneratorConfig};
use primeball::metadata::lda::LdaConfig;
use primeball::metadata::{MetadataState, PipelineConfig};
use primeball::model::*;

/// Pipeline settings with a short sampler run; topic output is not what
/// these tests examine.
pub fn quick_pipeline() -> PipelineConfig {
    PipelineConfig { lda: LdaConfig { iterations: 10, ..LdaConfig::default() }, ..PipelineConfig::default() }
}

pub fn corpus(seed: u64, articles: u64) -> Corpus {
    Corpus::generate(&GeneratorConfig { seed, article_limit: Some(articles), ..GeneratorConfig::default() }).unwrap()
}

/// Loads the whole corpus into a fresh cluster and indexes it.
pub fn indexed_store(c: &Corpus) -> SimCluster {
    let sim = SimCluster::new(ClusterConfig::default(), Arc::new(ManualClock::new(0))).unwrap();
    sim.bulk_load(&c.take_slice(0.0, 1.0).unwrap()).unwrap();
    let snap = sim.snapshot().unwrap();
    let articles: Vec<Article> = snap.articles.values().map(|a| (**a).clone()).collect();
    let media: Vec<MediaRef> = snap.media.values().map(|m| (**m).clone()).collect();
    sim.install_metadata(MetadataState::build(&articles, &media, quick_pipeline()).unwrap());
    sim
}

pub fn snapshot(c: &Corpus) -> StoreSnapshot {
    indexed_store(c).snapshot().unwrap()
}

pub fn documents_of(c: &Corpus) -> (Vec<Article>, Vec<MediaRef>) {
    (c.articles().cloned().collect(), c.units.iter().flat_map(|u| u.media.iter().map(|m| m.descriptor.clone())).collect())
}

/// Compares every query kind with the full-scan oracle on one corpus per
/// seed, drawing parameters three times per kind with limits unset, 5 and
/// 0. Returns (answers compared, non-empty answers) or the first mismatch.
pub fn compare_with_oracle(seeds: std::ops::Range<u64>, articles: u64) -> Result<(usize, usize), String> {
    use primeball::query::{execute_on, sample_params, QueryKind, QuerySpec};
    use rand::SeedableRng;

    let today = chrono::NaiveDate::from_ymd_opt(2013, 12, 31).unwrap();
    let mut compared = 0;
    let mut non_empty = 0;
    for seed in seeds {
        let corpus = corpus(1000 + seed, articles);
        let snap = snapshot(&corpus);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for kind in QueryKind::ALL {
            for limit in [None, Some(5), Some(0)] {
                let spec = QuerySpec { kind, params: sample_params(kind, &snap, &mut rng), limit };
                let got = execute_on(&spec, &snap, today).map_err(|e| format!("seed {seed} {kind}: {e}"))?;
                let (want, total) = oracle::evaluate(&spec, &snap, today);
                if got.rows != want || got.total_matched != total {
                    return Err(format!("seed {seed} {kind} {:?}: engine and oracle differ", spec.params));
                }
                compared += 1;
                non_empty += usize::from(!want.is_empty());
            }
        }
    }
    Ok((compared, non_empty))
}
