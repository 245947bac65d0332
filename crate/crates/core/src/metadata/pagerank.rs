//! Weighted PageRank over the citation graph.

use std::collections::BTreeMap;

use crate::model::{Article, ArticleId};

use super::MetadataError;

/// Citing-to-cited edges weighted by citation multiplicity. Citations to
/// articles outside the graph are dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CitationGraph {
    nodes: Vec<ArticleId>,
    out: Vec<Vec<(usize, f64)>>,
}

impl CitationGraph {
    pub fn from_articles<'a>(articles: impl IntoIterator<Item = &'a Article>) -> Self {
        let articles: BTreeMap<ArticleId, &Article> = articles.into_iter().map(|a| (a.id, a)).collect();
        let edges = articles.values().flat_map(|a| a.citations.iter().map(move |c| (a.id, *c, 1.0)));
        Self::from_edges(articles.keys().copied(), edges)
    }

    /// Builds a graph from explicit nodes and weighted edges. Parallel edges
    /// add up; edges touching unknown nodes are ignored.
    pub fn from_edges(
        nodes: impl IntoIterator<Item = ArticleId>,
        edges: impl IntoIterator<Item = (ArticleId, ArticleId, f64)>,
    ) -> Self {
        let mut nodes: Vec<ArticleId> = nodes.into_iter().collect();
        nodes.sort();
        nodes.dedup();
        let pos: BTreeMap<ArticleId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut out: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nodes.len()];
        for (from, to, w) in edges {
            if let (Some(&i), Some(&j)) = (pos.get(&from), pos.get(&to)) {
                if w > 0.0 {
                    *out[i].entry(j).or_default() += w;
                }
            }
        }
        CitationGraph { nodes, out: out.into_iter().map(|m| m.into_iter().collect()).collect() }
    }

    pub fn nodes(&self) -> &[ArticleId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Outgoing edges of node index `i` as (target index, weight).
    pub fn out_edges(&self, i: usize) -> &[(usize, f64)] {
        &self.out[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankConfig {
    pub damping: f64,
    pub epsilon: f64,
    pub max_iterations: u32,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig { damping: 0.85, epsilon: 1e-8, max_iterations: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRank {
    pub scores: BTreeMap<ArticleId, f64>,
    pub iterations: u32,
    pub converged: bool,
}

/// Power iteration with uniform teleport; the rank of nodes without
/// out-edges is spread uniformly. Stops once the L1 change drops below
/// `epsilon` or after `max_iterations`.
pub fn compute_pagerank(graph: &CitationGraph, cfg: PageRankConfig) -> Result<PageRank, MetadataError> {
    let d = cfg.damping;
    if !(d > 0.0 && d < 1.0) {
        return Err(MetadataError::Argument(format!("damping factor {d} outside (0, 1)")));
    }
    let n = graph.len();
    if n == 0 {
        return Err(MetadataError::Argument("citation graph has no nodes".into()));
    }
    let totals: Vec<f64> = graph.out.iter().map(|e| e.iter().map(|(_, w)| w).sum()).collect();
    let nf = n as f64;
    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&i| totals[i] == 0.0).map(|i| x[i]).sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        next.iter_mut().for_each(|v| *v = base);
        for i in 0..n {
            if totals[i] == 0.0 {
                continue;
            }
            let share = d * x[i] / totals[i];
            for &(j, w) in &graph.out[i] {
                next[j] += share * w;
            }
        }
        let delta: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta < cfg.epsilon {
            converged = true;
            break;
        }
    }
    let scores = graph.nodes.iter().copied().zip(x).collect();
    Ok(PageRank { scores, iterations, converged })
}
