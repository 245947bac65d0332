//! Latent Dirichlet Allocation by collapsed Gibbs sampling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::DocumentId;

use super::MetadataError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub topics: usize,
    /// Document-topic prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: u32,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig { topics: 8, alpha: None, beta: 0.01, iterations: 200, seed: 42 }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub config: LdaConfig,
    pub vocabulary: Vec<String>,
    pub documents: Vec<DocumentId>,
    /// Per document (same order as `documents`), probability of each topic.
    pub theta: Vec<Vec<f64>>,
    /// Per topic, probability of each vocabulary word.
    pub phi: Vec<Vec<f64>>,
}

impl TopicModel {
    pub fn distribution(&self, doc: DocumentId) -> Option<&[f64]> {
        self.documents.iter().position(|d| *d == doc).map(|i| self.theta[i].as_slice())
    }

    /// Most probable topic of each document, ties to the lower index.
    pub fn dominant_topics(&self) -> BTreeMap<DocumentId, usize> {
        self.documents
            .iter()
            .zip(&self.theta)
            .map(|(d, t)| {
                let best = t.iter().enumerate().fold(0, |b, (k, p)| if *p > t[b] { k } else { b });
                (*d, best)
            })
            .collect()
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Fits a topic model. Documents are processed in the given order, so the
/// result depends only on the input sequence and the seed.
pub fn extract_topics(docs: &[(DocumentId, Vec<String>)], cfg: LdaConfig) -> Result<TopicModel, MetadataError> {
    let k = cfg.topics;
    if k < 2 {
        return Err(MetadataError::Argument(format!("topic count {k} must be at least 2")));
    }
    if docs.is_empty() {
        return Err(MetadataError::Argument("no documents to model".into()));
    }
    let alpha = cfg.alpha();
    let beta = cfg.beta;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(MetadataError::Argument("Dirichlet priors must be positive".into()));
    }
    let mut vocab: Vec<String> = docs.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
    vocab.sort();
    vocab.dedup();
    if k > vocab.len() {
        return Err(MetadataError::Argument(format!(
            "topic count {k} exceeds vocabulary size {}",
            vocab.len()
        )));
    }
    let word_id: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let v = vocab.len();
    let words: Vec<Vec<usize>> = docs.iter().map(|(_, t)| t.iter().map(|w| word_id[w.as_str()]).collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ndk = vec![vec![0u32; k]; docs.len()];
    let mut nkw = vec![vec![0u32; v]; k];
    let mut nk = vec![0u32; k];
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, ws) in words.iter().enumerate() {
        let zs: Vec<usize> = ws
            .iter()
            .map(|&w| {
                let t = rng.random_range(0..k);
                ndk[d][t] += 1;
                nkw[t][w] += 1;
                nk[t] += 1;
                t
            })
            .collect();
        z.push(zs);
    }

    let vbeta = v as f64 * beta;
    let mut p = vec![0.0; k];
    for _ in 0..cfg.iterations {
        for (d, ws) in words.iter().enumerate() {
            for (i, &w) in ws.iter().enumerate() {
                let old = z[d][i];
                ndk[d][old] -= 1;
                nkw[old][w] -= 1;
                nk[old] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (ndk[d][t] as f64 + alpha) * (nkw[t][w] as f64 + beta) / (nk[t] as f64 + vbeta);
                    p[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = p.iter().position(|&c| u < c).unwrap_or(k - 1);
                z[d][i] = new;
                ndk[d][new] += 1;
                nkw[new][w] += 1;
                nk[new] += 1;
            }
        }
    }

    let theta = ndk
        .iter()
        .map(|row| {
            let mut r: Vec<f64> = row.iter().map(|&c| c as f64 + alpha).collect();
            normalize(&mut r);
            r
        })
        .collect();
    let phi = nkw
        .iter()
        .map(|row| {
            let mut r: Vec<f64> = row.iter().map(|&c| c as f64 + beta).collect();
            normalize(&mut r);
            r
        })
        .collect();
    Ok(TopicModel { config: cfg, vocabulary: vocab, documents: docs.iter().map(|(d, _)| *d).collect(), theta, phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArticleId;

    fn doc(n: u64, text: &str) -> (DocumentId, Vec<String>) {
        (DocumentId::Article(ArticleId(n)), text.split_whitespace().map(str::to_string).collect())
    }

    #[test]
    fn single_word_document_is_normalized() {
        let m = extract_topics(&[doc(1, "alpha"), doc(2, "beta")], LdaConfig { topics: 2, ..LdaConfig::default() })
            .unwrap();
        for row in m.theta.iter().chain(&m.phi) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_model() {
        let docs = [doc(1, "aa bb aa cc"), doc(2, "dd ee dd"), doc(3, "aa dd")];
        let cfg = LdaConfig { topics: 2, iterations: 30, ..LdaConfig::default() };
        assert_eq!(extract_topics(&docs, cfg).unwrap(), extract_topics(&docs, cfg).unwrap());
    }

    #[test]
    fn argument_errors() {
        let docs = [doc(1, "aa bb")];
        let cfg = |k| LdaConfig { topics: k, ..LdaConfig::default() };
        assert!(extract_topics(&docs, cfg(1)).is_err());
        assert!(extract_topics(&docs, cfg(3)).is_err());
        assert!(extract_topics(&[], cfg(2)).is_err());
    }

    #[test]
    fn separates_disjoint_vocabularies() {
        let mut docs = Vec::new();
        for i in 0..20u64 {
            let text = if i % 2 == 0 { "sun moon star sky sun moon star" } else { "fish sea wave salt fish sea wave" };
            docs.push(doc(i, text));
        }
        let m = extract_topics(&docs, LdaConfig { topics: 2, alpha: Some(0.1), iterations: 100, ..LdaConfig::default() })
            .unwrap();
        let dom = m.dominant_topics();
        let even = dom[&DocumentId::Article(ArticleId(0))];
        for (d, t) in dom {
            let DocumentId::Article(ArticleId(n)) = d else { unreachable!() };
            assert_eq!(t == even, n % 2 == 0);
        }
    }
}
