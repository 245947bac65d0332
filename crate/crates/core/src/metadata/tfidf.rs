//! Inverted index with raw term frequencies. Weights are derived on demand
//! as `tf * ln(N / df)`, so adding documents refreshes every weight.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::DocumentId;

use super::text::tokenize;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvertedIndex {
    postings: BTreeMap<String, BTreeMap<DocumentId, u32>>,
    documents: BTreeMap<DocumentId, BTreeMap<String, u32>>,
}

impl InvertedIndex {
    pub fn build<'a>(docs: impl IntoIterator<Item = (DocumentId, &'a str)>) -> Self {
        let mut idx = InvertedIndex::default();
        for (id, text) in docs {
            idx.insert(id, text);
        }
        idx
    }

    /// Adds or replaces a document.
    pub fn insert(&mut self, id: DocumentId, text: &str) {
        self.remove(id);
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokenize(text) {
            *tf.entry(t).or_default() += 1;
        }
        for (t, n) in &tf {
            self.postings.entry(t.clone()).or_default().insert(id, *n);
        }
        self.documents.insert(id, tf);
    }

    pub fn remove(&mut self, id: DocumentId) -> bool {
        let Some(tf) = self.documents.remove(&id) else { return false };
        for t in tf.keys() {
            if let Some(p) = self.postings.get_mut(t) {
                p.remove(&id);
                if p.is_empty() {
                    self.postings.remove(t);
                }
            }
        }
        true
    }

    /// Number of indexed documents.
    pub fn n_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn n_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn contains(&self, id: DocumentId) -> bool {
        self.documents.contains_key(&id)
    }

    pub fn documents(&self) -> impl Iterator<Item = DocumentId> + '_ {
        self.documents.keys().copied()
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, BTreeMap::len)
    }

    pub fn tf(&self, term: &str, doc: DocumentId) -> u32 {
        self.postings.get(term).and_then(|p| p.get(&doc)).copied().unwrap_or(0)
    }

    pub fn postings(&self, term: &str) -> Option<&BTreeMap<DocumentId, u32>> {
        self.postings.get(term)
    }

    /// Term frequencies of one document.
    pub fn term_frequencies(&self, doc: DocumentId) -> Option<&BTreeMap<String, u32>> {
        self.documents.get(&doc)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df(term);
        if df == 0 {
            return 0.0;
        }
        (self.n_docs() as f64 / df as f64).ln()
    }

    pub fn weight(&self, term: &str, doc: DocumentId) -> f64 {
        self.tf(term, doc) as f64 * self.idf(term)
    }

    /// Weight of every term of `doc`; empty for unknown or token-free documents.
    pub fn vector(&self, doc: DocumentId) -> BTreeMap<String, f64> {
        let Some(tf) = self.documents.get(&doc) else { return BTreeMap::new() };
        tf.iter().map(|(t, n)| (t.clone(), *n as f64 * self.idf(t))).collect()
    }

    /// Documents containing at least one query term, scored by the sum of
    /// their weights over the distinct query terms, best first, ties by id.
    pub fn search(&self, query: &str) -> Vec<(DocumentId, f64)> {
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let mut scores: BTreeMap<DocumentId, f64> = BTreeMap::new();
        for t in &terms {
            let Some(p) = self.postings.get(t) else { continue };
            let idf = self.idf(t);
            for (doc, tf) in p {
                *scores.entry(*doc).or_default() += *tf as f64 * idf;
            }
        }
        let mut out: Vec<(DocumentId, f64)> = scores.into_iter().collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }
}
