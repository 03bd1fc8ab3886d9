use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub idea_ref: String,
    pub venue: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocVector {
    pub idea_ref: String,
    pub venue: String,
    /// (term id, weight) sorted by term id.
    pub weights: Vec<(usize, f64)>,
}

impl DocVector {
    pub fn dot(&self, other: &DocVector) -> f64 {
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        while i < self.weights.len() && j < other.weights.len() {
            let (ta, wa) = self.weights[i];
            let (tb, wb) = other.weights[j];
            match ta.cmp(&tb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    pub fn norm_squared(&self) -> f64 {
        self.weights.iter().map(|(_, w)| w * w).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    /// Sorted; a term's id is its position.
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub vectors: Vec<DocVector>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TfidfError {
    #[error("need at least two documents, got {0}")]
    TooFewDocuments(usize),
    #[error("every document is empty after tokenization")]
    AllEmpty,
}

/// Raw term counts times smoothed IDF `ln((1+N)/(1+df)) + 1`, rows scaled to
/// unit length. Documents without tokens get an empty vector.
pub fn tfidf(docs: &[Document]) -> Result<TfidfModel, TfidfError> {
    if docs.len() < 2 {
        return Err(TfidfError::TooFewDocuments(docs.len()));
    }
    let counts: Vec<BTreeMap<String, usize>> = docs
        .iter()
        .map(|d| {
            let mut m = BTreeMap::new();
            for t in tokenize(&d.text).iter() {
                *m.entry(t.clone()).or_default() += 1;
            }
            m
        })
        .collect();
    let vocabulary: Vec<String> =
        counts.iter().flat_map(|c| c.keys().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    if vocabulary.is_empty() {
        return Err(TfidfError::AllEmpty);
    }
    let id_of: BTreeMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut df = vec![0usize; vocabulary.len()];
    for c in &counts {
        for t in c.keys() {
            df[id_of[t.as_str()]] += 1;
        }
    }
    let n = docs.len() as f64;
    let idf: Vec<f64> = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
    let vectors = docs
        .iter()
        .zip(&counts)
        .map(|(doc, c)| {
            let mut weights: Vec<(usize, f64)> = c
                .iter()
                .map(|(t, &k)| {
                    let id = id_of[t.as_str()];
                    (id, k as f64 * idf[id])
                })
                .collect();
            let norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, w) in &mut weights {
                    *w /= norm;
                }
            }
            DocVector { idea_ref: doc.idea_ref.clone(), venue: doc.venue.clone(), weights }
        })
        .collect();
    Ok(TfidfModel { vocabulary, idf, vectors })
}
