//! Idea-set metrics: distinct-1 diversity, cross-product BLEU relevance and
//! top-K Jaccard similarity against a reference title set.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{tokenize, TokenList};

/// Additive numerator for n-gram orders with no matches.
pub const BLEU_EPSILON: f64 = 0.1;
pub const BLEU_MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("candidate has no tokens")]
    EmptyCandidate,
    #[error("titles contain no tokens")]
    NoTokens,
    #[error("{0} list is empty")]
    EmptyList(&'static str),
    #[error("both token sets are empty")]
    BothEmpty,
    #[error("need at least as many references as ideas ({ideas} ideas, {references} references)")]
    TooFewReferences { ideas: usize, references: usize },
}

/// Distinct tokens over total tokens, pooled across titles.
pub fn distinct1<S: AsRef<str>>(titles: &[S]) -> Result<f64, MetricsError> {
    let mut seen = HashSet::new();
    let mut total = 0usize;
    for t in titles {
        for tok in tokenize(t.as_ref()).iter() {
            seen.insert(tok.clone());
            total += 1;
        }
    }
    if total == 0 {
        return Err(MetricsError::NoTokens);
    }
    Ok(seen.len() as f64 / total as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_default() += 1;
        }
    }
    counts
}

/// Sentence BLEU against a single reference.
///
/// Uses uniform weights over orders 1..=min(4, |candidate|), clipped n-gram
/// precisions, `BLEU_EPSILON` added to the numerator of orders with zero
/// matches, and the usual brevity penalty. No unigram overlap scores 0.
pub fn bleu(candidate: &TokenList, reference: &TokenList) -> Result<f64, MetricsError> {
    let cand = candidate.tokens();
    let refr = reference.tokens();
    if cand.is_empty() {
        return Err(MetricsError::EmptyCandidate);
    }
    let orders = cand.len().min(BLEU_MAX_ORDER);
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let c = ngram_counts(cand, n);
        let r = ngram_counts(refr, n);
        let matched: usize = c.iter().map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0))).sum();
        let total = (cand.len() + 1 - n).max(1);
        if matched == 0 {
            if n == 1 {
                return Ok(0.0);
            }
            log_sum += (BLEU_EPSILON / total as f64).ln();
        } else {
            log_sum += (matched as f64 / total as f64).ln();
        }
    }
    let (c, r) = (cand.len() as f64, refr.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(bp * (log_sum / orders as f64).exp())
}

fn tokenize_all<S: AsRef<str>>(titles: &[S]) -> Vec<TokenList> {
    titles.iter().map(|t| tokenize(t.as_ref())).collect()
}

/// Mean BLEU over every (idea, reference) pair.
pub fn relevance<S: AsRef<str>, R: AsRef<str>>(ideas: &[S], references: &[R]) -> Result<f64, MetricsError> {
    if ideas.is_empty() {
        return Err(MetricsError::EmptyList("idea"));
    }
    if references.is_empty() {
        return Err(MetricsError::EmptyList("reference"));
    }
    let refs = tokenize_all(references);
    let mut sum = 0.0;
    for idea in tokenize_all(ideas) {
        for r in &refs {
            sum += bleu(&idea, r)?;
        }
    }
    Ok(sum / (ideas.len() * references.len()) as f64)
}

/// Token-set Jaccard.
pub fn jaccard(a: &TokenList, b: &TokenList) -> Result<f64, MetricsError> {
    let sa: HashSet<&String> = a.iter().collect();
    let sb: HashSet<&String> = b.iter().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return Err(MetricsError::BothEmpty);
    }
    Ok(sa.intersection(&sb).count() as f64 / union as f64)
}

fn jaccard_or_zero(a: &TokenList, b: &TokenList) -> f64 {
    jaccard(a, b).unwrap_or(0.0)
}

/// How a reference's similarity to the whole idea set is reduced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Max,
    Mean,
}

/// Score each reference by its Jaccard to the idea set, then average the
/// K = |ideas| highest reference scores.
pub fn similarity_topk<S: AsRef<str>, R: AsRef<str>>(
    ideas: &[S],
    references: &[R],
    aggregate: Aggregate,
) -> Result<f64, MetricsError> {
    if ideas.is_empty() {
        return Err(MetricsError::EmptyList("idea"));
    }
    if references.len() < ideas.len() {
        return Err(MetricsError::TooFewReferences { ideas: ideas.len(), references: references.len() });
    }
    let idea_tokens = tokenize_all(ideas);
    let mut scores: Vec<f64> = tokenize_all(references)
        .iter()
        .map(|r| {
            let per_idea = idea_tokens.iter().map(|i| jaccard_or_zero(i, r));
            match aggregate {
                Aggregate::Max => per_idea.fold(0.0, f64::max),
                Aggregate::Mean => per_idea.sum::<f64>() / idea_tokens.len() as f64,
            }
        })
        .collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    let k = ideas.len();
    Ok(scores[..k].iter().sum::<f64>() / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub idea_count: usize,
    /// Normalized tokens across all ideas.
    pub word_count: usize,
    pub diversity: f64,
    pub similarity: f64,
    pub relevance: f64,
    pub reference_label: String,
}

pub fn report<S: AsRef<str>, R: AsRef<str>>(
    ideas: &[S],
    references: &[R],
    label: &str,
    aggregate: Aggregate,
) -> Result<MetricsReport, MetricsError> {
    if ideas.is_empty() {
        return Err(MetricsError::EmptyList("idea"));
    }
    Ok(MetricsReport {
        idea_count: ideas.len(),
        word_count: ideas.iter().map(|t| tokenize(t.as_ref()).len()).sum(),
        diversity: distinct1(ideas)?,
        similarity: similarity_topk(ideas, references, aggregate)?,
        relevance: relevance(ideas, references)?,
        reference_label: label.to_owned(),
    })
}

const REPORT_HEADER: [&str; 6] = ["Reference", "# Ideas", "# Words (tokens)", "Diversity", "Similarity", "Relevance"];

pub fn write_report_csv<W: Write>(reports: &[MetricsReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.reference_label.clone(),
            r.idea_count.to_string(),
            r.word_count.to_string(),
            format!("{:.6}", r.diversity),
            format!("{:.6}", r.similarity),
            format!("{:.6}", r.relevance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width table with two-decimal scores.
pub fn format_report_table(reports: &[MetricsReport]) -> String {
    let mut out = format!(
        "{:<24} {:>8} {:>16} {:>10} {:>10} {:>10}\n",
        REPORT_HEADER[0], REPORT_HEADER[1], REPORT_HEADER[2], REPORT_HEADER[3], REPORT_HEADER[4], REPORT_HEADER[5]
    );
    for r in reports {
        out.push_str(&format!(
            "{:<24} {:>8} {:>16} {:>10.2} {:>10.2} {:>10.2}\n",
            r.reference_label, r.idea_count, r.word_count, r.diversity, r.similarity, r.relevance
        ));
    }
    out
}

/// Titles from a plain one-per-line file, or from the `title` field of each
/// line of a `.jsonl` file. Blank lines are skipped.
pub fn read_titles(path: &Path) -> io::Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let jsonl = path.extension().is_some_and(|e| e == "jsonl");
    let mut titles = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if jsonl {
            let v: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
            let title = v
                .get("title")
                .and_then(|t| t.as_str())
                .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: no title field", i + 1)))?;
            titles.push(title.to_owned());
        } else {
            titles.push(line.to_owned());
        }
    }
    Ok(titles)
}
