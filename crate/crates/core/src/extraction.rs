//! Per-paper element extraction: prompt construction, response parsing and
//! the cross-disk exclusivity rule.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::HashSet;
use thiserror::Error;

use crate::corpus::{Corpus, PaperRecord};
use crate::disk::Disk;
use crate::gateway::Gateway;
use crate::prompt::{self, first_json_object};
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub value: String,
    pub removed_from: Disk,
    /// `None` when the value normalized to nothing.
    pub kept_in: Option<Disk>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ElementDraft {
    pub paper_id: String,
    #[serde(rename = "A")]
    pub themes: Vec<String>,
    #[serde(rename = "B")]
    pub domains: Vec<String>,
    #[serde(rename = "C")]
    pub methods: Vec<String>,
    #[serde(rename = "Template")]
    pub templates: Vec<String>,
    #[serde(default)]
    pub removed_duplicates: Vec<Removal>,
}

impl ElementDraft {
    pub fn disk(&self, disk: Disk) -> &[String] {
        match disk {
            Disk::A => &self.themes,
            Disk::B => &self.domains,
            Disk::C => &self.methods,
        }
    }

    fn disk_mut(&mut self, disk: Disk) -> &mut Vec<String> {
        match disk {
            Disk::A => &mut self.themes,
            Disk::B => &mut self.domains,
            Disk::C => &mut self.methods,
        }
    }

    /// The annotation object in the format the extraction prompt asks for.
    pub fn annotation_json(&self) -> String {
        json!({"A": self.themes, "B": self.domains, "C": self.methods, "Template": self.templates}).to_string()
    }

    /// True when no normalized string appears on two disks.
    pub fn is_exclusive(&self) -> bool {
        let sets: Vec<HashSet<String>> =
            Disk::ALL.iter().map(|&d| self.disk(d).iter().map(|s| normalize(s)).collect()).collect();
        sets[0].is_disjoint(&sets[1]) && sets[0].is_disjoint(&sets[2]) && sets[1].is_disjoint(&sets[2])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no parseable annotation object")]
    NoAnnotation,
    #[error("annotation missing key {0}")]
    MissingKey(&'static str),
    #[error("annotation key {key} is not a list of strings")]
    BadValue { key: &'static str },
}

pub fn build_extraction_prompt(paper: &PaperRecord) -> String {
    prompt::fill(prompt::EXTRACTION, &[("title", &paper.title), ("abstract", &paper.abstract_text)])
}

/// Parse the first annotation object in a model response. Surface forms are
/// kept as written apart from trimming; empty strings are dropped.
pub fn parse_extraction(paper_id: &str, response: &str) -> Result<ElementDraft, ParseError> {
    let obj = first_json_object(response).ok_or(ParseError::NoAnnotation)?;
    let list = |key: &'static str| -> Result<Vec<String>, ParseError> {
        match obj.get(key) {
            None => Err(ParseError::MissingKey(key)),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().map(|s| s.trim().to_owned()).ok_or(ParseError::BadValue { key }))
                .filter(|r| r.as_ref().map_or(true, |s| !s.is_empty()))
                .collect(),
            // a bare string is a one-element list
            Some(Value::String(s)) => Ok(if s.trim().is_empty() { vec![] } else { vec![s.trim().to_owned()] }),
            Some(_) => Err(ParseError::BadValue { key }),
        }
    };
    Ok(ElementDraft {
        paper_id: paper_id.to_owned(),
        themes: list("A")?,
        domains: list("B")?,
        methods: list("C")?,
        templates: list("Template")?,
        removed_duplicates: Vec::new(),
    })
}

/// Enforce disk exclusivity with precedence C > B > A, and drop repeats within
/// one disk. Every removal is recorded on the draft.
pub fn validate_exclusivity(mut draft: ElementDraft) -> ElementDraft {
    let mut claimed: Vec<(String, Disk)> = Vec::new();
    for disk in [Disk::C, Disk::B, Disk::A] {
        let mut own = HashSet::new();
        let mut removals = Vec::new();
        draft.disk_mut(disk).retain(|value| {
            let key = normalize(value);
            let kept_in = if key.is_empty() {
                None
            } else if let Some((_, owner)) = claimed.iter().find(|(k, _)| *k == key) {
                Some(*owner)
            } else if !own.insert(key) {
                Some(disk)
            } else {
                return true;
            };
            removals.push(Removal { value: value.clone(), removed_from: disk, kept_in });
            false
        });
        claimed.extend(own.into_iter().map(|k| (k, disk)));
        draft.removed_duplicates.extend(removals);
    }
    draft
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Gateway,
    Parse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub paper_id: String,
    pub stage: Stage,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExtractionOutcome {
    pub drafts: Vec<ElementDraft>,
    pub failures: Vec<Failure>,
}

/// Extract and validate every paper. Per-paper failures are reported, never
/// fatal; drafts come back in corpus order.
pub fn extract_corpus(corpus: &Corpus, gateway: &Gateway) -> ExtractionOutcome {
    let requests: Vec<_> = corpus.records.iter().map(|p| gateway.request(build_extraction_prompt(p))).collect();
    let responses = gateway.complete_many(&requests);
    let mut outcome = ExtractionOutcome::default();
    for (paper, response) in corpus.records.iter().zip(responses) {
        let failure = |stage, reason: String| Failure { paper_id: paper.id.clone(), stage, reason };
        match response {
            Err(e) => outcome.failures.push(failure(Stage::Gateway, e.to_string())),
            Ok(r) => match parse_extraction(&paper.id, &r.text) {
                Ok(draft) => outcome.drafts.push(validate_exclusivity(draft)),
                Err(e) => outcome.failures.push(failure(Stage::Parse, e.to_string())),
            },
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draft(a: &[&str], b: &[&str], c: &[&str]) -> ElementDraft {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        ElementDraft { paper_id: "p".into(), themes: v(a), domains: v(b), methods: v(c), ..Default::default() }
    }

    #[test]
    fn parses_format_example() {
        let d = parse_extraction(
            "p1",
            r#"{"A":["few-shot"],"B":["argument mining"],"C":["Mamba"],"Template":["Comparing C1 and C2 in B1 with A1"]}"#,
        )
        .unwrap();
        assert_eq!(d.themes, ["few-shot"]);
        assert_eq!(d.domains, ["argument mining"]);
        assert_eq!(d.methods, ["Mamba"]);
        assert_eq!(d.templates, ["Comparing C1 and C2 in B1 with A1"]);
    }

    #[test]
    fn fenced_response_parses_the_same() {
        let bare = r#"{"A":["few-shot"],"B":["argument mining"],"C":["Mamba"],"Template":["C1 is all you need"]}"#;
        let fenced = format!("Here is the annotation:\n```json\n{bare}\n```\n");
        assert_eq!(parse_extraction("p", bare).unwrap(), parse_extraction("p", &fenced).unwrap());
    }

    #[test]
    fn parse_failures() {
        assert_eq!(parse_extraction("p", "not json at all"), Err(ParseError::NoAnnotation));
        assert_eq!(parse_extraction("p", r#"{"A":[],"B":[],"C":[]}"#), Err(ParseError::MissingKey("Template")));
        assert_eq!(
            parse_extraction("p", r#"{"A":[1],"B":[],"C":[],"Template":[]}"#),
            Err(ParseError::BadValue { key: "A" })
        );
    }

    #[test]
    fn surface_forms_are_trimmed_not_lowercased() {
        let d = parse_extraction("p", r#"{"A":["  Less is More "," "],"B":"RAG","C":[],"Template":[]}"#).unwrap();
        assert_eq!(d.themes, ["Less is More"]);
        assert_eq!(d.domains, ["RAG"]);
    }

    #[test]
    fn method_wins_over_domain() {
        let d = validate_exclusivity(draft(&[], &["retrieval", "QA"], &["Retrieval"]));
        assert_eq!(d.domains, ["QA"]);
        assert_eq!(d.methods, ["Retrieval"]);
        assert_eq!(
            d.removed_duplicates,
            [Removal { value: "retrieval".into(), removed_from: Disk::B, kept_in: Some(Disk::C) }]
        );
    }

    #[test]
    fn triple_collision_keeps_method() {
        let d = validate_exclusivity(draft(&["x-y"], &["X Y"], &["x y"]));
        assert!(d.themes.is_empty() && d.domains.is_empty());
        assert_eq!(d.methods, ["x y"]);
        assert!(d.removed_duplicates.iter().all(|r| r.kept_in == Some(Disk::C)));
        assert!(d.is_exclusive());
    }

    #[test]
    fn exclusive_draft_is_unchanged() {
        let d = draft(&["adaptive"], &["RAG"], &["LLMs"]);
        assert_eq!(validate_exclusivity(d.clone()), d);
    }

    #[test]
    fn in_disk_repeats_and_empty_normals_are_dropped() {
        let d = validate_exclusivity(draft(&["Adaptive", "adaptive", "--"], &[], &[]));
        assert_eq!(d.themes, ["Adaptive"]);
        assert_eq!(d.removed_duplicates.len(), 2);
        assert_eq!(d.removed_duplicates[1].kept_in, None);
    }

    #[test]
    fn empty_abstract_prompt() {
        let p = PaperRecord {
            id: "x".into(),
            title: "A Title".into(),
            abstract_text: String::new(),
            venue: "ACL".into(),
            year: 2024,
        };
        assert!(build_extraction_prompt(&p).ends_with("Title: A Title\n\nAbstract: \n\nOutput:\n"));
    }
}
