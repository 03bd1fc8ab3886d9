//! Round-trip coverage of real titles: decompose a title into registry
//! elements, regenerate titles from those elements, and score the best
//! regeneration by token Jaccard.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{Corpus, PaperRecord};
use crate::disk::Disk;
use crate::gateway::{Gateway, ModelRequest};
use crate::metrics::jaccard;
use crate::prompt::{self, first_json_object};
use crate::registry::{top_k, DiskRegistry, VenueRegistries};
use crate::text::{normalize, tokenize};

pub const DEFAULT_THRESHOLD: f64 = 0.30;
pub const DEFAULT_BUDGET: usize = 300;
pub const MAX_CANDIDATES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error("title is empty")]
    EmptyTitle,
    #[error("no elements for disk {0}")]
    EmptyDisk(Disk),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageOptions {
    /// Maximum canonical names listed per disk in the decomposition prompt.
    pub budget: usize,
    pub threshold: f64,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        CoverageOptions { budget: DEFAULT_BUDGET, threshold: DEFAULT_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionPrompt {
    pub text: String,
    /// Names left out of each disk's list by the budget, A/B/C order.
    pub omitted: [usize; 3],
}

/// Fill the decomposition prompt with each disk's most visited canonical
/// names, at most `budget` per disk.
pub fn build_decomposition_prompt(
    title: &str,
    disks: [&DiskRegistry; 3],
    budget: usize,
) -> Result<DecompositionPrompt, CoverageError> {
    if title.trim().is_empty() {
        return Err(CoverageError::EmptyTitle);
    }
    let mut lists = Vec::with_capacity(3);
    let mut omitted = [0; 3];
    for (i, reg) in disks.iter().enumerate() {
        let names: Vec<&str> = top_k(reg, budget).into_iter().map(|g| g.canonical.as_str()).collect();
        omitted[i] = reg.groups.len() - names.len();
        lists.push(names.join(", "));
    }
    let text = prompt::fill(
        prompt::DECOMPOSITION,
        &[("themes", &lists[0]), ("domains", &lists[1]), ("methodologies", &lists[2]), ("title", title.trim())],
    );
    Ok(DecompositionPrompt { text, omitted })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub paper_id: String,
    #[serde(rename = "selected_A")]
    pub selected_a: Vec<String>,
    #[serde(rename = "selected_B")]
    pub selected_b: Vec<String>,
    #[serde(rename = "selected_C")]
    pub selected_c: Vec<String>,
    /// Reported by the model; never used for the validity decision.
    pub confidence: Option<f64>,
    pub valid: bool,
    pub reason: Option<String>,
}

impl DecompositionResult {
    fn invalid(paper_id: &str, reason: impl Into<String>) -> Self {
        DecompositionResult {
            paper_id: paper_id.to_owned(),
            selected_a: Vec::new(),
            selected_b: Vec::new(),
            selected_c: Vec::new(),
            confidence: None,
            valid: false,
            reason: Some(reason.into()),
        }
    }

    pub fn selected(&self, disk: Disk) -> &[String] {
        match disk {
            Disk::A => &self.selected_a,
            Disk::B => &self.selected_b,
            Disk::C => &self.selected_c,
        }
    }
}

fn string_list(v: Option<&Value>) -> Vec<String> {
    match v {
        Some(Value::Array(items)) => {
            items.iter().filter_map(Value::as_str).map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect()
        }
        Some(Value::String(s)) if !s.trim().is_empty() => vec![s.trim().to_owned()],
        _ => Vec::new(),
    }
}

/// Valid when the answer parses, every disk has a selection, and every
/// selection resolves (normalized) to a registry group. Selections are
/// reported by their canonical names.
pub fn judge_decomposition(paper_id: &str, response: &str, disks: [&DiskRegistry; 3]) -> DecompositionResult {
    let Some(obj) = first_json_object(response) else {
        return DecompositionResult::invalid(paper_id, "unparseable response");
    };
    let confidence = match obj.get("confidence") {
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => s.trim().parse().ok(),
        _ => None,
    };
    let mut selected: [Vec<String>; 3] = Default::default();
    let mut reason = None;
    for disk in Disk::ALL {
        let raw = string_list(obj.get(&format!("selected_{disk}")));
        if raw.is_empty() {
            reason.get_or_insert_with(|| format!("empty disk {disk}"));
        }
        for name in raw {
            match disks[disk.index()].resolve(&name) {
                Some(g) => {
                    if !selected[disk.index()].contains(&g.canonical) {
                        selected[disk.index()].push(g.canonical.clone());
                    }
                }
                None => {
                    reason.get_or_insert_with(|| format!("unknown element {name:?} on disk {disk}"));
                    selected[disk.index()].push(name);
                }
            }
        }
    }
    let [selected_a, selected_b, selected_c] = selected;
    DecompositionResult {
        paper_id: paper_id.to_owned(),
        selected_a,
        selected_b,
        selected_c,
        confidence,
        valid: reason.is_none(),
        reason,
    }
}

fn dedupe(items: &[String]) -> Vec<&str> {
    let mut seen = HashSet::new();
    items.iter().map(|s| s.trim()).filter(|s| !s.is_empty() && seen.insert(normalize(s))).collect()
}

pub fn build_reconstruction_prompt(
    themes: &[String],
    domains: &[String],
    methods: &[String],
) -> Result<String, CoverageError> {
    let mut lists = Vec::with_capacity(3);
    for (disk, items) in Disk::ALL.into_iter().zip([themes, domains, methods]) {
        let items = dedupe(items);
        if items.is_empty() {
            return Err(CoverageError::EmptyDisk(disk));
        }
        lists.push(items.join(", "));
    }
    Ok(prompt::fill(
        prompt::RECONSTRUCTION,
        &[("themes", &lists[0]), ("domains", &lists[1]), ("methodologies", &lists[2])],
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub paper_id: String,
    pub original: String,
    pub candidates: Vec<String>,
    pub best_similarity: f64,
    pub reconstructible: bool,
    pub reason: Option<String>,
}

fn numbered_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[-*]\s*)?\(?[0-9]+[.):]\s*(.+)$").expect("valid regex"))
}

fn clean_candidate(s: &str) -> String {
    let mut s = s.trim();
    loop {
        let before = s;
        for (open, close) in [("[", "]"), ("\"", "\""), ("“", "”"), ("**", "**"), ("*", "*"), ("'", "'")] {
            if s.len() >= open.len() + close.len() && s.starts_with(open) && s.ends_with(close) {
                s = s[open.len()..s.len() - close.len()].trim();
            }
        }
        if s == before {
            return s.to_owned();
        }
    }
}

/// Candidates from the first five numbered lines of the answer.
pub fn parse_candidates(response: &str) -> Vec<String> {
    response
        .lines()
        .filter_map(|l| numbered_line().captures(l).map(|c| clean_candidate(&c[1])))
        .filter(|c| !c.is_empty())
        .take(MAX_CANDIDATES)
        .collect()
}

pub fn judge_reconstruction(paper_id: &str, original: &str, response: &str, threshold: f64) -> ReconstructionResult {
    let candidates = parse_candidates(response);
    let target = tokenize(original);
    let best = candidates.iter().map(|c| jaccard(&tokenize(c), &target).unwrap_or(0.0)).fold(0.0, f64::max);
    let reason = candidates.is_empty().then(|| "no parseable candidates".to_owned());
    ReconstructionResult {
        paper_id: paper_id.to_owned(),
        original: original.to_owned(),
        reconstructible: !candidates.is_empty() && best >= threshold,
        candidates,
        best_similarity: best,
        reason,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub label: String,
    pub papers: usize,
    pub decomposed: usize,
    pub reconstructed: usize,
}

impl CoverageRow {
    fn pct(n: usize, d: usize) -> f64 {
        if d == 0 {
            0.0
        } else {
            100.0 * n as f64 / d as f64
        }
    }

    pub fn decomp_pct(&self) -> f64 {
        Self::pct(self.decomposed, self.papers)
    }

    pub fn recon_pct(&self) -> f64 {
        Self::pct(self.reconstructed, self.papers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub options: CoverageOptions,
    pub decompositions: Vec<DecompositionResult>,
    pub reconstructions: Vec<ReconstructionResult>,
    /// Per-venue prompt truncation: label to omitted names per disk.
    pub truncation: BTreeMap<String, [usize; 3]>,
    pub venues: Vec<CoverageRow>,
    pub overall: CoverageRow,
}

/// Run decomposition for every paper against its own venue's registries,
/// then reconstruction for the validly decomposed ones. Failures of any
/// kind count as negative outcomes.
pub fn coverage_report(
    corpus: &Corpus,
    registries: &[VenueRegistries],
    gateway: &Gateway,
    options: &CoverageOptions,
) -> CoverageReport {
    let by_label: BTreeMap<String, &VenueRegistries> = registries.iter().map(|r| (r.label(), r)).collect();
    let disks_of = |p: &PaperRecord| {
        by_label.get(&p.venue_key().to_string()).map(|r| [r.disk(Disk::A), r.disk(Disk::B), r.disk(Disk::C)])
    };

    let mut truncation = BTreeMap::new();
    let mut pending: Vec<(usize, ModelRequest)> = Vec::new();
    let mut decompositions: Vec<Option<DecompositionResult>> = vec![None; corpus.records.len()];
    for (i, paper) in corpus.records.iter().enumerate() {
        let Some(disks) = disks_of(paper) else {
            decompositions[i] = Some(DecompositionResult::invalid(&paper.id, "no registry for venue"));
            continue;
        };
        match build_decomposition_prompt(&paper.title, disks, options.budget) {
            Ok(p) => {
                truncation.insert(paper.venue_key().to_string(), p.omitted);
                pending.push((i, gateway.request(p.text)));
            }
            Err(e) => decompositions[i] = Some(DecompositionResult::invalid(&paper.id, e.to_string())),
        }
    }
    let requests: Vec<ModelRequest> = pending.iter().map(|(_, r)| r.clone()).collect();
    for ((i, _), response) in pending.iter().zip(gateway.complete_many(&requests)) {
        let paper = &corpus.records[*i];
        decompositions[*i] = Some(match response {
            Ok(r) => judge_decomposition(&paper.id, &r.text, disks_of(paper).expect("checked above")),
            Err(e) => DecompositionResult::invalid(&paper.id, format!("gateway: {e}")),
        });
    }
    let decompositions: Vec<DecompositionResult> = decompositions.into_iter().map(|d| d.expect("filled")).collect();

    let mut recon_pending: Vec<(usize, ModelRequest)> = Vec::new();
    let mut reconstructions: Vec<ReconstructionResult> = Vec::new();
    for (i, d) in decompositions.iter().enumerate() {
        if !d.valid {
            continue;
        }
        match build_reconstruction_prompt(&d.selected_a, &d.selected_b, &d.selected_c) {
            Ok(p) => recon_pending.push((i, gateway.request(p))),
            Err(e) => reconstructions.push(ReconstructionResult {
                paper_id: d.paper_id.clone(),
                original: corpus.records[i].title.clone(),
                candidates: Vec::new(),
                best_similarity: 0.0,
                reconstructible: false,
                reason: Some(e.to_string()),
            }),
        }
    }
    let requests: Vec<ModelRequest> = recon_pending.iter().map(|(_, r)| r.clone()).collect();
    for ((i, _), response) in recon_pending.iter().zip(gateway.complete_many(&requests)) {
        let paper = &corpus.records[*i];
        reconstructions.push(match response {
            Ok(r) => judge_reconstruction(&paper.id, &paper.title, &r.text, options.threshold),
            Err(e) => ReconstructionResult {
                paper_id: paper.id.clone(),
                original: paper.title.clone(),
                candidates: Vec::new(),
                best_similarity: 0.0,
                reconstructible: false,
                reason: Some(format!("gateway: {e}")),
            },
        });
    }
    let order: BTreeMap<&str, usize> = corpus.records.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
    reconstructions.sort_by_key(|r| order[r.paper_id.as_str()]);

    let reconstructed: HashSet<&str> =
        reconstructions.iter().filter(|r| r.reconstructible).map(|r| r.paper_id.as_str()).collect();
    let mut venues: Vec<CoverageRow> = Vec::new();
    for key in corpus.venue_keys() {
        let label = key.to_string();
        let mut row = CoverageRow { label, papers: 0, decomposed: 0, reconstructed: 0 };
        for (paper, d) in corpus.records.iter().zip(&decompositions) {
            if paper.venue_key() != key {
                continue;
            }
            row.papers += 1;
            row.decomposed += d.valid as usize;
            row.reconstructed += reconstructed.contains(paper.id.as_str()) as usize;
        }
        if row.papers > 0 {
            venues.push(row);
        }
    }
    let overall = CoverageRow {
        label: "Overall".into(),
        papers: venues.iter().map(|r| r.papers).sum(),
        decomposed: venues.iter().map(|r| r.decomposed).sum(),
        reconstructed: venues.iter().map(|r| r.reconstructed).sum(),
    };
    CoverageReport { options: options.clone(), decompositions, reconstructions, truncation, venues, overall }
}

/// Metric rows by venue columns, percentages with one decimal.
pub fn write_coverage_csv<W: Write>(report: &CoverageReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let columns: Vec<&CoverageRow> = report.venues.iter().chain(std::iter::once(&report.overall)).collect();
    let mut header = vec!["Metric".to_owned()];
    header.extend(columns.iter().map(|r| r.label.clone()));
    w.write_record(&header)?;
    type Cell = fn(&CoverageRow) -> String;
    let rows: [(&str, Cell); 3] = [
        ("# Papers", |r| r.papers.to_string()),
        ("Decomp. (%)", |r| format!("{:.1}", r.decomp_pct())),
        ("Recon. (%)", |r| format!("{:.1}", r.recon_pct())),
    ];
    for (name, get) in rows {
        let mut rec = vec![name.to_owned()];
        rec.extend(columns.iter().map(|r| get(r)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disks() -> [DiskRegistry; 3] {
        [
            DiskRegistry::from_elements("ACL", Some(2024), Disk::A, &["efficiency"]),
            DiskRegistry::from_elements("ACL", Some(2024), Disk::B, &["question answering"]),
            DiskRegistry::from_elements("ACL", Some(2024), Disk::C, &["Mamba", "RAG"]),
        ]
    }

    fn refs(d: &[DiskRegistry; 3]) -> [&DiskRegistry; 3] {
        [&d[0], &d[1], &d[2]]
    }

    #[test]
    fn decomposition_prompt_lists_and_truncation() {
        let d = disks();
        let p = build_decomposition_prompt("Efficient QA with Mamba", refs(&d), 1).unwrap();
        assert!(p.text.contains("THEMES (A): efficiency\n"));
        assert!(p.text.contains("METHODOLOGIES (C): Mamba\n"));
        assert!(p.text.contains("PAPER TITLE: \"Efficient QA with Mamba\""));
        assert_eq!(p.omitted, [0, 0, 1]);
        let full = build_decomposition_prompt("t", refs(&d), 300).unwrap();
        assert!(full.text.contains("METHODOLOGIES (C): Mamba, RAG\n"));
        assert_eq!(build_decomposition_prompt("  ", refs(&d), 5), Err(CoverageError::EmptyTitle));
    }

    #[test]
    fn judges_decompositions() {
        let d = disks();
        let ok = judge_decomposition(
            "p",
            r#"{"selected_A": ["Efficiency"], "selected_B": ["question-answering"], "selected_C": ["mamba"], "confidence": 0.9}"#,
            refs(&d),
        );
        assert!(ok.valid);
        assert_eq!(ok.selected_c, ["Mamba"]);
        assert_eq!(ok.confidence, Some(0.9));

        let empty_b = judge_decomposition(
            "p",
            r#"{"selected_A": ["efficiency"], "selected_B": [], "selected_C": ["RAG"]}"#,
            refs(&d),
        );
        assert!(!empty_b.valid);
        assert_eq!(empty_b.reason.as_deref(), Some("empty disk B"));

        let unknown = judge_decomposition(
            "p",
            r#"{"selected_A": ["efficiency"], "selected_B": ["vision"], "selected_C": ["RAG"]}"#,
            refs(&d),
        );
        assert!(!unknown.valid);
        assert!(!judge_decomposition("p", "no json", refs(&d)).valid);
    }

    #[test]
    fn reconstruction_prompt() {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let p = build_reconstruction_prompt(&s(&["efficiency"]), &s(&["QA", "qa"]), &s(&["Mamba"])).unwrap();
        assert!(p.contains("THEMES: efficiency\nDOMAINS: QA\nMETHODOLOGIES: Mamba\n"));
        assert_eq!(build_reconstruction_prompt(&s(&["x"]), &s(&["y"]), &[]), Err(CoverageError::EmptyDisk(Disk::C)));
    }

    #[test]
    fn parses_numbered_candidates() {
        let text = "Here you go:\n1. [Mamba for QA]\n2) \"Efficient QA\"\n3. **Bold Title**\nnot numbered\n4. Four\n5. Five\n6. Six";
        assert_eq!(parse_candidates(text), ["Mamba for QA", "Efficient QA", "Bold Title", "Four", "Five"]);
    }

    #[test]
    fn reconstruction_judgement() {
        let same = judge_reconstruction("p", "Mamba for QA", "1. Mamba for QA", 0.3);
        assert_eq!((same.best_similarity, same.reconstructible), (1.0, true));
        let none = judge_reconstruction("p", "Mamba for QA", "1. Diffusion in vision", 0.3);
        assert_eq!((none.best_similarity, none.reconstructible), (0.0, false));
        let empty = judge_reconstruction("p", "Mamba for QA", "no list", 0.3);
        assert!(!empty.reconstructible);
        assert!(empty.reason.is_some());
    }
}
