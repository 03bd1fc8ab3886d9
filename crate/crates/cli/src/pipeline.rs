//! Stage functions shared by the subcommands, plus the end-to-end run used
//! for fixture recording and replay checks.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use llull_core::corpus::{self, Corpus, Format};
use llull_core::coverage::{coverage_report, write_coverage_csv, CoverageOptions, CoverageReport};
use llull_core::extraction::{extract_corpus, ElementDraft, ExtractionOutcome};
use llull_core::gateway::Gateway;
use llull_core::jsonl;
use llull_core::machine::{basic_template, enumerate_top, RawIdea};
use llull_core::metrics::{self, report, Aggregate, MetricsReport};
use llull_core::registry::{
    build_pooled, build_venue_registries, registry_stats, save_registries, write_stats_csv, BuildReport, MergeOptions,
    VenueRegistries,
};
use llull_core::rewriting::{rewrite_batch, write_titles, RewriteOutcome};

pub fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    create_parent(path)?;
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    jsonl::write_file(path, items).with_context(|| format!("writing {}", path.display()))
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let ingested = corpus::ingest(path, Format::from_path(path))?;
    if !ingested.rejects.is_empty() {
        log::warn!("{}: {} records rejected", path.display(), ingested.rejects.len());
    }
    Ok(ingested.corpus)
}

pub fn extract_stage(corpus: &Corpus, gateway: &Gateway, drafts: &Path, failures: &Path) -> Result<ExtractionOutcome> {
    let outcome = extract_corpus(corpus, gateway);
    write_jsonl(drafts, &outcome.drafts)?;
    write_jsonl(failures, &outcome.failures)?;
    Ok(outcome)
}

pub fn merge_stage(
    corpus: &Corpus,
    drafts: &[ElementDraft],
    gateway: &Gateway,
    options: &MergeOptions,
    pooled: bool,
    out_dir: &Path,
) -> Result<(Vec<VenueRegistries>, BuildReport)> {
    let (mut registries, mut report) = build_venue_registries(corpus, drafts, gateway, options);
    if pooled && !registries.is_empty() {
        let all = build_pooled(&registries, gateway, options, &mut report);
        registries.push(all);
    }
    save_registries(out_dir, &registries)?;
    let mut notes = create_file(&out_dir.join("merge_notes.txt"))?;
    for n in report.notes.iter().chain(report.dropped_templates.iter().map(|t| t as &String)) {
        writeln!(notes, "{n}")?;
    }
    notes.flush()?;
    Ok((registries, report))
}

pub fn write_stats(registries: &[VenueRegistries], out: impl Write) -> Result<()> {
    write_stats_csv(&registry_stats(registries), out)?;
    Ok(())
}

pub fn rewrite_stage(
    raws: &[RawIdea],
    gateway: &Gateway,
    ideas: &Path,
    titles: &Path,
    failures: &Path,
) -> Result<RewriteOutcome> {
    let outcome = rewrite_batch(raws, gateway);
    write_jsonl(ideas, &outcome.records)?;
    write_jsonl(failures, &outcome.failures)?;
    let mut out = create_file(titles)?;
    write_titles(&outcome.records, &mut out)?;
    out.flush()?;
    Ok(outcome)
}

pub fn write_metrics(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let mut out = create_file(path)?;
    metrics::write_report_csv(reports, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn coverage_stage(
    corpus: &Corpus,
    registries: &[VenueRegistries],
    gateway: &Gateway,
    options: &CoverageOptions,
    out_dir: &Path,
) -> Result<CoverageReport> {
    let report = coverage_report(corpus, registries, gateway, options);
    let mut csv_out = create_file(&out_dir.join("coverage.csv"))?;
    write_coverage_csv(&report, &mut csv_out)?;
    csv_out.flush()?;
    write_jsonl(&out_dir.join("decompositions.jsonl"), &report.decompositions)?;
    write_jsonl(&out_dir.join("reconstructions.jsonl"), &report.reconstructions)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Top-k per disk for idea generation.
    pub k: usize,
    pub merge: MergeOptions,
    pub coverage: CoverageOptions,
    pub similarity: Aggregate,
    /// Reference titles for metrics (one per line).
    pub references: PathBuf,
}

impl PipelineOptions {
    pub fn new(references: impl Into<PathBuf>) -> Self {
        PipelineOptions {
            k: 5,
            merge: MergeOptions::default(),
            coverage: CoverageOptions::default(),
            similarity: Aggregate::Max,
            references: references.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub papers: usize,
    pub drafts: usize,
    pub extraction_failures: usize,
    pub registries: usize,
    pub raw_ideas: usize,
    pub titles: usize,
    pub rewrite_failures: usize,
    pub metrics: Vec<MetricsReport>,
    pub coverage: CoverageReport,
}

/// File names written under the output directory, relative to it.
pub const PIPELINE_ARTIFACTS: [&str; 12] = [
    "corpus.jsonl",
    "drafts.jsonl",
    "extraction_failures.jsonl",
    "stats.csv",
    "raw_ideas.jsonl",
    "ideas.jsonl",
    "titles.txt",
    "rewrite_failures.jsonl",
    "metrics.csv",
    "coverage/coverage.csv",
    "coverage/decompositions.jsonl",
    "coverage/reconstructions.jsonl",
];

/// extract, merge, generate (top-k, basic template, per venue-year), rewrite,
/// evaluate each venue's titles against the references, coverage.
pub fn run_pipeline(
    corpus_path: &Path,
    out: &Path,
    gateway: &Gateway,
    options: &PipelineOptions,
) -> Result<PipelineSummary> {
    let corpus = load_corpus(corpus_path)?;
    let mut corpus_out = create_file(&out.join("corpus.jsonl"))?;
    corpus.write_jsonl(&mut corpus_out)?;
    corpus_out.flush()?;

    let extraction =
        extract_stage(&corpus, gateway, &out.join("drafts.jsonl"), &out.join("extraction_failures.jsonl"))?;
    let (registries, _) =
        merge_stage(&corpus, &extraction.drafts, gateway, &options.merge, true, &out.join("registries"))?;
    write_stats(&registries, create_file(&out.join("stats.csv"))?)?;

    let venue_registries: Vec<&VenueRegistries> = registries.iter().filter(|r| r.year.is_some()).collect();
    let template = basic_template();
    let mut raws: Vec<RawIdea> = Vec::new();
    let mut per_venue: Vec<(String, usize)> = Vec::new();
    for r in &venue_registries {
        let disks = [r.disk(llull_core::Disk::A), r.disk(llull_core::Disk::B), r.disk(llull_core::Disk::C)];
        match enumerate_top(&disks, options.k, &template) {
            Ok(stream) => {
                let before = raws.len();
                raws.extend(stream);
                per_venue.push((r.label(), raws.len() - before));
            }
            Err(e) => log::warn!("{}: no ideas generated: {e}", r.label()),
        }
    }
    write_jsonl(&out.join("raw_ideas.jsonl"), &raws)?;

    let rewritten = rewrite_stage(
        &raws,
        gateway,
        &out.join("ideas.jsonl"),
        &out.join("titles.txt"),
        &out.join("rewrite_failures.jsonl"),
    )?;

    let references = metrics::read_titles(&options.references)
        .with_context(|| format!("reading {}", options.references.display()))?;
    let mut metric_rows = Vec::new();
    for (label, _) in &per_venue {
        let titles: Vec<&str> = rewritten
            .records
            .iter()
            .filter(|rec| rec.raw.venue.as_deref() == Some(label.as_str()))
            .map(|rec| rec.title.as_str())
            .collect();
        if titles.is_empty() {
            continue;
        }
        metric_rows.push(report(&titles, &references, label, options.similarity)?);
    }
    write_metrics(&metric_rows, &out.join("metrics.csv"))?;

    let venue_only: Vec<VenueRegistries> = venue_registries.into_iter().cloned().collect();
    let coverage = coverage_stage(&corpus, &venue_only, gateway, &options.coverage, &out.join("coverage"))?;
    if coverage.overall.papers != corpus.len() {
        bail!("coverage saw {} papers, corpus has {}", coverage.overall.papers, corpus.len());
    }

    Ok(PipelineSummary {
        papers: corpus.len(),
        drafts: extraction.drafts.len(),
        extraction_failures: extraction.failures.len(),
        registries: registries.len(),
        raw_ideas: raws.len(),
        titles: rewritten.records.len(),
        rewrite_failures: rewritten.failures.len(),
        metrics: metric_rows,
        coverage,
    })
}
