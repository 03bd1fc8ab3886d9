//! Regenerates `fixtures/mini_corpus.jsonl`, `fixtures/reference_titles.txt`
//! and the recorded response cache in `fixtures/cache`.
//!
//! Usage: `cargo run -p xtask --bin make-fixtures [-- <fixtures dir>]`

mod corpus;
mod script;
mod vocab;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use llull_cli::pipeline::{run_pipeline, PipelineOptions};
use llull_core::gateway::{Gateway, Mode, RetryPolicy};

pub const FIXTURE_MODEL: &str = "fixture-model";
const REFERENCE_COUNT: usize = 160;

fn main() -> Result<()> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    fs::create_dir_all(&dir)?;

    let papers = corpus::generate();
    let corpus_path = dir.join("mini_corpus.jsonl");
    let mut w = fs::File::create(&corpus_path)?;
    for p in &papers {
        writeln!(w, "{}", serde_json::to_string(&p.record)?)?;
    }
    let refs_path = dir.join("reference_titles.txt");
    let mut refs = corpus::reference_titles(REFERENCE_COUNT).join("\n");
    refs.push('\n');
    fs::write(&refs_path, refs)?;

    let cache = dir.join("cache");
    if cache.exists() {
        fs::remove_dir_all(&cache).with_context(|| format!("clearing {}", cache.display()))?;
    }
    let gateway = Gateway::builder(Mode::Record)
        .model_name(FIXTURE_MODEL)
        .cache_dir(&cache)
        .retry(RetryPolicy::none())
        .parallelism(4)
        .transport(Arc::new(script::ScriptedModel::new(papers)))
        .build()?;
    let out = tempfile::tempdir()?;
    let summary = run_pipeline(&corpus_path, out.path(), &gateway, &PipelineOptions::new(&refs_path))?;
    let entries = gateway.cache().map_or(0, |c| c.len());
    println!(
        "{} papers, {} drafts, {} registries, {} raw ideas, {} titles, {} cached responses",
        summary.papers, summary.drafts, summary.registries, summary.raw_ideas, summary.titles, entries
    );
    println!(
        "coverage: decomp {:.1}%  recon {:.1}%",
        summary.coverage.overall.decomp_pct(),
        summary.coverage.overall.recon_pct()
    );
    Ok(())
}
