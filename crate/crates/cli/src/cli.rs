//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use llull_core::corpus::{self, Format};
use llull_core::coverage::CoverageOptions;
use llull_core::gateway::{Gateway, GatewayConfig, Mode};
use llull_core::jsonl;
use llull_core::machine::{basic_template, enumerate_top, parse_template, sample_random, subsample, RawIdea, Reuse};
use llull_core::metrics::{self, format_report_table, report, Aggregate};
use llull_core::projection::export::RunInfo;
use llull_core::projection::{export, tfidf, tsne, Document, TsneParams};
use llull_core::registry::{load_registries, MergeOptions, VenueRegistries};
use llull_core::rewriting::IdeaRecord;
use llull_core::Disk;

use crate::pipeline::{self, create_file};
use crate::server::{self, ServerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Marks errors caused by bad arguments or configuration rather than by a
/// failing run.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "llull", version, about = "Mine concept disks from papers and recombine them into research ideas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct GatewayArgs {
    /// live: provider only; record: provider + cache; replay: cache only
    #[arg(long, default_value = "replay", value_parser = parse_mode)]
    pub gateway_mode: Mode,
    /// Response cache directory
    #[arg(long, default_value = "cache")]
    pub cache: PathBuf,
    /// TOML file with endpoint, model, decoding, parallelism and retry settings
    #[arg(long)]
    pub gateway_config: Option<PathBuf>,
    /// Model label; overrides the config file. Part of every cache key.
    #[arg(long)]
    pub model: Option<String>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

impl GatewayArgs {
    pub fn build(&self) -> Result<Gateway> {
        let cfg = match &self.gateway_config {
            Some(path) => GatewayConfig::load(path).map_err(|e| config_err(e.to_string()))?,
            None => GatewayConfig::default(),
        };
        let mut builder = Gateway::builder(self.gateway_mode).config(&cfg);
        if let Some(model) = &self.model {
            builder = builder.model_name(model);
        }
        if self.gateway_mode != Mode::Live {
            builder = builder.cache_dir(&self.cache);
        }
        if self.gateway_mode != Mode::Replay {
            let transport = cfg.http_transport().map_err(|e| config_err(e.to_string()))?;
            builder = builder.transport(Arc::new(transport));
        }
        builder.build().map_err(|e| config_err(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GenerateMode {
    Top,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReuseArg {
    Batch,
    Idea,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimilarityArg {
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a paper corpus and write it as normalized JSONL
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Input format; guessed from the extension when omitted
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rejects: Option<PathBuf>,
        #[arg(long)]
        venue: Option<String>,
        #[arg(long)]
        year: Option<i32>,
        /// Keep a seeded uniform sample of this many papers
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Extract theme/domain/method elements and templates from each paper
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        failures: Option<PathBuf>,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
    /// Merge extracted elements into per-venue registries
    Merge {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        drafts: PathBuf,
        /// Registry output directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = llull_core::registry::DEFAULT_CHUNK_SIZE)]
        chunk_size: usize,
        /// Minimum visits for elements and templates of the pooled registry
        #[arg(long, default_value_t = llull_core::registry::DEFAULT_MIN_VISITS)]
        min_visits: u64,
        /// Skip the pooled cross-venue registry
        #[arg(long)]
        no_pooled: bool,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
    /// Print registry sizes per venue as CSV
    Stats {
        #[arg(long)]
        registries: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate raw ideas from a venue's registries
    Generate {
        #[arg(long)]
        registries: PathBuf,
        #[arg(long)]
        venue: String,
        #[arg(long)]
        year: Option<i32>,
        #[arg(long, value_enum, default_value = "top")]
        mode: GenerateMode,
        /// Elements per disk for top enumeration
        #[arg(long, default_value_t = 20)]
        k: usize,
        /// Batch size for random sampling
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Template source, or "basic"
        #[arg(long, default_value = "basic")]
        template: String,
        /// Scope of the no-reuse rule for random sampling
        #[arg(long, value_enum, default_value = "batch")]
        reuse: ReuseArg,
        /// Keep a uniform, order-preserving subsample of this many ideas
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite raw ideas into titles
    Rewrite {
        #[arg(long)]
        ideas: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Plain one-title-per-line export
        #[arg(long)]
        titles: Option<PathBuf>,
        #[arg(long)]
        failures: Option<PathBuf>,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
    /// Diversity, similarity and relevance of titles against references
    Eval {
        /// Titles: plain text, one per line, or idea JSONL
        #[arg(long)]
        ideas: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        label: Option<String>,
        #[arg(long, value_enum, default_value = "max")]
        similarity: SimilarityArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// TF-IDF + t-SNE projection of raw ideas with per-venue heatmaps
    Project {
        /// Raw-idea or idea JSONL files; all are embedded jointly
        #[arg(long, required = true, num_args = 1..)]
        ideas: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        /// Uniformly subsample each venue to at most this many ideas first
        #[arg(long)]
        per_venue: Option<usize>,
    },
    /// Decompose and reconstruct corpus titles with the registries
    Coverage {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        registries: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = llull_core::coverage::DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Maximum elements per disk listed in the decomposition prompt
        #[arg(long, default_value_t = llull_core::coverage::DEFAULT_BUDGET)]
        budget: usize,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
    /// Serve the HTTP API for the explorer
    Serve {
        #[arg(long)]
        registries: PathBuf,
        /// Directory whose subdirectories are projection runs
        #[arg(long)]
        projections: Option<PathBuf>,
        #[arg(long, default_value = "favorites.json")]
        favorites: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Pool size per disk for unlocked spin slots
        #[arg(long, default_value_t = server::DEFAULT_POOL_K)]
        pool_k: usize,
        /// Allowed CORS origin; any origin when omitted
        #[arg(long)]
        allow_origin: Option<String>,
        #[command(flatten)]
        gateway: GatewayArgs,
    },
}

/// Parse arguments, run, and map the outcome to an exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<ConfigError>() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn check_input(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(config_err(format!("{} does not exist", path.display())))
    }
}

fn registries_from(path: &Path) -> Result<Vec<VenueRegistries>> {
    check_input(path)?;
    load_registries(path).map_err(|e| config_err(e.to_string()))
}

/// Venue lookup by name and optional year; without a year the latest year
/// wins, and "All" selects the pooled registry.
pub fn find_venue<'a>(
    registries: &'a [VenueRegistries],
    venue: &str,
    year: Option<i32>,
) -> Option<&'a VenueRegistries> {
    let venue = venue.trim();
    if let Some(r) = registries.iter().find(|r| r.label() == venue && year.is_none()) {
        return Some(r);
    }
    registries
        .iter()
        .filter(|r| r.venue.eq_ignore_ascii_case(venue) && (year.is_none() || r.year == year))
        .max_by_key(|r| r.year)
}

fn read_raw_ideas(path: &Path) -> Result<Vec<RawIdea>> {
    check_input(path)?;
    jsonl::read_file(path).with_context(|| format!("reading {}", path.display()))
}

/// Documents for projection from raw-idea or idea JSONL lines.
fn read_documents(path: &Path) -> Result<Vec<Document>> {
    check_input(path)?;
    let values: Vec<serde_json::Value> =
        jsonl::read_file(path).with_context(|| format!("reading {}", path.display()))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("ideas");
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let raw = if v.get("raw").is_some() {
                serde_json::from_value::<IdeaRecord>(v)?.raw
            } else {
                serde_json::from_value::<RawIdea>(v)?
            };
            Ok(Document {
                idea_ref: format!("{stem}:{}", i + 1),
                venue: raw.venue.clone().unwrap_or_else(|| stem.to_owned()),
                text: raw.text,
            })
        })
        .collect::<Result<_, serde_json::Error>>()
        .with_context(|| format!("parsing {}", path.display()))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest { input, format, out, rejects, venue, year, sample, seed } => {
            check_input(&input)?;
            let format = match format {
                Some(FormatArg::Jsonl) => Format::Jsonl,
                Some(FormatArg::Csv) => Format::Csv,
                None => Format::from_path(&input),
            };
            let ingested = corpus::ingest(&input, format)?;
            let mut kept = corpus::filter(&ingested.corpus, venue.as_deref(), year);
            if let Some(n) = sample {
                kept = corpus::sample(&kept, n, seed)?;
            }
            let mut w = create_file(&out)?;
            kept.write_jsonl(&mut w)?;
            w.flush()?;
            if let Some(path) = rejects {
                let mut w = create_file(&path)?;
                corpus::write_rejects(&ingested.rejects, &mut w)?;
                w.flush()?;
            }
            eprintln!("{} papers kept, {} rejected", kept.len(), ingested.rejects.len());
        }
        Command::Extract { corpus, out, failures, gateway } => {
            check_input(&corpus)?;
            let gw = gateway.build()?;
            let corpus = pipeline::load_corpus(&corpus)?;
            let failures = failures.unwrap_or_else(|| out.with_extension("failures.jsonl"));
            let outcome = pipeline::extract_stage(&corpus, &gw, &out, &failures)?;
            eprintln!("{} drafts, {} failures", outcome.drafts.len(), outcome.failures.len());
        }
        Command::Merge { corpus, drafts, out, chunk_size, min_visits, no_pooled, gateway } => {
            check_input(&corpus)?;
            check_input(&drafts)?;
            let gw = gateway.build()?;
            let corpus = pipeline::load_corpus(&corpus)?;
            let drafts = jsonl::read_file(&drafts).with_context(|| format!("reading {}", drafts.display()))?;
            let options = MergeOptions { chunk_size, min_visits };
            let (registries, report) = pipeline::merge_stage(&corpus, &drafts, &gw, &options, !no_pooled, &out)?;
            pipeline::write_stats(&registries, io::stdout().lock())?;
            eprintln!("{} merge notes, {} templates dropped", report.notes.len(), report.dropped_templates.len());
        }
        Command::Stats { registries, out } => {
            let regs = registries_from(&registries)?;
            match out {
                Some(path) => {
                    let mut w = create_file(&path)?;
                    pipeline::write_stats(&regs, &mut w)?;
                    w.flush()?;
                }
                None => pipeline::write_stats(&regs, io::stdout().lock())?,
            }
        }
        Command::Generate { registries, venue, year, mode, k, n, seed, template, reuse, subsample: keep, out } => {
            let regs = registries_from(&registries)?;
            let r = find_venue(&regs, &venue, year)
                .ok_or_else(|| config_err(format!("no registry for venue {venue:?}")))?;
            let template = if template.trim().eq_ignore_ascii_case("basic") {
                basic_template()
            } else {
                parse_template(&template).map_err(|e| config_err(e.to_string()))?
            };
            let disks = [r.disk(Disk::A), r.disk(Disk::B), r.disk(Disk::C)];
            let mut ideas: Vec<RawIdea> = match mode {
                GenerateMode::Top => enumerate_top(&disks, k, &template)?.collect(),
                GenerateMode::Random => {
                    let reuse = match reuse {
                        ReuseArg::Batch => Reuse::PerBatch,
                        ReuseArg::Idea => Reuse::PerIdea,
                    };
                    sample_random(&disks, &template, n, seed, reuse)?
                }
            };
            if let Some(m) = keep {
                ideas = subsample(ideas, m, seed);
            }
            pipeline::write_jsonl(&out, &ideas)?;
            eprintln!("{} raw ideas written to {}", ideas.len(), out.display());
        }
        Command::Rewrite { ideas, out, titles, failures, gateway } => {
            let raws = read_raw_ideas(&ideas)?;
            let gw = gateway.build()?;
            let titles = titles.unwrap_or_else(|| out.with_extension("txt"));
            let failures = failures.unwrap_or_else(|| out.with_extension("failures.jsonl"));
            let outcome = pipeline::rewrite_stage(&raws, &gw, &out, &titles, &failures)?;
            eprintln!("{} titles, {} failures", outcome.records.len(), outcome.failures.len());
        }
        Command::Eval { ideas, refs, label, similarity, out } => {
            check_input(&ideas)?;
            check_input(&refs)?;
            let idea_titles = metrics::read_titles(&ideas)?;
            let ref_titles = metrics::read_titles(&refs)?;
            let aggregate = match similarity {
                SimilarityArg::Max => Aggregate::Max,
                SimilarityArg::Mean => Aggregate::Mean,
            };
            let label =
                label.unwrap_or_else(|| refs.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
            let r = report(&idea_titles, &ref_titles, &label, aggregate)?;
            match out {
                Some(path) => pipeline::write_metrics(std::slice::from_ref(&r), &path)?,
                None => metrics::write_report_csv(std::slice::from_ref(&r), io::stdout().lock())?,
            }
            eprint!("{}", format_report_table(&[r]));
        }
        Command::Project { ideas, out, perplexity, iterations, seed, resolution, per_venue } => {
            let mut docs = Vec::new();
            for path in &ideas {
                docs.extend(read_documents(path)?);
            }
            if let Some(limit) = per_venue {
                docs = subsample_per_venue(docs, limit, seed);
            }
            let model = tfidf(&docs).map_err(|e| config_err(e.to_string()))?;
            let params = TsneParams { perplexity, iterations, seed, ..TsneParams::default() };
            let run = tsne(&model.vectors, &params).map_err(|e| config_err(e.to_string()))?;
            let manifest = export(&out, &run.points, resolution, Some(RunInfo::new(&params, &run)))?;
            eprintln!(
                "{} points, KL {:.4} after exaggeration, {:.4} final; {} heatmaps in {}",
                manifest.points,
                run.kl_after_exaggeration,
                run.kl_final,
                manifest.panels.len(),
                out.display()
            );
        }
        Command::Coverage { corpus, registries, out, threshold, budget, gateway } => {
            check_input(&corpus)?;
            if !(0.0..=1.0).contains(&threshold) {
                return Err(config_err("threshold must be within [0, 1]"));
            }
            let regs = registries_from(&registries)?;
            let gw = gateway.build()?;
            let corpus = pipeline::load_corpus(&corpus)?;
            let report = pipeline::coverage_stage(&corpus, &regs, &gw, &CoverageOptions { budget, threshold }, &out)?;
            write_coverage_summary(&report)?;
        }
        Command::Serve { registries, projections, favorites, addr, pool_k, allow_origin, gateway } => {
            let regs = registries_from(&registries)?;
            let gw = gateway.build()?;
            let config = ServerConfig { pool_k, projections, favorites, allow_origin };
            let addr: std::net::SocketAddr =
                addr.parse().map_err(|e| config_err(format!("bad address {addr:?}: {e}")))?;
            server::serve_blocking(addr, regs, Some(gw), config)?;
        }
    }
    Ok(())
}

fn write_coverage_summary(report: &llull_core::coverage::CoverageReport) -> Result<()> {
    let mut err = io::stderr().lock();
    for row in report.venues.iter().chain(std::iter::once(&report.overall)) {
        writeln!(
            err,
            "{:<16} decomp {:>5.1}%  recon {:>5.1}%  ({} papers)",
            row.label,
            row.decomp_pct(),
            row.recon_pct(),
            row.papers
        )?;
    }
    Ok(())
}

fn subsample_per_venue(docs: Vec<Document>, limit: usize, seed: u64) -> Vec<Document> {
    use rand::seq::index;
    let mut venues: Vec<String> = docs.iter().map(|d| d.venue.clone()).collect();
    venues.sort();
    venues.dedup();
    let mut keep = vec![false; docs.len()];
    let mut rng = llull_core::rng::seeded_rng(seed);
    for v in venues {
        let idx: Vec<usize> = (0..docs.len()).filter(|&i| docs[i].venue == v).collect();
        if idx.len() <= limit {
            idx.iter().for_each(|&i| keep[i] = true);
        } else {
            for j in index::sample(&mut rng, idx.len(), limit) {
                keep[idx[j]] = true;
            }
        }
    }
    docs.into_iter().zip(keep).filter_map(|(d, k)| k.then_some(d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn venue(name: &str, year: Option<i32>) -> VenueRegistries {
        VenueRegistries::empty(name, year)
    }

    #[test]
    fn venue_lookup_prefers_latest_year() {
        let regs = [venue("ACL", Some(2023)), venue("ACL", Some(2024)), venue("ICLR", Some(2024)), venue("All", None)];
        assert_eq!(find_venue(&regs, "ACL", None).unwrap().year, Some(2024));
        assert_eq!(find_venue(&regs, "acl", Some(2023)).unwrap().year, Some(2023));
        assert_eq!(find_venue(&regs, "ACL 2023", None).unwrap().year, Some(2023));
        assert_eq!(find_venue(&regs, "All", None).unwrap().venue, "All");
        assert!(find_venue(&regs, "ACL", Some(2019)).is_none());
        assert!(find_venue(&regs, "COLM", None).is_none());
    }

    #[test]
    fn per_venue_subsample_caps_each_venue() {
        let docs: Vec<Document> = (0..30)
            .map(|i| Document {
                idea_ref: i.to_string(),
                venue: if i < 25 { "A" } else { "B" }.into(),
                text: format!("t{i}"),
            })
            .collect();
        let kept = subsample_per_venue(docs.clone(), 10, 4);
        assert_eq!(kept.iter().filter(|d| d.venue == "A").count(), 10);
        assert_eq!(kept.iter().filter(|d| d.venue == "B").count(), 5);
        let again = subsample_per_venue(docs, 10, 4);
        assert_eq!(
            kept.iter().map(|d| &d.idea_ref).collect::<Vec<_>>(),
            again.iter().map(|d| &d.idea_ref).collect::<Vec<_>>()
        );
    }

    #[test]
    fn example_gateway_config_loads() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/gateway.example.toml");
        let cfg = GatewayConfig::load(&path).unwrap();
        assert_eq!(cfg.api_key_env, "LLULL_API_KEY");
        assert!(cfg.http_transport().is_ok());
    }
}
