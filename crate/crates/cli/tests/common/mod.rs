#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use llull_cli::pipeline::{extract_stage, load_corpus, merge_stage};
use llull_core::gateway::Gateway;
use llull_core::registry::{MergeOptions, VenueRegistries};

pub const FIXTURE_MODEL: &str = "fixture-model";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn corpus_path() -> PathBuf {
    fixtures().join("mini_corpus.jsonl")
}

pub fn references_path() -> PathBuf {
    fixtures().join("reference_titles.txt")
}

pub fn replay_gateway() -> Gateway {
    Gateway::replay(fixtures().join("cache"), FIXTURE_MODEL).expect("fixture cache opens")
}

pub fn gateway_flags() -> Vec<String> {
    vec![
        "--gateway-mode".into(),
        "replay".into(),
        "--cache".into(),
        fixtures().join("cache").display().to_string(),
        "--model".into(),
        FIXTURE_MODEL.into(),
    ]
}

/// Extract and merge the mini-corpus in replay mode; registries are also
/// saved under `dir`.
pub fn replay_registries(dir: &Path) -> Vec<VenueRegistries> {
    let gw = replay_gateway();
    let corpus = load_corpus(&corpus_path()).unwrap();
    let outcome = extract_stage(&corpus, &gw, &dir.join("drafts.jsonl"), &dir.join("failures.jsonl")).unwrap();
    let (regs, _) =
        merge_stage(&corpus, &outcome.drafts, &gw, &MergeOptions::default(), true, &dir.join("registries")).unwrap();
    regs
}

pub fn llull(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llull")).args(args).output().expect("binary runs")
}

pub fn llull_replay(args: &[&str]) -> Output {
    let mut all: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    all.extend(gateway_flags());
    Command::new(env!("CARGO_BIN_EXE_llull")).args(&all).output().expect("binary runs")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
