//! The `llull` binary: subcommand behaviour, written files and exit codes.

mod common;

use std::fs;

use common::*;
use serde_json::Value;

fn lines(path: &std::path::Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn help_enumerates_subcommands_and_flags() {
    let out = llull(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["ingest", "extract", "merge", "stats", "generate", "rewrite", "eval", "project", "coverage", "serve"] {
        assert!(text.contains(cmd), "{cmd} missing from --help");
    }
    let gen = String::from_utf8(llull(&["generate", "--help"]).stdout).unwrap();
    for flag in [
        "--registries",
        "--venue",
        "--year",
        "--mode",
        "--k",
        "--n",
        "--seed",
        "--template",
        "--reuse",
        "--subsample",
        "--out",
    ] {
        assert!(gen.contains(flag), "{flag} missing from generate --help");
    }
    let cov = String::from_utf8(llull(&["coverage", "--help"]).stdout).unwrap();
    for flag in ["--threshold", "--budget", "--gateway-mode", "--cache", "--gateway-config", "--model"] {
        assert!(cov.contains(flag), "{flag} missing from coverage --help");
    }
}

#[test]
fn config_and_runtime_failures_have_distinct_codes() {
    assert_eq!(llull(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(llull(&["stats", "--registries", "/nonexistent/registries"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad_mode = llull(&[
        "extract",
        "--corpus",
        s(&corpus_path()),
        "--out",
        s(&dir.path().join("d.jsonl")),
        "--gateway-mode",
        "sideways",
    ]);
    assert_eq!(bad_mode.status.code(), Some(2));
    // live mode without an endpoint is a configuration problem
    let no_endpoint = llull(&[
        "extract",
        "--corpus",
        s(&corpus_path()),
        "--out",
        s(&dir.path().join("d.jsonl")),
        "--gateway-mode",
        "live",
    ]);
    assert_eq!(no_endpoint.status.code(), Some(2));

    // an existing but empty reference file fails at evaluation time
    let ideas = dir.path().join("ideas.txt");
    let refs = dir.path().join("refs.txt");
    fs::write(&ideas, "Mamba for Question Answering\n").unwrap();
    fs::write(&refs, "").unwrap();
    assert_eq!(llull(&["eval", "--ideas", s(&ideas), "--refs", s(&refs)]).status.code(), Some(1));
}

#[test]
fn ingest_filters_by_venue_and_year() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("acl24.jsonl");
    let r = llull(&["ingest", "--input", s(&corpus_path()), "--out", s(&out), "--venue", "ACL", "--year", "2024"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(lines(&out), 40);
    for line in fs::read_to_string(&out).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!((v["venue"].as_str(), v["year"].as_i64()), (Some("ACL"), Some(2024)));
    }
    let sampled = dir.path().join("sample.jsonl");
    let r = llull(&["ingest", "--input", s(&corpus_path()), "--out", s(&sampled), "--sample", "10", "--seed", "7"]);
    assert!(r.status.success());
    assert_eq!(lines(&sampled), 10);
}

#[test]
fn generate_top_two_writes_eight_ideas() {
    let dir = tempfile::tempdir().unwrap();
    replay_registries(dir.path());
    let regs = dir.path().join("registries");
    let out = dir.path().join("k2.jsonl");
    let r = llull(&[
        "generate",
        "--registries",
        s(&regs),
        "--venue",
        "ACL",
        "--year",
        "2024",
        "--mode",
        "top",
        "--k",
        "2",
        "--out",
        s(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(lines(&out), 8);

    let random = dir.path().join("random.jsonl");
    let args = [
        "generate",
        "--registries",
        s(&regs),
        "--venue",
        "ACL",
        "--mode",
        "random",
        "--n",
        "6",
        "--seed",
        "3",
        "--out",
        s(&random),
    ];
    assert!(llull(&args).status.success());
    let first = fs::read(&random).unwrap();
    assert!(llull(&args).status.success());
    assert_eq!(fs::read(&random).unwrap(), first);
    assert_eq!(lines(&random), 6);

    let bad = llull(&[
        "generate",
        "--registries",
        s(&regs),
        "--venue",
        "ACL",
        "--template",
        "no slots here",
        "--out",
        s(&out),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn eval_csv_matches_metric_oracle() {
    let oracle: Value =
        serde_json::from_str(&fs::read_to_string(fixtures().join("oracles/metrics_oracle.json")).unwrap()).unwrap();
    let sim = &oracle["similarity"];
    let join = |v: &Value| v.as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect::<Vec<_>>().join("\n");
    let dir = tempfile::tempdir().unwrap();
    let (ideas, refs, out) = (dir.path().join("f.txt"), dir.path().join("g.txt"), dir.path().join("m.csv"));
    fs::write(&ideas, join(&sim["ideas"])).unwrap();
    fs::write(&refs, join(&sim["references"])).unwrap();
    let r = llull(&["eval", "--ideas", s(&ideas), "--refs", s(&refs), "--label", "fixture", "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));

    let mut reader = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(header, ["Reference", "# Ideas", "# Words (tokens)", "Diversity", "Similarity", "Relevance"]);
    let row = reader.records().next().unwrap().unwrap();
    assert_eq!((&row[0], &row[1]), ("fixture", "3"));
    let num = |i: usize| row[i].parse::<f64>().unwrap();
    // the CSV carries six decimals
    assert!((num(3) - sim["distinct1"].as_f64().unwrap()).abs() <= 5e-7);
    assert!((num(4) - sim["max"].as_f64().unwrap()).abs() <= 5e-7);
}

#[test]
fn coverage_csv_has_venue_columns_and_overall() {
    let dir = tempfile::tempdir().unwrap();
    replay_registries(dir.path());
    let venue_regs = dir.path().join("venue_registries");
    // coverage uses the venue-year registries; drop the pooled set
    let regs = llull_core::registry::load_registries(&dir.path().join("registries")).unwrap();
    let venue_only: Vec<_> = regs.into_iter().filter(|r| r.year.is_some()).collect();
    llull_core::registry::save_registries(&venue_regs, &venue_only).unwrap();

    let out = dir.path().join("cov");
    let r = llull_replay(&[
        "coverage",
        "--corpus",
        s(&corpus_path()),
        "--registries",
        s(&venue_regs),
        "--out",
        s(&out),
        "--threshold",
        "0.30",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(out.join("coverage.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "Metric,ACL 2024,ACL 2023,ICLR 2024,COLM 2024,Overall");
    assert_eq!(rows[1], "# Papers,40,20,25,15,100");
    assert!(rows[2].starts_with("Decomp. (%),"));
    assert!(rows[3].starts_with("Recon. (%),"));
    assert_eq!(lines(&out.join("decompositions.jsonl")), 100);

    assert_eq!(
        llull_replay(&[
            "coverage",
            "--corpus",
            s(&corpus_path()),
            "--registries",
            s(&venue_regs),
            "--out",
            s(&out),
            "--threshold",
            "1.5"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn stage_commands_chain_in_replay() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let ok = |o: std::process::Output| assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    ok(llull(&["ingest", "--input", s(&corpus_path()), "--out", s(&p("corpus.jsonl"))]));
    ok(llull_replay(&["extract", "--corpus", s(&p("corpus.jsonl")), "--out", s(&p("drafts.jsonl"))]));
    assert_eq!(lines(&p("drafts.jsonl")), 100);
    ok(llull_replay(&[
        "merge",
        "--corpus",
        s(&p("corpus.jsonl")),
        "--drafts",
        s(&p("drafts.jsonl")),
        "--out",
        s(&p("reg")),
    ]));
    ok(llull(&["stats", "--registries", s(&p("reg")), "--out", s(&p("stats.csv"))]));
    assert!(fs::read_to_string(p("stats.csv"))
        .unwrap()
        .starts_with("Stats.,ACL 2024,ACL 2023,ICLR 2024,COLM 2024,All\n# Papers,40,20,25,15,100\n"));
    ok(llull(&["generate", "--registries", s(&p("reg")), "--venue", "ICLR", "--k", "3", "--out", s(&p("raw.jsonl"))]));
    assert_eq!(lines(&p("raw.jsonl")), 27);
    ok(llull_replay(&[
        "rewrite",
        "--ideas",
        s(&p("raw.jsonl")),
        "--out",
        s(&p("ideas.jsonl")),
        "--titles",
        s(&p("titles.txt")),
    ]));
    assert_eq!(lines(&p("titles.txt")), 27);
    ok(llull(&[
        "project",
        "--ideas",
        s(&p("ideas.jsonl")),
        "--out",
        s(&p("proj")),
        "--iterations",
        "300",
        "--perplexity",
        "5",
        "--resolution",
        "16",
    ]));
    let coords = fs::read_to_string(p("proj/projection.csv")).unwrap();
    assert_eq!(coords.lines().count(), 28);
    assert!(p("proj/heatmap_ICLR_2024.svg").is_file());
}
