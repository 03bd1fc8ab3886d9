//! Deterministic synthetic papers built from the seed vocabulary.

use std::collections::BTreeMap;

use llull_core::corpus::PaperRecord;
use llull_core::machine::{parse_template, Slot};
use llull_core::rng::{seeded_rng, SeededRng};
use llull_core::Disk;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::vocab::{Entry, DOMAINS, METHODS, TEMPLATES, THEMES, VENUES};

pub const CORPUS_SEED: u64 = 2024;

pub fn vocab(disk: Disk) -> &'static [Entry] {
    match disk {
        Disk::A => THEMES,
        Disk::B => DOMAINS,
        Disk::C => METHODS,
    }
}

/// One element as it appears in a paper: vocabulary index plus the surface
/// form the "author" used.
#[derive(Debug, Clone)]
pub struct Mention {
    pub index: usize,
    pub surface: String,
}

impl Mention {
    pub fn canonical(&self, disk: Disk) -> &'static str {
        vocab(disk)[self.index].0
    }
}

#[derive(Debug, Clone)]
pub struct Paper {
    pub record: PaperRecord,
    pub mentions: [Vec<Mention>; 3],
    pub template: &'static str,
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Venue-specific popularity: a seeded permutation of the vocabulary with
/// Zipf-like weights, so venues favour different elements.
fn venue_weights(rng: &mut SeededRng, len: usize) -> WeightedIndex<f64> {
    let mut ranks: Vec<usize> = (0..len).collect();
    ranks.shuffle(rng);
    WeightedIndex::new(ranks.iter().map(|&r| 1.0 / ((r + 3) as f64).powf(0.8))).expect("positive weights")
}

fn pick(rng: &mut SeededRng, weights: &WeightedIndex<f64>, disk: Disk, count: usize) -> Vec<Mention> {
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < count {
        let i = weights.sample(rng);
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    chosen
        .into_iter()
        .map(|index| {
            let (canonical, variants) = vocab(disk)[index];
            let surface = if !variants.is_empty() && rng.random_bool(0.35) {
                variants[rng.random_range(0..variants.len())]
            } else {
                canonical
            };
            Mention { index, surface: surface.to_owned() }
        })
        .collect()
}

fn join_list(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => (*one).to_owned(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

fn abstract_for(rng: &mut SeededRng, mentions: &[Vec<Mention>; 3]) -> String {
    let s = |d: usize| mentions[d].iter().map(|m| m.surface.as_str()).collect::<Vec<_>>();
    let (a, b, c) = (join_list(&s(0)), join_list(&s(1)), join_list(&s(2)));
    let openers = [
        format!("Progress in {b} has been uneven, and the role of {a} remains poorly understood."),
        format!("We study {b} from the perspective of {a}."),
        format!("Existing approaches to {b} rarely account for {a}."),
    ];
    let middles = [
        format!("We propose a framework built on {c} that makes this explicit."),
        format!("Our method combines {c} with a lightweight training objective."),
        format!("We revisit {c} and show how it can be adapted with minimal changes."),
    ];
    let closers = [
        format!("Experiments on {} benchmarks show consistent gains over strong baselines.", rng.random_range(3..9)),
        "Analysis reveals when the approach helps and when it does not.".to_owned(),
        format!("We release code and data to support further work on {a}."),
    ];
    let i = rng.random_range(0..3);
    let j = rng.random_range(0..3);
    let k = rng.random_range(0..3);
    format!("{} {} {}", openers[i], middles[j], closers[k])
}

pub fn generate() -> Vec<Paper> {
    let mut rng = seeded_rng(CORPUS_SEED);
    let mut papers = Vec::new();
    for (vi, &(venue, year, count)) in VENUES.iter().enumerate() {
        let mut wrng = seeded_rng(100 + vi as u64);
        let weights = Disk::ALL.map(|d| venue_weights(&mut wrng, vocab(d).len()));
        for n in 0..count {
            let template_src = TEMPLATES[rng.random_range(0..TEMPLATES.len())];
            let template = parse_template(template_src).expect("vocabulary templates parse");
            let mentions = Disk::ALL.map(|d| {
                let count = template.arity(d).max(rng.random_range(1..=2));
                pick(&mut rng, &weights[d.index()], d, count)
            });
            let bindings: BTreeMap<Slot, String> = template
                .slots()
                .iter()
                .map(|s| (*s, mentions[s.disk.index()][s.index as usize - 1].surface.clone()))
                .collect();
            let title = capitalize(&template.render(&bindings).expect("all slots bound"));
            let abstract_text = abstract_for(&mut rng, &mentions);
            papers.push(Paper {
                record: PaperRecord {
                    id: format!("{}-{}-{:03}", venue.to_lowercase(), year, n + 1),
                    title,
                    abstract_text,
                    venue: venue.to_owned(),
                    year,
                },
                mentions,
                template: template_src,
            });
        }
    }
    papers
}

/// Published-style reference titles, built from the same vocabulary with
/// different phrasing so overlap with generated titles is partial.
pub fn reference_titles(count: usize) -> Vec<String> {
    let mut rng = seeded_rng(CORPUS_SEED + 1);
    let patterns = [
        "{A} Matters for {B}: Evidence from {C}",
        "Improving {B} with {C}",
        "A Study of {A} in {B}",
        "{C} Are {A} Learners for {B}",
        "Benchmarking {C} on {B}",
        "Understanding {A} through {C}",
        "{B} Needs {A}",
        "Efficient {B} via {C} and {A}",
    ];
    let mut out: Vec<String> = Vec::new();
    while out.len() < count {
        let p = patterns[rng.random_range(0..patterns.len())];
        let a = THEMES[rng.random_range(0..THEMES.len())].0;
        let b = DOMAINS[rng.random_range(0..DOMAINS.len())].0;
        let c = METHODS[rng.random_range(0..METHODS.len())].0;
        let t = capitalize(&p.replace("{A}", a).replace("{B}", b).replace("{C}", c));
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}
