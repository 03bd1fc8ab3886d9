//! Templates with disk slots and the two raw-idea generators: exhaustive
//! enumeration over the most visited elements, and seeded random sampling.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::index;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disk::Disk;
use crate::registry::{top_k, DiskRegistry};
use crate::rng::seeded_rng;
use crate::text::{collapse_whitespace, normalize};

pub const BASIC_TEMPLATE: &str = "A1, B1, C1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("template {0:?} has no slot markers")]
    NoSlots(String),
    #[error("slot {0} is not bound")]
    MissingBinding(Slot),
    #[error("slots of disk {disk} share the element {element:?}")]
    DuplicateElement { disk: Disk, element: String },
    #[error("disk {disk} has {available} elements, {needed} needed")]
    Insufficient { disk: Disk, needed: usize, available: usize },
    #[error("k must be at least 1")]
    ZeroK,
}

/// A slot marker such as `C2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot {
    pub disk: Disk,
    pub index: u32,
}

impl Slot {
    pub fn new(disk: Disk, index: u32) -> Self {
        Slot { disk, index }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.disk, self.index)
    }
}

impl FromStr for Slot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut chars = s.chars();
        let disk: Disk = chars.next().ok_or("empty slot")?.to_string().parse()?;
        let index = chars.as_str().parse().map_err(|_| format!("bad slot {s:?}"))?;
        Ok(Slot { disk, index })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(Slot),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source: String,
    segments: Vec<Segment>,
    slots: Vec<Slot>,
}

fn slot_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b([ABCabc])([0-9]+)\b").expect("valid regex"))
}

pub fn parse_template(source: &str) -> Result<Template, MachineError> {
    let mut segments = Vec::new();
    let mut slots = Vec::new();
    let mut last = 0;
    for cap in slot_pattern().captures_iter(source) {
        let whole = cap.get(0).expect("match");
        let Ok(index) = cap[2].parse::<u32>() else { continue };
        let disk: Disk = cap[1].parse().expect("letter is a disk");
        if whole.start() > last {
            segments.push(Segment::Text(source[last..whole.start()].to_owned()));
        }
        let slot = Slot { disk, index };
        segments.push(Segment::Slot(slot));
        if !slots.contains(&slot) {
            slots.push(slot);
        }
        last = whole.end();
    }
    if slots.is_empty() {
        return Err(MachineError::NoSlots(source.to_owned()));
    }
    if last < source.len() {
        segments.push(Segment::Text(source[last..].to_owned()));
    }
    Ok(Template { source: source.to_owned(), segments, slots })
}

pub fn basic_template() -> Template {
    parse_template(BASIC_TEMPLATE).expect("basic template parses")
}

impl Template {
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Distinct slots in order of first appearance.
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn arity(&self, disk: Disk) -> usize {
        self.slots.iter().filter(|s| s.disk == disk).count()
    }

    /// The template text outside its slot markers, in order.
    pub fn literal_text(&self) -> Vec<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Text(t) => Some(t.as_str()),
                Segment::Slot(_) => None,
            })
            .collect()
    }

    /// Substitute bound elements for slot markers, whitespace-collapsed.
    pub fn render(&self, bindings: &BTreeMap<Slot, String>) -> Result<String, MachineError> {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(s) => out.push_str(bindings.get(s).ok_or(MachineError::MissingBinding(*s))?),
            }
        }
        Ok(collapse_whitespace(&out))
    }
}

/// How a raw idea was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Sampling {
    Top { k: usize },
    Random { n: usize, seed: u64 },
    Spin { seed: u64 },
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawIdea {
    pub text: String,
    pub template_source: String,
    /// Slot marker (e.g. `"C2"`) to bound canonical element.
    pub bindings: BTreeMap<String, String>,
    pub venue: Option<String>,
    pub sampling: Sampling,
}

impl RawIdea {
    pub fn binding(&self, slot: Slot) -> Option<&str> {
        self.bindings.get(&slot.to_string()).map(String::as_str)
    }
}

pub fn instantiate(
    template: &Template,
    bindings: &BTreeMap<Slot, String>,
    venue: Option<String>,
    sampling: Sampling,
) -> Result<RawIdea, MachineError> {
    for disk in Disk::ALL {
        let mut seen = HashSet::new();
        for slot in template.slots.iter().filter(|s| s.disk == disk) {
            let element = bindings.get(slot).ok_or(MachineError::MissingBinding(*slot))?;
            if !seen.insert(normalize(element)) {
                return Err(MachineError::DuplicateElement { disk, element: element.clone() });
            }
        }
    }
    Ok(RawIdea {
        text: template.render(bindings)?,
        template_source: template.source.clone(),
        bindings: template.slots.iter().map(|s| (s.to_string(), bindings[s].clone())).collect(),
        venue,
        sampling,
    })
}

/// Registries for the three disks, indexed by `Disk::index`.
pub type Disks<'a> = [&'a DiskRegistry; 3];

fn venue_label(disks: &Disks<'_>) -> Option<String> {
    let r = disks[0];
    Some(match r.year {
        Some(y) => format!("{} {}", r.venue, y),
        None => r.venue.clone(),
    })
}

/// Lazy Cartesian product over the top-k elements of each slot's disk.
/// The last slot varies fastest; same-disk repeats are skipped.
pub struct TopEnumeration {
    template: Template,
    pools: Vec<Vec<String>>,
    odometer: Vec<usize>,
    done: bool,
    venue: Option<String>,
    k: usize,
}

impl TopEnumeration {
    fn advance(&mut self) {
        for pos in (0..self.odometer.len()).rev() {
            self.odometer[pos] += 1;
            if self.odometer[pos] < self.pools[pos].len() {
                return;
            }
            self.odometer[pos] = 0;
        }
        self.done = true;
    }

    fn current_is_distinct(&self) -> bool {
        let slots = &self.template.slots;
        (0..slots.len()).all(|i| (0..i).all(|j| slots[i].disk != slots[j].disk || self.odometer[i] != self.odometer[j]))
    }
}

impl Iterator for TopEnumeration {
    type Item = RawIdea;

    fn next(&mut self) -> Option<RawIdea> {
        while !self.done {
            let distinct = self.current_is_distinct();
            let bindings: BTreeMap<Slot, String> = self
                .template
                .slots
                .iter()
                .enumerate()
                .map(|(pos, s)| (*s, self.pools[pos][self.odometer[pos]].clone()))
                .collect();
            self.advance();
            if distinct {
                let idea = instantiate(&self.template, &bindings, self.venue.clone(), Sampling::Top { k: self.k })
                    .expect("distinct bindings over all slots");
                return Some(idea);
            }
        }
        None
    }
}

pub fn enumerate_top(disks: &Disks<'_>, k: usize, template: &Template) -> Result<TopEnumeration, MachineError> {
    if k == 0 {
        return Err(MachineError::ZeroK);
    }
    for disk in Disk::ALL {
        let arity = template.arity(disk);
        let available = disks[disk.index()].groups.len();
        if arity > 0 && (available < k || k < arity) {
            return Err(MachineError::Insufficient { disk, needed: k.max(arity), available });
        }
    }
    let pools = template
        .slots
        .iter()
        .map(|s| top_k(disks[s.disk.index()], k).into_iter().map(|g| g.canonical.clone()).collect())
        .collect();
    Ok(TopEnumeration {
        template: template.clone(),
        pools,
        odometer: vec![0; template.slots.len()],
        done: false,
        venue: venue_label(disks),
        k,
    })
}

/// Number of ideas `enumerate_top` yields: per disk, k·(k−1)·…·(k−arity+1).
pub fn top_count(k: usize, template: &Template) -> usize {
    Disk::ALL.iter().map(|&d| (0..template.arity(d)).map(|i| k.saturating_sub(i)).product::<usize>()).product()
}

/// Scope of the no-reuse rule in random sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reuse {
    /// No element appears in two ideas of the same batch.
    #[default]
    PerBatch,
    /// Elements are only distinct within a single idea.
    PerIdea,
}

pub fn sample_random(
    disks: &Disks<'_>,
    template: &Template,
    n: usize,
    seed: u64,
    reuse: Reuse,
) -> Result<Vec<RawIdea>, MachineError> {
    let mut rng = seeded_rng(seed);
    // picks[disk][idea] = group indices for that disk's slots, in slot order
    let mut picks: Vec<Vec<Vec<usize>>> = Vec::with_capacity(3);
    for disk in Disk::ALL {
        let arity = template.arity(disk);
        let available = disks[disk.index()].groups.len();
        let needed = match reuse {
            Reuse::PerBatch => n * arity,
            Reuse::PerIdea => arity,
        };
        if arity > 0 && available < needed {
            return Err(MachineError::Insufficient { disk, needed, available });
        }
        let per_idea: Vec<Vec<usize>> = match reuse {
            Reuse::PerBatch => {
                let chosen = index::sample(&mut rng, available, needed).into_vec();
                if arity == 0 {
                    vec![Vec::new(); n]
                } else {
                    chosen.chunks(arity).map(<[usize]>::to_vec).collect()
                }
            }
            Reuse::PerIdea => (0..n).map(|_| index::sample(&mut rng, available, arity).into_vec()).collect(),
        };
        picks.push(per_idea);
    }
    let venue = venue_label(disks);
    (0..n)
        .map(|i| {
            let mut cursor = [0usize; 3];
            let bindings = template
                .slots
                .iter()
                .map(|s| {
                    let d = s.disk.index();
                    let g = picks[d][i][cursor[d]];
                    cursor[d] += 1;
                    (*s, disks[d].groups[g].canonical.clone())
                })
                .collect();
            instantiate(template, &bindings, venue.clone(), Sampling::Random { n, seed })
        })
        .collect()
}

/// Uniform order-preserving subsample of `n` ideas.
pub fn subsample(ideas: Vec<RawIdea>, n: usize, seed: u64) -> Vec<RawIdea> {
    if n >= ideas.len() {
        return ideas;
    }
    let mut keep = index::sample(&mut seeded_rng(seed), ideas.len(), n).into_vec();
    keep.sort_unstable();
    let mut keep = keep.into_iter().peekable();
    ideas
        .into_iter()
        .enumerate()
        .filter_map(|(i, idea)| {
            if keep.peek() == Some(&i) {
                keep.next();
                Some(idea)
            } else {
                None
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(pairs: &[(&str, &str)]) -> BTreeMap<Slot, String> {
        pairs.iter().map(|(s, e)| (s.parse().unwrap(), e.to_string())).collect()
    }

    fn reg<S: AsRef<str>>(disk: Disk, names: &[S]) -> DiskRegistry {
        DiskRegistry::from_elements("ACL", Some(2024), disk, names)
    }

    #[test]
    fn parses_comparison_template() {
        let t = parse_template("Comparing C1 and C2 in B1 with A1").unwrap();
        assert_eq!(
            t.slots(),
            [Slot::new(Disk::C, 1), Slot::new(Disk::C, 2), Slot::new(Disk::B, 1), Slot::new(Disk::A, 1)]
        );
        assert_eq!((t.arity(Disk::A), t.arity(Disk::B), t.arity(Disk::C)), (1, 1, 2));
        assert_eq!(t.literal_text(), ["Comparing ", " and ", " in ", " with "]);
    }

    #[test]
    fn parses_other_templates() {
        let t = parse_template("A1 application of B1 to C1").unwrap();
        assert_eq!((t.arity(Disk::A), t.arity(Disk::B), t.arity(Disk::C)), (1, 1, 1));
        let t = parse_template("c1 is all you need").unwrap();
        assert_eq!((t.arity(Disk::A), t.arity(Disk::B), t.arity(Disk::C)), (0, 0, 1));
        assert!(matches!(parse_template("nothing to fill"), Err(MachineError::NoSlots(_))));
        assert!(parse_template("GPT4 and AC1D").is_err());
    }

    #[test]
    fn basic_template_renders_comma_joined() {
        let idea = instantiate(
            &basic_template(),
            &bind(&[("A1", "less is more"), ("B1", "confidence calibration"), ("C1", "Mamba")]),
            None,
            Sampling::Manual,
        )
        .unwrap();
        assert_eq!(idea.text, "less is more, confidence calibration, Mamba");
    }

    #[test]
    fn instantiate_substitutes_and_checks() {
        let t = parse_template("C1 is all you need").unwrap();
        let idea = instantiate(&t, &bind(&[("C1", "Mamba")]), None, Sampling::Manual).unwrap();
        assert_eq!(idea.text, "Mamba is all you need");

        let t = parse_template("Comparing C1 and C2 in B1 with A1").unwrap();
        let idea = instantiate(
            &t,
            &bind(&[("A1", "few-shot"), ("B1", "argument mining"), ("C1", "Mamba"), ("C2", "RWKV")]),
            None,
            Sampling::Manual,
        )
        .unwrap();
        assert_eq!(idea.text, "Comparing Mamba and RWKV in argument mining with few-shot");
        let dup = bind(&[("A1", "x"), ("B1", "y"), ("C1", "Mamba"), ("C2", "Mamba")]);
        assert!(matches!(instantiate(&t, &dup, None, Sampling::Manual), Err(MachineError::DuplicateElement { .. })));
        let missing = bind(&[("A1", "x"), ("C1", "Mamba"), ("C2", "RWKV")]);
        assert!(matches!(instantiate(&t, &missing, None, Sampling::Manual), Err(MachineError::MissingBinding(_))));
    }

    #[test]
    fn top_enumeration_counts() {
        let names: Vec<String> = (0..20).map(|i| format!("e{i:02}")).collect();
        let (a, b, c) = (reg(Disk::A, &names), reg(Disk::B, &names), reg(Disk::C, &names));
        let disks = [&a, &b, &c];
        assert_eq!(enumerate_top(&disks, 2, &basic_template()).unwrap().count(), 8);
        assert_eq!(enumerate_top(&disks, 20, &basic_template()).unwrap().count(), 8000);
        let cmp = parse_template("Comparing C1 and C2 in B1 with A1").unwrap();
        assert_eq!(enumerate_top(&disks, 2, &cmp).unwrap().count(), 8);
        assert_eq!(top_count(2, &cmp), 8);
    }

    #[test]
    fn top_enumeration_order_and_errors() {
        let a = reg(Disk::A, &["a1", "a2"]);
        let b = reg(Disk::B, &["b1", "b2"]);
        let c = reg(Disk::C, &["c1"]);
        let disks = [&a, &b, &c];
        let texts: Vec<String> = enumerate_top(&disks, 1, &basic_template()).unwrap().map(|i| i.text).collect();
        assert_eq!(texts, ["a1, b1, c1"]);
        assert!(matches!(
            enumerate_top(&disks, 2, &basic_template()),
            Err(MachineError::Insufficient { disk: Disk::C, .. })
        ));
        assert!(matches!(enumerate_top(&disks, 0, &basic_template()), Err(MachineError::ZeroK)));
        let only_a = parse_template("A1 for all").unwrap();
        let texts: Vec<String> = enumerate_top(&disks, 2, &only_a).unwrap().map(|i| i.text).collect();
        assert_eq!(texts, ["a1 for all", "a2 for all"]);
    }

    #[test]
    fn random_batch_uses_each_element_once() {
        let names: Vec<String> = (0..100).map(|i| format!("e{i:03}")).collect();
        let (a, b, c) = (reg(Disk::A, &names), reg(Disk::B, &names), reg(Disk::C, &names));
        let disks = [&a, &b, &c];
        let batch = sample_random(&disks, &basic_template(), 10, 7, Reuse::PerBatch).unwrap();
        let used: HashSet<(String, String)> =
            batch.iter().flat_map(|i| i.bindings.iter().map(|(s, e)| (s.clone(), e.clone()))).collect();
        assert_eq!(used.len(), 30);
        assert_eq!(batch, sample_random(&disks, &basic_template(), 10, 7, Reuse::PerBatch).unwrap());

        let all = sample_random(&disks, &basic_template(), 100, 1, Reuse::PerBatch).unwrap();
        let a_used: HashSet<&str> = all.iter().map(|i| i.binding(Slot::new(Disk::A, 1)).unwrap()).collect();
        assert_eq!(a_used.len(), 100);
        assert!(matches!(
            sample_random(&disks, &basic_template(), 101, 1, Reuse::PerBatch),
            Err(MachineError::Insufficient { .. })
        ));
        assert_eq!(sample_random(&disks, &basic_template(), 101, 1, Reuse::PerIdea).unwrap().len(), 101);
    }

    #[test]
    fn subsample_keeps_order() {
        let names: Vec<String> = (0..20).map(|i| format!("e{i:02}")).collect();
        let (a, b, c) = (reg(Disk::A, &names), reg(Disk::B, &names), reg(Disk::C, &names));
        let all: Vec<RawIdea> = enumerate_top(&[&a, &b, &c], 20, &basic_template()).unwrap().collect();
        let half = subsample(all.clone(), 4000, 3);
        assert_eq!(half.len(), 4000);
        let pos: Vec<usize> = half.iter().map(|h| all.iter().position(|x| x == h).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn raw_idea_json_shape() {
        let idea = instantiate(
            &basic_template(),
            &bind(&[("A1", "a"), ("B1", "b"), ("C1", "c")]),
            Some("ACL 2024".into()),
            Sampling::Random { n: 1, seed: 9 },
        )
        .unwrap();
        let v = serde_json::to_value(&idea).unwrap();
        assert_eq!(v["sampling"], serde_json::json!({"mode": "random", "n": 1, "seed": 9}));
        assert_eq!(v["bindings"]["B1"], "b");
    }
}
