//! Canonical per-venue disks: deterministic and model-assisted merging of
//! extracted elements, template registries, rankings and cross-registry
//! comparison.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{Corpus, VenueKey};
use crate::disk::Disk;
use crate::extraction::ElementDraft;
use crate::gateway::Gateway;
use crate::machine::parse_template;
use crate::prompt::{self, first_ordered_object};
use crate::text::{collapse_whitespace, normalize};

pub use crate::text::normalize as normalize_element;

pub const DEFAULT_CHUNK_SIZE: usize = 200;
pub const DEFAULT_MIN_VISITS: u64 = 2;
pub const POOLED_VENUE: &str = "All";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot compare disk {0} with disk {1}")]
    DiskMismatch(Disk, Disk),
    #[error("merge response has no JSON object")]
    UnparseableMerge,
    #[error("registry I/O at {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("registry file {path} is invalid: {reason}")]
    Invalid { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementGroup {
    pub canonical: String,
    pub members: BTreeSet<String>,
    pub visits: u64,
    pub disk: Disk,
}

impl ElementGroup {
    fn key(&self) -> String {
        normalize(&self.canonical)
    }
}

fn sort_groups(groups: &mut [ElementGroup]) {
    groups.sort_by(|a, b| a.key().cmp(&b.key()).then_with(|| a.canonical.cmp(&b.canonical)));
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiskRegistry {
    pub venue: String,
    pub year: Option<i32>,
    pub disk: Disk,
    pub groups: Vec<ElementGroup>,
}

impl DiskRegistry {
    /// Registry with one singleton group per element and one visit each; used
    /// for hand-written seed lists.
    pub fn from_elements<S: AsRef<str>>(venue: &str, year: Option<i32>, disk: Disk, elements: &[S]) -> Self {
        let drafts: Vec<ElementDraft> = elements
            .iter()
            .map(|e| {
                let mut d = ElementDraft::default();
                match disk {
                    Disk::A => d.themes.push(e.as_ref().to_owned()),
                    Disk::B => d.domains.push(e.as_ref().to_owned()),
                    Disk::C => d.methods.push(e.as_ref().to_owned()),
                }
                d
            })
            .collect();
        DiskRegistry { venue: venue.to_owned(), year, disk, groups: merge_deterministic(&drafts, disk) }
    }

    pub fn total_visits(&self) -> u64 {
        self.groups.iter().map(|g| g.visits).sum()
    }

    /// Find the group whose canonical name or any member matches `name`
    /// after normalization. Canonical matches take priority.
    pub fn resolve(&self, name: &str) -> Option<&ElementGroup> {
        let key = normalize(name);
        if key.is_empty() {
            return None;
        }
        self.groups
            .iter()
            .find(|g| g.key() == key)
            .or_else(|| self.groups.iter().find(|g| g.members.iter().any(|m| normalize(m) == key)))
    }

    /// Union of the tokens of every canonical name.
    pub fn token_set(&self) -> BTreeSet<String> {
        self.groups
            .iter()
            .flat_map(|g| {
                normalize(&g.canonical).split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect::<Vec<_>>()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub template: String,
    pub visits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRegistry {
    pub venue: String,
    pub year: Option<i32>,
    pub templates: Vec<TemplateEntry>,
}

impl TemplateRegistry {
    /// Collect templates (whitespace-collapsed) with visit counts. Strings
    /// without a recognizable slot are dropped and returned separately.
    pub fn from_drafts<'a>(
        venue: &str,
        year: Option<i32>,
        drafts: impl IntoIterator<Item = &'a ElementDraft>,
    ) -> (TemplateRegistry, Vec<String>) {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        let mut dropped = Vec::new();
        for draft in drafts {
            for t in &draft.templates {
                let t = collapse_whitespace(t);
                if parse_template(&t).is_err() {
                    log::warn!("dropping template without slots: {t:?}");
                    dropped.push(t);
                    continue;
                }
                *counts.entry(t).or_default() += 1;
            }
        }
        let templates = counts.into_iter().map(|(template, visits)| TemplateEntry { template, visits }).collect();
        let mut reg = TemplateRegistry { venue: venue.to_owned(), year, templates };
        reg.sort();
        (reg, dropped)
    }

    fn sort(&mut self) {
        self.templates.sort_by(|a, b| b.visits.cmp(&a.visits).then_with(|| a.template.cmp(&b.template)));
    }
}

/// Group draft strings of one disk by exact normalized form.
///
/// `visits` counts every occurrence, `members` keeps each distinct surface
/// variant, and the canonical name is the most frequent variant (ties go to
/// the lexicographically smallest).
pub fn merge_deterministic(drafts: &[ElementDraft], disk: Disk) -> Vec<ElementGroup> {
    let mut by_key: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for draft in drafts {
        for surface in draft.disk(disk) {
            let key = normalize(surface);
            if key.is_empty() {
                continue;
            }
            *by_key.entry(key).or_default().entry(surface.clone()).or_default() += 1;
        }
    }
    let mut groups: Vec<ElementGroup> = by_key
        .into_values()
        .map(|variants| {
            let canonical = variants
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .map(|(s, _)| s.clone())
                .expect("groups are never empty");
            ElementGroup { canonical, visits: variants.values().sum(), members: variants.into_keys().collect(), disk }
        })
        .collect();
    sort_groups(&mut groups);
    groups
}

/// Split sorted keywords into consecutive chunks of at most `chunk_size`.
pub fn chunk_keywords(keywords: &[String], chunk_size: usize) -> Vec<Vec<String>> {
    let mut sorted = keywords.to_vec();
    sorted.sort();
    sorted.chunks(chunk_size.max(1)).map(<[String]>::to_vec).collect()
}

/// Prompt label for a disk, filling the template's `{domain}` slot.
pub fn disk_label(disk: Disk) -> String {
    format!("research {}", disk.role())
}

pub fn build_merge_prompt(disk_label: &str, keywords: &[String]) -> String {
    prompt::fill(prompt::MERGE, &[("domain", disk_label), ("keywords", &keywords.join("\n"))])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeApplied {
    pub groups: Vec<ElementGroup>,
    pub notes: Vec<String>,
}

/// Apply one `{"group name": [keywords...]}` merge answer.
///
/// Listed keywords are matched (normalized) against current canonical names,
/// falling back to member variants. The group name itself also counts as a
/// keyword, so naming a group after an existing one absorbs it. Keywords the
/// answer does not mention stay as they are; a keyword claimed by two groups
/// stays with the first. Total visits never change.
pub fn apply_merge_response(groups: &[ElementGroup], response: &str) -> Result<MergeApplied, RegistryError> {
    let answer = first_ordered_object(response).ok_or(RegistryError::UnparseableMerge)?;
    let mut notes = Vec::new();

    let mut by_canonical: HashMap<String, usize> = HashMap::new();
    let mut by_member: HashMap<String, usize> = HashMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_canonical.entry(g.key()).or_insert(i);
        for m in &g.members {
            by_member.entry(normalize(m)).or_insert(i);
        }
    }
    let lookup = |kw: &str| {
        let key = normalize(kw);
        by_canonical.get(&key).or_else(|| by_member.get(&key)).copied()
    };

    // new group slot -> (name, absorbed group indices)
    let mut merged: Vec<(String, Vec<usize>)> = Vec::new();
    let mut slot_of_name: HashMap<String, usize> = HashMap::new();
    let mut owner: Vec<Option<usize>> = vec![None; groups.len()];

    for (name, value) in answer.0 {
        let name = collapse_whitespace(&name);
        let name_key = normalize(&name);
        if name_key.is_empty() {
            notes.push(format!("skipped group with empty name {name:?}"));
            continue;
        }
        let Value::Array(items) = value else {
            notes.push(format!("group {name:?} is not a list; skipped"));
            continue;
        };
        let slot = *slot_of_name.entry(name_key).or_insert_with(|| {
            merged.push((name.clone(), Vec::new()));
            merged.len() - 1
        });
        let keywords = items.iter().filter_map(Value::as_str).map(str::to_owned).chain(std::iter::once(name.clone()));
        for (pos, kw) in keywords.enumerate() {
            let implicit = pos == items.len();
            match lookup(&kw) {
                None if !implicit => notes.push(format!("unknown keyword {kw:?} in group {name:?}")),
                None => {}
                Some(i) => match owner[i] {
                    None => {
                        owner[i] = Some(slot);
                        merged[slot].1.push(i);
                    }
                    Some(s) if s == slot => {}
                    Some(s) => {
                        if !implicit {
                            notes.push(format!(
                                "keyword {kw:?} already assigned to {:?}; ignored for {name:?}",
                                merged[s].0
                            ));
                        }
                    }
                },
            }
        }
    }

    let mut out: Vec<ElementGroup> =
        groups.iter().enumerate().filter(|(i, _)| owner[*i].is_none()).map(|(_, g)| g.clone()).collect();
    for (name, absorbed) in merged {
        if absorbed.is_empty() {
            continue;
        }
        let disk = groups[absorbed[0]].disk;
        out.push(ElementGroup {
            canonical: name,
            members: absorbed.iter().flat_map(|&i| groups[i].members.iter().cloned()).collect(),
            visits: absorbed.iter().map(|&i| groups[i].visits).sum(),
            disk,
        });
    }
    sort_groups(&mut out);
    Ok(MergeApplied { groups: out, notes })
}

/// Model-assisted grouping for one disk: chunked prompts over the sorted
/// canonical names, answered and applied one chunk at a time.
pub fn merge_with_model(groups: Vec<ElementGroup>, disk: Disk, gateway: &Gateway, chunk_size: usize) -> MergeApplied {
    let canonicals: Vec<String> = groups.iter().map(|g| g.canonical.clone()).collect();
    let label = disk_label(disk);
    let mut current = MergeApplied { groups, notes: Vec::new() };
    for chunk in chunk_keywords(&canonicals, chunk_size) {
        let before: u64 = current.groups.iter().map(|g| g.visits).sum();
        let request = gateway.request(build_merge_prompt(&label, &chunk));
        let response = match gateway.complete(&request) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("merge round for disk {disk} skipped: {e}");
                current.notes.push(format!("merge round skipped: {e}"));
                continue;
            }
        };
        match apply_merge_response(&current.groups, &response.text) {
            Ok(applied) => {
                debug_assert_eq!(before, applied.groups.iter().map(|g| g.visits).sum::<u64>());
                current.notes.extend(applied.notes);
                current.groups = applied.groups;
            }
            Err(e) => {
                log::warn!("merge round for disk {disk} skipped: {e}");
                current.notes.push(format!("merge round skipped: {e}"));
            }
        }
    }
    current
}

/// Ranking order: visits descending, canonical ascending.
pub fn top_k(registry: &DiskRegistry, k: usize) -> Vec<&ElementGroup> {
    let mut ranked: Vec<&ElementGroup> = registry.groups.iter().collect();
    ranked.sort_by(|a, b| b.visits.cmp(&a.visits).then_with(|| a.canonical.cmp(&b.canonical)));
    ranked.truncate(k);
    ranked
}

/// Token-level Jaccard of two registries' vocabularies. Two empty
/// vocabularies compare as identical.
pub fn disk_jaccard(r1: &DiskRegistry, r2: &DiskRegistry) -> Result<f64, RegistryError> {
    if r1.disk != r2.disk {
        return Err(RegistryError::DiskMismatch(r1.disk, r2.disk));
    }
    let (a, b) = (r1.token_set(), r2.token_set());
    let union = a.union(&b).count();
    if union == 0 {
        return Ok(1.0);
    }
    Ok(a.intersection(&b).count() as f64 / union as f64)
}

/// Everything mined for one venue (or the pooled "All" set).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VenueRegistries {
    pub venue: String,
    pub year: Option<i32>,
    pub papers: usize,
    pub disks: [DiskRegistry; 3],
    pub templates: TemplateRegistry,
}

impl VenueRegistries {
    pub fn label(&self) -> String {
        match self.year {
            Some(y) => format!("{} {}", self.venue, y),
            None => self.venue.clone(),
        }
    }

    pub fn disk(&self, disk: Disk) -> &DiskRegistry {
        &self.disks[disk.index()]
    }

    pub fn empty(venue: &str, year: Option<i32>) -> Self {
        VenueRegistries {
            venue: venue.to_owned(),
            year,
            papers: 0,
            disks: Disk::ALL.map(|disk| DiskRegistry { venue: venue.to_owned(), year, disk, groups: Vec::new() }),
            templates: TemplateRegistry { venue: venue.to_owned(), year, templates: Vec::new() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct MergeOptions {
    pub chunk_size: usize,
    pub min_visits: u64,
}

impl Default for MergeOptions {
    fn default() -> Self {
        MergeOptions { chunk_size: DEFAULT_CHUNK_SIZE, min_visits: DEFAULT_MIN_VISITS }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    pub notes: Vec<String>,
    pub dropped_templates: Vec<String>,
}

/// Build one registry set per (venue, year) present in the corpus: exact
/// normalized grouping, then model merge rounds. The three disks of a venue
/// merge concurrently; rounds within a disk run in order.
pub fn build_venue_registries(
    corpus: &Corpus,
    drafts: &[ElementDraft],
    gateway: &Gateway,
    options: &MergeOptions,
) -> (Vec<VenueRegistries>, BuildReport) {
    let venue_of: HashMap<&str, VenueKey> = corpus.records.iter().map(|r| (r.id.as_str(), r.venue_key())).collect();
    let mut report = BuildReport::default();
    let mut out = Vec::new();
    for key in corpus.venue_keys() {
        let venue_drafts: Vec<ElementDraft> =
            drafts.iter().filter(|d| venue_of.get(d.paper_id.as_str()) == Some(&key)).cloned().collect();
        let papers = corpus.records.iter().filter(|r| r.venue_key() == key).count();
        let merged: Vec<MergeApplied> = std::thread::scope(|scope| {
            let handles: Vec<_> = Disk::ALL
                .map(|disk| {
                    let venue_drafts = &venue_drafts;
                    scope.spawn(move || {
                        merge_with_model(merge_deterministic(venue_drafts, disk), disk, gateway, options.chunk_size)
                    })
                })
                .into_iter()
                .collect();
            handles.into_iter().map(|h| h.join().expect("merge thread panicked")).collect()
        });
        let mut disks = Vec::with_capacity(3);
        for (disk, applied) in Disk::ALL.into_iter().zip(merged) {
            report.notes.extend(applied.notes.into_iter().map(|n| format!("{key} {disk}: {n}")));
            disks.push(DiskRegistry { venue: key.venue.clone(), year: Some(key.year), disk, groups: applied.groups });
        }
        let (templates, dropped) = TemplateRegistry::from_drafts(&key.venue, Some(key.year), &venue_drafts);
        report.dropped_templates.extend(dropped);
        out.push(VenueRegistries {
            venue: key.venue.clone(),
            year: Some(key.year),
            papers,
            disks: disks.try_into().expect("three disks"),
            templates,
        });
    }
    (out, report)
}

/// Union groups from several registries of one disk. Groups sharing any
/// normalized canonical or member name collapse into one, so the result is
/// still a partition of surface strings.
pub fn union_groups(disk: Disk, registries: &[&DiskRegistry]) -> Vec<ElementGroup> {
    let all: Vec<&ElementGroup> = registries.iter().flat_map(|r| r.groups.iter()).collect();
    let mut parent: Vec<usize> = (0..all.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut first_with: HashMap<String, usize> = HashMap::new();
    for (i, g) in all.iter().enumerate() {
        let names = std::iter::once(g.key()).chain(g.members.iter().map(|m| normalize(m)));
        for name in names.collect::<HashSet<_>>() {
            match first_with.get(&name) {
                Some(&j) => {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
                None => {
                    first_with.insert(name, i);
                }
            }
        }
    }
    let mut components: BTreeMap<usize, Vec<&ElementGroup>> = BTreeMap::new();
    for (i, group) in all.iter().enumerate() {
        let root = find(&mut parent, i);
        components.entry(root).or_default().push(*group);
    }
    let mut out: Vec<ElementGroup> = components
        .into_values()
        .map(|members| {
            // canonical from the heaviest contributing group
            let mut by_name: BTreeMap<&str, u64> = BTreeMap::new();
            for g in &members {
                *by_name.entry(g.canonical.as_str()).or_default() += g.visits;
            }
            let canonical = by_name
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .map(|(s, _)| s.to_string())
                .expect("component is nonempty");
            ElementGroup {
                canonical,
                members: members.iter().flat_map(|g| g.members.iter().cloned()).collect(),
                visits: members.iter().map(|g| g.visits).sum(),
                disk,
            }
        })
        .collect();
    sort_groups(&mut out);
    out
}

/// The cross-venue "All" registry: union, one model merge round, then drop
/// groups with fewer than `min_visits` visits.
pub fn build_pooled(
    venues: &[VenueRegistries],
    gateway: &Gateway,
    options: &MergeOptions,
    report: &mut BuildReport,
) -> VenueRegistries {
    let mut pooled = VenueRegistries::empty(POOLED_VENUE, None);
    pooled.papers = venues.iter().map(|v| v.papers).sum();
    for disk in Disk::ALL {
        let regs: Vec<&DiskRegistry> = venues.iter().map(|v| v.disk(disk)).collect();
        let applied = merge_with_model(union_groups(disk, &regs), disk, gateway, options.chunk_size);
        report.notes.extend(applied.notes.into_iter().map(|n| format!("{POOLED_VENUE} {disk}: {n}")));
        pooled.disks[disk.index()].groups =
            applied.groups.into_iter().filter(|g| g.visits >= options.min_visits).collect();
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for v in venues {
        for t in &v.templates.templates {
            *counts.entry(t.template.clone()).or_default() += t.visits;
        }
    }
    pooled.templates.templates = counts
        .into_iter()
        .filter(|(_, visits)| *visits >= options.min_visits)
        .map(|(template, visits)| TemplateEntry { template, visits })
        .collect();
    pooled.templates.sort();
    pooled
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub label: String,
    pub papers: usize,
    pub themes: usize,
    pub domains: usize,
    pub methods: usize,
    pub templates: usize,
}

pub fn registry_stats(registries: &[VenueRegistries]) -> Vec<StatsRow> {
    registries
        .iter()
        .map(|r| StatsRow {
            label: r.label(),
            papers: r.papers,
            themes: r.disk(Disk::A).groups.len(),
            domains: r.disk(Disk::B).groups.len(),
            methods: r.disk(Disk::C).groups.len(),
            templates: r.templates.templates.len(),
        })
        .collect()
}

/// Stats table with one column per venue and one row per count.
pub fn write_stats_csv<W: Write>(rows: &[StatsRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["Stats.".to_owned()];
    header.extend(rows.iter().map(|r| r.label.clone()));
    w.write_record(&header)?;
    type Count = fn(&StatsRow) -> usize;
    let lines: [(&str, Count); 5] = [
        ("# Papers", |r| r.papers),
        ("# Theme (A)", |r| r.themes),
        ("# Domain (B)", |r| r.domains),
        ("# Method (C)", |r| r.methods),
        ("#Template (T)", |r| r.templates),
    ];
    for (name, get) in lines {
        let mut rec = vec![name.to_owned()];
        rec.extend(rows.iter().map(|r| get(r).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ManifestEntry {
    venue: String,
    year: Option<i32>,
    papers: usize,
}

fn file_stem(venue: &str, year: Option<i32>) -> String {
    let safe: String = venue.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '-' }).collect();
    match year {
        Some(y) => format!("{safe}_{y}"),
        None => safe,
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RegistryError + '_ {
    move |source| RegistryError::Io { path: path.display().to_string(), source }
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), RegistryError> {
    let mut text = serde_json::to_string_pretty(value).expect("registry types serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RegistryError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text)
        .map_err(|e| RegistryError::Invalid { path: path.display().to_string(), reason: e.to_string() })
}

/// Write `manifest.json` plus one document per (venue, year, disk) and one
/// template document per venue.
pub fn save_registries(dir: &Path, registries: &[VenueRegistries]) -> Result<(), RegistryError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest: Vec<ManifestEntry> =
        registries.iter().map(|r| ManifestEntry { venue: r.venue.clone(), year: r.year, papers: r.papers }).collect();
    write_pretty(&dir.join("manifest.json"), &manifest)?;
    for r in registries {
        let stem = file_stem(&r.venue, r.year);
        for d in &r.disks {
            write_pretty(&dir.join(format!("{stem}_{}.json", d.disk)), d)?;
        }
        write_pretty(&dir.join(format!("{stem}_T.json")), &r.templates)?;
    }
    Ok(())
}

pub fn load_registries(dir: &Path) -> Result<Vec<VenueRegistries>, RegistryError> {
    let manifest: Vec<ManifestEntry> = read_json(&dir.join("manifest.json"))?;
    manifest
        .into_iter()
        .map(|m| {
            let stem = file_stem(&m.venue, m.year);
            let mut disks = Vec::with_capacity(3);
            for disk in Disk::ALL {
                let path = dir.join(format!("{stem}_{disk}.json"));
                let reg: DiskRegistry = read_json(&path)?;
                if reg.disk != disk {
                    return Err(RegistryError::Invalid {
                        path: path.display().to_string(),
                        reason: format!("expected disk {disk}, found {}", reg.disk),
                    });
                }
                disks.push(reg);
            }
            Ok(VenueRegistries {
                venue: m.venue,
                year: m.year,
                papers: m.papers,
                disks: disks.try_into().expect("three disks"),
                templates: read_json(&dir.join(format!("{stem}_T.json")))?,
            })
        })
        .collect()
}
