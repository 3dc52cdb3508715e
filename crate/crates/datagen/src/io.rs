//! On-disk formats.
//!
//! A split file holds one utterance per line with four tab-separated fields:
//! space-joined tokens, gold domain id, gold intent id, and the gold slots as
//! comma-separated `name:start:end` triples (token offsets, end exclusive;
//! empty when the utterance has no slots).
//!
//! The catalog file is JSON lines: one `meta` record (seed and generator
//! config), one `words` record, then one record per slot type, intent and
//! domain, each tagged by `"type"`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hyprank_core::{Error, Result};

use crate::catalog::{Category, Domain, DomainCatalog, GeneratorConfig, Intent, Piece, SlotType, Template};
use crate::generate::{Example, SlotSpan, SplitKind, Splits};

pub const CATALOG_FILE: &str = "catalog.jsonl";

/// Wraps an I/O error with the offending path.
pub fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_context(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_context(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_context(path, e))
}

pub fn format_example(catalog: &DomainCatalog, ex: &Example) -> String {
    let slots: Vec<String> =
        ex.slots.iter().map(|s| format!("{}:{}:{}", catalog.slot_types[s.slot].name, s.start, s.end)).collect();
    format!("{}\t{}\t{}\t{}", ex.tokens.join(" "), ex.domain, ex.intent, slots.join(","))
}

pub fn parse_example(catalog: &DomainCatalog, line: &str) -> Result<Example> {
    let fields: Vec<&str> = line.split('\t').collect();
    let [text, domain, intent, slots] = fields[..] else {
        return Err(Error::format(format!("expected 4 tab-separated fields, got {}: {line:?}", fields.len())));
    };
    let tokens: Vec<String> = text.split(' ').map(str::to_string).collect();
    if tokens.iter().any(String::is_empty) {
        return Err(Error::format(format!("empty token in {text:?}")));
    }
    let num = |what: &str, v: &str, bound: usize| -> Result<usize> {
        let n: usize = v.parse().map_err(|_| Error::format(format!("bad {what} {v:?}")))?;
        if n >= bound {
            return Err(Error::format(format!("{what} {n} out of range (< {bound})")));
        }
        Ok(n)
    };
    let domain = num("domain id", domain, catalog.n_domains())?;
    let intent = num("intent id", intent, catalog.n_intents())?;
    let mut spans = Vec::new();
    for triple in slots.split(',').filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = triple.split(':').collect();
        let [name, start, end] = parts[..] else {
            return Err(Error::format(format!("bad slot triple {triple:?}")));
        };
        let slot = catalog.slot_id(name).ok_or_else(|| Error::format(format!("unknown slot type {name:?}")))?;
        let start = num("slot start", start, tokens.len())?;
        let end = num("slot end", end, tokens.len() + 1)?;
        spans.push(SlotSpan { slot, start, end });
    }
    let ex = Example { tokens, domain, intent, slots: spans };
    ex.validate().map_err(|e| Error::format(format!("{e}: {line:?}")))?;
    Ok(ex)
}

pub fn format_split(catalog: &DomainCatalog, examples: &[Example]) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&format_example(catalog, ex));
        out.push('\n');
    }
    out
}

pub fn parse_split(catalog: &DomainCatalog, text: &str) -> Result<Vec<Example>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| parse_example(catalog, l).map_err(|e| Error::format(format!("line {}: {e}", i + 1))))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct TemplateRecord {
    pieces: String,
    intent_slot: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Record {
    Meta {
        seed: u64,
        config: GeneratorConfig,
    },
    Words {
        filler: Vec<String>,
        category: Vec<Vec<String>>,
    },
    Slot {
        id: usize,
        name: String,
        values: Vec<String>,
    },
    Intent {
        id: usize,
        name: String,
        domain: usize,
    },
    Domain {
        id: usize,
        name: String,
        category: Category,
        group: Option<usize>,
        keywords: Vec<String>,
        private_words: Vec<String>,
        templates: Vec<TemplateRecord>,
        intents: Vec<usize>,
        slot_types: Vec<usize>,
        popularity: f64,
        quality: f64,
    },
}

pub fn format_catalog(catalog: &DomainCatalog) -> Result<String> {
    let mut records = vec![
        Record::Meta { seed: catalog.seed, config: catalog.config.clone() },
        Record::Words { filler: catalog.filler_words.clone(), category: catalog.category_words.clone() },
    ];
    for (id, s) in catalog.slot_types.iter().enumerate() {
        records.push(Record::Slot { id, name: s.name.clone(), values: s.values.iter().map(|v| v.join(" ")).collect() });
    }
    for (id, i) in catalog.intents.iter().enumerate() {
        records.push(Record::Intent { id, name: i.name.clone(), domain: i.domain });
    }
    for d in &catalog.domains {
        records.push(Record::Domain {
            id: d.id,
            name: d.name.clone(),
            category: d.category,
            group: d.group,
            keywords: d.keywords.clone(),
            private_words: d.private_words.clone(),
            templates: d
                .templates
                .iter()
                .map(|t| TemplateRecord {
                    pieces: t.pieces.iter().map(Piece::to_token).collect::<Vec<_>>().join(" "),
                    intent_slot: t.intent_slot,
                })
                .collect(),
            intents: d.intents.clone(),
            slot_types: d.slot_types.clone(),
            popularity: d.popularity,
            quality: d.quality,
        });
    }
    let mut out = String::new();
    for r in &records {
        let line = serde_json::to_string(r).map_err(|e| Error::format(format!("catalog encoding: {e}")))?;
        writeln!(out, "{line}").expect("writing to a String");
    }
    Ok(out)
}

fn expect_id(kind: &str, id: usize, next: usize) -> Result<()> {
    if id != next {
        return Err(Error::format(format!("{kind} ids must be dense and ordered: expected {next}, got {id}")));
    }
    Ok(())
}

pub fn parse_catalog(text: &str) -> Result<DomainCatalog> {
    let mut meta = None;
    let mut words = None;
    let mut slot_types = Vec::new();
    let mut intents = Vec::new();
    let mut domains = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let record: Record =
            serde_json::from_str(line).map_err(|e| Error::format(format!("catalog line {}: {e}", i + 1)))?;
        match record {
            Record::Meta { seed, config } => meta = Some((seed, config)),
            Record::Words { filler, category } => words = Some((filler, category)),
            Record::Slot { id, name, values } => {
                expect_id("slot", id, slot_types.len())?;
                let values = values.iter().map(|v| v.split(' ').map(str::to_string).collect()).collect();
                slot_types.push(SlotType { name, values });
            }
            Record::Intent { id, name, domain } => {
                expect_id("intent", id, intents.len())?;
                intents.push(Intent { name, domain });
            }
            Record::Domain {
                id,
                name,
                category,
                group,
                keywords,
                private_words,
                templates,
                intents,
                slot_types,
                popularity,
                quality,
            } => {
                expect_id("domain", id, domains.len())?;
                let templates = templates
                    .into_iter()
                    .map(|t| {
                        let pieces = t.pieces.split(' ').map(Piece::from_token).collect::<Result<Vec<_>>>()?;
                        Ok(Template { pieces, intent_slot: t.intent_slot })
                    })
                    .collect::<Result<Vec<_>>>()?;
                domains.push(Domain {
                    id,
                    name,
                    category,
                    group,
                    keywords,
                    private_words,
                    templates,
                    intents,
                    slot_types,
                    popularity,
                    quality,
                });
            }
        }
    }
    let (seed, config) = meta.ok_or_else(|| Error::format("catalog has no meta record"))?;
    let (filler_words, category_words) = words.ok_or_else(|| Error::format("catalog has no words record"))?;
    if category_words.len() != Category::ALL.len() {
        return Err(Error::format("catalog needs one word list per category"));
    }
    for d in &domains {
        let bad_slot = d.slot_types.iter().any(|&s| s >= slot_types.len())
            || d.templates.iter().flat_map(|t| &t.pieces).any(|p| matches!(p, Piece::Slot(s) if *s >= slot_types.len()));
        let bad_intent = d.intents.is_empty()
            || d.intents.iter().any(|&i| i >= intents.len())
            || d.templates.iter().any(|t| t.intent_slot >= d.intents.len());
        if bad_slot || bad_intent || d.templates.is_empty() || d.keywords.is_empty() {
            return Err(Error::format(format!("domain {} references missing slots, intents or templates", d.id)));
        }
    }
    let n_groups = domains.iter().filter_map(|d| d.group).max().map_or(0, |g| g + 1);
    let mut overlap_groups = vec![Vec::new(); n_groups];
    for d in &domains {
        if let Some(g) = d.group {
            overlap_groups[g].push(d.id);
        }
    }
    if overlap_groups.iter().any(|g| g.len() < 2) {
        return Err(Error::format("every overlap group needs at least two members"));
    }
    Ok(DomainCatalog { config, seed, domains, overlap_groups, intents, slot_types, category_words, filler_words })
}

/// A generated corpus: catalog plus the five splits.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub catalog: DomainCatalog,
    pub splits: Splits,
}

pub fn split_path(dir: &Path, kind: SplitKind) -> PathBuf {
    dir.join(kind.file_name())
}

pub fn save_catalog(path: &Path, catalog: &DomainCatalog) -> Result<()> {
    write_text(path, &format_catalog(catalog)?)
}

pub fn load_catalog(path: &Path) -> Result<DomainCatalog> {
    parse_catalog(&read_text(path)?)
}

pub fn save_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    save_catalog(&dir.join(CATALOG_FILE), &data.catalog)?;
    for kind in SplitKind::ALL {
        write_text(&split_path(dir, kind), &format_split(&data.catalog, data.splits.get(kind)))?;
    }
    Ok(())
}

pub fn load_split(dir: &Path, catalog: &DomainCatalog, kind: SplitKind) -> Result<Vec<Example>> {
    let path = split_path(dir, kind);
    parse_split(catalog, &read_text(&path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let catalog = load_catalog(&dir.join(CATALOG_FILE))?;
    let mut splits = Splits::default();
    for kind in SplitKind::ALL {
        *splits.get_mut(kind) = load_split(dir, &catalog, kind)?;
    }
    Ok(Dataset { catalog, splits })
}
