//! Reader for a MultiWOZ-format dump: `data.json`, `valListFile.json`,
//! `testListFile.json` and `<domain>_db.json` tables in the dump root or in
//! `db/`.
//!
//! Each user/system pair of a dialogue log becomes one turn. The turn's
//! domain tag comes from the dialogue acts (user first, then system), then
//! from the domain whose belief changed. A turn with only `general` acts is
//! tagged `general`; anything else keeps the previous turn's tag. Belief
//! states come from the system-side metadata.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use mtss_core::corpus::{
    BeliefState, Corpus, Database, Delexicalizer, DomainGoal, DomainSchema, EntityRecord, Episode,
    Goal, SlotSpec, Turn, Utterance,
};
use mtss_core::GENERAL_DOMAIN;

use crate::{io, Error, Result};

pub const DOMAINS: [&str; 7] = [
    "restaurant",
    "hotel",
    "attraction",
    "train",
    "taxi",
    "hospital",
    "police",
];

/// Domains whose goal requires offering a concrete entity.
const OFFER_DOMAINS: [&str; 4] = ["restaurant", "hotel", "attraction", "train"];

const EMPTY_VALUES: [&str; 4] = ["", "not mentioned", "none", "not given"];

#[derive(Debug, Deserialize)]
struct RawDialogue {
    #[serde(default)]
    goal: BTreeMap<String, Value>,
    log: Vec<RawEntry>,
}

#[derive(Debug, Deserialize)]
struct RawEntry {
    text: String,
    #[serde(default)]
    metadata: Value,
    #[serde(default)]
    dialog_act: Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiwozSplits {
    pub train: Corpus,
    pub valid: Corpus,
    pub test: Corpus,
}

fn norm(s: &str) -> String {
    s.trim().to_lowercase()
}

fn offer_slot(domain: &str) -> Option<String> {
    match domain {
        "train" => Some("trainid".into()),
        "taxi" => Some("phone".into()),
        _ => None,
    }
}

/// Dialogue ids listed one per line (or as a JSON array).
fn read_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    if text.trim_start().starts_with('[') {
        let v: Vec<String> = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path, format!("line {}", e.line()), e))?;
        return Ok(v.into_iter().map(|s| s.trim().to_string()).collect());
    }
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn find_db(dir: &Path, domain: &str) -> Option<PathBuf> {
    let name = format!("{domain}_db.json");
    [dir.join("db").join(&name), dir.join(&name)]
        .into_iter()
        .find(|p| p.exists())
}

/// Entity tables; only array-shaped tables of objects are used and only
/// string-valued fields are kept.
fn read_db(dir: &Path) -> Result<BTreeMap<String, Vec<BTreeMap<String, String>>>> {
    let mut out = BTreeMap::new();
    for d in DOMAINS {
        let Some(path) = find_db(dir, d) else {
            continue;
        };
        let v: Value = io::read_json(&path)?;
        let rows = match v {
            Value::Array(rows) => rows,
            _ => continue,
        };
        let mut recs = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let obj = row
                .as_object()
                .ok_or_else(|| Error::parse(&path, format!("record {i}"), "expected an object"))?;
            let rec: BTreeMap<String, String> = obj
                .iter()
                .filter_map(|(k, v)| v.as_str().map(|s| (norm(k), norm(s))))
                .collect();
            recs.push(rec);
        }
        out.insert(d.to_string(), recs);
    }
    Ok(out)
}

/// Belief from one metadata object: semi and book slots with a value.
fn belief_of(meta: &Value) -> BeliefState {
    let mut b = BeliefState::new();
    let Some(obj) = meta.as_object() else {
        return b;
    };
    for (d, parts) in obj {
        let d = norm(d);
        if !DOMAINS.contains(&d.as_str()) {
            continue;
        }
        for part in ["semi", "book"] {
            let Some(slots) = parts.get(part).and_then(Value::as_object) else {
                continue;
            };
            for (s, v) in slots {
                let Some(v) = v.as_str() else { continue };
                let v = norm(v);
                if s == "booked" || EMPTY_VALUES.contains(&v.as_str()) {
                    continue;
                }
                b.entry(d.clone()).or_default().insert(norm(s), v);
            }
        }
    }
    b
}

fn act_domains(acts: &Value) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(obj) = acts.as_object() {
        for k in obj.keys() {
            let d = norm(k.split('-').next().unwrap_or(""));
            if DOMAINS.contains(&d.as_str()) && !out.contains(&d) {
                out.push(d);
            }
        }
    }
    out
}

fn has_general_act(acts: &Value) -> bool {
    acts.as_object()
        .is_some_and(|o| o.keys().any(|k| norm(k).starts_with("general-")))
}

fn turn_domain(
    user: &RawEntry,
    system: &RawEntry,
    before: &BeliefState,
    after: &BeliefState,
    prev: &str,
) -> String {
    if let Some(d) = act_domains(&user.dialog_act).into_iter().next() {
        return d;
    }
    if let Some(d) = act_domains(&system.dialog_act).into_iter().next() {
        return d;
    }
    if let Some(d) = DOMAINS.iter().find(|d| before.get(**d) != after.get(**d)) {
        return d.to_string();
    }
    if has_general_act(&user.dialog_act) || has_general_act(&system.dialog_act) {
        return GENERAL_DOMAIN.to_string();
    }
    prev.to_string()
}

fn goal_of(
    raw: &BTreeMap<String, Value>,
) -> BTreeMap<String, (BTreeMap<String, String>, Vec<String>)> {
    let mut out = BTreeMap::new();
    for (d, g) in raw {
        let d = norm(d);
        if !DOMAINS.contains(&d.as_str()) {
            continue;
        }
        let Some(g) = g.as_object().filter(|g| !g.is_empty()) else {
            continue;
        };
        let info: BTreeMap<String, String> = g
            .get("info")
            .and_then(Value::as_object)
            .map(|m| {
                m.iter()
                    .filter_map(|(k, v)| v.as_str().map(|v| (norm(k), norm(v))))
                    .filter(|(_, v)| !EMPTY_VALUES.contains(&v.as_str()))
                    .collect()
            })
            .unwrap_or_default();
        let reqt: Vec<String> = g
            .get("reqt")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).map(norm).collect())
            .unwrap_or_default();
        out.insert(d, (info, reqt));
    }
    out
}

struct RawTurn {
    user: String,
    system: String,
    domain: String,
    belief: BeliefState,
}

/// Reads the dump. Dialogues in neither list file go to training.
pub fn read_multiwoz(dir: &Path) -> Result<MultiwozSplits> {
    let data_path = dir.join("data.json");
    let dialogues: BTreeMap<String, RawDialogue> = io::read_json(&data_path)?;
    let valid_ids = read_list(&dir.join("valListFile.json"))?;
    let test_ids = read_list(&dir.join("testListFile.json"))?;
    let tables = read_db(dir)?;

    let mut values: BTreeMap<String, BTreeMap<String, BTreeSet<String>>> = BTreeMap::new();
    let mut requestable: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut parsed = Vec::with_capacity(dialogues.len());
    for (id, dlg) in &dialogues {
        let mut turns = Vec::with_capacity(dlg.log.len() / 2);
        let mut before = BeliefState::new();
        for (k, pair) in dlg.log.chunks_exact(2).enumerate() {
            let (user, system) = (&pair[0], &pair[1]);
            if !system.metadata.is_object() && !system.metadata.is_null() {
                return Err(Error::parse(
                    &data_path,
                    format!("dialogue {id} log entry {}", 2 * k + 1),
                    "metadata is not an object",
                ));
            }
            let belief = belief_of(&system.metadata);
            let prev = turns
                .last()
                .map_or(GENERAL_DOMAIN, |t: &RawTurn| t.domain.as_str());
            let domain = turn_domain(user, system, &before, &belief, prev);
            for (d, slots) in &belief {
                for (s, v) in slots {
                    values
                        .entry(d.clone())
                        .or_default()
                        .entry(s.clone())
                        .or_default()
                        .insert(v.clone());
                }
            }
            turns.push(RawTurn {
                user: user.text.clone(),
                system: system.text.clone(),
                domain,
                belief: belief.clone(),
            });
            before = belief;
        }
        let goal = goal_of(&dlg.goal);
        for (d, (info, reqt)) in &goal {
            for (s, v) in info {
                values
                    .entry(d.clone())
                    .or_default()
                    .entry(s.clone())
                    .or_default()
                    .insert(v.clone());
            }
            requestable
                .entry(d.clone())
                .or_default()
                .extend(reqt.iter().cloned());
        }
        parsed.push((id.clone(), goal, turns));
    }

    let mut schemas = Vec::new();
    for d in DOMAINS {
        let informable: Vec<SlotSpec> = values
            .get(d)
            .map(|m| {
                m.iter()
                    .map(|(s, vs)| SlotSpec {
                        name: s.clone(),
                        values: vs.iter().cloned().collect(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        let req: Vec<String> = requestable
            .get(d)
            .map(|r| {
                r.iter()
                    .filter(|s| !informable.iter().any(|i| &i.name == *s))
                    .cloned()
                    .collect()
            })
            .unwrap_or_default();
        schemas.push(DomainSchema {
            name: d.to_string(),
            informable,
            requestable: req,
            offer_slot: offer_slot(d),
        });
    }

    let mut database = Database::default();
    for schema in &schemas {
        let Some(rows) = tables.get(&schema.name) else {
            continue;
        };
        let mut recs = Vec::with_capacity(rows.len());
        let mut ids = BTreeSet::new();
        for (i, row) in rows.iter().enumerate() {
            let mut slots = row.clone();
            for s in schema.all_slots() {
                slots.entry(s.to_string()).or_default();
            }
            let mut rid = row
                .get("id")
                .or_else(|| row.get("trainid"))
                .cloned()
                .unwrap_or_else(|| i.to_string());
            if !ids.insert(rid.clone()) {
                rid = format!("{rid}#{i}");
                ids.insert(rid.clone());
            }
            recs.push(EntityRecord { id: rid, slots });
        }
        database.domains.insert(schema.name.clone(), recs);
    }

    let delex = Delexicalizer::new(&schemas, &database);
    let lex = |text: &str, domain: &str| {
        let hint = (domain != GENERAL_DOMAIN).then_some(domain);
        Utterance(delex.apply(text, hint).tokens)
    };
    let (mut train, mut valid, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (id, goal, turns) in parsed {
        let goal: Goal = goal
            .into_iter()
            .map(|(d, (constraints, requested))| {
                let informable: BTreeSet<&str> = schemas
                    .iter()
                    .find(|s| s.name == d)
                    .map(|s| s.informable.iter().map(|i| i.name.as_str()).collect())
                    .unwrap_or_default();
                let g = DomainGoal {
                    constraints: constraints
                        .into_iter()
                        .filter(|(s, _)| informable.contains(s.as_str()))
                        .collect(),
                    requested: requested
                        .into_iter()
                        .filter(|s| !informable.contains(s.as_str()))
                        .collect(),
                    offer: OFFER_DOMAINS.contains(&d.as_str()),
                };
                (d, g)
            })
            .collect();
        let turns = turns
            .into_iter()
            .map(|t| Turn {
                user: lex(&t.user, &t.domain),
                system: lex(&t.system, &t.domain),
                domain: t.domain,
                belief: t.belief,
            })
            .collect();
        let ep = Episode {
            id: id.clone(),
            goal,
            turns,
        };
        let bare = id.trim_end_matches(".json");
        let listed = |set: &BTreeSet<String>| {
            set.contains(&id) || set.contains(bare) || set.contains(&format!("{bare}.json"))
        };
        if listed(&test_ids) {
            test.push(ep);
        } else if listed(&valid_ids) {
            valid.push(ep);
        } else {
            train.push(ep);
        }
    }
    let base = Corpus {
        schemas,
        database,
        episodes: Vec::new(),
    };
    let splits = MultiwozSplits {
        train: base.with_episodes(train),
        valid: base.with_episodes(valid),
        test: base.with_episodes(test),
    };
    splits
        .train
        .validate()
        .map_err(|e| Error::parse(&data_path, "corpus", e))?;
    Ok(splits)
}
