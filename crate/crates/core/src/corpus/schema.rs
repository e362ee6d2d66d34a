use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// An informable slot and the finite set of values a user may give it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub name: String,
    /// Ordered; the order fixes the belief-vector layout.
    pub informable: Vec<SlotSpec>,
    pub requestable: Vec<String>,
    /// Slot whose placeholder marks an entity offer. Defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offer_slot: Option<String>,
}

impl DomainSchema {
    pub fn informable_slot(&self, slot: &str) -> Option<&SlotSpec> {
        self.informable.iter().find(|s| s.name == slot)
    }

    pub fn offer_slot(&self) -> &str {
        self.offer_slot.as_deref().unwrap_or("name")
    }

    /// Every slot a database record of this domain must carry.
    pub fn all_slots(&self) -> impl Iterator<Item = &str> {
        self.informable
            .iter()
            .map(|s| s.name.as_str())
            .chain(self.requestable.iter().map(String::as_str))
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = BTreeSet::new();
        for slot in self.all_slots() {
            if !seen.insert(slot) {
                return Err(CorpusError::Invalid(format!(
                    "slot {slot} declared twice in domain {}",
                    self.name
                )));
            }
        }
        if let Some(s) = self.informable.iter().find(|s| s.values.is_empty()) {
            return Err(CorpusError::Invalid(format!(
                "slot {}.{} has an empty value set",
                self.name, s.name
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: String,
    pub slots: BTreeMap<String, String>,
}

impl EntityRecord {
    pub fn get(&self, slot: &str) -> Option<&str> {
        self.slots.get(slot).map(String::as_str)
    }
}

/// Per-domain entity tables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Database {
    pub domains: BTreeMap<String, Vec<EntityRecord>>,
}

impl Database {
    pub fn records(&self, domain: &str) -> Option<&[EntityRecord]> {
        self.domains.get(domain).map(Vec::as_slice)
    }

    /// Records whose every constrained slot equals the constraint value exactly.
    pub fn query(
        &self,
        domain: &str,
        constraints: &BTreeMap<String, String>,
    ) -> Result<Vec<&EntityRecord>, CorpusError> {
        let records = self
            .domains
            .get(domain)
            .ok_or_else(|| CorpusError::UnknownDomain(domain.into()))?;
        Ok(records
            .iter()
            .filter(|r| {
                constraints
                    .iter()
                    .all(|(slot, value)| r.get(slot) == Some(value.as_str()))
            })
            .collect())
    }

    /// Number of matches; a domain without a table counts as zero matches.
    pub fn count(&self, domain: &str, constraints: &BTreeMap<String, String>) -> usize {
        self.query(domain, constraints).map_or(0, |r| r.len())
    }

    pub fn validate(&self, schemas: &[DomainSchema]) -> Result<(), CorpusError> {
        for (domain, records) in &self.domains {
            let schema = schemas
                .iter()
                .find(|s| &s.name == domain)
                .ok_or_else(|| CorpusError::UnknownDomain(domain.clone()))?;
            let mut ids = BTreeSet::new();
            for r in records {
                if !ids.insert(r.id.as_str()) {
                    return Err(CorpusError::Invalid(format!(
                        "duplicate entity id {} in {domain}",
                        r.id
                    )));
                }
                if let Some(missing) = schema.all_slots().find(|s| !r.slots.contains_key(*s)) {
                    return Err(CorpusError::Invalid(format!(
                        "entity {} in {domain} lacks slot {missing}",
                        r.id
                    )));
                }
            }
        }
        Ok(())
    }
}
