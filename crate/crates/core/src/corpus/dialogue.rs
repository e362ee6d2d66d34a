use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{placeholders_in, CorpusError, Database, DomainSchema, StateLayout};
use crate::GENERAL_DOMAIN;

/// A whitespace-tokenized utterance. Serialized as a single space-joined string.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Utterance(pub Vec<String>);

impl Utterance {
    pub fn parse(text: &str) -> Self {
        Utterance(text.split_whitespace().map(str::to_string).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Utterance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t)?;
        }
        Ok(())
    }
}

impl Serialize for Utterance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Utterance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Ok(Utterance::parse(&text))
    }
}

/// Cumulative dialogue state: domain -> slot -> value.
pub type BeliefState = BTreeMap<String, BTreeMap<String, String>>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub user: Utterance,
    pub system: Utterance,
    pub domain: String,
    #[serde(default)]
    pub belief: BeliefState,
}

impl Turn {
    /// Placeholders present in the gold system response.
    pub fn gold_placeholders(&self) -> BTreeSet<String> {
        placeholders_in(self.system.tokens())
    }
}

/// What the user wants from one domain.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGoal {
    #[serde(default)]
    pub constraints: BTreeMap<String, String>,
    #[serde(default)]
    pub requested: Vec<String>,
    /// Whether the system has to offer an entity.
    #[serde(default)]
    pub offer: bool,
}

pub type Goal = BTreeMap<String, DomainGoal>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    pub goal: Goal,
    pub turns: Vec<Turn>,
}

/// Schemas, database and episodes; the unit stored in a corpus file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub schemas: Vec<DomainSchema>,
    pub database: Database,
    pub episodes: Vec<Episode>,
}

impl Corpus {
    pub fn schema(&self, domain: &str) -> Option<&DomainSchema> {
        self.schemas.iter().find(|s| s.name == domain)
    }

    pub fn domain_names(&self) -> impl Iterator<Item = &str> {
        self.schemas.iter().map(|s| s.name.as_str())
    }

    pub fn turn_count(&self) -> usize {
        self.episodes.iter().map(|e| e.turns.len()).sum()
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout::new(&self.schemas)
    }

    /// Same schemas and database, different episodes.
    pub fn with_episodes(&self, episodes: Vec<Episode>) -> Corpus {
        Corpus {
            schemas: self.schemas.clone(),
            database: self.database.clone(),
            episodes,
        }
    }

    /// Maps a turn's tag to its training bucket: a schema domain or `general`.
    pub fn bucket_of<'a>(&self, tag: &'a str) -> &'a str {
        if self.schema(tag).is_some() {
            tag
        } else {
            GENERAL_DOMAIN
        }
    }

    /// Checks schema, database, goal and annotation invariants.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut names = BTreeSet::new();
        for s in &self.schemas {
            s.validate()?;
            if s.name == GENERAL_DOMAIN || !names.insert(s.name.as_str()) {
                return Err(CorpusError::Invalid(format!(
                    "bad or duplicate domain name {}",
                    s.name
                )));
            }
        }
        self.database.validate(&self.schemas)?;
        let layout = self.layout();
        for ep in &self.episodes {
            for d in ep.goal.keys() {
                if self.schema(d).is_none() {
                    return Err(CorpusError::UnknownDomain(d.clone()));
                }
            }
            for (i, t) in ep.turns.iter().enumerate() {
                if t.domain != GENERAL_DOMAIN && self.schema(&t.domain).is_none() {
                    return Err(CorpusError::Invalid(format!(
                        "episode {} turn {i}: undeclared domain tag {}",
                        ep.id, t.domain
                    )));
                }
                layout.belief_vector(&t.belief).map_err(|e| {
                    CorpusError::Invalid(format!("episode {} turn {i}: {e}", ep.id))
                })?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Turn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] user: {} | system: {}",
            self.domain, self.user, self.system
        )
    }
}
