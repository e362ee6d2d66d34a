use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{BeliefState, CorpusError, Database, DomainSchema, Episode};

/// Multi-hot slot-value encoding of a belief state.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefVector(pub Vec<f64>);

/// Concatenated per-domain 4-way one-hot match counts.
#[derive(Clone, Debug, PartialEq)]
pub struct DbPointer(pub Vec<f64>);

/// One-hot block for a match count: 0, 1, 2, or 3 and more.
pub fn db_pointer(count: usize) -> [f64; 4] {
    let mut block = [0.0; 4];
    block[count.min(3)] = 1.0;
    block
}

/// Fixed positions of every (domain, slot, value) in the belief vector, in
/// schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct StateLayout {
    domains: Vec<DomainSchema>,
    offsets: BTreeMap<(usize, usize), usize>,
    belief_dim: usize,
}

impl StateLayout {
    pub fn new(schemas: &[DomainSchema]) -> Self {
        let mut offsets = BTreeMap::new();
        let mut pos = 0;
        for (d, schema) in schemas.iter().enumerate() {
            for (s, slot) in schema.informable.iter().enumerate() {
                offsets.insert((d, s), pos);
                pos += slot.values.len();
            }
        }
        StateLayout {
            domains: schemas.to_vec(),
            offsets,
            belief_dim: pos,
        }
    }

    pub fn belief_dim(&self) -> usize {
        self.belief_dim
    }

    pub fn db_dim(&self) -> usize {
        4 * self.domains.len()
    }

    /// Offset of the first position of `domain.slot`.
    pub fn slot_offset(&self, domain: &str, slot: &str) -> Option<usize> {
        let d = self.domains.iter().position(|s| s.name == domain)?;
        let s = self.domains[d]
            .informable
            .iter()
            .position(|x| x.name == slot)?;
        self.offsets.get(&(d, s)).copied()
    }

    pub fn belief_vector(&self, belief: &BeliefState) -> Result<BeliefVector, CorpusError> {
        let mut v = vec![0.0; self.belief_dim];
        for (domain, slots) in belief {
            let d = self
                .domains
                .iter()
                .position(|s| &s.name == domain)
                .ok_or_else(|| CorpusError::UnknownDomain(domain.clone()))?;
            for (slot, value) in slots {
                let schema = &self.domains[d];
                let s = schema
                    .informable
                    .iter()
                    .position(|x| &x.name == slot)
                    .ok_or_else(|| CorpusError::UnknownSlot {
                        domain: domain.clone(),
                        slot: slot.clone(),
                    })?;
                let k = schema.informable[s]
                    .values
                    .iter()
                    .position(|x| x == value)
                    .ok_or_else(|| CorpusError::UnknownValue {
                        domain: domain.clone(),
                        slot: slot.clone(),
                        value: value.clone(),
                    })?;
                v[self.offsets[&(d, s)] + k] = 1.0;
            }
        }
        Ok(BeliefVector(v))
    }

    /// Per-domain match counts of the belief constraints, one-hot encoded.
    pub fn db_pointer(&self, belief: &BeliefState, db: &Database) -> DbPointer {
        let empty = BTreeMap::new();
        let mut v = Vec::with_capacity(self.db_dim());
        for schema in &self.domains {
            let constraints = belief.get(&schema.name).unwrap_or(&empty);
            v.extend_from_slice(&db_pointer(db.count(&schema.name, constraints)));
        }
        DbPointer(v)
    }
}

pub fn build_belief_vector(
    belief: &BeliefState,
    schemas: &[DomainSchema],
) -> Result<BeliefVector, CorpusError> {
    StateLayout::new(schemas).belief_vector(belief)
}

/// Belief vector and DB pointer from a turn's annotation.
pub fn oracle_state(
    episode: &Episode,
    turn: usize,
    schemas: &[DomainSchema],
    db: &Database,
) -> Result<(BeliefVector, DbPointer), CorpusError> {
    let t = episode
        .turns
        .get(turn)
        .ok_or_else(|| CorpusError::TurnOutOfRange {
            episode: episode.id.clone(),
            index: turn,
            len: episode.turns.len(),
        })?;
    let layout = StateLayout::new(schemas);
    Ok((
        layout.belief_vector(&t.belief)?,
        layout.db_pointer(&t.belief, db),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SlotSpec;
    use alloc::string::{String, ToString};

    fn schemas() -> Vec<DomainSchema> {
        let slot = |name: &str, values: &[&str]| SlotSpec {
            name: name.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
        };
        alloc::vec![
            DomainSchema {
                name: "restaurant".into(),
                informable: alloc::vec![
                    slot("area", &["north", "south", "centre"]),
                    slot("food", &["thai", "indian"]),
                ],
                requestable: alloc::vec!["name".into(), "phone".into()],
                offer_slot: None,
            },
            DomainSchema {
                name: "hotel".into(),
                informable: alloc::vec![slot("stars", &["3", "4", "5", "2"])],
                requestable: alloc::vec!["name".into()],
                offer_slot: None,
            },
        ]
    }

    fn belief(entries: &[(&str, &str, &str)]) -> BeliefState {
        let mut b = BeliefState::new();
        for (d, s, v) in entries {
            b.entry(d.to_string())
                .or_default()
                .insert(s.to_string(), v.to_string());
        }
        b
    }

    #[test]
    fn pointer_positions() {
        assert_eq!(db_pointer(0), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(db_pointer(2), [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(db_pointer(17), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn pointer_exhaustive_zero_to_ten() {
        for count in 0..=10usize {
            let block = db_pointer(count);
            let expected_hot = if count >= 3 { 3 } else { count };
            for (i, &x) in block.iter().enumerate() {
                assert_eq!(x, if i == expected_hot { 1.0 } else { 0.0 });
            }
            assert_eq!(block.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn empty_annotation_is_zero_vector() {
        let v = build_belief_vector(&BeliefState::new(), &schemas()).unwrap();
        assert_eq!(v.0.len(), 3 + 2 + 4);
        assert!(v.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn first_block_first_value_sets_position_zero() {
        let v =
            build_belief_vector(&belief(&[("restaurant", "area", "north")]), &schemas()).unwrap();
        assert_eq!(v.0[0], 1.0);
        assert_eq!(v.0.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn two_slots_two_ones() {
        let b = belief(&[("restaurant", "food", "indian"), ("hotel", "stars", "2")]);
        let v = build_belief_vector(&b, &schemas()).unwrap();
        assert_eq!(v.0.iter().sum::<f64>(), 2.0);
        assert_eq!(v.0[3 + 1], 1.0);
        assert_eq!(v.0[5 + 3], 1.0);
    }

    #[test]
    fn unknown_value_names_everything() {
        let err = build_belief_vector(&belief(&[("restaurant", "area", "east")]), &schemas())
            .unwrap_err();
        assert_eq!(
            err,
            CorpusError::UnknownValue {
                domain: "restaurant".into(),
                slot: "area".into(),
                value: "east".into()
            }
        );
        let err = build_belief_vector(&belief(&[("restaurant", "colour", "red")]), &schemas())
            .unwrap_err();
        assert!(matches!(err, CorpusError::UnknownSlot { .. }));
        let err = build_belief_vector(&belief(&[("spa", "x", "y")]), &schemas()).unwrap_err();
        assert_eq!(err, CorpusError::UnknownDomain(String::from("spa")));
    }

    #[test]
    fn slot_offsets_follow_schema_order() {
        let layout = StateLayout::new(&schemas());
        assert_eq!(layout.slot_offset("restaurant", "area"), Some(0));
        assert_eq!(layout.slot_offset("restaurant", "food"), Some(3));
        assert_eq!(layout.slot_offset("hotel", "stars"), Some(5));
        assert_eq!(layout.db_dim(), 8);
    }
}
