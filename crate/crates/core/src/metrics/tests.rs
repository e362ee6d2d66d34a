use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::corpus::{
    Corpus, Database, DomainGoal, DomainSchema, EntityRecord, Episode, SlotSpec, Turn, Utterance,
};

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn fixture_corpus() -> Corpus {
    let schema = DomainSchema {
        name: "restaurant".into(),
        informable: vec![SlotSpec {
            name: "food".into(),
            values: vec!["thai".into(), "indian".into()],
        }],
        requestable: vec!["phone".into(), "address".into()],
        offer_slot: None,
    };
    let mut slots = BTreeMap::new();
    slots.insert("food".into(), "thai".into());
    slots.insert("name".into(), "golden wok".into());
    slots.insert("phone".into(), "0123".into());
    let mut database = Database::default();
    database.domains.insert(
        "restaurant".into(),
        vec![EntityRecord {
            id: "r0".into(),
            slots,
        }],
    );
    let mut constraints = BTreeMap::new();
    constraints.insert("food".into(), "thai".into());
    let mut goal = BTreeMap::new();
    goal.insert(
        "restaurant".into(),
        DomainGoal {
            constraints,
            requested: vec!["phone".into()],
            offer: true,
        },
    );
    let turn = |u: &str, s: &str, d: &str| Turn {
        user: Utterance::parse(u),
        system: Utterance::parse(s),
        domain: d.into(),
        belief: Default::default(),
    };
    Corpus {
        schemas: vec![schema],
        database,
        episodes: vec![Episode {
            id: "fx".into(),
            goal,
            turns: vec![
                turn(
                    "i want thai food",
                    "[restaurant_name] serves thai food",
                    "restaurant",
                ),
                turn(
                    "what is the phone",
                    "the phone is [restaurant_phone]",
                    "restaurant",
                ),
                turn("thanks", "you are welcome", "general"),
            ],
        }],
    }
}

#[test]
fn entity_recall_examples() {
    let gold = toks("[restaurant_name] is at [restaurant_phone]");
    assert_eq!(
        entity_recall(&toks("try [restaurant_name]"), &gold),
        Some(0.5)
    );
    assert_eq!(
        entity_recall(&toks("[restaurant_phone] [restaurant_name] x"), &gold),
        Some(1.0)
    );
    assert_eq!(
        entity_recall(&toks("[restaurant_name]"), &toks("hello there")),
        None
    );
}

#[test]
fn mean_entity_recall_skips_undefined_turns() {
    let generated = vec![toks("a"), toks("[hotel_name]")];
    let gold = vec![toks("b"), toks("[hotel_name] [hotel_area]")];
    assert_eq!(mean_entity_recall(&generated, &gold), (Some(0.5), 1));
}

#[test]
fn fixture_full_success() {
    let c = fixture_corpus();
    let r = vec![vec![
        toks("[restaurant_name] is good"),
        toks("call [restaurant_phone]"),
        toks("bye"),
    ]];
    assert_eq!(inform_success(&c, &r).unwrap(), (1.0, 1.0));
}

#[test]
fn fixture_missing_request() {
    let c = fixture_corpus();
    let r = vec![vec![
        toks("[restaurant_name] is good"),
        toks("sorry"),
        toks("bye"),
    ]];
    assert_eq!(inform_success(&c, &r).unwrap(), (1.0, 0.0));
}

#[test]
fn fixture_no_offer() {
    let c = fixture_corpus();
    let r = vec![vec![
        toks("hello"),
        toks("call [restaurant_phone]"),
        toks("bye"),
    ]];
    assert_eq!(inform_success(&c, &r).unwrap(), (0.0, 0.0));
}

#[test]
fn requested_slot_must_come_from_a_turn_of_that_domain() {
    let c = fixture_corpus();
    let r = vec![vec![
        toks("[restaurant_name] is good"),
        toks("ok"),
        toks("[restaurant_phone]"),
    ]];
    assert_eq!(inform_success(&c, &r).unwrap(), (1.0, 0.0));
}

#[test]
fn unmatched_goal_constraints_fail_inform() {
    let mut c = fixture_corpus();
    c.episodes[0]
        .goal
        .get_mut("restaurant")
        .unwrap()
        .constraints
        .insert("food".into(), "indian".into());
    let r = gold_responses(&c);
    assert_eq!(inform_success(&c, &r).unwrap(), (0.0, 0.0));
}

#[test]
fn unknown_goal_domain_is_an_error() {
    let mut c = fixture_corpus();
    let g = c.episodes[0].goal.remove("restaurant").unwrap();
    c.episodes[0].goal.insert("spaceport".into(), g);
    assert_eq!(
        inform_success(&c, &gold_responses(&c)),
        Err(MetricError::UnknownDomain("spaceport".into()))
    );
}

#[test]
fn report_on_gold_is_perfect() {
    let c = fixture_corpus();
    let report = evaluate(&c, &gold_responses(&c)).unwrap();
    assert_eq!(
        (report.inform, report.success, report.entity_recall),
        (1.0, 1.0, 1.0)
    );
    assert!((report.bleu4 - 100.0).abs() < 1e-9);
    assert_eq!(report.entity_turns, 2);
    assert_eq!(report.domains["restaurant"].turns, 2);
    assert_eq!(report.domains["general"].turns, 1);
    assert_eq!(report.domains["general"].inform, None);
    assert_eq!(report.domains["restaurant"].success, Some(1.0));
}

#[test]
fn report_rejects_misaligned_responses() {
    let c = fixture_corpus();
    assert!(evaluate(&c, &Vec::<Vec<Vec<String>>>::new()).is_err());
    let short = vec![vec![toks("x")]];
    assert!(matches!(
        evaluate(&c, &short),
        Err(MetricError::CountMismatch { .. })
    ));
}

const POOL: [&str; 6] = [
    "[restaurant_name]",
    "[restaurant_phone]",
    "[restaurant_address]",
    "ok",
    "thai",
    "the",
];

proptest! {
    #[test]
    fn success_never_exceeds_inform(picks in proptest::collection::vec(proptest::collection::vec(0usize..6, 0..5), 3)) {
        let c = fixture_corpus();
        let r: Vec<Vec<Vec<String>>> = vec![picks
            .iter()
            .map(|p| p.iter().map(|&i| String::from(POOL[i])).collect())
            .collect()];
        let report = evaluate(&c, &r).unwrap();
        prop_assert!(report.success <= report.inform);
        prop_assert!((0.0..=1.0).contains(&report.entity_recall));
        for d in report.domains.values() {
            if let (Some(i), Some(s)) = (d.inform, d.success) {
                prop_assert!(s <= i);
            }
        }
    }
}
