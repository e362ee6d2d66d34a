use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pool::{DomainDef, POOL};
use super::SynthConfig;
use crate::corpus::{
    BeliefState, Database, Delexicalizer, DomainGoal, Episode, Goal, Turn, Utterance,
};
use crate::GENERAL_DOMAIN;

const GREET_U: [&str; 3] = ["hello", "hi there", "good day"];
const GREET_S: [&str; 3] = [
    "hello , how can i help you ?",
    "hi , what can i do for you ?",
    "good day , how may i help ?",
];
const FIRST_U: [&str; 3] = [
    "i am looking for a {noun} {p}",
    "i need a {noun} {p}",
    "please find me a {noun} {p}",
];
const FOLLOW_U: [&str; 3] = ["{p}", "i would like it {p}", "i prefer it {p}"];
const ASK_S: [&str; 3] = [
    "what {slot} would you like ?",
    "which {slot} do you prefer ?",
    "do you have a {slot} preference ?",
];
const OFFER_S: [&str; 3] = [
    "how about {offer} ? it is {p} .",
    "i recommend {offer} , it is {p} .",
    "{offer} is a good match {p} .",
];
const REQ_U: [&str; 3] = [
    "what is the {slots} of the {noun} ?",
    "can you tell me the {slots} of the {noun} ?",
    "i need the {slots} of the {noun} please .",
];
const REQ_S: [&str; 3] = ["", "sure , ", "of course , "];
const THANKS_U: [&str; 3] = ["thank you , goodbye", "thanks , that is all", "great , bye"];
const THANKS_S: [&str; 3] = [
    "you are welcome , goodbye .",
    "glad to help , bye .",
    "have a nice day .",
];

struct Plan {
    def: usize,
    entity: usize,
    /// Constraint slot indices per constraint turn, in schema order.
    chunks: Vec<Vec<usize>>,
    requested: Vec<usize>,
}

fn phrase(def: &DomainDef, slot: usize, value: &str) -> String {
    def.slots[slot].phrase.replace("{}", value)
}

struct Builder<'a> {
    delex: &'a Delexicalizer,
    belief: BeliefState,
    turns: Vec<Turn>,
}

impl Builder<'_> {
    fn push(&mut self, domain: &str, user: &str, system: &str) {
        let hint = Some(domain);
        let user = self.delex.apply(user, hint).tokens;
        let system = self.delex.apply(system, hint).tokens;
        self.turns.push(Turn {
            user: Utterance(user),
            system: Utterance(system),
            domain: domain.to_string(),
            belief: self.belief.clone(),
        });
    }
}

/// Splits `0..n` into `parts` contiguous non-empty chunks at random cuts.
fn chunks<R: Rng>(rng: &mut R, n: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    cuts.truncate(parts - 1);
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for c in cuts.into_iter().chain(core::iter::once(n)) {
        out.push((start..c).collect());
        start = c;
    }
    out
}

pub(super) fn generate(
    cfg: &SynthConfig,
    db: &Database,
    delex: &Delexicalizer,
    id: String,
    seed: u64,
) -> Episode {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = cfg.slots_per_domain;

    let mut n_domains = if cfg.domains >= 2 && rng.gen_bool(cfg.multi_domain_fraction) {
        2
    } else {
        1
    };
    if 2 * n_domains > cfg.max_turns {
        n_domains = 1;
    }
    let mut picked: Vec<usize> = (0..cfg.domains).collect();
    picked.shuffle(&mut rng);
    picked.truncate(n_domains);

    let mut spare = cfg.max_turns - 2 * n_domains;
    let thanks = spare >= 1;
    spare -= thanks as usize;
    let greet = spare >= 1 && rng.gen_bool(0.5);
    spare -= greet as usize;

    let mut plans = Vec::with_capacity(n_domains);
    for &d in &picked {
        let def = &POOL[d];
        let extra = rng.gen_range(0..=spare.min(slots - 1));
        spare -= extra;
        let n_req = rng.gen_range(1..=def.requestable.len().min(2));
        let mut requested: Vec<usize> = (0..def.requestable.len()).collect();
        requested.shuffle(&mut rng);
        requested.truncate(n_req);
        requested.sort_unstable();
        plans.push(Plan {
            def: d,
            entity: rng.gen_range(0..cfg.entities_per_domain),
            chunks: chunks(&mut rng, slots, extra + 1),
            requested,
        });
    }

    let mut goal = Goal::new();
    let mut b = Builder {
        delex,
        belief: BeliefState::new(),
        turns: Vec::new(),
    };
    if greet {
        let v = rng.gen_range(0..3);
        b.push(GENERAL_DOMAIN, GREET_U[v], GREET_S[v]);
    }
    for plan in &plans {
        let def = &POOL[plan.def];
        let record = &db.domains[def.name][plan.entity];
        let val = |slot: &str| record.get(slot).unwrap_or_default().to_string();
        let constraints: BTreeMap<String, String> = def.slots[..slots]
            .iter()
            .map(|s| (s.name.to_string(), val(s.name)))
            .collect();
        goal.insert(
            def.name.to_string(),
            DomainGoal {
                constraints: constraints.clone(),
                requested: plan
                    .requested
                    .iter()
                    .map(|&r| def.requestable[r].0.to_string())
                    .collect(),
                offer: true,
            },
        );

        for (j, chunk) in plan.chunks.iter().enumerate() {
            let v = rng.gen_range(0..3);
            let p: Vec<String> = chunk
                .iter()
                .map(|&s| phrase(def, s, &val(def.slots[s].name)))
                .collect();
            let user = if j == 0 {
                FIRST_U[v]
                    .replace("{noun}", def.noun)
                    .replace("{p}", &p.join(" "))
            } else {
                FOLLOW_U[v].replace("{p}", &p.join(" "))
            };
            let entry = b.belief.entry(def.name.to_string()).or_default();
            for &s in chunk {
                entry.insert(def.slots[s].name.to_string(), val(def.slots[s].name));
            }
            let system = match plan.chunks.get(j + 1) {
                Some(next) => ASK_S[v].replace("{slot}", def.slots[next[0]].name),
                None => {
                    let all: Vec<String> = (0..slots)
                        .map(|s| phrase(def, s, &val(def.slots[s].name)))
                        .collect();
                    OFFER_S[v]
                        .replace("{offer}", &val(def.offer.0))
                        .replace("{p}", &all.join(" "))
                }
            };
            b.push(def.name, &user, &system);
        }

        let v = rng.gen_range(0..3);
        let names: Vec<&str> = plan
            .requested
            .iter()
            .map(|&r| def.requestable[r].0)
            .collect();
        let user = REQ_U[v]
            .replace("{slots}", &names.join(" and "))
            .replace("{noun}", def.noun);
        let answers: Vec<String> = names
            .iter()
            .map(|n| format!("the {n} is {}", val(n)))
            .collect();
        let system = format!("{}{} .", REQ_S[v], answers.join(" and "));
        b.push(def.name, &user, &system);
    }
    if thanks {
        let v = rng.gen_range(0..3);
        b.push(GENERAL_DOMAIN, THANKS_U[v], THANKS_S[v]);
    }
    Episode {
        id,
        goal,
        turns: b.turns,
    }
}
