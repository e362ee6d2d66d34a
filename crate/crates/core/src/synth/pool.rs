//! Fixed vocabulary of domains the generator draws from.

pub(crate) struct SlotDef {
    pub name: &'static str,
    /// Surface form with `{}` standing for the value.
    pub phrase: &'static str,
    pub values: [&'static str; 5],
}

#[derive(Clone, Copy)]
pub(crate) enum ValueGen {
    Name(&'static [&'static str]),
    Phone,
    Mobile,
    Address,
    Postcode,
    Pounds,
    Minutes,
    TrainId,
    Car,
}

pub(crate) struct DomainDef {
    pub name: &'static str,
    pub noun: &'static str,
    pub slots: [SlotDef; 4],
    pub requestable: &'static [(&'static str, ValueGen)],
    pub offer: (&'static str, ValueGen),
}

const AREA: [&str; 5] = ["north", "south", "east", "west", "centre"];
const PRICE: [&str; 5] = ["cheap", "moderate", "expensive", "budget", "luxury"];
const DAYS: [&str; 5] = ["monday", "tuesday", "wednesday", "thursday", "friday"];

const CONTACT: &[(&str, ValueGen)] = &[
    ("phone", ValueGen::Phone),
    ("address", ValueGen::Address),
    ("postcode", ValueGen::Postcode),
];

const fn slot(name: &'static str, phrase: &'static str, values: [&'static str; 5]) -> SlotDef {
    SlotDef {
        name,
        phrase,
        values,
    }
}

pub(crate) const POOL: [DomainDef; 7] = [
    DomainDef {
        name: "restaurant",
        noun: "restaurant",
        slots: [
            slot(
                "food",
                "serving {} food",
                ["thai", "indian", "italian", "chinese", "french"],
            ),
            slot("area", "in the {}", AREA),
            slot("price", "in the {} price range", PRICE),
            slot("day", "for {}", DAYS),
        ],
        requestable: CONTACT,
        offer: ("name", ValueGen::Name(&["kitchen", "bistro"])),
    },
    DomainDef {
        name: "hotel",
        noun: "hotel",
        slots: [
            slot("area", "in the {}", AREA),
            slot("price", "in the {} price range", PRICE),
            slot(
                "stars",
                "with {} stars",
                ["one", "two", "three", "four", "five"],
            ),
            slot(
                "type",
                "that is a {}",
                ["guesthouse", "hostel", "inn", "resort", "motel"],
            ),
        ],
        requestable: CONTACT,
        offer: ("name", ValueGen::Name(&["manor", "court"])),
    },
    DomainDef {
        name: "attraction",
        noun: "attraction",
        slots: [
            slot("area", "in the {}", AREA),
            slot(
                "type",
                "that is a {}",
                ["museum", "park", "theatre", "college", "church"],
            ),
            slot(
                "opens",
                "open in the {}",
                ["morning", "afternoon", "evening", "night", "weekend"],
            ),
            slot(
                "audience",
                "for {}",
                ["families", "students", "adults", "children", "tourists"],
            ),
        ],
        requestable: &[
            ("phone", ValueGen::Phone),
            ("address", ValueGen::Address),
            ("fee", ValueGen::Pounds),
        ],
        offer: ("name", ValueGen::Name(&["gallery", "gardens"])),
    },
    DomainDef {
        name: "train",
        noun: "train",
        slots: [
            slot(
                "departure",
                "from {}",
                ["cambridge", "ely", "ipswich", "leicester", "norwich"],
            ),
            slot(
                "destination",
                "to {}",
                [
                    "london",
                    "oxford",
                    "peterborough",
                    "stansted",
                    "bishops stortford",
                ],
            ),
            slot("day", "on {}", DAYS),
            slot(
                "time",
                "leaving at {}",
                ["08:00", "10:15", "12:30", "15:45", "18:00"],
            ),
        ],
        requestable: &[("fare", ValueGen::Pounds), ("duration", ValueGen::Minutes)],
        offer: ("trainid", ValueGen::TrainId),
    },
    DomainDef {
        name: "taxi",
        noun: "taxi",
        slots: [
            slot(
                "departure",
                "from the {}",
                ["airport", "market", "castle", "harbour", "university"],
            ),
            slot(
                "destination",
                "to the {}",
                ["cinema", "stadium", "library", "zoo", "aquarium"],
            ),
            slot(
                "time",
                "at {}",
                ["07:30", "09:45", "13:00", "16:20", "20:10"],
            ),
            slot(
                "people",
                "for {} people",
                ["two", "three", "four", "five", "six"],
            ),
        ],
        requestable: &[("car", ValueGen::Car)],
        offer: ("phone", ValueGen::Mobile),
    },
    DomainDef {
        name: "hospital",
        noun: "hospital",
        slots: [
            slot(
                "department",
                "with a {} department",
                [
                    "cardiology",
                    "neurology",
                    "paediatrics",
                    "oncology",
                    "urology",
                ],
            ),
            slot("area", "in the {}", AREA),
            slot(
                "floor",
                "on the {} floor",
                ["ground", "first", "second", "third", "top"],
            ),
            slot(
                "service",
                "offering {} care",
                ["inpatient", "outpatient", "emergency", "daycare", "respite"],
            ),
        ],
        requestable: CONTACT,
        offer: ("name", ValueGen::Name(&["clinic", "infirmary"])),
    },
    DomainDef {
        name: "police",
        noun: "police",
        slots: [
            slot("area", "in the {}", AREA),
            slot(
                "office",
                "at the {} office",
                ["central", "parkside", "riverside", "hillside", "lakeside"],
            ),
            slot(
                "issue",
                "about a {}",
                ["theft", "fraud", "accident", "burglary", "assault"],
            ),
            slot("day", "on {}", DAYS),
        ],
        requestable: CONTACT,
        offer: ("name", ValueGen::Name(&["precinct", "bureau"])),
    },
];

pub(crate) const NAME_HEADS: [&str; 12] = [
    "golden", "royal", "silver", "little", "old", "grand", "happy", "lucky", "bright", "quiet",
    "merry", "noble",
];
const STREETS: [&str; 6] = [
    "mill",
    "regent",
    "trumpington",
    "hills",
    "newmarket",
    "chesterton",
];
const COLOURS: [&str; 4] = ["black", "white", "grey", "yellow"];
const BRANDS: [&str; 6] = ["toyota", "ford", "skoda", "tesla", "volvo", "audi"];

/// Most entities a domain can hold with unique offer values.
pub(crate) fn entity_capacity(def: &DomainDef) -> usize {
    match def.offer.1 {
        ValueGen::Name(suffixes) => NAME_HEADS.len() * suffixes.len(),
        _ => 1000,
    }
}

/// Deterministic value for entity `i` of domain index `d`.
pub(crate) fn value(gen: ValueGen, d: usize, i: usize) -> alloc::string::String {
    use alloc::format;
    match gen {
        ValueGen::Name(suffixes) => format!(
            "{} {}",
            NAME_HEADS[i % NAME_HEADS.len()],
            suffixes[(i / NAME_HEADS.len()) % suffixes.len()]
        ),
        ValueGen::Phone => format!("01223{d}{i:04}"),
        ValueGen::Mobile => format!("07700{d}{i:04}"),
        ValueGen::Address => format!(
            "{} {} road",
            1 + (i * 7 + d * 13) % 97,
            STREETS[(i + d) % STREETS.len()]
        ),
        ValueGen::Postcode => format!("cb{}{i:02}", d + 1),
        ValueGen::Pounds => format!("{} pounds", 4 + (i * 3 + d) % 40),
        ValueGen::Minutes => format!("{} minutes", 30 + (i * 11) % 90),
        ValueGen::TrainId => format!("tr{}", 1000 + (i * 137) % 9000),
        ValueGen::Car => format!(
            "{} {}",
            COLOURS[i % COLOURS.len()],
            BRANDS[(i / 2) % BRANDS.len()]
        ),
    }
}
