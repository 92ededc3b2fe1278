//! Template-based flight-domain corpus.
//!
//! Several templates name two cities without marking which is the origin
//! ("between a and b", "connecting a and b"); their roles are assigned at
//! random, so only the user's location can tell them apart.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::Utterance;
use crate::gazetteer::{geo_distance, City, Gazetteer, NEARBY_RADIUS_KM};

/// Minimum origin to destination distance for generated trips.
const MIN_TRIP_KM: f64 = 150.0;

struct Template {
    intent: &'static str,
    text: &'static str,
}

const fn t(intent: &'static str, text: &'static str) -> Template {
    Template { intent, text }
}

const TEMPLATES: &[Template] = &[
    t("atis_flight", "{req} flights from {from} to {to}"),
    t(
        "atis_flight",
        "{req} a flight from {from} to {to} leaving at {dtime}",
    ),
    t("atis_flight", "{rt} flights between {a} and {b}"),
    t(
        "atis_flight",
        "what flights leave {from} on {day} in the {dperiod} and go to {to}",
    ),
    t(
        "atis_flight",
        "{req} a {class} flight from {from} to {to} on {day}",
    ),
    t(
        "atis_flight",
        "flights from {from} to {to} arriving at {atime}",
    ),
    t("atis_flight", "{req} {airline} flights from {from} to {to}"),
    t("atis_flight", "flights connecting {a} and {b} on {day}"),
    t(
        "atis_flight",
        "{req} flights from {from} to {to} arriving in the {aperiod}",
    ),
    t(
        "atis_flight",
        "{req} flights between {a} and {b} leaving at {dtime}",
    ),
    t(
        "atis_airfare",
        "what is the {cost} fare from {from} to {to}",
    ),
    t(
        "atis_airfare",
        "how much is a {rt} ticket from {from} to {to}",
    ),
    t("atis_airfare", "{cost} {rt} fare between {a} and {b}"),
    t("atis_airline", "which airlines fly from {from} to {to}"),
    t(
        "atis_airline",
        "what airlines have flights between {a} and {b} in the {dperiod}",
    ),
    t(
        "atis_ground_service",
        "what ground transportation is available in {city}",
    ),
    t(
        "atis_ground_service",
        "is there a limousine service in {city}",
    ),
    t(
        "atis_flight_time",
        "what time does the {airline} flight from {from} to {to} leave",
    ),
    t(
        "atis_flight_time",
        "what are the departure times from {from} to {to} on {day}",
    ),
    t(
        "atis_flight_time",
        "when do flights from {from} arrive in {to} in the {aperiod}",
    ),
];

const REQUESTS: &[&str] = &[
    "show me",
    "i need",
    "i would like",
    "please list",
    "give me",
    "find me",
];
const AIRLINES: &[&str] = &[
    "american airlines",
    "delta",
    "united",
    "us air",
    "continental",
    "southwest",
    "alaska airlines",
    "jetblue",
    "northwest",
];
const DAYS: &[&str] = &[
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];
const CLASSES: &[&str] = &["first class", "business class", "economy", "coach"];
const ROUND_TRIP: &[&str] = &["round trip", "one way"];
const COST: &[&str] = &["cheapest", "lowest", "least expensive"];
const PERIODS: &[&str] = &["morning", "afternoon", "evening", "night"];

/// A training corpus and a held-out split sharing no token sequence.
#[derive(Clone, Debug)]
pub struct SyntheticSplit {
    pub train: Vec<Utterance>,
    pub test: Vec<Utterance>,
}

pub fn generate_synthetic_corpus(n: usize, seed: u64, gazetteer: &Gazetteer) -> Vec<Utterance> {
    let gen = Generator::new(gazetteer);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..n).map(|_| gen.sample(&mut rng).1).collect()
}

/// Generates `n_train` utterances, then `n_test` more whose token sequences
/// do not occur in the training part.
pub fn generate_split(
    n_train: usize,
    n_test: usize,
    seed: u64,
    gazetteer: &Gazetteer,
) -> SyntheticSplit {
    let gen = Generator::new(gazetteer);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let train: Vec<Utterance> = (0..n_train).map(|_| gen.sample(&mut rng).1).collect();
    let seen: HashSet<&[String]> = train.iter().map(|u| u.tokens.as_slice()).collect();
    let mut test = Vec::with_capacity(n_test);
    let mut attempts = 0usize;
    while test.len() < n_test {
        let u = gen.sample(&mut rng).1;
        attempts += 1;
        if !seen.contains(u.tokens.as_slice()) || attempts > 100 * (n_test + 1) {
            test.push(u);
        }
    }
    SyntheticSplit { train, test }
}

struct Generator<'g> {
    cities: &'g [City],
    /// Cities with at least one neighbour inside the synthesis radius.
    origins: Vec<usize>,
}

impl<'g> Generator<'g> {
    fn new(gazetteer: &'g Gazetteer) -> Self {
        let cities = gazetteer.cities();
        let origins: Vec<usize> = (0..cities.len())
            .filter(|&i| {
                cities
                    .iter()
                    .enumerate()
                    .any(|(j, c)| j != i && geo_distance(&cities[i], c) <= NEARBY_RADIUS_KM)
            })
            .collect();
        assert!(!cities.is_empty(), "gazetteer is empty");
        Generator { cities, origins }
    }

    fn origin<R: Rng>(&self, rng: &mut R) -> &'g City {
        match self.origins.choose(rng) {
            Some(&i) => &self.cities[i],
            None => self.cities.choose(rng).expect("non-empty"),
        }
    }

    fn destination<R: Rng>(&self, from: &City, rng: &mut R) -> &'g City {
        for _ in 0..64 {
            let c = self.cities.choose(rng).expect("non-empty");
            if geo_distance(from, c) >= MIN_TRIP_KM {
                return c;
            }
        }
        self.cities
            .iter()
            .max_by(|a, b| geo_distance(from, a).total_cmp(&geo_distance(from, b)))
            .expect("non-empty")
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (usize, Utterance) {
        let index = rng.random_range(0..TEMPLATES.len());
        let template = &TEMPLATES[index];
        let from = self.origin(rng);
        let to = self.destination(from, rng);
        let swap = rng.random_bool(0.5);
        let mut tokens: Vec<String> = Vec::new();
        let mut tags: Vec<String> = Vec::new();
        let mut push = |words: &str, label: Option<&str>| {
            for (k, w) in words.split_whitespace().enumerate() {
                tokens.push(w.to_string());
                tags.push(match label {
                    None => "O".to_string(),
                    Some(l) if k == 0 => format!("B-{l}"),
                    Some(l) => format!("I-{l}"),
                });
            }
        };
        for word in template.text.split_whitespace() {
            let Some(key) = word.strip_prefix('{').and_then(|w| w.strip_suffix('}')) else {
                push(word, None);
                continue;
            };
            match key {
                "req" => push(pick(REQUESTS, rng), None),
                "from" => push(&city_words(from), Some("fromloc.city_name")),
                "to" => push(&city_words(to), Some("toloc.city_name")),
                "a" | "b" => {
                    let first = (key == "a") != swap;
                    if first {
                        push(&city_words(from), Some("fromloc.city_name"));
                    } else {
                        push(&city_words(to), Some("toloc.city_name"));
                    }
                }
                "city" => push(&city_words(from), Some("city_name")),
                "dtime" => push(&clock(rng), Some("depart_time.time")),
                "atime" => push(&clock(rng), Some("arrive_time.time")),
                "dperiod" => push(pick(PERIODS, rng), Some("depart_time.period_of_day")),
                "aperiod" => push(pick(PERIODS, rng), Some("arrive_time.period_of_day")),
                "airline" => push(pick(AIRLINES, rng), Some("airline_name")),
                "day" => push(pick(DAYS, rng), Some("depart_date.day_name")),
                "class" => push(pick(CLASSES, rng), Some("class_type")),
                "rt" => push(pick(ROUND_TRIP, rng), Some("round_trip")),
                "cost" => push(pick(COST, rng), Some("cost_relative")),
                other => unreachable!("unknown placeholder {other}"),
            }
        }
        (index, Utterance::new(tokens, tags, template.intent))
    }
}

fn pick<'a, R: Rng>(options: &[&'a str], rng: &mut R) -> &'a str {
    options.choose(rng).expect("non-empty")
}

fn city_words(c: &City) -> String {
    c.bare_name().to_lowercase()
}

/// A clock time in one of the spoken forms the time parser accepts.
fn clock<R: Rng>(rng: &mut R) -> String {
    let hour = rng.random_range(1..=12u32);
    let minute = [0u32, 0, 15, 30, 45][rng.random_range(0..5)];
    let suffix = if rng.random_bool(0.5) { "am" } else { "pm" };
    match rng.random_range(0..10) {
        0 => {
            let h24 = hour % 12 + if suffix == "pm" { 12 } else { 0 };
            format!("{h24}{minute:02}")
        }
        _ if minute == 0 => format!("{hour} {suffix}"),
        _ => format!("{hour}{minute:02} {suffix}"),
    }
}
