//! Deterministic synthetic corpora.
//!
//! Builds queries with matching reference bundles and a compliant plan for
//! each, plus flawed drafts and scripted refiner replies for offline runs.
//! The committed `fixtures/` tree is produced by [`write_fixtures`].

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::render_plan;
use crate::domain::{
    Accommodation, Attraction, ConstraintId, Cuisine, CurrentCity, DayEntry, Flight, GroundMode, GroundRoute,
    HardConstraintSet, Money, PlaceRef, Plan, ReferenceBundle, Restaurant, RoomKind, RoomRule,
    RoomType, Slot, SlotName, Transport, TransportLeg, TransportMode, TransportRule, TripQuery,
};
use crate::ingest::{write_split, DatasetSplit, IngestError, PlanRecord, SplitName, SplitRecord};
use crate::oracle::compute_cost;

pub const TRAIN_SEED: u64 = 45;
pub const VALIDATION_SEED: u64 = 180;
pub const TRAIN_SIZE: usize = 45;
pub const VALIDATION_SIZE: usize = 20;

const REGIONS: &[(&str, &[&str])] = &[
    ("California", &["San Francisco", "Los Angeles", "San Diego", "Sacramento", "Oakland", "Fresno"]),
    ("Texas", &["Austin", "Houston", "Dallas", "San Antonio", "El Paso", "Lubbock"]),
    ("Colorado", &["Denver", "Boulder", "Aspen", "Pueblo", "Durango", "Greeley"]),
    ("Washington", &["Seattle", "Spokane", "Tacoma", "Bellingham", "Yakima", "Olympia"]),
    ("Florida", &["Miami", "Orlando", "Tampa", "Jacksonville", "Tallahassee", "Pensacola"]),
    ("New York", &["New York", "Buffalo", "Rochester", "Albany", "Ithaca", "Syracuse"]),
];

const ORIGINS: &[&str] = &[
    "Honolulu", "Chicago", "Indianapolis", "Atlanta", "Boston", "Phoenix", "Charlotte", "Nashville",
    "Detroit", "Minneapolis", "Portland", "Kansas City",
];

const NAME_A: &[&str] = &[
    "Golden", "Blue", "Olive", "Copper", "Little", "Saffron", "Silver", "Rustic", "Urban", "Lucky",
    "Red", "Green", "Harbor", "Maple", "Cedar", "Sunny", "Velvet", "Iron", "Jade", "Amber",
];
const NAME_B: &[&str] = &[
    "Spoon", "Table", "Kitchen", "Bistro", "Grill", "Garden", "Lantern", "Oven", "Bowl", "Fork",
    "Plate", "Cafe", "Diner", "Pantry", "Skillet", "Tavern", "Corner", "House", "Bakery", "Dhaba",
];
const SIGHT_A: &[&str] = &[
    "Old Mill", "Riverside", "Heritage", "Lakeshore", "Sunset", "Pioneer", "Liberty", "Botanical",
    "Grand", "Founders", "Summit", "Union", "Market", "Canyon",
];
const SIGHT_B: &[&str] = &[
    "Park", "Museum", "Gallery", "Gardens", "Pier", "Observatory", "Square", "Trail", "Aquarium",
    "Monument", "Zoo", "Theater",
];
const STAY_A: &[&str] = &[
    "Cozy", "Sunny", "Spacious", "Quiet", "Modern", "Charming", "Bright", "Rustic", "Stylish", "Airy",
];
const STAY_B: &[&str] = &[
    "loft", "studio", "bungalow", "suite", "townhouse", "cottage", "flat", "guest room", "apartment",
];
const STAY_C: &[&str] = &[
    "near downtown", "by the park", "with garden view", "close to transit", "in the old town",
    "near the river", "with rooftop deck", "on a quiet street",
];
const STREETS: &[&str] = &["Main", "Oak", "Pine", "Elm", "Market", "Lake", "Hill", "Park", "Mission", "Union"];
const WORDS: &[&str] = &[
    "friendly", "staff", "cozy", "atmosphere", "great", "views", "popular", "with", "locals",
    "family", "owned", "since", "seasonal", "menu", "open", "late", "weekend", "brunch", "outdoor",
    "seating", "historic", "building", "walking", "distance", "from", "downtown", "parking",
    "available", "recently", "renovated", "quiet", "neighborhood", "live", "music", "on", "fridays",
];

/// A query, its sandbox, and a plan satisfying every constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthRecord {
    pub query: TripQuery,
    pub reference: ReferenceBundle,
    pub plan: Plan,
}

/// Defect planted in a draft plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flaw {
    None,
    /// A day-1 attraction repeated on day 2, and a first-city stay shorter than
    /// the listing's minimum nights.
    RepeatedAttractionShortStay,
    RepeatedRestaurant,
    HallucinatedRestaurant,
    MissingBreakfast,
    ConflictingTransport,
    OutOfCityRestaurant,
}

impl Flaw {
    /// Commonsense constraints a draft carrying this flaw fails.
    pub fn expected_failures(self) -> Vec<ConstraintId> {
        use ConstraintId::*;
        match self {
            Flaw::None => vec![],
            Flaw::RepeatedAttractionShortStay => vec![ValidAttractions, ValidAccommodation],
            Flaw::RepeatedRestaurant => vec![ValidRestaurants],
            Flaw::HallucinatedRestaurant => vec![ValidInformationInSandbox],
            Flaw::MissingBreakfast => vec![NotAbsent],
            Flaw::ConflictingTransport => vec![ValidTransportation],
            Flaw::OutOfCityRestaurant => vec![ValidInformationInCurrentCity],
        }
    }
}

/// How the scripted refiner answers a flawed draft.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinerBehaviour {
    Fixes,
    /// First reply does not parse, second fixes.
    GarbledThenFixes,
    /// First reply trades the flaw for two new ones, second fixes.
    RegressesThenFixes,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub record: SynthRecord,
    pub flaw: Flaw,
    pub behaviour: RefinerBehaviour,
    pub draft: Plan,
    /// Refiner replies in call order.
    pub refiner_replies: Vec<String>,
}

struct Gen {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Gen {
    fn new(seed: u64) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            used: HashSet::new(),
        }
    }

    fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        xs.choose(&mut self.rng).expect("non-empty")
    }

    fn unique(&mut self, mut make: impl FnMut(&mut ChaCha8Rng) -> String) -> String {
        for _ in 0..1000 {
            let s = make(&mut self.rng);
            if self.used.insert(s.clone()) {
                return s;
            }
        }
        let base = make(&mut self.rng);
        let mut n = 2;
        while !self.used.insert(format!("{base} {n}")) {
            n += 1;
        }
        format!("{base} {n}")
    }

    fn sentence(&mut self, lo: usize, hi: usize) -> String {
        let n = self.rng.gen_range(lo..=hi);
        let words: Vec<&str> = (0..n).map(|_| *self.pick(WORDS)).collect();
        let mut s = words.join(" ");
        if let Some(first) = s.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        s.push('.');
        s
    }

    fn phone(&mut self) -> String {
        format!(
            "({}) {}-{:04}",
            self.rng.gen_range(200..999),
            self.rng.gen_range(200..999),
            self.rng.gen_range(0..10000)
        )
    }

    fn address(&mut self, city: &str) -> String {
        format!("{} {} St, {city}", self.rng.gen_range(1..2000), self.pick(STREETS))
    }

    fn clock(&mut self) -> String {
        format!("{:02}:{:02}", self.rng.gen_range(5..23), self.rng.gen_range(0..60))
    }

    fn extras(&mut self, city: &str, name: &str) -> IndexMap<String, String> {
        let slug: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        let mut m = IndexMap::new();
        m.insert("rating".into(), format!("{:.1}", self.rng.gen_range(25..50) as f64 / 10.0));
        m.insert("phone".into(), self.phone());
        m.insert("website".into(), format!("https://www.{slug}.example.com"));
        m.insert("address".into(), self.address(city));
        m.insert("description".into(), self.sentence(12, 20));
        m
    }
}

#[derive(Clone, Copy)]
enum LegPlan {
    Flight,
    Ground(GroundMode),
}

struct Draft {
    route: Vec<String>,
    distractor: String,
    constraints: HardConstraintSet,
    group: u32,
    legs: LegPlan,
}

fn ordinal(n: u32) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn room_kind_for(t: RoomType, rng: &mut ChaCha8Rng) -> RoomKind {
    match t {
        RoomType::EntireRoom => RoomKind::EntireHome,
        RoomType::PrivateRoom => RoomKind::PrivateRoom,
        RoomType::SharedRoom => RoomKind::SharedRoom,
        RoomType::NotSharedRoom => *[RoomKind::EntireHome, RoomKind::PrivateRoom].choose(rng).unwrap(),
    }
}

fn room_ok(t: Option<RoomType>, k: RoomKind) -> bool {
    t.is_none_or(|t| crate::oracle::room_type_matches(t, k))
}

impl Gen {
    fn draft(&mut self) -> Draft {
        let (region, cities) = *self.pick(REGIONS);
        let origin = self.pick(ORIGINS).to_string();
        let k = *self.pick(&[1usize, 1, 2, 2, 3]);
        let mut pool: Vec<&str> = cities.to_vec();
        pool.shuffle(&mut self.rng);
        let mut route = vec![origin.clone()];
        route.extend(pool[..k].iter().map(|s| s.to_string()));
        route.push(origin);
        let distractor = pool[k].to_string();

        let mut c = HardConstraintSet::default();
        if self.rng.gen_bool(0.5) {
            c.room_rule = Some(*self.pick(&RoomRule::ALL));
        }
        if self.rng.gen_bool(0.5) {
            c.room_type = Some(*self.pick(&RoomType::ALL));
        }
        if self.rng.gen_bool(0.7) {
            let n = self.rng.gen_range(1..=4);
            let mut all = Cuisine::ALL.to_vec();
            all.shuffle(&mut self.rng);
            c.cuisines = all[..n].iter().copied().collect();
        }
        let r: f64 = self.rng.gen();
        c.transportation = if r < 0.25 {
            Some(TransportRule::NoFlight)
        } else if r < 0.4 {
            Some(TransportRule::NoSelfDriving)
        } else {
            None
        };
        let legs = match c.transportation {
            Some(TransportRule::NoFlight) => {
                LegPlan::Ground(*self.pick(&[GroundMode::SelfDriving, GroundMode::Taxi]))
            }
            Some(TransportRule::NoSelfDriving) => {
                *self.pick(&[LegPlan::Flight, LegPlan::Ground(GroundMode::Taxi)])
            }
            None => *self.pick(&[
                LegPlan::Flight,
                LegPlan::Ground(GroundMode::SelfDriving),
                LegPlan::Ground(GroundMode::Taxi),
            ]),
        };
        let _ = region;
        Draft {
            route,
            distractor,
            constraints: c,
            group: self.rng.gen_range(1..=6),
            legs,
        }
    }

    fn restaurants(&mut self, city: &str, n: usize) -> Vec<Restaurant> {
        (0..n)
            .map(|_| {
                let name = self.unique(|r| {
                    format!("{} {}", NAME_A.choose(r).unwrap(), NAME_B.choose(r).unwrap())
                });
                let mut all = Cuisine::ALL.to_vec();
                all.shuffle(&mut self.rng);
                let k = self.rng.gen_range(1..=3);
                let mut extra = self.extras(city, &name);
                extra.insert("opening_hours".into(), format!("{}-{}", self.clock(), self.clock()));
                Restaurant {
                    cuisines: all[..k].iter().copied().collect(),
                    average_cost: Money::from_dollars(self.rng.gen_range(10..80)),
                    name,
                    city: city.to_string(),
                    extra,
                }
            })
            .collect()
    }

    fn attractions(&mut self, city: &str, n: usize) -> Vec<Attraction> {
        (0..n)
            .map(|_| {
                let name = self.unique(|r| {
                    format!("{} {}", SIGHT_A.choose(r).unwrap(), SIGHT_B.choose(r).unwrap())
                });
                let mut extra = self.extras(city, &name);
                extra.insert(
                    "coordinates".into(),
                    format!(
                        "{:.4}, {:.4}",
                        self.rng.gen_range(25.0..48.0),
                        -self.rng.gen_range(70.0..125.0)
                    ),
                );
                Attraction {
                    name,
                    city: city.to_string(),
                    extra,
                }
            })
            .collect()
    }

    fn accommodations(&mut self, city: &str, n: usize) -> Vec<Accommodation> {
        (0..n)
            .map(|_| {
                let name = self.unique(|r| {
                    format!(
                        "{} {} {}",
                        STAY_A.choose(r).unwrap(),
                        STAY_B.choose(r).unwrap(),
                        STAY_C.choose(r).unwrap()
                    )
                });
                let mut rules = BTreeSet::new();
                for rule in RoomRule::ALL {
                    if self.rng.gen_bool(0.25) {
                        rules.insert(rule);
                    }
                }
                let mut extra = self.extras(city, &name);
                extra.insert("host_name".into(), format!("{} {}", self.pick(STAY_A), self.pick(STREETS)));
                Accommodation {
                    price: Money::from_dollars(self.rng.gen_range(60..400)),
                    room_type: *self.pick(&[RoomKind::EntireHome, RoomKind::PrivateRoom, RoomKind::SharedRoom]),
                    house_rules: rules,
                    minimum_nights: self.rng.gen_range(1..=3),
                    maximum_occupancy: self.rng.gen_range(1..=6),
                    name,
                    city: city.to_string(),
                    extra,
                }
            })
            .collect()
    }

    fn transport(&mut self, pairs: &[(String, String)]) -> (Vec<Flight>, Vec<GroundRoute>) {
        let mut flights = Vec::new();
        let mut ground = Vec::new();
        for (from, to) in pairs {
            for _ in 0..self.rng.gen_range(2..=3) {
                let number = self.unique(|r| format!("F{:07}", r.gen_range(1_000_000..9_999_999)));
                let mut extra = IndexMap::new();
                extra.insert("aircraft".into(), self.pick(&["A320", "B737", "E175", "A321"]).to_string());
                extra.insert("distance".into(), format!("{} miles", self.rng.gen_range(150..2800)));
                extra.insert("terminal".into(), format!("Terminal {}", self.rng.gen_range(1..6)));
                flights.push(Flight {
                    flight_number: number,
                    origin: from.clone(),
                    destination: to.clone(),
                    departure_time: self.clock(),
                    arrival_time: self.clock(),
                    price: Money::from_dollars(self.rng.gen_range(60..700)),
                    extra,
                });
            }
            let hours = self.rng.gen_range(1..30);
            for mode in [GroundMode::SelfDriving, GroundMode::Taxi] {
                let mut extra = IndexMap::new();
                extra.insert("distance".into(), format!("{} km", hours * self.rng.gen_range(70..100)));
                extra.insert("notes".into(), self.sentence(6, 10));
                let per_hour = if mode == GroundMode::Taxi { 60 } else { 6 };
                ground.push(GroundRoute {
                    mode,
                    origin: from.clone(),
                    destination: to.clone(),
                    duration: format!("{hours} hours {} mins", self.rng.gen_range(0..60)),
                    cost: Money::from_dollars(hours * per_hour + self.rng.gen_range(0..20)),
                    extra,
                });
            }
        }
        (flights, ground)
    }

    fn query_text(&mut self, d: &Draft, days: u32, start: NaiveDate, budget: Money) -> String {
        let end = start + chrono::Duration::days(days as i64 - 1);
        let k = d.route.len() - 2;
        let cities = if k == 1 { "1 city".to_string() } else { format!("{k} cities") };
        let region = region_of(&d.route[1]);
        let mut s = vec![format!(
            "Could you help plan a {days}-day trip for a group of {} departing from {} and visiting {cities} in {region} from March {} to March {}, 2022?",
            d.group,
            d.route[0],
            ordinal(start.day()),
            ordinal(end.day()),
        )];
        s.push(format!("Our budget is {budget}."));
        let c = &d.constraints;
        if let Some(rule) = c.room_rule {
            s.push(
                match rule {
                    RoomRule::PetsAllowed => "We will be bringing pets, so the accommodations must be pet-friendly.",
                    RoomRule::PartiesAllowed => "Our lodgings should allow parties.",
                    RoomRule::SmokingAllowed => "Some of us smoke, so smoking must be allowed where we stay.",
                    RoomRule::ChildrenAllowed => "We are travelling with children under 10, so the places we stay must welcome them.",
                    RoomRule::VisitorsAllowed => "We would like to be able to have visitors where we stay.",
                }
                .to_string(),
            );
        }
        if let Some(t) = c.room_type {
            s.push(
                match t {
                    RoomType::EntireRoom => "Entire rooms would be ideal.",
                    RoomType::PrivateRoom => "Private rooms would be ideal.",
                    RoomType::SharedRoom => "Shared rooms are fine with us.",
                    RoomType::NotSharedRoom => "The rooms should not be shared.",
                }
                .to_string(),
            );
        }
        if !c.cuisines.is_empty() {
            let mut names: Vec<&str> = c.cuisines.iter().map(|c| c.name()).collect();
            names.shuffle(&mut self.rng);
            let list = match names.len() {
                1 => names[0].to_string(),
                n => format!("{} and {}", names[..n - 1].join(", "), names[n - 1]),
            };
            s.push(format!("We would love to try {list} food during the trip."));
        }
        match c.transportation {
            Some(TransportRule::NoFlight) => s.push("We prefer not to fly.".into()),
            Some(TransportRule::NoSelfDriving) => s.push("We will not drive ourselves.".into()),
            None => {}
        }
        s.join(" ")
    }

    fn record(&mut self, id: String) -> SynthRecord {
        let d = self.draft();
        let k = d.route.len() - 2;
        let days = (2 * k + 1) as u32;
        let start = NaiveDate::from_ymd_opt(2022, 3, self.rng.gen_range(1..=20)).unwrap();
        let dates: Vec<NaiveDate> = (0..days).map(|i| start + chrono::Duration::days(i as i64)).collect();

        let visited: Vec<String> = d.route[1..=k].to_vec();
        let mut sandbox_cities = visited.clone();
        sandbox_cities.push(d.distractor.clone());
        let mut reference = ReferenceBundle::default();
        for city in &sandbox_cities {
            reference.restaurants.extend(self.restaurants(city, 11));
            reference.attractions.extend(self.attractions(city, 7));
            reference.accommodations.extend(self.accommodations(city, 6));
        }
        let mut pairs: Vec<(String, String)> =
            d.route.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        pairs.push((d.route[0].clone(), d.distractor.clone()));
        pairs.push((d.distractor.clone(), d.route[0].clone()));
        let (flights, ground) = self.transport(&pairs);
        reference.flights = flights;
        reference.ground_routes = ground;

        let plan = self.compliant_plan(&d, &mut reference);
        let mut query = TripQuery {
            id,
            text: String::new(),
            origin_city: d.route[0].clone(),
            destination_region: region_of(&d.route[1]).to_string(),
            city_count: k as u32,
            day_count: days,
            group_size: d.group,
            dates,
            budget: Money::ZERO,
            hard_constraints: d.constraints.clone(),
        };
        let cost = compute_cost(&plan, &query, &reference).expect("plan resolves").grand_total;
        let budget = Money::from_dollars((cost.cents() * 5 / 4 / 10_000 + 1) * 100);
        query.budget = budget;
        query.hard_constraints.budget = Some(budget);
        query.text = self.query_text(&d, days, start, budget);
        SynthRecord {
            query,
            reference,
            plan,
        }
    }

    /// Builds the compliant plan, adjusting the sandbox where the random draw
    /// left no compliant option.
    fn compliant_plan(&mut self, d: &Draft, reference: &mut ReferenceBundle) -> Plan {
        let k = d.route.len() - 2;
        let c = &d.constraints;
        let mut meals: Vec<(usize, SlotName, String)> = Vec::new(); // day index, slot, city
        let mut sights: Vec<(usize, String)> = Vec::new();
        let mut days: Vec<DayEntry> = Vec::new();

        for i in 0..=(2 * k) {
            let mut day = DayEntry::default();
            if i % 2 == 0 {
                let from = &d.route[i / 2];
                let to = &d.route[i / 2 + 1];
                day.current_city = Slot::Filled(CurrentCity::Transition {
                    from: from.clone(),
                    to: to.clone(),
                });
                if i == 0 {
                    meals.push((i, SlotName::Lunch, to.clone()));
                    meals.push((i, SlotName::Dinner, to.clone()));
                    sights.push((i, to.clone()));
                } else if i == 2 * k {
                    meals.push((i, SlotName::Breakfast, from.clone()));
                    meals.push((i, SlotName::Lunch, from.clone()));
                    sights.push((i, from.clone()));
                } else {
                    meals.push((i, SlotName::Breakfast, from.clone()));
                    meals.push((i, SlotName::Lunch, from.clone()));
                    meals.push((i, SlotName::Dinner, to.clone()));
                    sights.push((i, to.clone()));
                }
            } else {
                let city = &d.route[i / 2 + 1];
                day.current_city = Slot::Filled(CurrentCity::Single(city.clone()));
                for m in SlotName::MEALS {
                    meals.push((i, m, city.clone()));
                }
                sights.push((i, city.clone()));
                sights.push((i, city.clone()));
            }
            days.push(day);
        }

        // Transport legs.
        for (i, day) in days.iter_mut().enumerate().filter(|(i, _)| i % 2 == 0) {
            let from = &d.route[i / 2];
            let to = &d.route[i / 2 + 1];
            day.transport = Slot::Filled(leg_from_reference(reference, d.legs, from, to, &mut self.rng));
        }

        // Restaurants: distinct, each serving a queried cuisine, covering all.
        let mut taken: HashSet<String> = HashSet::new();
        let mut chosen_idx = Vec::new();
        for (i, slot, city) in &meals {
            let mut cands: Vec<usize> = reference
                .restaurants
                .iter()
                .enumerate()
                .filter(|(_, r)| &r.city == city && !taken.contains(&r.name))
                .map(|(j, _)| j)
                .collect();
            cands.shuffle(&mut self.rng);
            let j = cands
                .iter()
                .copied()
                .find(|&j| c.cuisines.is_empty() || !reference.restaurants[j].cuisines.is_disjoint(&c.cuisines))
                .unwrap_or(cands[0]);
            if !c.cuisines.is_empty() && reference.restaurants[j].cuisines.is_disjoint(&c.cuisines) {
                let add = *c.cuisines.iter().collect::<Vec<_>>().choose(&mut self.rng).unwrap();
                reference.restaurants[j].cuisines.insert(*add);
            }
            taken.insert(reference.restaurants[j].name.clone());
            chosen_idx.push(j);
            let r = &reference.restaurants[j];
            *days[*i].meal_mut(*slot) = Slot::Filled(PlaceRef::new(&r.name, &r.city));
        }
        for cuisine in &c.cuisines {
            if !chosen_idx.iter().any(|&j| reference.restaurants[j].cuisines.contains(cuisine)) {
                let j = *chosen_idx.choose(&mut self.rng).unwrap();
                reference.restaurants[j].cuisines.insert(*cuisine);
            }
        }

        // Attractions: distinct per plan.
        let mut seen: HashSet<String> = HashSet::new();
        for (i, city) in &sights {
            let mut cands: Vec<&Attraction> = reference
                .attractions
                .iter()
                .filter(|a| &a.city == city && !seen.contains(&a.name))
                .collect();
            cands.shuffle(&mut self.rng);
            let a = cands[0];
            seen.insert(a.name.clone());
            let place = PlaceRef::new(&a.name, &a.city);
            match &mut days[*i].attractions {
                Slot::Filled(v) => v.push(place),
                s @ Slot::Unnecessary => *s = Slot::Filled(vec![place]),
            }
        }

        // One stay per visited city, two nights each.
        for (n, city) in d.route[1..=k].iter().enumerate() {
            let ok = |a: &Accommodation| {
                &a.city == city
                    && a.minimum_nights <= 2
                    && c.room_rule.is_none_or(|r| a.permits(r))
                    && room_ok(c.room_type, a.room_type)
            };
            let mut cands: Vec<usize> = (0..reference.accommodations.len())
                .filter(|&j| ok(&reference.accommodations[j]))
                .collect();
            if cands.is_empty() {
                let j = reference.accommodations.iter().position(|a| &a.city == city).unwrap();
                let a = &mut reference.accommodations[j];
                a.minimum_nights = 1;
                if let Some(r) = c.room_rule {
                    a.house_rules.remove(&r);
                }
                if let Some(t) = c.room_type {
                    if !room_ok(Some(t), a.room_type) {
                        a.room_type = room_kind_for(t, &mut self.rng);
                    }
                }
                cands.push(j);
            }
            let j = *cands.choose(&mut self.rng).unwrap();
            // Keep a long-minimum listing around for short-stay drafts.
            if !reference
                .accommodations
                .iter()
                .enumerate()
                .any(|(x, a)| x != j && &a.city == city && a.minimum_nights >= 3)
            {
                let x = reference
                    .accommodations
                    .iter()
                    .enumerate()
                    .position(|(x, a)| x != j && &a.city == city)
                    .unwrap();
                reference.accommodations[x].minimum_nights = 3;
            }
            let a = &reference.accommodations[j];
            let place = PlaceRef::new(&a.name, &a.city);
            days[2 * n].accommodation = Slot::Filled(place.clone());
            days[2 * n + 1].accommodation = Slot::Filled(place);
        }
        Plan::new(days)
    }
}

fn region_of(city: &str) -> &'static str {
    REGIONS
        .iter()
        .find(|(_, cs)| cs.contains(&city))
        .map(|(r, _)| *r)
        .unwrap_or("the region")
}

fn leg_from_reference(
    reference: &ReferenceBundle,
    legs: LegPlan,
    from: &str,
    to: &str,
    rng: &mut ChaCha8Rng,
) -> Transport {
    match legs {
        LegPlan::Flight => {
            let options: Vec<&Flight> = reference
                .flights
                .iter()
                .filter(|f| f.origin == from && f.destination == to)
                .collect();
            let f = options.choose(rng).expect("route has flights");
            Transport::Leg(TransportLeg {
                mode: TransportMode::Flight,
                flight_number: Some(f.flight_number.clone()),
                from: from.into(),
                to: to.into(),
                departure_time: Some(f.departure_time.clone()),
                arrival_time: Some(f.arrival_time.clone()),
                duration: None,
                cost: None,
            })
        }
        LegPlan::Ground(mode) => ground_leg(reference, mode, from, to),
    }
}

fn ground_leg(reference: &ReferenceBundle, mode: GroundMode, from: &str, to: &str) -> Transport {
    let g = reference
        .ground_routes
        .iter()
        .find(|g| g.mode == mode && g.origin == from && g.destination == to)
        .expect("route has ground options");
    Transport::Leg(TransportLeg {
        mode: mode.into(),
        flight_number: None,
        from: from.into(),
        to: to.into(),
        departure_time: None,
        arrival_time: None,
        duration: Some(g.duration.clone()),
        cost: Some(g.cost),
    })
}

/// `n` records from `seed`, ids `<prefix>-001` onwards.
pub fn records(prefix: &str, n: usize, seed: u64) -> Vec<SynthRecord> {
    let mut g = Gen::new(seed);
    (1..=n).map(|i| g.record(format!("{prefix}-{i:03}"))).collect()
}

pub fn train_records() -> Vec<SynthRecord> {
    records("train", TRAIN_SIZE, TRAIN_SEED)
}

/// Applies `flaw` to a compliant plan.
pub fn plant(flaw: Flaw, rec: &SynthRecord) -> Plan {
    let mut p = rec.plan.clone();
    let first_city = rec.query_route_city(1);
    match flaw {
        Flaw::None => {}
        Flaw::RepeatedAttractionShortStay => {
            let repeat = p.days[0].attraction_list()[0].clone();
            if let Slot::Filled(v) = &mut p.days[1].attractions {
                v[0] = repeat;
            }
            let current = p.days[0].accommodation.filled().unwrap().name.clone();
            let long = rec
                .reference
                .accommodations
                .iter()
                .find(|a| a.city == first_city && a.minimum_nights >= 3 && a.name != current)
                .expect("city keeps a long-minimum listing");
            let place = PlaceRef::new(&long.name, &long.city);
            p.days[0].accommodation = Slot::Filled(place.clone());
            p.days[1].accommodation = Slot::Filled(place);
        }
        Flaw::RepeatedRestaurant => {
            p.days[1].dinner = p.days[0].dinner.clone();
        }
        Flaw::HallucinatedRestaurant => {
            p.days[1].lunch = Slot::Filled(PlaceRef::new("Imaginary Bistro", &first_city));
        }
        Flaw::MissingBreakfast => {
            p.days[1].breakfast = Slot::Unnecessary;
        }
        Flaw::ConflictingTransport => {
            let last = p.days.len() - 1;
            let (from, to) = match p.days[last].current_city.filled() {
                Some(CurrentCity::Transition { from, to }) => (from.clone(), to.clone()),
                _ => unreachable!("last day travels home"),
            };
            let mode = match p.days[0].transport.filled().and_then(Transport::mode) {
                Some(TransportMode::SelfDriving) => GroundMode::Taxi,
                _ => GroundMode::SelfDriving,
            };
            p.days[last].transport = Slot::Filled(ground_leg(&rec.reference, mode, &from, &to));
        }
        Flaw::OutOfCityRestaurant => {
            let used: HashSet<&str> = p
                .days
                .iter()
                .flat_map(|d| SlotName::MEALS.map(|m| d.meal(m).filled().map(|r| r.name.as_str())))
                .flatten()
                .collect();
            let visited: Vec<&str> = (1..=rec.query.city_count as usize)
                .map(|i| rec.route_city_ref(i))
                .collect();
            let away = rec
                .reference
                .restaurants
                .iter()
                .find(|r| !visited.contains(&r.city.as_str()) && !used.contains(r.name.as_str()))
                .expect("sandbox has an unvisited city");
            p.days[1].lunch = Slot::Filled(PlaceRef::new(&away.name, &away.city));
        }
    }
    p
}

impl SynthRecord {
    fn route_city_ref(&self, i: usize) -> &str {
        // Day 2i-1 (1-based) is the transition into visited city i.
        match self.plan.days[2 * (i - 1)].current_city.filled() {
            Some(CurrentCity::Transition { to, .. }) => to,
            _ => unreachable!("odd days are transitions"),
        }
    }

    fn query_route_city(&self, i: usize) -> String {
        self.route_city_ref(i).to_string()
    }
}

const FLAW_CYCLE: [(Flaw, RefinerBehaviour); 10] = [
    (Flaw::RepeatedAttractionShortStay, RefinerBehaviour::Fixes),
    (Flaw::RepeatedRestaurant, RefinerBehaviour::Fixes),
    (Flaw::HallucinatedRestaurant, RefinerBehaviour::Fixes),
    (Flaw::MissingBreakfast, RefinerBehaviour::Fixes),
    (Flaw::ConflictingTransport, RefinerBehaviour::Fixes),
    (Flaw::OutOfCityRestaurant, RefinerBehaviour::Fixes),
    (Flaw::None, RefinerBehaviour::Fixes),
    (Flaw::RepeatedAttractionShortStay, RefinerBehaviour::GarbledThenFixes),
    (Flaw::RepeatedRestaurant, RefinerBehaviour::RegressesThenFixes),
    (Flaw::None, RefinerBehaviour::Fixes),
];

pub const GARBLED_REPLY: &str = "Sorry, I could not produce a revised plan this time.";

/// Twenty validation queries, each with a draft and scripted refiner replies.
pub fn validation_scenarios() -> Vec<Scenario> {
    records("val", VALIDATION_SIZE, VALIDATION_SEED)
        .into_iter()
        .enumerate()
        .map(|(i, record)| {
            let (flaw, behaviour) = FLAW_CYCLE[i % FLAW_CYCLE.len()];
            let draft = plant(flaw, &record);
            let fixed = render_plan(&record.plan);
            let refiner_replies = match (flaw, behaviour) {
                (Flaw::None, _) => Vec::new(),
                (_, RefinerBehaviour::Fixes) => vec![fixed],
                (_, RefinerBehaviour::GarbledThenFixes) => vec![GARBLED_REPLY.to_string(), fixed],
                (_, RefinerBehaviour::RegressesThenFixes) => {
                    let mut worse = plant(Flaw::HallucinatedRestaurant, &record);
                    worse.days[1].breakfast = Slot::Unnecessary;
                    vec![render_plan(&worse), fixed]
                }
            };
            Scenario {
                record,
                flaw,
                behaviour,
                draft,
                refiner_replies,
            }
        })
        .collect()
}

/// One line of a scripted-backend file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub stream: String,
    pub reply: String,
}

/// Six scored plans over copies of the first six validation queries. The last
/// query's budget is cut to $100 so its compliant plan fails the budget.
pub fn eval_fixture() -> (Vec<SynthRecord>, Vec<PlanRecord>) {
    let mut recs: Vec<SynthRecord> = records("val", 6, VALIDATION_SEED);
    for r in &mut recs {
        r.query.id = r.query.id.replacen("val", "eval", 1);
    }
    let tight = Money::from_dollars(100);
    recs[5].query.budget = tight;
    recs[5].query.hard_constraints.budget = Some(tight);
    let texts = [
        render_plan(&recs[0].plan),
        render_plan(&plant(Flaw::RepeatedRestaurant, &recs[1])),
        render_plan(&plant(Flaw::HallucinatedRestaurant, &recs[2])),
        render_plan(&plant(Flaw::MissingBreakfast, &recs[3])),
        "I am unable to create this plan.".to_string(),
        render_plan(&recs[5].plan),
    ];
    let plans = recs
        .iter()
        .zip(texts)
        .map(|(r, plan_text)| PlanRecord {
            query_id: r.query.id.clone(),
            plan_text,
        })
        .collect();
    (recs, plans)
}

fn split_of(name: SplitName, recs: &[SynthRecord], with_plans: bool) -> DatasetSplit {
    DatasetSplit {
        name,
        records: recs
            .iter()
            .map(|r| SplitRecord {
                query: r.query.clone(),
                reference: r.reference.clone(),
                plan: with_plans.then(|| r.plan.clone()),
            })
            .collect(),
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IngestError> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).expect("row serializes");
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| IngestError::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

/// Writes the fixture tree under `root`:
///
/// ```text
/// train/       queries.jsonl plans.jsonl reference/<id>/*.csv
/// validation/  queries.jsonl reference/ compliant_plans.jsonl drafts.jsonl
///              scripts/planner.jsonl scripts/refiner.jsonl
/// eval/        queries.jsonl reference/ plans.jsonl
/// ```
pub fn write_fixtures(root: &Path) -> Result<(), IngestError> {
    let mkdir = |p: &Path| {
        fs::create_dir_all(p).map_err(|e| IngestError::Io {
            path: p.to_path_buf(),
            source: e,
        })
    };
    let train = train_records();
    let t = root.join("train");
    mkdir(&t)?;
    write_split(
        &split_of(SplitName::Train, &train, true),
        &t.join("queries.jsonl"),
        &t.join("reference"),
        Some(&t.join("plans.jsonl")),
    )?;

    let scenarios = validation_scenarios();
    let v = root.join("validation");
    mkdir(&v.join("scripts"))?;
    let recs: Vec<SynthRecord> = scenarios.iter().map(|s| s.record.clone()).collect();
    write_split(
        &split_of(SplitName::Validation, &recs, false),
        &v.join("queries.jsonl"),
        &v.join("reference"),
        None,
    )?;
    let plan_rows = |f: &dyn Fn(&Scenario) -> String| -> Vec<PlanRecord> {
        scenarios
            .iter()
            .map(|s| PlanRecord {
                query_id: s.record.query.id.clone(),
                plan_text: f(s),
            })
            .collect()
    };
    write_jsonl(&v.join("compliant_plans.jsonl"), &plan_rows(&|s| render_plan(&s.record.plan)))?;
    write_jsonl(&v.join("drafts.jsonl"), &plan_rows(&|s| render_plan(&s.draft)))?;
    let planner: Vec<ScriptLine> = scenarios
        .iter()
        .map(|s| ScriptLine {
            stream: format!("planner/{}", s.record.query.id),
            reply: render_plan(&s.draft),
        })
        .collect();
    let refiner: Vec<ScriptLine> = scenarios
        .iter()
        .flat_map(|s| {
            s.refiner_replies.iter().map(|r| ScriptLine {
                stream: format!("refiner/{}", s.record.query.id),
                reply: r.clone(),
            })
        })
        .collect();
    write_jsonl(&v.join("scripts/planner.jsonl"), &planner)?;
    write_jsonl(&v.join("scripts/refiner.jsonl"), &refiner)?;

    let (eval_recs, eval_plans) = eval_fixture();
    let e = root.join("eval");
    mkdir(&e)?;
    write_split(
        &split_of(SplitName::Test, &eval_recs, false),
        &e.join("queries.jsonl"),
        &e.join("reference"),
        None,
    )?;
    write_jsonl(&e.join("plans.jsonl"), &eval_plans)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{check_commonsense, check_hard};
    use crate::scrub::extract_constraints_rules;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(records("x", 3, 7), records("x", 3, 7));
    }

    #[test]
    fn compliant_plans_pass_everything_and_text_states_the_constraints() {
        for r in records("t", 30, 11) {
            r.query.validate().unwrap();
            let f = check_commonsense(&r.plan, &r.query, &r.reference);
            assert!(f.is_all_success(), "{}:\n{}", r.query.id, f.render());
            let h = check_hard(&r.plan, &r.query, &r.reference);
            assert!(h.all_passed(), "{}: {h:?}", r.query.id);
            let extracted = extract_constraints_rules(&r.query.text).unwrap();
            assert_eq!(extracted, r.query.hard_constraints, "{}", r.query.text);
        }
    }

    #[test]
    fn planted_flaws_fail_exactly_their_constraints() {
        for s in validation_scenarios() {
            let r = &s.record;
            let f = check_commonsense(&s.draft, &r.query, &r.reference);
            let failed: Vec<ConstraintId> =
                f.iter().filter(|(_, v)| !v.is_success()).map(|(c, _)| c).collect();
            assert_eq!(failed, s.flaw.expected_failures(), "{}:\n{}", r.query.id, f.render());
            for reply in &s.refiner_replies {
                if let Ok(p) = crate::parse_plan(reply, r.query.day_count as usize) {
                    let n = check_commonsense(&p, &r.query, &r.reference).passed_count();
                    assert!(n == 8 || n < f.passed_count(), "{}", r.query.id);
                }
            }
        }
    }

    #[test]
    fn eval_fixture_shape() {
        let (recs, plans) = eval_fixture();
        assert_eq!(recs.len(), 6);
        assert_eq!(plans.len(), 6);
        assert!(crate::parse_plan(&plans[4].plan_text, recs[4].query.day_count as usize).is_err());
    }

    #[test]
    fn ordinals() {
        assert_eq!(ordinal(1), "1st");
        assert_eq!(ordinal(12), "12th");
        assert_eq!(ordinal(22), "22nd");
        assert_eq!(ordinal(23), "23rd");
    }
}
