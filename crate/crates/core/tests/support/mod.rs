//! Generators shared by the property tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tripcraft_core::metrics::{EvalRecord, HardOutcome};
use tripcraft_core::{
    Accommodation, Attraction, ConstraintId, CurrentCity, Cuisine, DayEntry, Flight, GroundMode,
    GroundRoute, HardConstraintSet, Money, PlaceRef, Plan, ReferenceBundle, Restaurant, RoomKind,
    Slot, Transport, TransportLeg, TransportMode, TripQuery,
};

pub fn word() -> impl Strategy<Value = String> {
    "[A-Z][a-z]{2,8}"
}

pub fn name() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..4).prop_map(|w| w.join(" "))
}

pub fn place() -> impl Strategy<Value = PlaceRef> {
    (name(), name()).prop_map(|(n, c)| PlaceRef::new(n, c))
}

pub fn slot<T: std::fmt::Debug + Clone>(s: impl Strategy<Value = T>) -> impl Strategy<Value = Slot<T>> {
    prop_oneof![1 => Just(Slot::Unnecessary), 3 => s.prop_map(Slot::Filled)]
}

pub fn clock() -> impl Strategy<Value = String> {
    (0u32..24, 0u32..60).prop_map(|(h, m)| format!("{h:02}:{m:02}"))
}

pub fn leg() -> impl Strategy<Value = Transport> {
    let flight = (1_000_000u32..9_999_999, name(), name(), clock(), clock()).prop_map(|(n, f, t, d, a)| {
        Transport::Leg(TransportLeg {
            mode: TransportMode::Flight,
            flight_number: Some(format!("F{n}")),
            from: f,
            to: t,
            departure_time: Some(d),
            arrival_time: Some(a),
            duration: None,
            cost: None,
        })
    });
    let ground = (
        prop::bool::ANY,
        name(),
        name(),
        prop::option::of((1u32..40, 0u32..60)),
        prop::option::of(1i64..5000),
    )
        .prop_map(|(taxi, f, t, dur, cost)| {
            Transport::Leg(TransportLeg {
                mode: if taxi { TransportMode::Taxi } else { TransportMode::SelfDriving },
                flight_number: None,
                from: f,
                to: t,
                departure_time: None,
                arrival_time: None,
                duration: dur.map(|(h, m)| format!("{h} hours {m} mins")),
                cost: cost.map(Money::from_dollars),
            })
        });
    prop_oneof![flight, ground]
}

pub fn current_city() -> impl Strategy<Value = CurrentCity> {
    prop_oneof![
        name().prop_map(CurrentCity::Single),
        (name(), name()).prop_map(|(from, to)| CurrentCity::Transition { from, to }),
    ]
}

pub fn day() -> impl Strategy<Value = DayEntry> {
    (
        current_city(),
        slot(leg()),
        slot(place()),
        slot(prop::collection::vec(place(), 1..4)),
        slot(place()),
        slot(place()),
        slot(place()),
    )
        .prop_map(|(c, transport, breakfast, attractions, lunch, dinner, accommodation)| DayEntry {
            current_city: Slot::Filled(c),
            transport,
            breakfast,
            attractions,
            lunch,
            dinner,
            accommodation,
        })
}

pub fn plan() -> impl Strategy<Value = Plan> {
    prop::collection::vec(day(), 1..8).prop_map(Plan::new)
}

pub fn noisy_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        Just("Day 1:\n".to_string()),
        Just("Day 2:\n".to_string()),
        Just("Current City: ".to_string()),
        Just("Transportation: ".to_string()),
        Just("Flight Number: F12, from ".to_string()),
        Just("Taxi from ".to_string()),
        Just(" to ".to_string()),
        Just(", Cost: $".to_string()),
        Just(", Duration: ".to_string()),
        Just("Attraction: ".to_string()),
        Just("Breakfast: -\n".to_string()),
        Just("; ".to_string()),
        "[A-Za-z0-9 ,.:;$-]{0,12}",
        "\\PC{0,6}",
        Just("\n".to_string()),
    ];
    prop::collection::vec(piece, 0..40).prop_map(|v| v.concat())
}

pub fn small_fixture(seed: u64) -> (TripQuery, ReferenceBundle, Plan) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cities = ["Alpha", "Beta", "Gamma"];
    let origin = "Home";
    let n = |rng: &mut ChaCha8Rng| rng.gen_range(1..=5);
    let mut r = ReferenceBundle::default();
    for (i, _) in (0..n(&mut rng)).enumerate() {
        let (o, d) = if rng.gen_bool(0.5) { (origin, cities[0]) } else { (cities[0], origin) };
        r.flights.push(Flight {
            flight_number: format!("F{:07}", seed * 100 + i as u64),
            origin: o.into(),
            destination: d.into(),
            departure_time: "08:00".into(),
            arrival_time: "10:00".into(),
            price: Money::from_cents(rng.gen_range(1000..90_000)),
            extra: Default::default(),
        });
    }
    for _ in 0..n(&mut rng) {
        let (o, d) = if rng.gen_bool(0.5) { (origin, cities[0]) } else { (cities[0], origin) };
        r.ground_routes.push(GroundRoute {
            mode: if rng.gen_bool(0.5) { GroundMode::Taxi } else { GroundMode::SelfDriving },
            origin: o.into(),
            destination: d.into(),
            duration: "3 hours".into(),
            cost: Money::from_cents(rng.gen_range(100..50_000)),
            extra: Default::default(),
        });
    }
    for i in 0..n(&mut rng) {
        r.restaurants.push(Restaurant {
            name: format!("Eatery {i}"),
            city: cities[0].into(),
            cuisines: BTreeSet::from([Cuisine::ALL[i % 7]]),
            average_cost: Money::from_cents(rng.gen_range(500..9000)),
            extra: Default::default(),
        });
    }
    for i in 0..n(&mut rng) {
        r.attractions.push(Attraction {
            name: format!("Sight {i}"),
            city: cities[0].into(),
            extra: Default::default(),
        });
    }
    for i in 0..n(&mut rng) {
        r.accommodations.push(Accommodation {
            name: format!("Stay {i}"),
            city: cities[0].into(),
            price: Money::from_cents(rng.gen_range(3000..60_000)),
            room_type: RoomKind::PrivateRoom,
            house_rules: BTreeSet::new(),
            minimum_nights: 1,
            maximum_occupancy: rng.gen_range(1..=5),
            extra: Default::default(),
        });
    }
    let days = rng.gen_range(1..=3);
    let group = rng.gen_range(1..=8);
    let mut plan_days = Vec::new();
    for _ in 0..days {
        let mut d = DayEntry {
            current_city: Slot::Filled(CurrentCity::Single(cities[0].into())),
            ..Default::default()
        };
        if rng.gen_bool(0.6) {
            d.transport = Slot::Filled(if rng.gen_bool(0.5) {
                let f = r.flights.choose(&mut rng).unwrap();
                Transport::Leg(TransportLeg {
                    mode: TransportMode::Flight,
                    flight_number: Some(f.flight_number.clone()),
                    from: f.origin.clone(),
                    to: f.destination.clone(),
                    departure_time: None,
                    arrival_time: None,
                    duration: None,
                    cost: None,
                })
            } else {
                let g = r.ground_routes.choose(&mut rng).unwrap();
                Transport::Leg(TransportLeg {
                    mode: g.mode.into(),
                    flight_number: None,
                    from: g.origin.clone(),
                    to: g.destination.clone(),
                    departure_time: None,
                    arrival_time: None,
                    duration: None,
                    cost: None,
                })
            });
        }
        for meal in [&mut d.breakfast, &mut d.lunch, &mut d.dinner] {
            if rng.gen_bool(0.7) {
                let x = r.restaurants.choose(&mut rng).unwrap();
                *meal = Slot::Filled(PlaceRef::new(&x.name, &x.city));
            }
        }
        if rng.gen_bool(0.5) {
            let a = r.attractions.choose(&mut rng).unwrap();
            d.attractions = Slot::Filled(vec![PlaceRef::new(&a.name, &a.city)]);
        }
        if rng.gen_bool(0.7) {
            let a = r.accommodations.choose(&mut rng).unwrap();
            d.accommodation = Slot::Filled(PlaceRef::new(&a.name, &a.city));
        }
        plan_days.push(d);
    }
    let start = chrono::NaiveDate::from_ymd_opt(2022, 3, 1).unwrap();
    let query = TripQuery {
        id: format!("small-{seed}"),
        text: String::new(),
        origin_city: origin.into(),
        destination_region: "Region".into(),
        city_count: 1,
        day_count: days,
        group_size: group,
        dates: (0..days).map(|i| start + chrono::Duration::days(i as i64)).collect(),
        budget: Money::from_dollars(10_000),
        hard_constraints: HardConstraintSet::default(),
    };
    (query, r, Plan::new(plan_days))
}

/// Line-by-line summation with plain linear scans.
pub fn brute_force_cost(plan: &Plan, q: &TripQuery, r: &ReferenceBundle) -> i64 {
    let g = q.group_size as i64;
    let mut cents = 0;
    for d in &plan.days {
        if let Slot::Filled(Transport::Leg(l)) = &d.transport {
            if l.mode == TransportMode::Flight {
                let f = r.flights.iter().find(|f| Some(&f.flight_number) == l.flight_number.as_ref()).unwrap();
                cents += f.price.cents() * g;
            } else {
                let gr = r
                    .ground_routes
                    .iter()
                    .find(|x| TransportMode::from(x.mode) == l.mode && x.origin == l.from && x.destination == l.to)
                    .unwrap();
                cents += gr.cost.cents();
            }
        }
        for meal in [&d.breakfast, &d.lunch, &d.dinner] {
            if let Slot::Filled(p) = meal {
                let x = r.restaurants.iter().find(|x| x.name == p.name && x.city == p.city).unwrap();
                cents += x.average_cost.cents() * g;
            }
        }
        if let Slot::Filled(p) = &d.accommodation {
            let a = r.accommodations.iter().find(|a| a.name == p.name && a.city == p.city).unwrap();
            let occ = a.maximum_occupancy as i64;
            let rooms = (g + occ - 1) / occ;
            cents += a.price.cents() * rooms;
        }
    }
    cents
}

pub fn random_record(rng: &mut ChaCha8Rng, id: usize) -> EvalRecord {
    let delivered = rng.gen_bool(0.9);
    let mut cs = [false; 8];
    if delivered {
        cs.iter_mut().for_each(|b| *b = rng.gen_bool(0.8));
    }
    let mut opt = |p: f64| rng.gen_bool(p).then(|| delivered && rng.gen_bool(0.7));
    let hard = HardOutcome {
        room_rule: opt(0.5),
        room_type: opt(0.5),
        cuisine: opt(0.5),
        budget: Some(opt(1.0).unwrap()),
        transportation: opt(0.3),
    };
    EvalRecord {
        query_id: format!("q{id}"),
        delivered,
        commonsense: cs,
        hard,
        hallucinated: !cs[ConstraintId::ValidInformationInSandbox.index()],
        passed_count_commonsense: cs.iter().filter(|b| **b).count(),
    }
}
