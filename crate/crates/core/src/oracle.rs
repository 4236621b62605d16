//! Deterministic rule-based feedback generator.
//!
//! Checks the eight commonsense constraints and the query's hard constraints
//! against the query's reference sandbox, and prices a plan.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    extract_entities, fold, Accommodation, ConstraintId, CurrentCity, EntityKind, EntityRef,
    Feedback, GroundMode, Money, Plan, ReferenceBundle, Restaurant, RoomKind, RoomType, Slot,
    SlotName, TransportMode, TransportRule, TripQuery, Verdict,
};

pub use crate::domain::{FeedbackParseError, ALL_SUCCESS_BLOCK};

/// Bumped whenever a rule or reason string changes; reports from different
/// oracle versions are not comparable.
pub const ORACLE_VERSION: &str = "1";

/// Lookup structure over one reference bundle. Keys are trimmed and case-folded.
pub struct SandboxIndex<'a> {
    restaurants: HashMap<(String, String), &'a Restaurant>,
    attractions: HashSet<(String, String)>,
    accommodations: HashMap<(String, String), &'a Accommodation>,
    flights: HashMap<String, Vec<(String, String, Money)>>,
    ground: HashMap<(GroundMode, String, String), Money>,
}

impl<'a> SandboxIndex<'a> {
    pub fn new(bundle: &'a ReferenceBundle) -> Self {
        let mut ground = HashMap::new();
        for g in &bundle.ground_routes {
            ground
                .entry((g.mode, fold(&g.origin), fold(&g.destination)))
                .or_insert(g.cost);
        }
        let mut flights: HashMap<String, Vec<_>> = HashMap::new();
        for f in &bundle.flights {
            flights.entry(fold(&f.flight_number)).or_default().push((
                fold(&f.origin),
                fold(&f.destination),
                f.price,
            ));
        }
        let mut restaurants = HashMap::new();
        for r in &bundle.restaurants {
            restaurants.entry((fold(&r.name), fold(&r.city))).or_insert(r);
        }
        let mut accommodations = HashMap::new();
        for a in &bundle.accommodations {
            accommodations.entry((fold(&a.name), fold(&a.city))).or_insert(a);
        }
        SandboxIndex {
            restaurants,
            attractions: bundle
                .attractions
                .iter()
                .map(|a| (fold(&a.name), fold(&a.city)))
                .collect(),
            accommodations,
            flights,
            ground,
        }
    }

    pub fn restaurant(&self, name: &str, city: &str) -> Option<&'a Restaurant> {
        self.restaurants.get(&(fold(name), fold(city))).copied()
    }

    pub fn accommodation(&self, name: &str, city: &str) -> Option<&'a Accommodation> {
        self.accommodations.get(&(fold(name), fold(city))).copied()
    }

    /// Unit price of the entity: per person for flights and meals, per leg for
    /// ground routes, per room-night for accommodations, zero for attractions.
    pub fn price(&self, e: &EntityRef) -> Option<Money> {
        match e.kind {
            EntityKind::Restaurant => self.restaurant(&e.name, &e.city).map(|r| r.average_cost),
            EntityKind::Accommodation => self.accommodation(&e.name, &e.city).map(|a| a.price),
            EntityKind::Attraction => self
                .attractions
                .contains(&(fold(&e.name), fold(&e.city)))
                .then_some(Money::ZERO),
            EntityKind::Flight => {
                let dest = fold(e.destination.as_deref()?);
                let from = fold(&e.city);
                self.flights
                    .get(&fold(&e.name))?
                    .iter()
                    .find(|(o, d, _)| *o == from && *d == dest)
                    .map(|(_, _, p)| *p)
            }
            EntityKind::GroundRoute => {
                let mode = GroundMode::parse(&e.name)?;
                let dest = fold(e.destination.as_deref()?);
                self.ground.get(&(mode, fold(&e.city), dest)).copied()
            }
        }
    }

    pub fn resolves(&self, e: &EntityRef) -> bool {
        self.price(e).is_some()
    }
}

/// Runs the eight commonsense checks.
pub fn check_commonsense(plan: &Plan, query: &TripQuery, reference: &ReferenceBundle) -> Feedback {
    let index = SandboxIndex::new(reference);
    let entities = extract_entities(plan);
    let verdicts = [
        check_city_route(plan, query),
        check_repeated_restaurants(plan),
        check_repeated_attractions(plan),
        check_minimum_nights(plan, &index),
        check_transport_conflict(plan),
        check_current_city(plan, &entities),
        check_sandbox(&entities, &index),
        check_not_absent(plan),
    ];
    Feedback::new(verdicts)
}

fn check_city_route(plan: &Plan, query: &TripQuery) -> Verdict {
    let days: Vec<&CurrentCity> = plan.days.iter().filter_map(|d| d.current_city.filled()).collect();
    let origin = fold(&query.origin_city);
    let first_ok = matches!(plan.days.first().map(|d| &d.current_city),
        Some(Slot::Filled(c)) if fold(c.first()) == origin);
    if !first_ok {
        return Verdict::fail(format!(
            "The first day's city should be {}.",
            query.origin_city
        ));
    }
    let mut cities: Vec<String> = Vec::new();
    for c in &days {
        cities.extend(c.cities().into_iter().map(fold));
    }
    if cities.first() != cities.last() {
        return Verdict::fail("The trip should be a closed circle.");
    }
    if days.windows(2).any(|w| fold(w[0].last()) != fold(w[1].first())) {
        return Verdict::fail("The city sequence is invalid.");
    }
    let visited: BTreeSet<&String> = cities.iter().filter(|c| **c != origin).collect();
    if visited.len() != query.city_count as usize {
        return Verdict::fail(format!(
            "The trip should visit {} cities, but the plan visits {}.",
            query.city_count,
            visited.len()
        ));
    }
    Verdict::Success
}

fn check_repeated_restaurants(plan: &Plan) -> Verdict {
    let mut seen = HashSet::new();
    for (i, day) in plan.days.iter().enumerate() {
        for meal in SlotName::MEALS {
            if let Some(p) = day.meal(meal).filled() {
                if !seen.insert(p.key()) {
                    return Verdict::fail(format!(
                        "The restaurant in day {} {} is repeated.",
                        i + 1,
                        meal.noun()
                    ));
                }
            }
        }
    }
    Verdict::Success
}

fn check_repeated_attractions(plan: &Plan) -> Verdict {
    let mut seen = HashSet::new();
    for (i, day) in plan.days.iter().enumerate() {
        for p in day.attraction_list() {
            if !seen.insert(p.key()) {
                return Verdict::fail(format!(
                    "The attraction {} in day {} is repeated.",
                    p.name,
                    i + 1
                ));
            }
        }
    }
    Verdict::Success
}

/// Names of restaurants and attractions chosen more than once, with the number
/// of extra occurrences. Independent of day order.
pub fn repeated_entities(plan: &Plan) -> BTreeMap<(EntityKind, String, String), usize> {
    let mut counts: BTreeMap<(u8, String, String), usize> = BTreeMap::new();
    for e in extract_entities(plan) {
        let tag = match e.kind {
            EntityKind::Restaurant => 0,
            EntityKind::Attraction => 1,
            _ => continue,
        };
        *counts.entry((tag, fold(&e.name), fold(&e.city))).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|(_, n)| *n > 1)
        .map(|((tag, name, city), n)| {
            let kind = if tag == 0 {
                EntityKind::Restaurant
            } else {
                EntityKind::Attraction
            };
            ((kind, name, city), n - 1)
        })
        .collect()
}

fn check_minimum_nights(plan: &Plan, index: &SandboxIndex) -> Verdict {
    let mut run: Option<((String, String), usize, usize)> = None; // key, start day, length
    let mut runs = Vec::new();
    for (i, day) in plan.days.iter().enumerate() {
        match day.accommodation.filled() {
            Some(p) => {
                let key = p.key();
                match &mut run {
                    Some((k, _, len)) if *k == key => *len += 1,
                    _ => {
                        if let Some(r) = run.take() {
                            runs.push(r);
                        }
                        run = Some((key, i, 1));
                    }
                }
            }
            None => {
                if let Some(r) = run.take() {
                    runs.push(r);
                }
            }
        }
    }
    runs.extend(run);
    for (_, start, nights) in runs {
        let p = plan.days[start].accommodation.filled().expect("run starts at a stay");
        if let Some(acc) = index.accommodation(&p.name, &p.city) {
            if (nights as u32) < acc.minimum_nights {
                return Verdict::fail(format!(
                    "The accommodation {} do not obey the minumum nights rule.",
                    p
                ));
            }
        }
    }
    Verdict::Success
}

fn check_transport_conflict(plan: &Plan) -> Verdict {
    let modes = plan.transport_modes();
    let driving = modes.contains(&TransportMode::SelfDriving);
    if driving && (modes.contains(&TransportMode::Flight) || modes.contains(&TransportMode::Taxi)) {
        return Verdict::fail("The transportation is conflicting.");
    }
    Verdict::Success
}

fn check_current_city(plan: &Plan, entities: &[EntityRef]) -> Verdict {
    for e in entities {
        let Slot::Filled(current) = &plan.days[e.day - 1].current_city else {
            return invalid_in_current_city(e);
        };
        let ok = match e.kind {
            EntityKind::Flight | EntityKind::GroundRoute => match &e.destination {
                Some(dest) => current.contains(&e.city) && current.contains(dest),
                None => true, // unreadable leg, judged by the sandbox check
            },
            _ => current.contains(&e.city),
        };
        if !ok {
            return invalid_in_current_city(e);
        }
    }
    Verdict::Success
}

fn invalid_in_current_city(e: &EntityRef) -> Verdict {
    Verdict::fail(format!(
        "The {} in day {} is invalid in the current city.",
        e.slot.noun(),
        e.day
    ))
}

fn check_sandbox(entities: &[EntityRef], index: &SandboxIndex) -> Verdict {
    match entities.iter().find(|e| !index.resolves(e)) {
        Some(e) => Verdict::fail(format!(
            "The {} in day {} is invalid in the sandbox.",
            e.slot.noun(),
            e.day
        )),
        None => Verdict::Success,
    }
}

fn check_not_absent(plan: &Plan) -> Verdict {
    let last = plan.days.len();
    let absent = |slot: SlotName, day: usize| {
        Verdict::fail(format!("No {} in day {} is not allowed.", slot.noun(), day))
    };
    for (i, day) in plan.days.iter().enumerate() {
        let n = i + 1;
        let Slot::Filled(current) = &day.current_city else {
            return absent(SlotName::CurrentCity, n);
        };
        if current.is_transition() {
            if !day.transport.is_filled() {
                return absent(SlotName::Transportation, n);
            }
        } else {
            for meal in [SlotName::Breakfast, SlotName::Attraction, SlotName::Lunch, SlotName::Dinner] {
                let filled = match meal {
                    SlotName::Attraction => !day.attraction_list().is_empty(),
                    m => day.meal(m).is_filled(),
                };
                if !filled {
                    return absent(meal, n);
                }
            }
        }
        if n < last && !day.accommodation.is_filled() {
            return absent(SlotName::Accommodation, n);
        }
    }
    Verdict::Success
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HardVerdict {
    Pass,
    Fail { reason: String },
}

impl HardVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, HardVerdict::Pass)
    }

    fn fail(reason: impl Into<String>) -> Self {
        HardVerdict::Fail {
            reason: reason.into(),
        }
    }
}

/// One verdict per hard constraint the query imposes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HardVerdicts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_rule: Option<HardVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_type: Option<HardVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuisine: Option<HardVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<HardVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transportation: Option<HardVerdict>,
}

impl HardVerdicts {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &HardVerdict)> {
        [
            ("room_rule", &self.room_rule),
            ("room_type", &self.room_type),
            ("cuisine", &self.cuisine),
            ("budget", &self.budget),
            ("transportation", &self.transportation),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
    }

    pub fn all_passed(&self) -> bool {
        self.iter().all(|(_, v)| v.passed())
    }
}

/// Checks the query's hard constraints. Budget is always judged.
pub fn check_hard(plan: &Plan, query: &TripQuery, reference: &ReferenceBundle) -> HardVerdicts {
    let index = SandboxIndex::new(reference);
    let hc = &query.hard_constraints;
    let stays: Vec<_> = plan
        .days
        .iter()
        .filter_map(|d| d.accommodation.filled())
        .collect();

    let room_rule = hc.room_rule.map(|rule| {
        for p in &stays {
            match index.accommodation(&p.name, &p.city) {
                Some(a) if a.permits(rule) => {}
                _ => return HardVerdict::fail(format!("The room rule {rule} is violated by {p}.")),
            }
        }
        HardVerdict::Pass
    });

    let room_type = hc.room_type.map(|want| {
        for p in &stays {
            let ok = index
                .accommodation(&p.name, &p.city)
                .is_some_and(|a| room_type_matches(want, a.room_type));
            if !ok {
                return HardVerdict::fail(format!("The room type {want} is violated by {p}."));
            }
        }
        HardVerdict::Pass
    });

    let cuisine = (!hc.cuisines.is_empty()).then(|| {
        let mut served = BTreeSet::new();
        for day in &plan.days {
            for meal in SlotName::MEALS {
                if let Some(p) = day.meal(meal).filled() {
                    if let Some(r) = index.restaurant(&p.name, &p.city) {
                        served.extend(r.cuisines.iter().copied());
                    }
                }
            }
        }
        let missing: Vec<&str> = hc.cuisines.difference(&served).map(|c| c.name()).collect();
        if missing.is_empty() {
            HardVerdict::Pass
        } else {
            HardVerdict::fail(format!("The cuisine {} is not satisfied.", missing.join(", ")))
        }
    });

    let transportation = hc.transportation.map(|rule| {
        let forbidden = match rule {
            TransportRule::NoFlight => TransportMode::Flight,
            TransportRule::NoSelfDriving => TransportMode::SelfDriving,
        };
        if plan.transport_modes().contains(&forbidden) {
            HardVerdict::fail(format!("The transportation rule {rule} is violated."))
        } else {
            HardVerdict::Pass
        }
    });

    let budget = Some(match compute_cost(plan, query, reference) {
        Ok(cost) if cost.grand_total <= query.budget => HardVerdict::Pass,
        Ok(cost) => HardVerdict::fail(format!(
            "The total cost {} exceeds the budget {}.",
            cost.grand_total, query.budget
        )),
        Err(e) => HardVerdict::fail(format!("The total cost cannot be computed: {e}.")),
    });

    HardVerdicts {
        room_rule,
        room_type,
        cuisine,
        budget,
        transportation,
    }
}

pub fn room_type_matches(want: RoomType, have: RoomKind) -> bool {
    match want {
        RoomType::EntireRoom => have == RoomKind::EntireHome,
        RoomType::PrivateRoom => have == RoomKind::PrivateRoom,
        RoomType::SharedRoom => have == RoomKind::SharedRoom,
        RoomType::NotSharedRoom => have != RoomKind::SharedRoom,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineItem {
    pub day: usize,
    pub slot: SlotName,
    pub unit_price: Money,
    pub multiplier: i64,
    pub subtotal: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub transport_total: Money,
    pub meals_total: Money,
    pub lodging_total: Money,
    pub grand_total: Money,
    pub line_items: Vec<LineItem>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CostError {
    #[error("the {} in day {} does not resolve in the sandbox", .0.slot.noun(), .0.day)]
    UnresolvedEntity(EntityRef),
}

/// Prices a plan: flights and meals per person, ground legs once, lodging per
/// room-night with `ceil(group / maximum_occupancy)` rooms.
pub fn compute_cost(
    plan: &Plan,
    query: &TripQuery,
    reference: &ReferenceBundle,
) -> Result<CostBreakdown, CostError> {
    let index = SandboxIndex::new(reference);
    let group = i64::from(query.group_size);
    let mut out = CostBreakdown::default();
    for e in extract_entities(plan) {
        if e.kind == EntityKind::Attraction {
            continue;
        }
        let unit = index
            .price(&e)
            .ok_or_else(|| CostError::UnresolvedEntity(e.clone()))?;
        let multiplier = match e.kind {
            EntityKind::Flight | EntityKind::Restaurant => group,
            EntityKind::GroundRoute => 1,
            EntityKind::Accommodation => {
                let occ = index
                    .accommodation(&e.name, &e.city)
                    .map(|a| i64::from(a.maximum_occupancy.max(1)))
                    .unwrap_or(1);
                (group + occ - 1) / occ
            }
            EntityKind::Attraction => unreachable!(),
        };
        let subtotal = unit * multiplier;
        match e.kind {
            EntityKind::Flight | EntityKind::GroundRoute => out.transport_total += subtotal,
            EntityKind::Restaurant => out.meals_total += subtotal,
            EntityKind::Accommodation => out.lodging_total += subtotal,
            EntityKind::Attraction => {}
        }
        out.line_items.push(LineItem {
            day: e.day,
            slot: e.slot,
            unit_price: unit,
            multiplier,
            subtotal,
        });
    }
    out.grand_total = out.transport_total + out.meals_total + out.lodging_total;
    Ok(out)
}

/// Renders the eight-line feedback block.
pub fn render_feedback(f: &Feedback) -> String {
    f.render()
}

/// Strictly parses an eight-line feedback block.
pub fn parse_feedback(text: &str) -> Result<Feedback, FeedbackParseError> {
    Feedback::parse(text)
}

/// Machine-readable verdict export for one plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictExport {
    pub oracle_version: String,
    pub commonsense: Feedback,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard: Option<HardVerdicts>,
}

/// Commonsense verdicts plus, when all of them pass, hard verdicts.
pub fn judge(plan: &Plan, query: &TripQuery, reference: &ReferenceBundle) -> VerdictExport {
    let commonsense = check_commonsense(plan, query, reference);
    let hard = commonsense
        .is_all_success()
        .then(|| check_hard(plan, query, reference));
    VerdictExport {
        oracle_version: ORACLE_VERSION.to_string(),
        commonsense,
        hard,
    }
}

/// True iff the feedback's constraint failed.
pub fn failed(f: &Feedback, id: ConstraintId) -> bool {
    !f.get(id).is_success()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Attraction, DayEntry, PlaceRef, Transport, TransportLeg};

    fn query(days: u32) -> TripQuery {
        TripQuery {
            id: "q".into(),
            text: String::new(),
            origin_city: "A".into(),
            destination_region: "R".into(),
            city_count: 1,
            day_count: days,
            group_size: 2,
            dates: (0..days)
                .map(|d| chrono::NaiveDate::from_ymd_opt(2022, 3, 1 + d).unwrap())
                .collect(),
            budget: Money::from_dollars(1000),
            hard_constraints: Default::default(),
        }
    }

    fn leg(mode: TransportMode, from: &str, to: &str) -> Slot<Transport> {
        Slot::Filled(Transport::Leg(TransportLeg {
            mode,
            flight_number: (mode == TransportMode::Flight).then(|| "F1".to_string()),
            from: from.into(),
            to: to.into(),
            departure_time: None,
            arrival_time: None,
            duration: None,
            cost: None,
        }))
    }

    #[test]
    fn empty_plan_costs_nothing() {
        let plan = Plan::new(vec![DayEntry::default(); 3]);
        let cost = compute_cost(&plan, &query(3), &ReferenceBundle::default()).unwrap();
        assert_eq!(cost.grand_total, Money::ZERO);
        assert!(cost.line_items.is_empty());
    }

    #[test]
    fn single_self_driving_leg_costs_its_listed_price() {
        let bundle = ReferenceBundle {
            ground_routes: vec![crate::domain::GroundRoute {
                mode: GroundMode::SelfDriving,
                origin: "Seattle".into(),
                destination: "San Francisco".into(),
                duration: "12 hours 28 mins".into(),
                cost: Money::from_dollars(65),
                extra: Default::default(),
            }],
            ..Default::default()
        };
        let mut day = DayEntry::default();
        day.transport = leg(TransportMode::SelfDriving, "Seattle", "San Francisco");
        let plan = Plan::new(vec![day]);
        let cost = compute_cost(&plan, &query(1), &bundle).unwrap();
        assert_eq!(cost.grand_total, Money::from_dollars(65));
    }

    #[test]
    fn unresolved_priced_entity_is_an_error() {
        let mut day = DayEntry::default();
        day.dinner = Slot::Filled(PlaceRef::new("Nowhere", "A"));
        let err = compute_cost(&Plan::new(vec![day]), &query(1), &ReferenceBundle::default());
        assert!(matches!(err, Err(CostError::UnresolvedEntity(e)) if e.slot == SlotName::Dinner));
    }

    #[test]
    fn conflicting_modes() {
        let mut d1 = DayEntry::default();
        d1.transport = leg(TransportMode::Flight, "A", "B");
        let mut d2 = DayEntry::default();
        d2.transport = leg(TransportMode::SelfDriving, "B", "A");
        let v = check_transport_conflict(&Plan::new(vec![d1.clone(), d2]));
        assert_eq!(v, Verdict::fail("The transportation is conflicting."));

        let mut d3 = DayEntry::default();
        d3.transport = leg(TransportMode::Taxi, "B", "A");
        assert!(check_transport_conflict(&Plan::new(vec![d1, d3])).is_success());
    }

    #[test]
    fn restaurant_repeat_reason_names_day_and_meal() {
        let mk = |name: &str| Slot::Filled(PlaceRef::new(name, "B"));
        let mut d1 = DayEntry::default();
        d1.dinner = mk("X");
        let mut d2 = DayEntry::default();
        d2.lunch = mk("Y");
        d2.dinner = mk("x ");
        let v = check_repeated_restaurants(&Plan::new(vec![d1, d2]));
        assert_eq!(v, Verdict::fail("The restaurant in day 2 dinner is repeated."));
    }

    #[test]
    fn sandbox_failure_names_slot() {
        let bundle = ReferenceBundle {
            attractions: vec![Attraction {
                name: "PIER 39".into(),
                city: "B".into(),
                extra: Default::default(),
            }],
            ..Default::default()
        };
        let mut d = DayEntry::default();
        d.attractions = Slot::Filled(vec![PlaceRef::new("pier 39", "b")]);
        d.lunch = Slot::Filled(PlaceRef::new("Ghost Diner", "B"));
        let plan = Plan::new(vec![d]);
        let index = SandboxIndex::new(&bundle);
        let v = check_sandbox(&extract_entities(&plan), &index);
        assert_eq!(v, Verdict::fail("The lunch in day 1 is invalid in the sandbox."));
    }

    #[test]
    fn city_route_must_close_the_circle() {
        let mut d1 = DayEntry::default();
        d1.current_city = Slot::Filled(CurrentCity::Transition {
            from: "A".into(),
            to: "B".into(),
        });
        let mut d2 = DayEntry::default();
        d2.current_city = Slot::Filled(CurrentCity::Single("B".into()));
        let plan = Plan::new(vec![d1.clone(), d2.clone()]);
        assert_eq!(
            check_city_route(&plan, &query(2)),
            Verdict::fail("The trip should be a closed circle.")
        );
        let mut d3 = DayEntry::default();
        d3.current_city = Slot::Filled(CurrentCity::Transition {
            from: "C".into(),
            to: "A".into(),
        });
        let plan = Plan::new(vec![d1.clone(), d2.clone(), d3]);
        assert_eq!(
            check_city_route(&plan, &query(3)),
            Verdict::fail("The city sequence is invalid.")
        );
        let mut back = DayEntry::default();
        back.current_city = Slot::Filled(CurrentCity::Transition {
            from: "B".into(),
            to: "A".into(),
        });
        let plan = Plan::new(vec![d1, d2, back]);
        assert!(check_city_route(&plan, &query(3)).is_success());
    }

    #[test]
    fn not_absent_requires_stay_except_last_day() {
        let mut d1 = DayEntry::default();
        d1.current_city = Slot::Filled(CurrentCity::Transition {
            from: "A".into(),
            to: "B".into(),
        });
        d1.transport = leg(TransportMode::Taxi, "A", "B");
        let plan = Plan::new(vec![d1.clone(), d1.clone()]);
        assert_eq!(
            check_not_absent(&plan),
            Verdict::fail("No accommodation in day 1 is not allowed.")
        );
        d1.accommodation = Slot::Filled(PlaceRef::new("H", "B"));
        let mut d2 = d1.clone();
        d2.accommodation = Slot::Unnecessary;
        assert!(check_not_absent(&Plan::new(vec![d1.clone(), d2])).is_success());

        let mut full = DayEntry::default();
        full.current_city = Slot::Filled(CurrentCity::Single("B".into()));
        full.accommodation = Slot::Filled(PlaceRef::new("H", "B"));
        let v = check_not_absent(&Plan::new(vec![d1, full]));
        assert_eq!(v, Verdict::fail("No breakfast in day 2 is not allowed."));
    }
}
