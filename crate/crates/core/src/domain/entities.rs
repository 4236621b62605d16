use serde::{Deserialize, Serialize};

use super::{Plan, SlotName, Transport, TransportMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Restaurant,
    Attraction,
    Accommodation,
    Flight,
    GroundRoute,
}

/// A sandbox entity named by one plan slot.
///
/// For transport legs `name` is the flight number or the mode label, `city` the
/// departure city and `destination` the arrival city.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRef {
    pub day: usize,
    pub slot: SlotName,
    pub kind: EntityKind,
    pub name: String,
    pub city: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<String>,
}

/// All entities a plan references: day-major, and within a day breakfast,
/// attractions, lunch, dinner, accommodation, transport.
pub fn extract_entities(plan: &Plan) -> Vec<EntityRef> {
    let mut out = Vec::new();
    for (i, day) in plan.days.iter().enumerate() {
        let day_no = i + 1;
        let place = |slot: SlotName, kind: EntityKind, p: &super::PlaceRef| EntityRef {
            day: day_no,
            slot,
            kind,
            name: p.name.clone(),
            city: p.city.clone(),
            destination: None,
        };
        if let Some(p) = day.breakfast.filled() {
            out.push(place(SlotName::Breakfast, EntityKind::Restaurant, p));
        }
        for p in day.attraction_list() {
            out.push(place(SlotName::Attraction, EntityKind::Attraction, p));
        }
        if let Some(p) = day.lunch.filled() {
            out.push(place(SlotName::Lunch, EntityKind::Restaurant, p));
        }
        if let Some(p) = day.dinner.filled() {
            out.push(place(SlotName::Dinner, EntityKind::Restaurant, p));
        }
        if let Some(p) = day.accommodation.filled() {
            out.push(place(SlotName::Accommodation, EntityKind::Accommodation, p));
        }
        if let Some(t) = day.transport.filled() {
            out.push(transport_ref(day_no, t));
        }
    }
    out
}

fn transport_ref(day: usize, t: &Transport) -> EntityRef {
    match t {
        Transport::Leg(leg) => {
            let (kind, name) = match leg.mode {
                TransportMode::Flight => (
                    EntityKind::Flight,
                    leg.flight_number.clone().unwrap_or_default(),
                ),
                other => (
                    EntityKind::GroundRoute,
                    other.ground().map(|g| g.label()).unwrap_or_default().to_string(),
                ),
            };
            EntityRef {
                day,
                slot: SlotName::Transportation,
                kind,
                name,
                city: leg.from.clone(),
                destination: Some(leg.to.clone()),
            }
        }
        Transport::Unrecognized(raw) => EntityRef {
            day,
            slot: SlotName::Transportation,
            kind: match TransportMode::sniff(raw) {
                Some(TransportMode::Flight) => EntityKind::Flight,
                _ => EntityKind::GroundRoute,
            },
            name: raw.clone(),
            city: String::new(),
            destination: None,
        },
    }
}
