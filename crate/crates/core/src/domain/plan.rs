use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{fold, GroundMode, Money};

/// A plan slot: either deliberately blank (`-`) or filled.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot<T> {
    #[default]
    Unnecessary,
    Filled(T),
}

impl<T> Slot<T> {
    pub fn filled(&self) -> Option<&T> {
        match self {
            Slot::Filled(v) => Some(v),
            Slot::Unnecessary => None,
        }
    }

    pub fn is_filled(&self) -> bool {
        matches!(self, Slot::Filled(_))
    }
}

/// Plan line labels below the day header, in rendering order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotName {
    CurrentCity,
    Transportation,
    Breakfast,
    Attraction,
    Lunch,
    Dinner,
    Accommodation,
}

impl SlotName {
    pub const ALL: [SlotName; 7] = [
        SlotName::CurrentCity,
        SlotName::Transportation,
        SlotName::Breakfast,
        SlotName::Attraction,
        SlotName::Lunch,
        SlotName::Dinner,
        SlotName::Accommodation,
    ];

    pub const MEALS: [SlotName; 3] = [SlotName::Breakfast, SlotName::Lunch, SlotName::Dinner];

    pub fn label(self) -> &'static str {
        match self {
            SlotName::CurrentCity => "Current City",
            SlotName::Transportation => "Transportation",
            SlotName::Breakfast => "Breakfast",
            SlotName::Attraction => "Attraction",
            SlotName::Lunch => "Lunch",
            SlotName::Dinner => "Dinner",
            SlotName::Accommodation => "Accommodation",
        }
    }

    /// Lower-case form used inside feedback reasons.
    pub fn noun(self) -> &'static str {
        match self {
            SlotName::CurrentCity => "current city",
            SlotName::Transportation => "transportation",
            SlotName::Breakfast => "breakfast",
            SlotName::Attraction => "attraction",
            SlotName::Lunch => "lunch",
            SlotName::Dinner => "dinner",
            SlotName::Accommodation => "accommodation",
        }
    }

    pub fn is_meal(self) -> bool {
        Self::MEALS.contains(&self)
    }
}

impl fmt::Display for SlotName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentCity {
    Single(String),
    Transition { from: String, to: String },
}

impl CurrentCity {
    /// Cities where the day's activities may take place.
    pub fn cities(&self) -> Vec<&str> {
        match self {
            CurrentCity::Single(c) => vec![c.as_str()],
            CurrentCity::Transition { from, to } => vec![from.as_str(), to.as_str()],
        }
    }

    pub fn first(&self) -> &str {
        match self {
            CurrentCity::Single(c) => c,
            CurrentCity::Transition { from, .. } => from,
        }
    }

    pub fn last(&self) -> &str {
        match self {
            CurrentCity::Single(c) => c,
            CurrentCity::Transition { to, .. } => to,
        }
    }

    pub fn is_transition(&self) -> bool {
        matches!(self, CurrentCity::Transition { .. })
    }

    pub(crate) fn contains(&self, city: &str) -> bool {
        let key = fold(city);
        self.cities().iter().any(|c| fold(c) == key)
    }
}

/// An entity chosen for a slot, written `Name, City` in plan text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceRef {
    pub name: String,
    /// Empty when the plan text gave no city.
    pub city: String,
}

impl PlaceRef {
    pub fn new(name: impl Into<String>, city: impl Into<String>) -> Self {
        PlaceRef {
            name: name.into(),
            city: city.into(),
        }
    }

    pub(crate) fn key(&self) -> (String, String) {
        (fold(&self.name), fold(&self.city))
    }
}

impl fmt::Display for PlaceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.city.is_empty() {
            f.write_str(&self.name)
        } else {
            write!(f, "{}, {}", self.name, self.city)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportMode {
    Flight,
    SelfDriving,
    Taxi,
}

impl TransportMode {
    pub fn ground(self) -> Option<GroundMode> {
        match self {
            TransportMode::Flight => None,
            TransportMode::SelfDriving => Some(GroundMode::SelfDriving),
            TransportMode::Taxi => Some(GroundMode::Taxi),
        }
    }

    /// Best-effort mode detection from free text.
    pub fn sniff(text: &str) -> Option<TransportMode> {
        let t = text.to_lowercase();
        if t.contains("self-driving") || t.contains("self driving") {
            Some(TransportMode::SelfDriving)
        } else if t.contains("flight") {
            Some(TransportMode::Flight)
        } else if t.contains("taxi") {
            Some(TransportMode::Taxi)
        } else {
            None
        }
    }
}

impl From<GroundMode> for TransportMode {
    fn from(m: GroundMode) -> Self {
        match m {
            GroundMode::SelfDriving => TransportMode::SelfDriving,
            GroundMode::Taxi => TransportMode::Taxi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportLeg {
    pub mode: TransportMode,
    /// Present iff `mode` is [`TransportMode::Flight`].
    pub flight_number: Option<String>,
    pub from: String,
    pub to: String,
    pub departure_time: Option<String>,
    pub arrival_time: Option<String>,
    pub duration: Option<String>,
    pub cost: Option<Money>,
}

/// A transportation slot value. Text the codec cannot read is kept verbatim so the
/// sandbox check can reject it instead of the parser.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    Leg(TransportLeg),
    Unrecognized(String),
}

impl Transport {
    pub fn mode(&self) -> Option<TransportMode> {
        match self {
            Transport::Leg(l) => Some(l.mode),
            Transport::Unrecognized(raw) => TransportMode::sniff(raw),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DayEntry {
    pub current_city: Slot<CurrentCity>,
    pub transport: Slot<Transport>,
    pub breakfast: Slot<PlaceRef>,
    /// Filled lists are non-empty.
    pub attractions: Slot<Vec<PlaceRef>>,
    pub lunch: Slot<PlaceRef>,
    pub dinner: Slot<PlaceRef>,
    pub accommodation: Slot<PlaceRef>,
}

impl DayEntry {
    pub fn meal(&self, slot: SlotName) -> &Slot<PlaceRef> {
        match slot {
            SlotName::Breakfast => &self.breakfast,
            SlotName::Lunch => &self.lunch,
            SlotName::Dinner => &self.dinner,
            other => panic!("{other} is not a meal slot"),
        }
    }

    pub fn meal_mut(&mut self, slot: SlotName) -> &mut Slot<PlaceRef> {
        match slot {
            SlotName::Breakfast => &mut self.breakfast,
            SlotName::Lunch => &mut self.lunch,
            SlotName::Dinner => &mut self.dinner,
            other => panic!("{other} is not a meal slot"),
        }
    }

    pub fn attraction_list(&self) -> &[PlaceRef] {
        self.attractions.filled().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// A day-by-day itinerary; day `i` is `days[i - 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub days: Vec<DayEntry>,
}

impl Plan {
    pub fn new(days: Vec<DayEntry>) -> Self {
        Plan { days }
    }

    pub fn day_count(&self) -> usize {
        self.days.len()
    }

    /// Distinct transport modes used anywhere in the plan.
    pub fn transport_modes(&self) -> BTreeSet<TransportMode> {
        self.days
            .iter()
            .filter_map(|d| d.transport.filled())
            .filter_map(Transport::mode)
            .collect()
    }
}
