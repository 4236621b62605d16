use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Money;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cuisine {
    American,
    Chinese,
    French,
    Indian,
    Italian,
    Mediterranean,
    Mexican,
}

impl Cuisine {
    pub const ALL: [Cuisine; 7] = [
        Cuisine::American,
        Cuisine::Chinese,
        Cuisine::French,
        Cuisine::Indian,
        Cuisine::Italian,
        Cuisine::Mediterranean,
        Cuisine::Mexican,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Cuisine::American => "American",
            Cuisine::Chinese => "Chinese",
            Cuisine::French => "French",
            Cuisine::Indian => "Indian",
            Cuisine::Italian => "Italian",
            Cuisine::Mediterranean => "Mediterranean",
            Cuisine::Mexican => "Mexican",
        }
    }

    /// Case-insensitive lookup of a vocabulary name.
    pub fn from_name(s: &str) -> Option<Cuisine> {
        let s = s.trim();
        Cuisine::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Cuisine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A house rule the traveller needs the accommodation to permit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoomRule {
    PetsAllowed,
    PartiesAllowed,
    SmokingAllowed,
    ChildrenAllowed,
    VisitorsAllowed,
}

impl RoomRule {
    pub const ALL: [RoomRule; 5] = [
        RoomRule::PetsAllowed,
        RoomRule::PartiesAllowed,
        RoomRule::SmokingAllowed,
        RoomRule::ChildrenAllowed,
        RoomRule::VisitorsAllowed,
    ];

    pub fn key(self) -> &'static str {
        match self {
            RoomRule::PetsAllowed => "pets-allowed",
            RoomRule::PartiesAllowed => "parties-allowed",
            RoomRule::SmokingAllowed => "smoking-allowed",
            RoomRule::ChildrenAllowed => "children-allowed",
            RoomRule::VisitorsAllowed => "visitors-allowed",
        }
    }

    /// Noun used in accommodation house-rule text, as in "No pets".
    pub fn noun(self) -> &'static str {
        match self {
            RoomRule::PetsAllowed => "pets",
            RoomRule::PartiesAllowed => "parties",
            RoomRule::SmokingAllowed => "smoking",
            RoomRule::ChildrenAllowed => "children under 10",
            RoomRule::VisitorsAllowed => "visitors",
        }
    }

    /// Parses either the kebab key or a house-rule prohibition such as "No pets".
    pub fn parse(s: &str) -> Option<RoomRule> {
        let t = s.trim().to_lowercase();
        let t = t.strip_prefix("no ").unwrap_or(&t).trim();
        RoomRule::ALL.into_iter().find(|r| {
            r.key() == t || r.noun() == t || (r.noun().split(' ').next() == Some(t))
        })
    }
}

impl fmt::Display for RoomRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Room type requested in a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoomType {
    EntireRoom,
    PrivateRoom,
    SharedRoom,
    NotSharedRoom,
}

impl RoomType {
    pub const ALL: [RoomType; 4] = [
        RoomType::EntireRoom,
        RoomType::PrivateRoom,
        RoomType::SharedRoom,
        RoomType::NotSharedRoom,
    ];

    pub fn key(self) -> &'static str {
        match self {
            RoomType::EntireRoom => "entire-room",
            RoomType::PrivateRoom => "private-room",
            RoomType::SharedRoom => "shared-room",
            RoomType::NotSharedRoom => "not-shared-room",
        }
    }
}

impl FromStr for RoomType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoomType::ALL
            .into_iter()
            .find(|r| r.key() == s.trim())
            .ok_or_else(|| format!("unknown room type {s:?}"))
    }
}

impl fmt::Display for RoomType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportRule {
    NoFlight,
    NoSelfDriving,
}

impl TransportRule {
    pub fn key(self) -> &'static str {
        match self {
            TransportRule::NoFlight => "no-flight",
            TransportRule::NoSelfDriving => "no-self-driving",
        }
    }
}

impl fmt::Display for TransportRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// The explicit requirements a query imposes. `budget: None` means unbounded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardConstraintSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_rule: Option<RoomRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_type: Option<RoomType>,
    #[serde(default)]
    pub cuisines: BTreeSet<Cuisine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transportation: Option<TransportRule>,
}

impl HardConstraintSet {
    /// Number of hard constraints imposed; budget counts when bounded.
    pub fn imposed_count(&self) -> usize {
        usize::from(self.room_rule.is_some())
            + usize::from(self.room_type.is_some())
            + usize::from(!self.cuisines.is_empty())
            + usize::from(self.budget.is_some())
            + usize::from(self.transportation.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripQuery {
    pub id: String,
    pub text: String,
    pub origin_city: String,
    pub destination_region: String,
    pub city_count: u32,
    pub day_count: u32,
    pub group_size: u32,
    pub dates: Vec<NaiveDate>,
    pub budget: Money,
    pub hard_constraints: HardConstraintSet,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query {id}: day_count {day_count} does not match {dates} dates")]
    DayCountMismatch { id: String, day_count: u32, dates: usize },
    #[error("query {id}: dates are not consecutive")]
    NonConsecutiveDates { id: String },
    #[error("query {id}: {field} must be positive")]
    NotPositive { id: String, field: &'static str },
}

impl TripQuery {
    pub fn validate(&self) -> Result<(), QueryError> {
        let id = || self.id.clone();
        if self.city_count < 1 {
            return Err(QueryError::NotPositive { id: id(), field: "city_count" });
        }
        if self.day_count < 1 {
            return Err(QueryError::NotPositive { id: id(), field: "day_count" });
        }
        if self.group_size < 1 {
            return Err(QueryError::NotPositive { id: id(), field: "group_size" });
        }
        if self.budget <= Money::ZERO {
            return Err(QueryError::NotPositive { id: id(), field: "budget" });
        }
        if self.dates.len() != self.day_count as usize {
            return Err(QueryError::DayCountMismatch {
                id: id(),
                day_count: self.day_count,
                dates: self.dates.len(),
            });
        }
        if self.dates.windows(2).any(|w| w[0].succ_opt() != Some(w[1])) {
            return Err(QueryError::NonConsecutiveDates { id: id() });
        }
        Ok(())
    }
}
