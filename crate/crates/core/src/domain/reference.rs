use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Cuisine, Money, RoomRule};

/// Auxiliary columns carried alongside the columns the planner needs.
pub type ExtraColumns = IndexMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    Flights,
    GroundRoutes,
    Restaurants,
    Attractions,
    Accommodations,
}

impl Table {
    pub const ALL: [Table; 5] = [
        Table::Flights,
        Table::GroundRoutes,
        Table::Restaurants,
        Table::Attractions,
        Table::Accommodations,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Table::Flights => "flights",
            Table::GroundRoutes => "ground_routes",
            Table::Restaurants => "restaurants",
            Table::Attractions => "attractions",
            Table::Accommodations => "accommodations",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }

    fn title(self) -> &'static str {
        match self {
            Table::Flights => "Flights",
            Table::GroundRoutes => "Ground transportation",
            Table::Restaurants => "Restaurants",
            Table::Attractions => "Attractions",
            Table::Accommodations => "Accommodations",
        }
    }

    /// Required columns, in canonical order.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Table::Flights => &[
                "flight_number",
                "origin",
                "destination",
                "departure_time",
                "arrival_time",
                "price",
            ],
            Table::GroundRoutes => &["mode", "origin", "destination", "duration", "cost"],
            Table::Restaurants => &["name", "city", "cuisines", "average_cost"],
            Table::Attractions => &["name", "city"],
            Table::Accommodations => &[
                "name",
                "city",
                "price",
                "room_type",
                "house_rules",
                "minimum_nights",
                "maximum_occupancy",
            ],
        }
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flight {
    pub flight_number: String,
    pub origin: String,
    pub destination: String,
    pub departure_time: String,
    pub arrival_time: String,
    /// Per person.
    pub price: Money,
    #[serde(default)]
    pub extra: ExtraColumns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundMode {
    SelfDriving,
    Taxi,
}

impl GroundMode {
    pub fn label(self) -> &'static str {
        match self {
            GroundMode::SelfDriving => "Self-Driving",
            GroundMode::Taxi => "Taxi",
        }
    }

    pub fn parse(s: &str) -> Option<GroundMode> {
        match s.trim().to_lowercase().replace(['_', ' '], "-").as_str() {
            "self-driving" => Some(GroundMode::SelfDriving),
            "taxi" => Some(GroundMode::Taxi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundRoute {
    pub mode: GroundMode,
    pub origin: String,
    pub destination: String,
    pub duration: String,
    /// Per leg, regardless of group size.
    pub cost: Money,
    #[serde(default)]
    pub extra: ExtraColumns,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Restaurant {
    pub name: String,
    pub city: String,
    pub cuisines: BTreeSet<Cuisine>,
    /// Per person.
    pub average_cost: Money,
    #[serde(default)]
    pub extra: ExtraColumns,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attraction {
    pub name: String,
    pub city: String,
    #[serde(default)]
    pub extra: ExtraColumns,
}

/// Room type offered by an accommodation listing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoomKind {
    EntireHome,
    PrivateRoom,
    SharedRoom,
}

impl RoomKind {
    pub fn label(self) -> &'static str {
        match self {
            RoomKind::EntireHome => "Entire home/apt",
            RoomKind::PrivateRoom => "Private room",
            RoomKind::SharedRoom => "Shared room",
        }
    }

    pub fn parse(s: &str) -> Option<RoomKind> {
        let t = s.trim().to_lowercase();
        match t.as_str() {
            "entire home/apt" | "entire home" | "entire room" | "entire-home" => {
                Some(RoomKind::EntireHome)
            }
            "private room" | "private-room" => Some(RoomKind::PrivateRoom),
            "shared room" | "shared-room" => Some(RoomKind::SharedRoom),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accommodation {
    pub name: String,
    pub city: String,
    /// Per room per night.
    pub price: Money,
    pub room_type: RoomKind,
    /// Activities the listing prohibits.
    pub house_rules: BTreeSet<RoomRule>,
    pub minimum_nights: u32,
    pub maximum_occupancy: u32,
    #[serde(default)]
    pub extra: ExtraColumns,
}

impl Accommodation {
    pub fn permits(&self, rule: RoomRule) -> bool {
        !self.house_rules.contains(&rule)
    }

    pub fn house_rules_text(&self) -> String {
        if self.house_rules.is_empty() {
            return "-".to_string();
        }
        self.house_rules
            .iter()
            .map(|r| format!("No {}", r.noun()))
            .collect::<Vec<_>>()
            .join(" & ")
    }
}

pub(crate) fn cuisines_text(cuisines: &BTreeSet<Cuisine>) -> String {
    cuisines.iter().map(|c| c.name()).collect::<Vec<_>>().join(", ")
}

/// One query's closed sandbox of options.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceBundle {
    pub flights: Vec<Flight>,
    pub ground_routes: Vec<GroundRoute>,
    pub restaurants: Vec<Restaurant>,
    pub attractions: Vec<Attraction>,
    pub accommodations: Vec<Accommodation>,
}

impl ReferenceBundle {
    pub fn row_count(&self, table: Table) -> usize {
        match table {
            Table::Flights => self.flights.len(),
            Table::GroundRoutes => self.ground_routes.len(),
            Table::Restaurants => self.restaurants.len(),
            Table::Attractions => self.attractions.len(),
            Table::Accommodations => self.accommodations.len(),
        }
    }

    /// Auxiliary column names of a table, ordered by first appearance.
    pub fn extra_columns(&self, table: Table) -> Vec<String> {
        let mut cols: IndexMap<String, ()> = IndexMap::new();
        for extra in self.extras(table) {
            for k in extra.keys() {
                cols.entry(k.clone()).or_insert(());
            }
        }
        cols.into_keys().collect()
    }

    fn extras(&self, table: Table) -> Vec<&ExtraColumns> {
        match table {
            Table::Flights => self.flights.iter().map(|r| &r.extra).collect(),
            Table::GroundRoutes => self.ground_routes.iter().map(|r| &r.extra).collect(),
            Table::Restaurants => self.restaurants.iter().map(|r| &r.extra).collect(),
            Table::Attractions => self.attractions.iter().map(|r| &r.extra).collect(),
            Table::Accommodations => self.accommodations.iter().map(|r| &r.extra).collect(),
        }
    }

    pub(crate) fn extras_mut(&mut self, table: Table) -> Vec<&mut ExtraColumns> {
        match table {
            Table::Flights => self.flights.iter_mut().map(|r| &mut r.extra).collect(),
            Table::GroundRoutes => self.ground_routes.iter_mut().map(|r| &mut r.extra).collect(),
            Table::Restaurants => self.restaurants.iter_mut().map(|r| &mut r.extra).collect(),
            Table::Attractions => self.attractions.iter_mut().map(|r| &mut r.extra).collect(),
            Table::Accommodations => self.accommodations.iter_mut().map(|r| &mut r.extra).collect(),
        }
    }

    /// Required-column values of each row, in canonical column order.
    pub fn core_rows(&self, table: Table) -> Vec<Vec<String>> {
        match table {
            Table::Flights => self
                .flights
                .iter()
                .map(|f| {
                    vec![
                        f.flight_number.clone(),
                        f.origin.clone(),
                        f.destination.clone(),
                        f.departure_time.clone(),
                        f.arrival_time.clone(),
                        f.price.to_string(),
                    ]
                })
                .collect(),
            Table::GroundRoutes => self
                .ground_routes
                .iter()
                .map(|g| {
                    vec![
                        g.mode.label().to_string(),
                        g.origin.clone(),
                        g.destination.clone(),
                        g.duration.clone(),
                        g.cost.to_string(),
                    ]
                })
                .collect(),
            Table::Restaurants => self
                .restaurants
                .iter()
                .map(|r| {
                    vec![
                        r.name.clone(),
                        r.city.clone(),
                        cuisines_text(&r.cuisines),
                        r.average_cost.to_string(),
                    ]
                })
                .collect(),
            Table::Attractions => self
                .attractions
                .iter()
                .map(|a| vec![a.name.clone(), a.city.clone()])
                .collect(),
            Table::Accommodations => self
                .accommodations
                .iter()
                .map(|a| {
                    vec![
                        a.name.clone(),
                        a.city.clone(),
                        a.price.to_string(),
                        a.room_type.label().to_string(),
                        a.house_rules_text(),
                        a.minimum_nights.to_string(),
                        a.maximum_occupancy.to_string(),
                    ]
                })
                .collect(),
        }
    }

    /// Canonical text rendering: one tab-separated section per non-empty table.
    ///
    /// This is the text handed to planners as the reference information box and
    /// the text measured by [`crate::ingest::token_length`].
    pub fn render_text(&self) -> String {
        let mut sections = Vec::new();
        for table in Table::ALL {
            let rows = self.core_rows(table);
            if rows.is_empty() {
                continue;
            }
            let extra_cols = self.extra_columns(table);
            let extras = self.extras(table);
            let mut out = String::new();
            out.push_str(table.title());
            out.push_str(":\n");
            let header: Vec<&str> = table
                .columns()
                .iter()
                .copied()
                .chain(extra_cols.iter().map(String::as_str))
                .collect();
            out.push_str(&header.join("\t"));
            for (row, extra) in rows.iter().zip(extras) {
                out.push('\n');
                let mut cells: Vec<&str> = row.iter().map(String::as_str).collect();
                for col in &extra_cols {
                    cells.push(extra.get(col).map(String::as_str).unwrap_or(""));
                }
                out.push_str(&cells.join("\t"));
            }
            sections.push(out);
        }
        sections.join("\n\n")
    }
}
