//! Shared vocabulary for queries, reference sandboxes, plans and feedback.

mod entities;
mod feedback;
mod money;
mod plan;
mod query;
mod reference;

pub use entities::{extract_entities, EntityKind, EntityRef};
pub use feedback::{
    is_all_success, ConstraintId, Feedback, FeedbackParseError, Verdict, ALL_SUCCESS_BLOCK,
};
pub use money::{Money, MoneyParseError};
pub use plan::{CurrentCity, DayEntry, PlaceRef, Plan, Slot, SlotName, Transport, TransportLeg, TransportMode};
pub use query::{
    Cuisine, HardConstraintSet, QueryError, RoomRule, RoomType, TransportRule, TripQuery,
};
pub use reference::{
    Accommodation, Attraction, Flight, GroundMode, GroundRoute, ReferenceBundle, Restaurant,
    RoomKind, Table,
};

/// Normalized lookup key: trimmed and case-folded.
pub fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}
