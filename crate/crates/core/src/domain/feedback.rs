use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The eight commonsense constraints, in feedback-block order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintId {
    ReasonableVisitingCity,
    ValidRestaurants,
    ValidAttractions,
    ValidAccommodation,
    ValidTransportation,
    ValidInformationInCurrentCity,
    ValidInformationInSandbox,
    NotAbsent,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 8] = [
        ConstraintId::ReasonableVisitingCity,
        ConstraintId::ValidRestaurants,
        ConstraintId::ValidAttractions,
        ConstraintId::ValidAccommodation,
        ConstraintId::ValidTransportation,
        ConstraintId::ValidInformationInCurrentCity,
        ConstraintId::ValidInformationInSandbox,
        ConstraintId::NotAbsent,
    ];

    /// Serialized key. The first key keeps the benchmark's historical spelling
    /// so feedback blocks stay byte-compatible with existing corpora.
    pub fn key(self) -> &'static str {
        match self {
            ConstraintId::ReasonableVisitingCity => "is_reasonalbe_visiting_city",
            ConstraintId::ValidRestaurants => "is_valid_restaurants",
            ConstraintId::ValidAttractions => "is_valid_attractions",
            ConstraintId::ValidAccommodation => "is_valid_accommodation",
            ConstraintId::ValidTransportation => "is_valid_transportation",
            ConstraintId::ValidInformationInCurrentCity => "is_valid_information_in_current_city",
            ConstraintId::ValidInformationInSandbox => "is_valid_information_in_sandbox",
            ConstraintId::NotAbsent => "is_not_absent",
        }
    }

    pub fn from_key(key: &str) -> Option<ConstraintId> {
        ConstraintId::ALL.into_iter().find(|c| c.key() == key)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Success,
    Fail { reason: String },
}

impl Verdict {
    pub fn fail(reason: impl Into<String>) -> Self {
        Verdict::Fail {
            reason: reason.into(),
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, Verdict::Success)
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            Verdict::Fail { reason } => Some(reason),
            Verdict::Success => None,
        }
    }
}

/// Verdicts for all eight commonsense constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feedback {
    verdicts: [Verdict; 8],
    failures: u8,
}

/// The feedback block in which every verdict is success.
pub const ALL_SUCCESS_BLOCK: &str = "is_reasonalbe_visiting_city: success
is_valid_restaurants: success
is_valid_attractions: success
is_valid_accommodation: success
is_valid_transportation: success
is_valid_information_in_current_city: success
is_valid_information_in_sandbox: success
is_not_absent: success";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeedbackParseError {
    #[error("line {line}: unrecognized feedback line {text:?}")]
    BadLine { line: usize, text: String },
    #[error("line {line}: unknown constraint key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate constraint key {key}")]
    Duplicate { line: usize, key: &'static str },
    #[error("missing constraint key {0}")]
    Missing(&'static str),
}

impl Feedback {
    pub fn new(verdicts: [Verdict; 8]) -> Self {
        let failures = verdicts.iter().filter(|v| !v.is_success()).count() as u8;
        Feedback { verdicts, failures }
    }

    pub fn all_success() -> Self {
        Feedback::new(std::array::from_fn(|_| Verdict::Success))
    }

    /// Every constraint failing with the same reason.
    pub fn all_fail(reason: &str) -> Self {
        Feedback::new(std::array::from_fn(|_| Verdict::fail(reason)))
    }

    pub fn get(&self, id: ConstraintId) -> &Verdict {
        &self.verdicts[id.index()]
    }

    pub fn with(mut self, id: ConstraintId, verdict: Verdict) -> Self {
        self.verdicts[id.index()] = verdict;
        Feedback::new(self.verdicts)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ConstraintId, &Verdict)> {
        ConstraintId::ALL.into_iter().zip(self.verdicts.iter())
    }

    pub fn is_all_success(&self) -> bool {
        self.failures == 0
    }

    pub fn passed_count(&self) -> usize {
        8 - self.failures as usize
    }

    pub fn passes(&self) -> [bool; 8] {
        std::array::from_fn(|i| self.verdicts[i].is_success())
    }

    /// Eight lines in fixed order: `key: success` or `key: fail, reason:<text>`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, (id, verdict)) in self.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(id.key());
            match verdict {
                Verdict::Success => out.push_str(": success"),
                Verdict::Fail { reason } => {
                    out.push_str(": fail, reason:");
                    out.push_str(&reason.replace(['\r', '\n'], " "));
                }
            }
        }
        out
    }

    /// Strict parse: every key exactly once, nothing else but blank lines.
    pub fn parse(text: &str) -> Result<Feedback, FeedbackParseError> {
        let mut slots: [Option<Verdict>; 8] = Default::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let (key, verdict) = split_line(raw).ok_or_else(|| FeedbackParseError::BadLine {
                line,
                text: raw.to_string(),
            })?;
            let id = ConstraintId::from_key(key).ok_or_else(|| FeedbackParseError::UnknownKey {
                line,
                key: key.to_string(),
            })?;
            let slot = &mut slots[id.index()];
            if slot.is_some() {
                return Err(FeedbackParseError::Duplicate { line, key: id.key() });
            }
            *slot = Some(verdict);
        }
        let mut verdicts: [Verdict; 8] = std::array::from_fn(|_| Verdict::Success);
        for (i, slot) in slots.into_iter().enumerate() {
            verdicts[i] = slot.ok_or(FeedbackParseError::Missing(ConstraintId::ALL[i].key()))?;
        }
        Ok(Feedback::new(verdicts))
    }

    /// Tolerant parse for model-written feedback: recognised lines anywhere in the
    /// text are used, bullets are ignored, and missing keys default to success.
    /// Returns the keys that were absent.
    pub fn parse_lenient(text: &str) -> (Feedback, Vec<ConstraintId>) {
        let mut slots: [Option<Verdict>; 8] = Default::default();
        for raw in text.lines() {
            let line = raw.trim().trim_start_matches(['*', '-', ' ']);
            if let Some((key, verdict)) = split_line(line) {
                if let Some(id) = ConstraintId::from_key(key) {
                    slots[id.index()].get_or_insert(verdict);
                }
            }
        }
        let missing = ConstraintId::ALL
            .into_iter()
            .filter(|id| slots[id.index()].is_none())
            .collect();
        let verdicts = std::array::from_fn(|i| slots[i].take().unwrap_or(Verdict::Success));
        (Feedback::new(verdicts), missing)
    }
}

fn split_line(line: &str) -> Option<(&str, Verdict)> {
    let (key, rest) = line.split_once(':')?;
    let key = key.trim();
    let rest = rest.trim_start();
    let lower = rest.to_ascii_lowercase();
    if lower.starts_with("success") && rest[7..].trim().is_empty() {
        return Some((key, Verdict::Success));
    }
    if lower.starts_with("fail") {
        let tail = rest[4..].trim_start();
        let tail = tail.strip_prefix(',').unwrap_or(tail).trim_start();
        if tail.is_empty() {
            return Some((key, Verdict::fail("")));
        }
        let lower_tail = tail.to_ascii_lowercase();
        if lower_tail.starts_with("reason:") {
            return Some((key, Verdict::fail(tail[7..].trim())));
        }
        return Some((key, Verdict::fail(tail.trim())));
    }
    None
}

/// True iff every verdict is success.
pub fn is_all_success(feedback: &Feedback) -> bool {
    feedback.is_all_success()
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Serialize for Feedback {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: IndexMap<&str, &Verdict> = self.iter().map(|(id, v)| (id.key(), v)).collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Feedback {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let mut map: IndexMap<String, Verdict> = IndexMap::deserialize(deserializer)?;
        let mut verdicts: [Verdict; 8] = std::array::from_fn(|_| Verdict::Success);
        for id in ConstraintId::ALL {
            verdicts[id.index()] = map
                .shift_remove(id.key())
                .ok_or_else(|| D::Error::custom(format!("missing {}", id.key())))?;
        }
        if let Some(k) = map.keys().next() {
            return Err(D::Error::custom(format!("unknown constraint {k}")));
        }
        Ok(Feedback::new(verdicts))
    }
}
