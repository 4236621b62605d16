//! Loading and writing dataset splits.
//!
//! On-disk layout of a split:
//!
//! * `queries.jsonl`: one query per line.
//! * `<reference_dir>/<query_id>/{flights,ground_routes,restaurants,attractions,accommodations}.csv`,
//!   each with a header row. Columns beyond the required ones are kept as
//!   auxiliary columns; a missing file is an empty table.
//! * `plans.jsonl` (train only): `{"query_id": ..., "plan_text": ...}` per line.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{parse_plan, render_plan};
use crate::domain::{
    Accommodation, Attraction, Cuisine, Flight, GroundMode, GroundRoute, HardConstraintSet, Money,
    Plan, ReferenceBundle, Restaurant, RoomKind, RoomRule, RoomType, Table, TransportRule,
    TripQuery,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}:{line}: malformed record: {cause}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        cause: String,
    },
    #[error("no reference directory for query {0}")]
    MissingReference(String),
    #[error("schema mismatch in {table}.{column}: {detail}")]
    SchemaMismatch {
        table: String,
        column: String,
        detail: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitName::Train),
            "validation" => Ok(SplitName::Validation),
            "test" => Ok(SplitName::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRecord {
    pub query: TripQuery,
    pub reference: ReferenceBundle,
    pub plan: Option<Plan>,
}

/// Train records all carry an annotated plan; validation and test never do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub records: Vec<SplitRecord>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, query_id: &str) -> Option<&SplitRecord> {
        self.records.iter().find(|r| r.query.id == query_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConstraintRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_rule: Option<RoomRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_type: Option<RoomType>,
    #[serde(default)]
    pub cuisines: Vec<Cuisine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transportation: Option<TransportRule>,
}

/// One line of `queries.jsonl`. `budget` is in whole dollars.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub text: String,
    pub origin: String,
    pub destination_region: String,
    pub city_count: u32,
    pub day_count: u32,
    pub group_size: u32,
    pub dates: Vec<NaiveDate>,
    pub budget: i64,
    #[serde(default)]
    pub constraints: ConstraintRecord,
}

impl QueryRecord {
    pub fn into_query(self) -> TripQuery {
        let budget = Money::from_dollars(self.budget);
        TripQuery {
            hard_constraints: HardConstraintSet {
                room_rule: self.constraints.room_rule,
                room_type: self.constraints.room_type,
                cuisines: self.constraints.cuisines.into_iter().collect(),
                budget: Some(budget),
                transportation: self.constraints.transportation,
            },
            id: self.id,
            text: self.text,
            origin_city: self.origin,
            destination_region: self.destination_region,
            city_count: self.city_count,
            day_count: self.day_count,
            group_size: self.group_size,
            dates: self.dates,
            budget,
        }
    }

    pub fn from_query(q: &TripQuery) -> Self {
        QueryRecord {
            id: q.id.clone(),
            text: q.text.clone(),
            origin: q.origin_city.clone(),
            destination_region: q.destination_region.clone(),
            city_count: q.city_count,
            day_count: q.day_count,
            group_size: q.group_size,
            dates: q.dates.clone(),
            budget: q.budget.cents() / 100,
            constraints: ConstraintRecord {
                room_rule: q.hard_constraints.room_rule,
                room_type: q.hard_constraints.room_type,
                cuisines: q.hard_constraints.cuisines.iter().copied().collect(),
                transportation: q.hard_constraints.transportation,
            },
        }
    }
}

/// One line of `plans.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub query_id: String,
    pub plan_text: String,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>, IngestError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| IngestError::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            cause: e.to_string(),
        })?;
        out.push((idx + 1, rec));
    }
    Ok(out)
}

/// Reads a `plans.jsonl` file without parsing the plan texts.
pub fn read_plan_records(path: &Path) -> Result<Vec<PlanRecord>, IngestError> {
    Ok(read_jsonl(path)?.into_iter().map(|(_, r)| r).collect())
}

/// Loads a split. Plans are parsed with the query's day count; a plan that
/// does not parse is a malformed record.
pub fn load_split(
    name: SplitName,
    queries_path: &Path,
    reference_dir: &Path,
    plans_path: Option<&Path>,
) -> Result<DatasetSplit, IngestError> {
    let queries: Vec<(usize, QueryRecord)> = read_jsonl(queries_path)?;
    let mut plans: HashMap<String, (usize, String)> = HashMap::new();
    if let Some(pp) = plans_path {
        for (line, rec) in read_jsonl::<PlanRecord>(pp)? {
            if plans.insert(rec.query_id.clone(), (line, rec.plan_text)).is_some() {
                return Err(IngestError::MalformedRecord {
                    path: pp.to_path_buf(),
                    line,
                    cause: format!("second plan for query {}", rec.query_id),
                });
            }
        }
    }

    let mut records = Vec::with_capacity(queries.len());
    for (line, rec) in queries {
        let query = rec.into_query();
        query.validate().map_err(|e| IngestError::MalformedRecord {
            path: queries_path.to_path_buf(),
            line,
            cause: e.to_string(),
        })?;
        let dir = reference_dir.join(&query.id);
        if !dir.is_dir() {
            return Err(IngestError::MissingReference(query.id.clone()));
        }
        let reference = load_bundle(&dir)?;
        let plan = match plans.remove(&query.id) {
            Some((pline, text)) => {
                if name != SplitName::Train {
                    return Err(IngestError::SchemaMismatch {
                        table: "plans".into(),
                        column: "plan_text".into(),
                        detail: format!("{name} record {} carries a plan", query.id),
                    });
                }
                let plan = parse_plan(&text, query.day_count as usize).map_err(|d| {
                    IngestError::MalformedRecord {
                        path: plans_path.unwrap().to_path_buf(),
                        line: pline,
                        cause: format!("plan does not parse: {d}"),
                    }
                })?;
                Some(plan)
            }
            None => None,
        };
        if name == SplitName::Train && plan.is_none() {
            return Err(IngestError::SchemaMismatch {
                table: "plans".into(),
                column: "plan_text".into(),
                detail: format!("train record {} has no annotated plan", query.id),
            });
        }
        records.push(SplitRecord {
            query,
            reference,
            plan,
        });
    }
    if let Some((qid, (line, _))) = plans.into_iter().next() {
        return Err(IngestError::MalformedRecord {
            path: plans_path.unwrap().to_path_buf(),
            line,
            cause: format!("plan for unknown query {qid}"),
        });
    }
    Ok(DatasetSplit { name, records })
}

struct CsvTable {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

impl CsvTable {
    fn read(path: &Path, table: Table) -> Result<Option<CsvTable>, IngestError> {
        if !path.exists() {
            return Ok(None);
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| malformed_csv(path, e))?;
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| malformed_csv(path, e))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        for col in table.columns() {
            if !header.iter().any(|h| h == col) {
                return Err(IngestError::SchemaMismatch {
                    table: table.name().into(),
                    column: col.to_string(),
                    detail: format!("{} lacks a required column", path.display()),
                });
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| malformed_csv(path, e))?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Some(CsvTable {
            path: path.to_path_buf(),
            header,
            rows,
        }))
    }

    fn malformed(&self, line: usize, cause: impl Into<String>) -> IngestError {
        IngestError::MalformedRecord {
            path: self.path.clone(),
            line,
            cause: cause.into(),
        }
    }

    /// Yields (line, required values, auxiliary columns) per row.
    fn split_rows(
        &self,
        table: Table,
    ) -> impl Iterator<Item = (usize, HashMap<&str, &str>, indexmap::IndexMap<String, String>)> + '_ {
        let required: BTreeSet<&str> = table.columns().iter().copied().collect();
        self.rows.iter().map(move |(line, cells)| {
            let mut core = HashMap::new();
            let mut extra = indexmap::IndexMap::new();
            for (h, v) in self.header.iter().zip(cells) {
                if required.contains(h.as_str()) {
                    core.insert(h.as_str(), v.as_str());
                } else {
                    extra.insert(h.clone(), v.clone());
                }
            }
            (*line, core, extra)
        })
    }
}

fn malformed_csv(path: &Path, e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    IngestError::MalformedRecord {
        path: path.to_path_buf(),
        line,
        cause: e.to_string(),
    }
}

fn money(t: &CsvTable, line: usize, v: &str) -> Result<Money, IngestError> {
    let m = Money::parse(v).map_err(|e| t.malformed(line, e.to_string()))?;
    if m < Money::ZERO {
        return Err(t.malformed(line, "negative price"));
    }
    Ok(m)
}

fn count(t: &CsvTable, line: usize, col: &str, v: &str) -> Result<u32, IngestError> {
    let n: u32 = v
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|f| f.fract() == 0.0 && *f >= 1.0 && *f <= u32::MAX as f64)
        .map(|f| f as u32)
        .ok_or_else(|| t.malformed(line, format!("{col} must be a positive integer, got {v:?}")))?;
    Ok(n)
}

/// Loads the five reference tables of one query from `dir`.
pub fn load_bundle(dir: &Path) -> Result<ReferenceBundle, IngestError> {
    let mut bundle = ReferenceBundle::default();
    for table in Table::ALL {
        let Some(t) = CsvTable::read(&dir.join(table.file_name()), table)? else {
            continue;
        };
        for (line, c, extra) in t.split_rows(table) {
            let s = |k: &str| c[k].trim().to_string();
            match table {
                Table::Flights => bundle.flights.push(Flight {
                    flight_number: s("flight_number"),
                    origin: s("origin"),
                    destination: s("destination"),
                    departure_time: s("departure_time"),
                    arrival_time: s("arrival_time"),
                    price: money(&t, line, c["price"])?,
                    extra,
                }),
                Table::GroundRoutes => bundle.ground_routes.push(GroundRoute {
                    mode: GroundMode::parse(c["mode"])
                        .ok_or_else(|| t.malformed(line, format!("unknown mode {:?}", c["mode"])))?,
                    origin: s("origin"),
                    destination: s("destination"),
                    duration: s("duration"),
                    cost: money(&t, line, c["cost"])?,
                    extra,
                }),
                Table::Restaurants => {
                    let mut cuisines = BTreeSet::new();
                    let mut other = Vec::new();
                    for label in c["cuisines"].split(',').map(str::trim).filter(|l| !l.is_empty()) {
                        match Cuisine::from_name(label) {
                            Some(k) => {
                                cuisines.insert(k);
                            }
                            None => other.push(label),
                        }
                    }
                    let mut extra = extra;
                    if !other.is_empty() {
                        extra.insert("other_cuisines".into(), other.join(", "));
                    }
                    bundle.restaurants.push(Restaurant {
                        name: s("name"),
                        city: s("city"),
                        cuisines,
                        average_cost: money(&t, line, c["average_cost"])?,
                        extra,
                    })
                }
                Table::Attractions => bundle.attractions.push(Attraction {
                    name: s("name"),
                    city: s("city"),
                    extra,
                }),
                Table::Accommodations => {
                    let mut rules = BTreeSet::new();
                    let raw = c["house_rules"].trim();
                    if !raw.is_empty() && raw != "-" {
                        for part in raw.split('&') {
                            let rule = RoomRule::parse(part).ok_or_else(|| {
                                t.malformed(line, format!("unknown house rule {part:?}"))
                            })?;
                            rules.insert(rule);
                        }
                    }
                    bundle.accommodations.push(Accommodation {
                        name: s("name"),
                        city: s("city"),
                        price: money(&t, line, c["price"])?,
                        room_type: RoomKind::parse(c["room_type"]).ok_or_else(|| {
                            t.malformed(line, format!("unknown room type {:?}", c["room_type"]))
                        })?,
                        house_rules: rules,
                        minimum_nights: count(&t, line, "minimum_nights", c["minimum_nights"])?,
                        maximum_occupancy: count(
                            &t,
                            line,
                            "maximum_occupancy",
                            c["maximum_occupancy"],
                        )?,
                        extra,
                    })
                }
            }
        }
    }
    Ok(bundle)
}

/// Writes the five reference tables of one bundle into `dir`.
pub fn write_bundle(dir: &Path, bundle: &ReferenceBundle) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for table in Table::ALL {
        let path = dir.join(table.file_name());
        let mut extra_cols = bundle.extra_columns(table);
        if table == Table::Restaurants {
            extra_cols.retain(|c| c != "other_cuisines");
        }
        let mut w = csv::Writer::from_path(&path).map_err(|e| malformed_csv(&path, e))?;
        let header: Vec<&str> = table
            .columns()
            .iter()
            .copied()
            .chain(extra_cols.iter().map(String::as_str))
            .collect();
        w.write_record(&header).map_err(|e| malformed_csv(&path, e))?;
        let extras = bundle_extras(bundle, table);
        for (mut row, extra) in bundle.core_rows(table).into_iter().zip(extras) {
            if table == Table::Restaurants {
                // The cuisine column carries every label; keep it in one place.
                if let Some(other) = extra.get("other_cuisines") {
                    row[2] = [row[2].as_str(), other.as_str()]
                        .into_iter()
                        .filter(|s| !s.is_empty())
                        .collect::<Vec<_>>()
                        .join(", ");
                }
            }
            for col in &extra_cols {
                row.push(extra.get(col).cloned().unwrap_or_default());
            }
            w.write_record(&row).map_err(|e| malformed_csv(&path, e))?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

fn bundle_extras(bundle: &ReferenceBundle, table: Table) -> Vec<indexmap::IndexMap<String, String>> {
    match table {
        Table::Flights => bundle.flights.iter().map(|r| r.extra.clone()).collect(),
        Table::GroundRoutes => bundle.ground_routes.iter().map(|r| r.extra.clone()).collect(),
        Table::Restaurants => bundle.restaurants.iter().map(|r| r.extra.clone()).collect(),
        Table::Attractions => bundle.attractions.iter().map(|r| r.extra.clone()).collect(),
        Table::Accommodations => bundle.accommodations.iter().map(|r| r.extra.clone()).collect(),
    }
}

/// Writes a split in the layout [`load_split`] reads.
pub fn write_split(
    split: &DatasetSplit,
    queries_path: &Path,
    reference_dir: &Path,
    plans_path: Option<&Path>,
) -> Result<(), IngestError> {
    if let Some(parent) = queries_path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut q = BufWriter::new(File::create(queries_path).map_err(io_err(queries_path))?);
    for rec in &split.records {
        let line = serde_json::to_string(&QueryRecord::from_query(&rec.query))
            .expect("query record serializes");
        writeln!(q, "{line}").map_err(io_err(queries_path))?;
        write_bundle(&reference_dir.join(&rec.query.id), &rec.reference)?;
    }
    q.flush().map_err(io_err(queries_path))?;
    if let Some(pp) = plans_path {
        let mut p = BufWriter::new(File::create(pp).map_err(io_err(pp))?);
        for rec in &split.records {
            if let Some(plan) = &rec.plan {
                let line = serde_json::to_string(&PlanRecord {
                    query_id: rec.query.id.clone(),
                    plan_text: render_plan(plan),
                })
                .expect("plan record serializes");
                writeln!(p, "{line}").map_err(io_err(pp))?;
            }
        }
        p.flush().map_err(io_err(pp))?;
    }
    Ok(())
}

/// Whitespace-token count of the bundle's canonical text rendering.
pub fn token_length(bundle: &ReferenceBundle) -> usize {
    bundle.render_text().split_whitespace().count()
}
