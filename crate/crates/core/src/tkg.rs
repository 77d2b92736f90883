//! Temporal knowledge graph: quadruple parsing, interning and day-index timestamps.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LineError {
    #[error("expected 4 tab-separated fields, found {0}")]
    FieldCount(usize),
    #[error("field {0} is empty")]
    EmptyField(usize),
    #[error("invalid date {0:?}")]
    InvalidDate(String),
}

#[derive(Debug, Error)]
pub enum TkgError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: LineError,
    },
}

const EPOCH: NaiveDate = match NaiveDate::from_ymd_opt(1970, 1, 1) {
    Some(d) => d,
    None => panic!("epoch"),
};

/// Calendar day, stored as the number of days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i32);

impl Timestamp {
    pub fn from_date(date: NaiveDate) -> Self {
        Timestamp((date - EPOCH).num_days() as i32)
    }

    pub fn to_date(self) -> NaiveDate {
        EPOCH + chrono::Duration::days(self.0 as i64)
    }

    /// Absolute difference in days.
    pub fn span(self, other: Timestamp) -> u32 {
        self.0.abs_diff(other.0)
    }

    pub fn days(self) -> i32 {
        self.0
    }
}

impl FromStr for Timestamp {
    type Err = LineError;

    /// Accepts `YYYY-MM-DD`, or a bare `YYYY` which maps to January 1 of that year.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || LineError::InvalidDate(s.to_string());
        if s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit()) {
            let year: i32 = s.parse().map_err(|_| bad())?;
            return NaiveDate::from_ymd_opt(year, 1, 1)
                .map(Timestamp::from_date)
                .ok_or_else(bad);
        }
        let bytes = s.as_bytes();
        if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
            return Err(bad());
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(Timestamp::from_date)
            .map_err(|_| bad())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.to_date();
        write!(f, "{:04}-{:02}-{:02}", d.year(), d.month(), d.day())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub u32);

impl EventId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
    pub time: Timestamp,
    pub event_id: EventId,
}

/// The four raw fields of one event line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventParts<'a> {
    pub subject: &'a str,
    pub relation: &'a str,
    pub object: &'a str,
    pub date: &'a str,
}

pub fn parse_event_line(line: &str) -> Result<EventParts<'_>, LineError> {
    let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
    if fields.len() != 4 {
        // "" splits into one empty field
        let n = if line.is_empty() { 0 } else { fields.len() };
        return Err(LineError::FieldCount(n));
    }
    if let Some(i) = fields.iter().position(|f| f.is_empty()) {
        return Err(LineError::EmptyField(i));
    }
    Ok(EventParts {
        subject: fields[0],
        relation: fields[1],
        object: fields[2],
        date: fields[3],
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_events: usize,
    pub num_entities: usize,
    pub num_relations: usize,
    pub num_timestamps: usize,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "events={} entities={} relations={} timestamps={}",
            self.num_events, self.num_entities, self.num_relations, self.num_timestamps
        )
    }
}

/// An immutable, interned event corpus. Event ids are dense and follow insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemporalKg {
    events: Vec<Event>,
    entities: Interner,
    relations: Interner,
    times: Vec<Timestamp>,
}

/// Incremental constructor for [`TemporalKg`]; drops exact duplicate quadruples.
#[derive(Debug, Default)]
pub struct TkgBuilder {
    events: Vec<Event>,
    entities: Interner,
    relations: Interner,
    seen: HashSet<(u32, u32, u32, i32)>,
}

impl TkgBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the new event id, or `None` when the quadruple was already present.
    pub fn push(&mut self, subject: &str, relation: &str, object: &str, time: Timestamp) -> Option<EventId> {
        let s = self.entities.intern(subject);
        let r = self.relations.intern(relation);
        let o = self.entities.intern(object);
        if !self.seen.insert((s, r, o, time.0)) {
            return None;
        }
        let event_id = EventId(self.events.len() as u32);
        self.events.push(Event {
            subject: EntityId(s),
            relation: RelationId(r),
            object: EntityId(o),
            time,
            event_id,
        });
        Some(event_id)
    }

    pub fn build(self) -> TemporalKg {
        let mut times: Vec<Timestamp> = self.events.iter().map(|e| e.time).collect();
        times.sort_unstable();
        times.dedup();
        TemporalKg {
            events: self.events,
            entities: self.entities,
            relations: self.relations,
            times,
        }
    }
}

impl TemporalKg {
    pub fn parse_str(text: &str) -> Result<Self, TkgError> {
        let mut builder = TkgBuilder::new();
        for (idx, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let parse = |line| -> Result<_, LineError> {
                let parts = parse_event_line(line)?;
                let time: Timestamp = parts.date.parse()?;
                Ok((parts, time))
            };
            let (parts, time) = parse(line).map_err(|source| TkgError::Parse { line: idx + 1, source })?;
            builder.push(parts.subject, parts.relation, parts.object, time);
        }
        Ok(builder.build())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, id: EventId) -> &Event {
        &self.events[id.index()]
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn entities(&self) -> &Interner {
        &self.entities
    }

    pub fn relations(&self) -> &Interner {
        &self.relations
    }

    pub fn times(&self) -> &[Timestamp] {
        &self.times
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0)
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        self.relations.name(id.0)
    }

    /// Days between the earliest and latest timestamp (0 for an empty corpus).
    pub fn time_range_days(&self) -> u32 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => a.span(*b),
            _ => 0,
        }
    }

    /// Writes the corpus back in the tab-separated event format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(self.entity_name(e.subject));
            out.push('\t');
            out.push_str(self.relation_name(e.relation));
            out.push('\t');
            out.push_str(self.entity_name(e.object));
            out.push('\t');
            out.push_str(&e.time.to_string());
            out.push('\n');
        }
        out
    }
}

pub fn load_tkg(path: impl AsRef<Path>) -> Result<TemporalKg, TkgError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TkgError::Io {
        path: path.display().to_string(),
        source,
    })?;
    TemporalKg::parse_str(&text)
}

pub fn kg_stats(kg: &TemporalKg) -> DatasetStats {
    DatasetStats {
        num_events: kg.events.len(),
        num_entities: kg.entities.len(),
        num_relations: kg.relations.len(),
        num_timestamps: kg.times.len(),
    }
}
