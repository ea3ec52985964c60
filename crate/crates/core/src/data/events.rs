use std::collections::{BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};

use super::{open, require_nonempty, CsvOut, DataError, Table, Taxonomy};

/// A single review/check-in at a venue.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReviewEvent {
    pub timestamp: DateTime<Utc>,
    pub user_id: String,
    pub venue_id: String,
    pub area_id: String,
    pub categories: BTreeSet<String>,
}

/// Review events sorted by timestamp (ties by user, venue, area, categories).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReviewEventLog {
    events: Vec<ReviewEvent>,
}

/// Reads an events CSV with header `user_id,venue_id,area_id,timestamp,categories`.
/// Categories are `;`-separated and must all exist in `taxonomy`.
pub fn parse_events(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<ReviewEventLog, DataError> {
    ReviewEventLog::from_reader(open(path.as_ref())?, taxonomy)
}

/// Parses an ISO 8601 instant. Zone-less values are taken as UTC; a bare
/// date means midnight UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc())
}

/// RFC 3339 with a `Z` suffix; round-trips through [`parse_timestamp`].
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

impl ReviewEventLog {
    pub fn from_reader<R: Read>(source: R, taxonomy: &Taxonomy) -> Result<Self, DataError> {
        let rows = Table::new(
            source,
            &["user_id", "venue_id", "area_id", "timestamp", "categories"],
        )?
        .rows()?;
        let mut events = Vec::with_capacity(rows.len());
        for row in rows {
            let line = row.line;
            let [user, venue, area, ts, cats] = <[String; 5]>::try_from(row.fields).unwrap();
            require_nonempty(&user, "user_id", line)?;
            require_nonempty(&venue, "venue_id", line)?;
            require_nonempty(&area, "area_id", line)?;
            let timestamp = parse_timestamp(&ts).ok_or(DataError::BadTimestamp { value: ts, line })?;
            let categories: BTreeSet<String> = cats
                .split(';')
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(String::from)
                .collect();
            events.push((
                ReviewEvent {
                    timestamp,
                    user_id: user,
                    venue_id: venue,
                    area_id: area,
                    categories,
                },
                line,
            ));
        }
        Self::build(events, taxonomy)
    }

    /// Validates and sorts events; line numbers count the first event as 2.
    pub fn new(events: Vec<ReviewEvent>, taxonomy: &Taxonomy) -> Result<Self, DataError> {
        Self::build(
            events.into_iter().enumerate().map(|(i, e)| (e, i + 2)).collect(),
            taxonomy,
        )
    }

    fn build(events: Vec<(ReviewEvent, usize)>, taxonomy: &Taxonomy) -> Result<Self, DataError> {
        for (e, line) in &events {
            if e.categories.is_empty() {
                return Err(DataError::EmptyCategories { line: *line });
            }
            if let Some(c) = e.categories.iter().find(|c| !taxonomy.contains(c)) {
                return Err(DataError::UnknownCategory {
                    category: c.clone(),
                    line: *line,
                });
            }
        }
        let mut events: Vec<ReviewEvent> = events.into_iter().map(|(e, _)| e).collect();
        events.sort();
        Ok(ReviewEventLog { events })
    }

    pub fn events(&self) -> &[ReviewEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn areas(&self) -> BTreeSet<&str> {
        self.events.iter().map(|e| e.area_id.as_str()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = CsvOut::new(&["user_id", "venue_id", "area_id", "timestamp", "categories"]);
        for e in &self.events {
            let cats = e.categories.iter().cloned().collect::<Vec<_>>().join(";");
            out.row([
                e.user_id.clone(),
                e.venue_id.clone(),
                e.area_id.clone(),
                format_timestamp(&e.timestamp),
                cats,
            ]);
        }
        out.finish()
    }
}
