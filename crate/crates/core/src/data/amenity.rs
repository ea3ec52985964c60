use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use super::{open, parse_field, require_nonempty, CsvOut, DataError, Table};

/// One cell of the amenity panel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmenityObservation {
    pub area_id: String,
    pub year: i32,
    pub amenity_code: String,
    pub count: u64,
}

/// Establishment counts per (area, year, amenity code).
///
/// Amenity codes without a weight in a [`super::DimensionWeightTable`] are
/// kept; scoring skips them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AmenityPanel {
    counts: BTreeMap<(String, i32, String), u64>,
}

/// Reads an amenity panel CSV with header `area_id,year,amenity_code,count`.
pub fn parse_amenity_panel(path: impl AsRef<Path>) -> Result<AmenityPanel, DataError> {
    AmenityPanel::from_reader(open(path.as_ref())?)
}

impl AmenityPanel {
    pub fn from_reader<R: Read>(source: R) -> Result<Self, DataError> {
        let rows = Table::new(source, &["area_id", "year", "amenity_code", "count"])?.rows()?;
        let mut counts = BTreeMap::new();
        for row in rows {
            let line = row.line;
            let [area, year, code, count] = <[String; 4]>::try_from(row.fields).unwrap();
            require_nonempty(&area, "area_id", line)?;
            require_nonempty(&code, "amenity_code", line)?;
            let year: i32 = parse_field(&year, "year", line)?;
            let count: i64 = parse_field(&count, "count", line)?;
            if count < 0 {
                return Err(DataError::NegativeCount { value: count, line });
            }
            let key = (area, year, code);
            if counts.contains_key(&key) {
                return Err(DataError::DuplicateKey {
                    key: format!("({}, {}, {})", key.0, key.1, key.2),
                    line,
                });
            }
            counts.insert(key, count as u64);
        }
        Ok(AmenityPanel { counts })
    }

    /// Builds a panel from observations, rejecting duplicate triples.
    /// Reported line numbers count the first observation as line 2.
    pub fn from_observations(
        observations: impl IntoIterator<Item = AmenityObservation>,
    ) -> Result<Self, DataError> {
        let mut counts = BTreeMap::new();
        for (i, o) in observations.into_iter().enumerate() {
            let key = (o.area_id, o.year, o.amenity_code);
            if counts.contains_key(&key) {
                return Err(DataError::DuplicateKey {
                    key: format!("({}, {}, {})", key.0, key.1, key.2),
                    line: i + 2,
                });
            }
            counts.insert(key, o.count);
        }
        Ok(AmenityPanel { counts })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Observations in canonical (area, year, code) order.
    pub fn observations(&self) -> impl Iterator<Item = AmenityObservation> + '_ {
        self.counts
            .iter()
            .map(|((area, year, code), &count)| AmenityObservation {
                area_id: area.clone(),
                year: *year,
                amenity_code: code.clone(),
                count,
            })
    }

    pub fn count(&self, area: &str, year: i32, code: &str) -> Option<u64> {
        self.counts
            .get(&(area.to_string(), year, code.to_string()))
            .copied()
    }

    /// Years present in the panel.
    pub fn years(&self) -> BTreeSet<i32> {
        self.counts.keys().map(|(_, y, _)| *y).collect()
    }

    /// True when the observed years form an unbroken run.
    pub fn years_contiguous(&self) -> bool {
        let years = self.years();
        match (years.first(), years.last()) {
            (Some(a), Some(b)) => (b - a + 1) as usize == years.len(),
            _ => true,
        }
    }

    pub fn areas(&self) -> BTreeSet<&str> {
        self.counts.keys().map(|(a, _, _)| a.as_str()).collect()
    }

    pub fn amenity_codes(&self) -> BTreeSet<&str> {
        self.counts.keys().map(|(_, _, c)| c.as_str()).collect()
    }

    /// Counts grouped by (area, year).
    pub fn by_area_year(&self) -> BTreeMap<(&str, i32), Vec<(&str, u64)>> {
        let mut out: BTreeMap<(&str, i32), Vec<(&str, u64)>> = BTreeMap::new();
        for ((area, year, code), &count) in &self.counts {
            out.entry((area.as_str(), *year))
                .or_default()
                .push((code.as_str(), count));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = CsvOut::new(&["area_id", "year", "amenity_code", "count"]);
        for ((area, year, code), count) in &self.counts {
            out.row([area.clone(), year.to_string(), code.clone(), count.to_string()]);
        }
        out.finish()
    }
}
