use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use super::{open, parse_field, parse_real, require_nonempty, CsvOut, DataError, Table};

/// Long-format census values keyed by (area, year, variable).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CensusTable {
    rows: BTreeMap<(String, i32, String), f64>,
}

/// Reads a census CSV with header `area_id,year,variable,value`.
pub fn parse_census(path: impl AsRef<Path>) -> Result<CensusTable, DataError> {
    CensusTable::from_reader(open(path.as_ref())?)
}

impl CensusTable {
    pub fn from_reader<R: Read>(source: R) -> Result<Self, DataError> {
        let rows = Table::new(source, &["area_id", "year", "variable", "value"])?.rows()?;
        let mut out = BTreeMap::new();
        for row in rows {
            let line = row.line;
            let [area, year, var, value] = <[String; 4]>::try_from(row.fields).unwrap();
            require_nonempty(&area, "area_id", line)?;
            require_nonempty(&var, "variable", line)?;
            let year: i32 = parse_field(&year, "year", line)?;
            let value = parse_real(&value, "value", line)?;
            let key = (area, year, var);
            if out.contains_key(&key) {
                return Err(DataError::DuplicateKey {
                    key: format!("({}, {}, {})", key.0, key.1, key.2),
                    line,
                });
            }
            out.insert(key, value);
        }
        Ok(CensusTable { rows: out })
    }

    pub fn get(&self, area: &str, year: i32, variable: &str) -> Option<f64> {
        self.rows
            .get(&(area.to_string(), year, variable.to_string()))
            .copied()
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        self.rows.keys().map(|(_, _, v)| v.as_str()).collect()
    }

    pub fn area_years(&self) -> BTreeSet<(&str, i32)> {
        self.rows.keys().map(|(a, y, _)| (a.as_str(), *y)).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = CsvOut::new(&["area_id", "year", "variable", "value"]);
        for ((a, y, v), value) in &self.rows {
            out.row([a.clone(), y.to_string(), v.clone(), value.to_string()]);
        }
        out.finish()
    }
}
