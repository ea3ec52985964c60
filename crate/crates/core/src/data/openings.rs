use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;

use super::{open, parse_real, require_nonempty, CsvOut, DataError, Table};

/// A dated opening of one location of some organizational form.
#[derive(Debug, Clone, PartialEq)]
pub struct Opening {
    pub location_id: String,
    pub open_date: NaiveDate,
    pub region_id: String,
    pub covariates: BTreeMap<String, f64>,
}

/// Openings ordered by date, ties broken by `location_id`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OpeningLog {
    records: Vec<Opening>,
    regions_without_covariates: usize,
}

/// Reads `location_id,open_date,region_id` and optionally joins a
/// `region_id,name,value` covariates file by region.
pub fn parse_openings(
    path: impl AsRef<Path>,
    covariates_path: Option<&Path>,
) -> Result<OpeningLog, DataError> {
    let openings = open(path.as_ref())?;
    match covariates_path {
        Some(c) => OpeningLog::from_readers(openings, Some(open(c)?)),
        None => OpeningLog::from_readers(openings, None::<std::fs::File>),
    }
}

impl OpeningLog {
    pub fn from_readers<R: Read, C: Read>(openings: R, covariates: Option<C>) -> Result<Self, DataError> {
        let rows = Table::new(openings, &["location_id", "open_date", "region_id"])?.rows()?;
        let mut records = Vec::with_capacity(rows.len());
        let mut seen = BTreeSet::new();
        for row in rows {
            let line = row.line;
            let [loc, date, region] = <[String; 3]>::try_from(row.fields).unwrap();
            require_nonempty(&loc, "location_id", line)?;
            require_nonempty(&region, "region_id", line)?;
            if !seen.insert(loc.clone()) {
                return Err(DataError::DuplicateLocation { location: loc, line });
            }
            let open_date = NaiveDate::parse_from_str(&date, "%Y-%m-%d")
                .map_err(|_| DataError::BadDate { value: date, line })?;
            records.push(Opening {
                location_id: loc,
                open_date,
                region_id: region,
                covariates: BTreeMap::new(),
            });
        }

        let mut missing = 0;
        if let Some(cov) = covariates {
            let rows = Table::new(cov, &["region_id", "name", "value"])?.rows()?;
            let mut by_region: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
            for row in rows {
                let line = row.line;
                let [region, name, value] = <[String; 3]>::try_from(row.fields).unwrap();
                require_nonempty(&region, "region_id", line)?;
                require_nonempty(&name, "name", line)?;
                let value = parse_real(&value, "value", line)?;
                let slot = by_region.entry(region.clone()).or_default();
                if slot.insert(name.clone(), value).is_some() {
                    return Err(DataError::DuplicateKey {
                        key: format!("({region}, {name})"),
                        line,
                    });
                }
            }
            let regions: BTreeSet<&str> = records.iter().map(|r| r.region_id.as_str()).collect();
            missing = regions.iter().filter(|r| !by_region.contains_key(**r)).count();
            for r in &mut records {
                if let Some(c) = by_region.get(&r.region_id) {
                    r.covariates = c.clone();
                }
            }
        }
        records.sort_by(|a, b| (a.open_date, &a.location_id).cmp(&(b.open_date, &b.location_id)));
        Ok(OpeningLog {
            records,
            regions_without_covariates: missing,
        })
    }

    /// Builds a log from records, rejecting duplicate locations.
    pub fn from_records(mut records: Vec<Opening>) -> Result<Self, DataError> {
        let mut seen = BTreeSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.location_id.clone()) {
                return Err(DataError::DuplicateLocation {
                    location: r.location_id.clone(),
                    line: i + 2,
                });
            }
        }
        records.sort_by(|a, b| (a.open_date, &a.location_id).cmp(&(b.open_date, &b.location_id)));
        Ok(OpeningLog {
            records,
            regions_without_covariates: 0,
        })
    }

    pub fn records(&self) -> &[Opening] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Regions referenced by openings but absent from the covariates file.
    pub fn regions_without_covariates(&self) -> usize {
        self.regions_without_covariates
    }

    pub fn to_openings_csv(&self) -> String {
        let mut out = CsvOut::new(&["location_id", "open_date", "region_id"]);
        for r in &self.records {
            out.row([
                r.location_id.clone(),
                r.open_date.format("%Y-%m-%d").to_string(),
                r.region_id.clone(),
            ]);
        }
        out.finish()
    }

    /// Region-level covariates as `region_id,name,value`.
    pub fn to_covariates_csv(&self) -> String {
        let mut by_region: BTreeMap<&str, &BTreeMap<String, f64>> = BTreeMap::new();
        for r in &self.records {
            by_region.entry(&r.region_id).or_insert(&r.covariates);
        }
        let mut out = CsvOut::new(&["region_id", "name", "value"]);
        for (region, covs) in by_region {
            for (name, value) in covs {
                out.row([region.to_string(), name.clone(), value.to_string()]);
            }
        }
        out.finish()
    }
}
