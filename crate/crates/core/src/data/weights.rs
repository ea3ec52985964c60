use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use super::{open, parse_real, require_nonempty, CsvOut, DataError, Table};

/// The six dimensions every weight table is expected to carry.
pub const CORE_DIMENSIONS: [&str; 6] = [
    "self_expression",
    "glamour",
    "rationalism",
    "tradition",
    "neighborliness",
    "egalitarianism",
];

pub const MAX_DIMENSIONS: usize = 15;

/// Per-amenity weights on each scene dimension, each in `[1, 5]`.
///
/// Dimensions are ordered with the core six first (in [`CORE_DIMENSIONS`]
/// order), then any others alphabetically.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionWeightTable {
    dimensions: Vec<String>,
    entries: BTreeMap<(String, String), f64>,
}

/// Reads a weights CSV with header `amenity_code,dimension,weight`.
pub fn parse_weights(path: impl AsRef<Path>) -> Result<DimensionWeightTable, DataError> {
    DimensionWeightTable::from_reader(open(path.as_ref())?)
}

impl DimensionWeightTable {
    pub fn from_reader<R: Read>(source: R) -> Result<Self, DataError> {
        let rows = Table::new(source, &["amenity_code", "dimension", "weight"])?.rows()?;
        let mut parsed = Vec::with_capacity(rows.len());
        for row in rows {
            let line = row.line;
            let [code, dim, weight] = <[String; 3]>::try_from(row.fields).unwrap();
            require_nonempty(&code, "amenity_code", line)?;
            require_nonempty(&dim, "dimension", line)?;
            let weight = parse_real(&weight, "weight", line)?;
            parsed.push((code, dim, weight, line));
        }
        Self::build(parsed)
    }

    /// Builds a table from `(amenity_code, dimension, weight)` triples.
    pub fn new(
        entries: impl IntoIterator<Item = (String, String, f64)>,
    ) -> Result<Self, DataError> {
        Self::build(
            entries
                .into_iter()
                .enumerate()
                .map(|(i, (c, d, w))| (c, d, w, i + 2))
                .collect(),
        )
    }

    fn build(rows: Vec<(String, String, f64, usize)>) -> Result<Self, DataError> {
        let mut entries = BTreeMap::new();
        let mut dims = BTreeSet::new();
        let mut last_line = 1;
        for (code, dim, weight, line) in rows {
            if !(1.0..=5.0).contains(&weight) {
                return Err(DataError::WeightOutOfRange {
                    value: weight,
                    line,
                });
            }
            let key = (code, dim);
            if entries.contains_key(&key) {
                return Err(DataError::DuplicateKey {
                    key: format!("({}, {})", key.0, key.1),
                    line,
                });
            }
            dims.insert(key.1.clone());
            entries.insert(key, weight);
            last_line = line;
        }
        if dims.is_empty() {
            return Err(DataError::UnparseableRow {
                line: 1,
                reason: "weight table has no dimensions".into(),
            });
        }
        if dims.len() > MAX_DIMENSIONS {
            return Err(DataError::TooManyDimensions {
                count: dims.len(),
                line: last_line,
            });
        }
        let mut dimensions: Vec<String> = CORE_DIMENSIONS
            .iter()
            .filter(|d| dims.contains(**d))
            .map(|d| d.to_string())
            .collect();
        dimensions.extend(
            dims.into_iter()
                .filter(|d| !CORE_DIMENSIONS.contains(&d.as_str())),
        );
        Ok(DimensionWeightTable {
            dimensions,
            entries,
        })
    }

    /// A small illustrative table: the six core dimensions over twelve
    /// amenity codes. Intended for demos and tests, not for substantive
    /// analysis.
    pub fn illustrative() -> Self {
        #[rustfmt::skip]
        const ROWS: [(&str, [f64; 6]); 12] = [
            // self_expression, glamour, rationalism, tradition, neighborliness, egalitarianism
            ("ART_GALLERY",      [5.0, 4.0, 3.0, 2.0, 2.0, 3.0]),
            ("TATTOO_PARLOR",    [5.0, 3.0, 1.0, 1.0, 2.0, 4.0]),
            ("NIGHTCLUB",        [4.0, 5.0, 2.0, 1.0, 1.0, 3.0]),
            ("FASHION_BOUTIQUE", [4.0, 5.0, 2.0, 2.0, 2.0, 1.0]),
            ("RESEARCH_LAB",     [3.0, 2.0, 5.0, 2.0, 2.0, 3.0]),
            ("LAW_FIRM",         [2.0, 3.0, 5.0, 3.0, 2.0, 2.0]),
            ("CHURCH",           [1.0, 1.0, 2.0, 5.0, 4.0, 3.0]),
            ("VETERANS_HALL",    [1.0, 1.0, 2.0, 5.0, 5.0, 3.0]),
            ("DINER",            [2.0, 1.0, 2.0, 4.0, 4.0, 4.0]),
            ("BOWLING_ALLEY",    [2.0, 1.0, 2.0, 4.0, 5.0, 4.0]),
            ("COMMUNITY_CENTER", [2.0, 1.0, 3.0, 3.0, 5.0, 5.0]),
            ("THRIFT_STORE",     [3.0, 1.0, 2.0, 3.0, 3.0, 5.0]),
        ];
        let entries = ROWS.iter().flat_map(|(code, ws)| {
            CORE_DIMENSIONS
                .iter()
                .zip(ws)
                .map(|(d, w)| (code.to_string(), d.to_string(), *w))
        });
        Self::new(entries).expect("illustrative table is valid")
    }

    pub fn dimensions(&self) -> &[String] {
        &self.dimensions
    }

    pub fn weight(&self, amenity_code: &str, dimension: &str) -> Option<f64> {
        self.entries
            .get(&(amenity_code.to_string(), dimension.to_string()))
            .copied()
    }

    pub fn amenity_codes(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|(c, _)| c.as_str()).collect()
    }

    /// Core dimensions absent from this table.
    pub fn missing_core_dimensions(&self) -> Vec<&'static str> {
        CORE_DIMENSIONS
            .iter()
            .copied()
            .filter(|d| !self.dimensions.iter().any(|x| x == d))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = CsvOut::new(&["amenity_code", "dimension", "weight"]);
        for ((code, dim), w) in &self.entries {
            out.row([code.clone(), dim.clone(), w.to_string()]);
        }
        out.finish()
    }
}
