use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use super::{open, parse_field, parse_real, require_nonempty, CsvOut, DataError, Table};

/// One (entity, period) row of a wide panel; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct WideRow {
    pub entity_id: String,
    pub period: i32,
    pub values: Vec<Option<f64>>,
}

/// Entity-period panel with named numeric columns, as consumed by the
/// fixed-effects estimator. Rows are sorted by (entity, period).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WidePanel {
    variables: Vec<String>,
    rows: Vec<WideRow>,
}

/// Reads `entity_id,period,<var>...`. Empty and `NA` cells are missing.
pub fn parse_wide_panel(path: impl AsRef<Path>) -> Result<WidePanel, DataError> {
    WidePanel::from_reader(open(path.as_ref())?)
}

impl WidePanel {
    pub fn from_reader<R: Read>(source: R) -> Result<Self, DataError> {
        let mut table = Table::new(source, &["entity_id", "period"])?;
        let extra = table.extra_columns()?;
        let positions: Vec<usize> = extra.iter().map(|(i, _)| *i).collect();
        let variables: Vec<String> = extra.into_iter().map(|(_, name)| name).collect();
        let mut rows = Vec::new();
        for row in table.rows_with(&positions)? {
            let line = row.line;
            let mut fields = row.fields.into_iter();
            let entity_id = fields.next().unwrap();
            require_nonempty(&entity_id, "entity_id", line)?;
            let period: i32 = parse_field(&fields.next().unwrap(), "period", line)?;
            let values = fields
                .zip(&variables)
                .map(|(cell, name)| match cell.as_str() {
                    "" | "NA" => Ok(None),
                    v => parse_real(v, name, line).map(Some),
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push((WideRow { entity_id, period, values }, line));
        }
        Self::build(variables, rows)
    }

    /// Builds a panel from rows whose `values` follow `variables`.
    pub fn new(variables: Vec<String>, rows: Vec<WideRow>) -> Result<Self, DataError> {
        for (i, r) in rows.iter().enumerate() {
            if r.values.len() != variables.len() {
                return Err(DataError::UnparseableRow {
                    line: i + 2,
                    reason: format!("{} values for {} variables", r.values.len(), variables.len()),
                });
            }
        }
        let rows = rows.into_iter().enumerate().map(|(i, r)| (r, i + 2)).collect();
        Self::build(variables, rows)
    }

    fn build(variables: Vec<String>, rows: Vec<(WideRow, usize)>) -> Result<Self, DataError> {
        let mut by_key = BTreeMap::new();
        for (row, line) in rows {
            let key = (row.entity_id.clone(), row.period);
            if by_key.contains_key(&key) {
                return Err(DataError::DuplicateKey {
                    key: format!("({}, {})", key.0, key.1),
                    line,
                });
            }
            by_key.insert(key, row);
        }
        Ok(WidePanel {
            variables,
            rows: by_key.into_values().collect(),
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn rows(&self) -> &[WideRow] {
        &self.rows
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut header = vec!["entity_id", "period"];
        header.extend(self.variables.iter().map(String::as_str));
        let mut out = CsvOut::new(&header);
        for r in &self.rows {
            let mut fields = vec![r.entity_id.clone(), r.period.to_string()];
            fields.extend(r.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            out.row(fields);
        }
        out.finish()
    }
}
