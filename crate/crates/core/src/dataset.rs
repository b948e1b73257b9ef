//! Column-oriented tabular datasets.

use std::io::Read;

use crate::domain::AttributeDomain;
use crate::error::{Error, Result};

/// An `n × m` table stored column by column. Column `j` holds the values of
/// attribute `j` for every record.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    domains: Vec<AttributeDomain>,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, domains: Vec<AttributeDomain>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != domains.len() || names.len() != columns.len() {
            return Err(Error::InvalidDataset(format!(
                "{} names, {} domains and {} columns",
                names.len(),
                domains.len(),
                columns.len()
            )));
        }
        if names.is_empty() {
            return Err(Error::InvalidDataset("dataset has no attributes".into()));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::InvalidDataset("dataset has no records".into()));
        }
        for ((name, domain), col) in names.iter().zip(&domains).zip(&columns) {
            domain.validate()?;
            if col.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "column {name} has {} entries, expected {n}",
                    col.len()
                )));
            }
            if let Some(x) = col.iter().find(|x| !domain.contains(**x)) {
                return Err(Error::InvalidDataset(format!(
                    "value {x} of column {name} is outside its domain"
                )));
            }
        }
        Ok(Dataset { names, domains, columns })
    }

    /// Reads a CSV document whose header names every attribute exactly once.
    /// Columns may appear in any order; the result follows `attributes`.
    pub fn from_csv<R: Read>(reader: R, attributes: &[(String, AttributeDomain)]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() != attributes.len() {
            return Err(Error::InvalidDataset(format!(
                "header has {} columns, configuration declares {} attributes",
                header.len(),
                attributes.len()
            )));
        }
        let mut position = Vec::with_capacity(attributes.len());
        for (name, _) in attributes {
            let p = header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidDataset(format!("attribute {name} missing from CSV header")))?;
            position.push(p);
        }
        let mut columns = vec![Vec::new(); attributes.len()];
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            for (j, (name, domain)) in attributes.iter().enumerate() {
                let cell = record
                    .get(position[j])
                    .ok_or_else(|| Error::InvalidDataset(format!("row {} is short", row + 1)))?;
                let x = domain
                    .parse_cell(cell)
                    .map_err(|e| Error::InvalidDataset(format!("row {}, {name}: {e}", row + 1)))?;
                columns[j].push(x);
            }
        }
        Dataset::new(
            attributes.iter().map(|(n, _)| n.clone()).collect(),
            attributes.iter().map(|(_, d)| d.clone()).collect(),
            columns,
        )
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn domains(&self) -> &[AttributeDomain] {
        &self.domains
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn value(&self, record: usize, attribute: usize) -> f64 {
        self.columns[attribute][record]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs() -> Vec<(String, AttributeDomain)> {
        vec![
            ("h".to_string(), AttributeDomain::interval(48.0, 84.0).unwrap()),
            ("g".to_string(), AttributeDomain::binary()),
        ]
    }

    #[test]
    fn reads_columns_in_declared_order() {
        let csv = "g,h\n1,70\n0,60.5\n";
        let ds = Dataset::from_csv(csv.as_bytes(), &attrs()).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.column(0), &[70.0, 60.5]);
        assert_eq!(ds.column(1), &[1.0, 0.0]);
    }

    #[test]
    fn rejects_out_of_domain_and_missing_columns() {
        assert!(Dataset::from_csv("g,h\n2,70\n".as_bytes(), &attrs()).is_err());
        assert!(Dataset::from_csv("g,h\n1,90\n".as_bytes(), &attrs()).is_err());
        assert!(Dataset::from_csv("g,x\n1,70\n".as_bytes(), &attrs()).is_err());
    }

    #[test]
    fn ragged_columns_are_rejected() {
        let r = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![AttributeDomain::binary(), AttributeDomain::binary()],
            vec![vec![0.0, 1.0], vec![1.0]],
        );
        assert!(matches!(r, Err(Error::InvalidDataset(_))));
    }
}
