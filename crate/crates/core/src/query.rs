//! The query language: column means, column sums and conjunctive threshold
//! counts, with exact evaluation and column-neighbor sensitivity.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::domain::AttributeDomain;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

impl CmpOp {
    /// Exact comparison; ties resolve by the operator itself.
    pub fn holds(self, x: f64, c: f64) -> bool {
        match self {
            CmpOp::Gt => x > c,
            CmpOp::Ge => x >= c,
            CmpOp::Lt => x < c,
            CmpOp::Le => x <= c,
            CmpOp::Eq => x == c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Predicate {
    pub attribute: usize,
    pub op: CmpOp,
    pub value: f64,
}

impl Predicate {
    pub fn new(attribute: usize, op: CmpOp, value: f64) -> Self {
        Predicate { attribute, op, value }
    }

    pub fn holds(&self, x: f64) -> bool {
        self.op.holds(x, self.value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum QuerySpec {
    ColumnMean(usize),
    ColumnSum(usize),
    /// Number of records satisfying every predicate.
    ThresholdCount(Vec<Predicate>),
}

impl QuerySpec {
    /// The attributes the query reads.
    pub fn attributes(&self) -> BTreeSet<usize> {
        match self {
            QuerySpec::ColumnMean(j) | QuerySpec::ColumnSum(j) => BTreeSet::from([*j]),
            QuerySpec::ThresholdCount(preds) => preds.iter().map(|p| p.attribute).collect(),
        }
    }

    pub fn validate(&self, domains: &[AttributeDomain]) -> Result<()> {
        let m = domains.len();
        match self {
            QuerySpec::ColumnMean(j) | QuerySpec::ColumnSum(j) => {
                if *j >= m {
                    return Err(Error::InvalidConfig(format!("query attribute {j} out of range")));
                }
            }
            QuerySpec::ThresholdCount(preds) => {
                if preds.is_empty() {
                    return Err(Error::InvalidConfig("threshold count needs a predicate".into()));
                }
                let mut seen = BTreeSet::new();
                for p in preds {
                    if p.attribute >= m {
                        return Err(Error::InvalidConfig(format!(
                            "predicate attribute {} out of range",
                            p.attribute
                        )));
                    }
                    if !seen.insert(p.attribute) {
                        return Err(Error::InvalidConfig(format!(
                            "attribute {} appears in two predicates",
                            p.attribute
                        )));
                    }
                    if !p.value.is_finite() {
                        return Err(Error::DomainMismatch("predicate constant must be finite".into()));
                    }
                    if let AttributeDomain::Finite { .. } = domains[p.attribute] {
                        if p.op == CmpOp::Eq && !domains[p.attribute].contains(p.value) {
                            return Err(Error::DomainMismatch(format!(
                                "equality constant {} is not a value of attribute {}",
                                p.value, p.attribute
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Exact value of the query on `x`.
    pub fn evaluate(&self, x: &Dataset) -> Result<f64> {
        self.validate(x.domains())?;
        Ok(match self {
            QuerySpec::ColumnMean(j) => {
                let col = x.column(*j);
                col.iter().sum::<f64>() / col.len() as f64
            }
            QuerySpec::ColumnSum(j) => x.column(*j).iter().sum(),
            QuerySpec::ThresholdCount(preds) => {
                (0..x.n()).filter(|&r| preds.iter().all(|p| p.holds(x.value(r, p.attribute)))).count() as f64
            }
        })
    }

    /// Largest change of the query between two datasets with `n` records that
    /// agree everywhere except in the columns listed in `changed`.
    pub fn column_sensitivity(
        &self,
        changed: &BTreeSet<usize>,
        n: usize,
        domains: &[AttributeDomain],
    ) -> Result<f64> {
        self.validate(domains)?;
        for j in self.attributes() {
            if changed.contains(&j) && !domains[j].width().is_finite() {
                return Err(Error::UnboundedSensitivity(format!("attribute {j} is unbounded")));
            }
        }
        Ok(match self {
            QuerySpec::ColumnMean(j) if changed.contains(j) => domains[*j].width(),
            QuerySpec::ColumnSum(j) if changed.contains(j) => n as f64 * domains[*j].width(),
            QuerySpec::ColumnMean(_) | QuerySpec::ColumnSum(_) => 0.0,
            QuerySpec::ThresholdCount(preds) => {
                let (inside, outside): (Vec<&Predicate>, Vec<&Predicate>) =
                    preds.iter().partition(|p| changed.contains(&p.attribute));
                // Every indicator flips iff the fixed predicates can all hold
                // and the changed ones can be made both true and false.
                let fixed_ok = outside.iter().all(|p| domains[p.attribute].can_satisfy(p.op, p.value));
                let can_hold = inside.iter().all(|p| domains[p.attribute].can_satisfy(p.op, p.value));
                let can_fail = inside.iter().any(|p| domains[p.attribute].can_violate(p.op, p.value));
                if !inside.is_empty() && fixed_ok && can_hold && can_fail {
                    n as f64
                } else {
                    0.0
                }
            }
        })
    }
}
