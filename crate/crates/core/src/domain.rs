//! Attribute domains and the values they admit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The set of values an attribute may take.
///
/// Finite domains are numeric; each value may optionally carry a label so
/// that datasets and predicates can refer to it by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeDomain {
    Interval {
        lo: f64,
        hi: f64,
    },
    Finite {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
}

/// A constant as written in a configuration document: a number, or the
/// label of a finite-domain value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Real(f64),
    Label(String),
}

impl AttributeDomain {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let d = AttributeDomain::Interval { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn finite(values: Vec<f64>) -> Result<Self> {
        let d = AttributeDomain::Finite { values, labels: None };
        d.validate()?;
        Ok(d)
    }

    pub fn binary() -> Self {
        AttributeDomain::Finite { values: vec![0.0, 1.0], labels: None }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AttributeDomain::Interval { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "interval domain [{lo}, {hi}] must have finite bounds"
                    )));
                }
                if lo >= hi {
                    return Err(Error::InvalidConfig(format!(
                        "interval domain requires lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
            AttributeDomain::Finite { values, labels } => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidConfig("finite domain values must be finite".into()));
                }
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                sorted.dedup();
                if sorted.len() < 2 || sorted.len() != values.len() {
                    return Err(Error::InvalidConfig(
                        "finite domain needs at least 2 distinct values and no duplicates".into(),
                    ));
                }
                if let Some(labels) = labels {
                    if labels.len() != values.len() {
                        return Err(Error::InvalidConfig(
                            "finite domain labels must match values one to one".into(),
                        ));
                    }
                    let mut l = labels.clone();
                    l.sort();
                    l.dedup();
                    if l.len() != labels.len() {
                        return Err(Error::InvalidConfig("duplicate finite domain label".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            AttributeDomain::Interval { lo, hi } => *lo <= x && x <= *hi,
            AttributeDomain::Finite { values, .. } => values.contains(&x),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            AttributeDomain::Interval { lo, .. } => *lo,
            AttributeDomain::Finite { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            AttributeDomain::Interval { hi, .. } => *hi,
            AttributeDomain::Finite { values, .. } => {
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Largest possible change of a single entry.
    pub fn width(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn is_finite_set(&self) -> bool {
        matches!(self, AttributeDomain::Finite { .. })
    }

    /// Resolves a configuration constant to its numeric value.
    ///
    /// Labels only make sense against a labelled finite domain; a label
    /// compared with an interval attribute is a domain mismatch.
    pub fn resolve(&self, value: &Value) -> Result<f64> {
        match (self, value) {
            (_, Value::Real(x)) => {
                if x.is_finite() {
                    Ok(*x)
                } else {
                    Err(Error::DomainMismatch(format!("constant {x} is not finite")))
                }
            }
            (AttributeDomain::Finite { values, labels: Some(labels) }, Value::Label(l)) => labels
                .iter()
                .position(|s| s == l)
                .map(|k| values[k])
                .ok_or_else(|| Error::DomainMismatch(format!("label {l:?} is not in the domain"))),
            (_, Value::Label(l)) => {
                Err(Error::DomainMismatch(format!("label {l:?} used against a domain without labels")))
            }
        }
    }

    /// Parses one CSV cell according to the domain.
    pub fn parse_cell(&self, cell: &str) -> Result<f64> {
        let cell = cell.trim();
        let x = match cell.parse::<f64>() {
            Ok(x) => x,
            Err(_) => self
                .resolve(&Value::Label(cell.to_string()))
                .map_err(|_| Error::InvalidDataset(format!("cannot parse {cell:?}")))?,
        };
        if !self.contains(x) {
            return Err(Error::InvalidDataset(format!("value {cell:?} is outside its domain")));
        }
        Ok(x)
    }

    /// Whether some value of the domain satisfies `x op c`.
    pub fn can_satisfy(&self, op: crate::query::CmpOp, c: f64) -> bool {
        match self {
            AttributeDomain::Interval { lo, hi } => {
                use crate::query::CmpOp::*;
                match op {
                    Gt => *hi > c,
                    Ge => *hi >= c,
                    Lt => *lo < c,
                    Le => *lo <= c,
                    Eq => *lo <= c && c <= *hi,
                }
            }
            AttributeDomain::Finite { values, .. } => values.iter().any(|v| op.holds(*v, c)),
        }
    }

    /// Whether some value of the domain violates `x op c`.
    pub fn can_violate(&self, op: crate::query::CmpOp, c: f64) -> bool {
        match self {
            AttributeDomain::Interval { lo, hi } => {
                use crate::query::CmpOp::*;
                match op {
                    Gt => *lo <= c,
                    Ge => *lo < c,
                    Lt => *hi >= c,
                    Le => *hi > c,
                    Eq => true,
                }
            }
            AttributeDomain::Finite { values, .. } => values.iter().any(|v| !op.holds(*v, c)),
        }
    }
}
