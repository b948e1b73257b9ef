//! The framework configuration document.
//!
//! ```json
//! {
//!   "attributes": [{"name": "h", "domain": {"kind": "interval", "lo": 48, "hi": 84}}],
//!   "sensitive": ["i"],
//!   "secrets": [{"attribute": "i", "notion": "distributional",
//!                "events": [{"id": "low", "kind": "points", "points": [0]}, ...]}],
//!   "theta": {"variant": "parameter_network", "members": [...]},
//!   "query": {"kind": "threshold_count",
//!             "predicates": [{"attribute": "h", "op": ">", "value": 66}]}
//! }
//! ```
//!
//! Attributes are referred to by name throughout. Each member of `theta`
//! may carry an `"id"`; members without one are numbered from `"0"`.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value as Json;

use crate::bayesnet::ParameterFamily;
use crate::dataset::Dataset;
use crate::domain::{AttributeDomain, Value};
use crate::error::{Error, Result};
use crate::framework::{
    DistributionClass, Notion, PufferfishFramework, SecretEvent, SecretFunction, SecretSpec,
};
use crate::gaussian::MultivariateGaussian;
use crate::query::{CmpOp, Predicate, QuerySpec};
use crate::wasserstein::{record_grid, RecordDependence};

/// Grid step used for `(p1, p2)` grids when none is given.
pub const DEFAULT_GRID_STEP: f64 = 0.05;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeDoc {
    name: String,
    domain: AttributeDomain,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SecretDoc {
    attribute: String,
    notion: Notion,
    #[serde(default)]
    function: Option<SecretFunction>,
    events: Vec<SecretEvent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    p1: (f64, f64),
    p2: (f64, f64),
    #[serde(default)]
    step: Option<f64>,
    #[serde(default = "half")]
    secret_rate: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaDoc {
    variant: String,
    #[serde(default)]
    members: Vec<Json>,
    #[serde(default)]
    grid: Option<GridDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PredicateDoc {
    attribute: String,
    op: CmpOp,
    value: Value,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum QueryDoc {
    ColumnMean { attribute: String },
    ColumnSum { attribute: String },
    ThresholdCount { predicates: Vec<PredicateDoc> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    attributes: Vec<AttributeDoc>,
    #[serde(default)]
    sensitive: Vec<String>,
    #[serde(default)]
    secrets: Vec<SecretDoc>,
    theta: ThetaDoc,
    query: QueryDoc,
}

/// A validated framework together with the query to release.
#[derive(Clone, Debug)]
pub struct FrameworkConfig {
    pub framework: PufferfishFramework,
    pub query: QuerySpec,
}

impl FrameworkConfig {
    /// Parses a configuration document. `grid_step` overrides the step of a
    /// `(p1, p2)` grid in the document.
    pub fn from_json(text: &str, grid_step: Option<f64>) -> Result<Self> {
        let doc: ConfigDoc = serde_json::from_str(text)?;
        let attributes: Vec<(String, AttributeDomain)> =
            doc.attributes.into_iter().map(|a| (a.name, a.domain)).collect();
        let index = |name: &str| -> Result<usize> {
            attributes
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown attribute {name:?}")))
        };

        let mut sensitive = BTreeSet::new();
        for name in &doc.sensitive {
            sensitive.insert(index(name)?);
        }
        let mut secrets = Vec::new();
        for s in doc.secrets {
            secrets.push(SecretSpec {
                attribute: index(&s.attribute)?,
                notion: s.notion,
                function: s.function,
                events: s.events,
            });
        }

        let (theta, ids, step) = parse_theta(doc.theta, grid_step)?;

        let query = match doc.query {
            QueryDoc::ColumnMean { attribute } => QuerySpec::ColumnMean(index(&attribute)?),
            QueryDoc::ColumnSum { attribute } => QuerySpec::ColumnSum(index(&attribute)?),
            QueryDoc::ThresholdCount { predicates } => {
                let mut preds = Vec::with_capacity(predicates.len());
                for p in predicates {
                    let j = index(&p.attribute)?;
                    let value = attributes[j].1.resolve(&p.value)?;
                    preds.push(Predicate::new(j, p.op, value));
                }
                QuerySpec::ThresholdCount(preds)
            }
        };
        let domains: Vec<AttributeDomain> = attributes.iter().map(|(_, d)| d.clone()).collect();
        query.validate(&domains)?;

        let framework = PufferfishFramework::with_theta_ids(attributes, sensitive, secrets, theta, ids)?
            .with_grid_step(step);
        Ok(FrameworkConfig { framework, query })
    }

    pub fn from_path(path: &Path, grid_step: Option<f64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        FrameworkConfig::from_json(&text, grid_step)
    }

    /// Reads a CSV dataset whose header names the framework's attributes.
    pub fn load_dataset(&self, path: &Path) -> Result<Dataset> {
        Dataset::from_csv(File::open(path)?, self.framework.attributes())
    }
}

fn member_ids(members: &mut [Json]) -> Result<Vec<String>> {
    let mut ids = Vec::with_capacity(members.len());
    for (k, m) in members.iter_mut().enumerate() {
        let id = match m.as_object_mut().and_then(|o| o.remove("id")) {
            None => k.to_string(),
            Some(Json::String(s)) => s,
            Some(other) => return Err(Error::InvalidConfig(format!("member id {other} is not a string"))),
        };
        ids.push(id);
    }
    Ok(ids)
}

fn parse_members<T: serde::de::DeserializeOwned>(members: Vec<Json>) -> Result<Vec<T>> {
    members.into_iter().map(|m| Ok(serde_json::from_value(m)?)).collect()
}

fn parse_theta(
    mut doc: ThetaDoc,
    grid_step: Option<f64>,
) -> Result<(DistributionClass, Vec<String>, Option<f64>)> {
    let mut ids = member_ids(&mut doc.members)?;
    let theta = match doc.variant.as_str() {
        "gaussian" => DistributionClass::Gaussian(parse_members::<MultivariateGaussian>(doc.members)?),
        "parameter_network" => {
            DistributionClass::ParameterNetwork(parse_members::<ParameterFamily>(doc.members)?)
        }
        "binary_record" => {
            let mut members = parse_members::<RecordDependence>(doc.members)?;
            if let Some(grid) = &doc.grid {
                let step = grid_step.or(grid.step).unwrap_or(DEFAULT_GRID_STEP);
                for r in record_grid(grid.p1, grid.p2, step, grid.secret_rate)? {
                    ids.push(format!("p1={},p2={}", r.p1, r.p2));
                    members.push(r);
                }
                let theta = DistributionClass::BinaryRecord(members);
                return Ok((theta, ids, Some(step)));
            }
            DistributionClass::BinaryRecord(members)
        }
        other => return Err(Error::InvalidConfig(format!("unknown distribution class {other:?}"))),
    };
    if doc.grid.is_some() {
        return Err(Error::InvalidConfig("only binary_record classes take a grid".into()));
    }
    Ok((theta, ids, None))
}
