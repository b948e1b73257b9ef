//! Pufferfish framework configuration: secrets, secret pairs and the class
//! of data distributions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bayesnet::ParameterFamily;
use crate::domain::AttributeDomain;
use crate::error::{Error, Result};
use crate::gaussian::MultivariateGaussian;
use crate::wasserstein::RecordDependence;

/// Which kind of attribute secret is protected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notion {
    /// A function of the realized column.
    Dataset,
    /// A parameter of the distribution that generated the column.
    Distributional,
}

/// The column function whose value a dataset-level secret hides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecretFunction {
    Mean,
    Sum,
}

/// A subset of the real line: an interval with optional bounds, or a finite
/// point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventSet {
    Interval {
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
        #[serde(default)]
        lo_open: bool,
        #[serde(default)]
        hi_open: bool,
    },
    Points {
        points: Vec<f64>,
    },
}

impl EventSet {
    pub fn closed(lo: f64, hi: f64) -> Self {
        EventSet::Interval { lo: Some(lo), hi: Some(hi), lo_open: false, hi_open: false }
    }

    pub fn point(x: f64) -> Self {
        EventSet::Points { points: vec![x] }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            EventSet::Interval { lo, hi, lo_open, hi_open } => {
                let above = match lo {
                    None => true,
                    Some(l) if *lo_open => x > *l,
                    Some(l) => x >= *l,
                };
                let below = match hi {
                    None => true,
                    Some(h) if *hi_open => x < *h,
                    Some(h) => x <= *h,
                };
                above && below
            }
            EventSet::Points { points } => points.contains(&x),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            EventSet::Interval { lo: Some(l), hi: Some(h), lo_open, hi_open } => {
                l > h || (l == h && (*lo_open || *hi_open))
            }
            EventSet::Interval { .. } => false,
            EventSet::Points { points } => points.is_empty(),
        }
    }

    /// Infimum of the set, `-inf` when unbounded below.
    pub fn inf(&self) -> f64 {
        match self {
            EventSet::Interval { lo, .. } => lo.unwrap_or(f64::NEG_INFINITY),
            EventSet::Points { points } => points.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Supremum of the set, `+inf` when unbounded above.
    pub fn sup(&self) -> f64 {
        match self {
            EventSet::Interval { hi, .. } => hi.unwrap_or(f64::INFINITY),
            EventSet::Points { points } => points.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn is_disjoint(&self, other: &EventSet) -> bool {
        match (self, other) {
            (EventSet::Points { points }, o) | (o, EventSet::Points { points }) => {
                !points.iter().any(|p| o.contains(*p))
            }
            (
                EventSet::Interval { lo: l1, hi: h1, lo_open: lo1, hi_open: ho1 },
                EventSet::Interval { lo: l2, hi: h2, lo_open: lo2, hi_open: ho2 },
            ) => {
                let left_of = |h: &Option<f64>, ho: bool, l: &Option<f64>, lo: bool| match (h, l) {
                    (Some(h), Some(l)) => h < l || (h == l && (ho || lo)),
                    _ => false,
                };
                left_of(h1, *ho1, l2, *lo2) || left_of(h2, *ho2, l1, *lo1)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecretEvent {
    pub id: String,
    #[serde(flatten)]
    pub set: EventSet,
}

/// The secrets attached to one sensitive attribute. Every pair of distinct
/// events forms a secret pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SecretSpec {
    pub attribute: usize,
    pub notion: Notion,
    /// The protected column function; `None` for distributional secrets.
    pub function: Option<SecretFunction>,
    pub events: Vec<SecretEvent>,
}

impl SecretSpec {
    pub fn dataset(attribute: usize, function: SecretFunction, events: Vec<SecretEvent>) -> Self {
        SecretSpec { attribute, notion: Notion::Dataset, function: Some(function), events }
    }

    pub fn distributional(attribute: usize, events: Vec<SecretEvent>) -> Self {
        SecretSpec { attribute, notion: Notion::Distributional, function: None, events }
    }

    pub fn validate(&self) -> Result<()> {
        if self.events.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "attribute {} needs at least two secret events",
                self.attribute
            )));
        }
        match (self.notion, self.function) {
            (Notion::Dataset, None) => {
                return Err(Error::InvalidConfig("dataset-level secret needs a function".into()))
            }
            (Notion::Distributional, Some(_)) => {
                return Err(Error::InvalidConfig(
                    "distributional secrets protect a parameter, not a column function".into(),
                ))
            }
            _ => {}
        }
        let mut ids = BTreeSet::new();
        for (k, e) in self.events.iter().enumerate() {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate event id {:?}", e.id)));
            }
            if e.set.is_empty() {
                return Err(Error::InvalidConfig(format!("event {:?} is empty", e.id)));
            }
            for other in &self.events[k + 1..] {
                if !e.set.is_disjoint(&other.set) {
                    return Err(Error::InvalidConfig(format!(
                        "events {:?} and {:?} overlap",
                        e.id, other.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Diameter of the union of all events.
    pub fn diameter(&self) -> Result<f64> {
        let lo = self.events.iter().map(|e| e.set.inf()).fold(f64::INFINITY, f64::min);
        let hi = self.events.iter().map(|e| e.set.sup()).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::UnboundedSensitivity(format!(
                "secret events of attribute {} are unbounded",
                self.attribute
            )));
        }
        Ok(hi - lo)
    }

    /// All unordered pairs of distinct events.
    pub fn pairs(&self) -> impl Iterator<Item = (&SecretEvent, &SecretEvent)> {
        self.events
            .iter()
            .enumerate()
            .flat_map(move |(k, a)| self.events[k + 1..].iter().map(move |b| (a, b)))
    }
}

/// The class Θ of data distributions, as an explicit finite list.
#[derive(Clone, Debug)]
pub enum DistributionClass {
    Gaussian(Vec<MultivariateGaussian>),
    ParameterNetwork(Vec<ParameterFamily>),
    BinaryRecord(Vec<RecordDependence>),
}

impl DistributionClass {
    pub fn len(&self) -> usize {
        match self {
            DistributionClass::Gaussian(v) => v.len(),
            DistributionClass::ParameterNetwork(v) => v.len(),
            DistributionClass::BinaryRecord(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            DistributionClass::Gaussian(_) => "gaussian",
            DistributionClass::ParameterNetwork(_) => "parameter_network",
            DistributionClass::BinaryRecord(_) => "binary_record",
        }
    }

    fn validate(&self, domains: &[AttributeDomain]) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidConfig("distribution class is empty".into()));
        }
        match self {
            DistributionClass::Gaussian(members) => {
                for g in members {
                    if g.dim() != domains.len() {
                        return Err(Error::InvalidConfig(format!(
                            "Gaussian member has dimension {}, dataset has {} attributes",
                            g.dim(),
                            domains.len()
                        )));
                    }
                }
            }
            DistributionClass::ParameterNetwork(members) => {
                for f in &members[1..] {
                    if !f.net().same_structure(members[0].net()) {
                        return Err(Error::InvalidConfig(
                            "parameter network members must share nodes, supports and edges".into(),
                        ));
                    }
                }
            }
            DistributionClass::BinaryRecord(members) => {
                for r in members {
                    r.validate()?;
                }
            }
        }
        Ok(())
    }
}

/// Privacy budget `(ε, δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrivacyParams {
    epsilon: f64,
    delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!("delta must lie in [0, 1), got {delta}")));
        }
        Ok(PrivacyParams { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        PrivacyParams::new(epsilon, 0.0)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The Gaussian-mechanism constant `sqrt(2 ln(1.25/δ))`.
    pub fn c(&self) -> Result<f64> {
        if self.delta <= 0.0 {
            return Err(Error::InvalidParameter("Gaussian mechanism requires δ>0".into()));
        }
        Ok((2.0 * (1.25 / self.delta).ln()).sqrt())
    }
}

/// A validated framework `(S, Q, Θ)` over a fixed attribute schema.
#[derive(Clone, Debug)]
pub struct PufferfishFramework {
    attributes: Vec<(String, AttributeDomain)>,
    sensitive: BTreeSet<usize>,
    secrets: Vec<SecretSpec>,
    theta: DistributionClass,
    theta_ids: Vec<String>,
    grid_step: Option<f64>,
}

impl PufferfishFramework {
    pub fn new(
        attributes: Vec<(String, AttributeDomain)>,
        sensitive: BTreeSet<usize>,
        secrets: Vec<SecretSpec>,
        theta: DistributionClass,
    ) -> Result<Self> {
        let ids = (0..theta.len()).map(|k| k.to_string()).collect();
        PufferfishFramework::with_theta_ids(attributes, sensitive, secrets, theta, ids)
    }

    pub fn with_theta_ids(
        attributes: Vec<(String, AttributeDomain)>,
        sensitive: BTreeSet<usize>,
        secrets: Vec<SecretSpec>,
        theta: DistributionClass,
        theta_ids: Vec<String>,
    ) -> Result<Self> {
        let mut names = BTreeSet::new();
        for (name, domain) in &attributes {
            domain.validate()?;
            if !names.insert(name.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate attribute {name}")));
            }
        }
        let m = attributes.len();
        if let Some(i) = sensitive.iter().find(|i| **i >= m) {
            return Err(Error::InvalidConfig(format!("sensitive attribute {i} out of range")));
        }
        let mut per_attribute = BTreeMap::new();
        for s in &secrets {
            s.validate()?;
            if !sensitive.contains(&s.attribute) {
                return Err(Error::InvalidConfig(format!(
                    "secret on attribute {} which is not sensitive",
                    s.attribute
                )));
            }
            if per_attribute.insert(s.attribute, ()).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "attribute {} has more than one secret specification",
                    s.attribute
                )));
            }
        }
        if let Some(first) = secrets.first() {
            if secrets.iter().any(|s| s.notion != first.notion) {
                return Err(Error::InvalidConfig("secrets mix privacy notions".into()));
            }
            let compatible = match (first.notion, &theta) {
                (Notion::Distributional, DistributionClass::ParameterNetwork(_)) => true,
                (Notion::Distributional, _) => false,
                (Notion::Dataset, DistributionClass::ParameterNetwork(_)) => false,
                (Notion::Dataset, _) => true,
            };
            if !compatible {
                return Err(Error::IncompatibleTheta(format!(
                    "{:?} secrets cannot be used with a {} distribution class",
                    first.notion,
                    theta.variant_name()
                )));
            }
        }
        let domains: Vec<_> = attributes.iter().map(|(_, d)| d.clone()).collect();
        theta.validate(&domains)?;
        if theta_ids.len() != theta.len() {
            return Err(Error::InvalidConfig("one id per distribution class member".into()));
        }
        let unique: BTreeSet<_> = theta_ids.iter().collect();
        if unique.len() != theta_ids.len() {
            return Err(Error::InvalidConfig("distribution class ids must be unique".into()));
        }
        Ok(PufferfishFramework { attributes, sensitive, secrets, theta, theta_ids, grid_step: None })
    }

    /// Records the grid step used to discretize a continuous class.
    pub fn with_grid_step(mut self, step: Option<f64>) -> Self {
        self.grid_step = step;
        self
    }

    pub fn attributes(&self) -> &[(String, AttributeDomain)] {
        &self.attributes
    }

    pub fn m(&self) -> usize {
        self.attributes.len()
    }

    pub fn name(&self, j: usize) -> &str {
        &self.attributes[j].0
    }

    pub fn domains(&self) -> Vec<AttributeDomain> {
        self.attributes.iter().map(|(_, d)| d.clone()).collect()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|(n, _)| n == name)
    }

    pub fn sensitive(&self) -> &BTreeSet<usize> {
        &self.sensitive
    }

    pub fn secrets(&self) -> &[SecretSpec] {
        &self.secrets
    }

    pub fn secret_for(&self, attribute: usize) -> Result<&SecretSpec> {
        self.secrets.iter().find(|s| s.attribute == attribute).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "sensitive attribute {} has no secret specification",
                self.name(attribute)
            ))
        })
    }

    pub fn notion(&self) -> Option<Notion> {
        self.secrets.first().map(|s| s.notion)
    }

    pub fn theta(&self) -> &DistributionClass {
        &self.theta
    }

    pub fn theta_ids(&self) -> &[String] {
        &self.theta_ids
    }

    pub fn grid_step(&self) -> Option<f64> {
        self.grid_step
    }

    /// Checks that a dataset follows this framework's schema.
    pub fn check_dataset(&self, x: &crate::Dataset) -> Result<()> {
        let same = x.m() == self.m()
            && x.names().iter().zip(&self.attributes).all(|(n, (a, _))| n == a)
            && x.domains().iter().zip(&self.attributes).all(|(d, (_, b))| d == b);
        if same {
            Ok(())
        } else {
            Err(Error::InvalidDataset("dataset schema differs from the framework".into()))
        }
    }
}
