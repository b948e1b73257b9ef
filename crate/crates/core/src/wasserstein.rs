//! ∞-Wasserstein distance on the real line and the Wasserstein mechanism.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bayesnet::{for_each_assignment, ParameterFamily};
use crate::dataset::Dataset;
use crate::distribution::{binomial, DiscreteDistribution};
use crate::domain::AttributeDomain;
use crate::error::{Error, Result};
use crate::framework::{DistributionClass, Notion, PufferfishFramework, SecretFunction};
use crate::noise::NoiseRng;
use crate::query::QuerySpec;

/// Masses at or below this are treated as exhausted when pairing quantiles.
const SEGMENT_TOLERANCE: f64 = 1e-12;

/// `W∞(μ, ν)` through the monotone coupling, which is optimal on ℝ: the
/// k-th quantile of `μ` is matched to the k-th quantile of `ν`, and the
/// distance is the largest gap over matched segments of positive mass.
pub fn w_infinity(mu: &DiscreteDistribution, nu: &DiscreteDistribution) -> f64 {
    let (xs, ps) = (mu.points(), mu.probs());
    let (ys, qs) = (nu.points(), nu.probs());
    let (mut i, mut j) = (0, 0);
    let (mut ri, mut rj) = (ps[0], qs[0]);
    let mut best: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let step = ri.min(rj);
        if step > SEGMENT_TOLERANCE {
            best = best.max((xs[i] - ys[j]).abs());
        }
        ri -= step;
        rj -= step;
        if ri <= SEGMENT_TOLERANCE {
            i += 1;
            ri = ps.get(i).copied().unwrap_or(0.0);
        }
        if rj <= SEGMENT_TOLERANCE {
            j += 1;
            rj = qs.get(j).copied().unwrap_or(0.0);
        }
    }
    best
}

/// Two binary attributes per record, with `P(X_1 = 1 | X_2 = 1) = p1` and
/// `P(X_1 = 1 | X_2 = 0) = p2`, over `n` records.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinaryDependenceModel {
    n: usize,
    p1: f64,
    p2: f64,
}

impl BinaryDependenceModel {
    pub fn new(n: usize, p1: f64, p2: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one record".into()));
        }
        for p in [p1, p2] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(BinaryDependenceModel { n, p1, p2 })
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Distribution of `Σ_j X_1^j` given that exactly `a` records have `X_2 = 1`.
pub fn conditional_count_distribution(
    model: &BinaryDependenceModel,
    a: usize,
) -> Result<DiscreteDistribution> {
    if a > model.n {
        return Err(Error::InvalidParameter(format!("count {a} exceeds the {} records", model.n)));
    }
    let ones = binomial(a, model.p1)?;
    let zeros = binomial(model.n - a, model.p2)?;
    ones.convolve(&zeros).on_support(&(0..=model.n).map(|k| k as f64).collect::<Vec<_>>())
}

/// `φ_1 = alpha + beta · φ_2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMapping {
    pub alpha: f64,
    pub beta: f64,
}

impl AffineMapping {
    pub fn apply(&self, phi2: f64) -> f64 {
        self.alpha + self.beta * phi2
    }
}

/// Distribution of `Σ_j X_1^j` over `n` records when `X_1` is Bernoulli
/// with parameter `mapping(phi2)`.
pub fn conditional_count_distribution_param(
    n: usize,
    phi2: f64,
    mapping: &AffineMapping,
) -> Result<DiscreteDistribution> {
    let phi1 = mapping.apply(phi2);
    if !(0.0..=1.0).contains(&phi1) {
        return Err(Error::InvalidParameter(format!("mapped parameter {phi1} lies outside [0, 1]")));
    }
    binomial(n, phi1)
}

/// One member of a binary-record class: the dependence of a binary query
/// attribute on a binary secret attribute, plus the rate at which the
/// secret attribute equals one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordDependence {
    pub p1: f64,
    pub p2: f64,
    #[serde(default = "half")]
    pub secret_rate: f64,
}

fn half() -> f64 {
    0.5
}

impl RecordDependence {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2), ("secret_rate", self.secret_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} lies outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// The conditional distribution of the query given one secret event under
/// one member of Θ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionalEntry {
    pub attribute: String,
    pub event: String,
    pub theta: String,
    /// `P(event | θ)`.
    pub probability: f64,
    pub distribution: DiscreteDistribution,
}

fn is_binary(d: &AttributeDomain) -> bool {
    match d {
        AttributeDomain::Finite { values, .. } => {
            let mut v = values.clone();
            v.sort_by(f64::total_cmp);
            v == [0.0, 1.0]
        }
        AttributeDomain::Interval { .. } => false,
    }
}

fn binary_record_conditionals(
    framework: &PufferfishFramework,
    query: &QuerySpec,
    n: usize,
    members: &[RecordDependence],
) -> Result<Vec<ConditionalEntry>> {
    let domains = framework.domains();
    if domains.len() != 2 || !domains.iter().all(is_binary) {
        return Err(Error::IncompatibleTheta(
            "binary record class needs exactly two binary attributes".into(),
        ));
    }
    let (j, mean) = match query {
        QuerySpec::ColumnSum(j) => (*j, false),
        QuerySpec::ColumnMean(j) => (*j, true),
        QuerySpec::ThresholdCount(_) => {
            return Err(Error::IncompatibleTheta("binary record class supports column sums and means".into()))
        }
    };
    let mut out = Vec::new();
    for secret in framework.secrets() {
        if secret.attribute == j {
            return Err(Error::IncompatibleTheta(
                "binary record class needs the query on the non-secret attribute".into(),
            ));
        }
        let secret_value = |k: usize| match secret.function {
            Some(SecretFunction::Mean) => k as f64 / n as f64,
            _ => k as f64,
        };
        for (member, theta) in members.iter().zip(framework.theta_ids()) {
            let model = BinaryDependenceModel::new(n, member.p1, member.p2)?;
            let counts = binomial(n, member.secret_rate)?;
            for event in &secret.events {
                let mut parts = Vec::new();
                for k in 0..=n {
                    let w = counts.probs()[k];
                    if w > 0.0 && event.set.contains(secret_value(k)) {
                        parts.push((w, conditional_count_distribution(&model, k)?));
                    }
                }
                let probability: f64 = parts.iter().map(|(w, _)| w).sum();
                if probability <= 0.0 {
                    continue;
                }
                let mut dist = DiscreteDistribution::mixture(&parts)?;
                if mean {
                    dist = dist.scaled(1.0 / n as f64);
                }
                out.push(ConditionalEntry {
                    attribute: framework.name(secret.attribute).to_string(),
                    event: event.id.clone(),
                    theta: theta.clone(),
                    probability,
                    distribution: dist,
                });
            }
        }
    }
    Ok(out)
}

/// Distribution of the query given all parameters it reads.
fn query_given_parameters(
    family: &ParameterFamily,
    framework: &PufferfishFramework,
    query: &QuerySpec,
    n: usize,
    phi: &BTreeMap<usize, usize>,
) -> Result<DiscreteDistribution> {
    let attr = |j: usize| -> (&str, &AttributeDomain) {
        let (name, domain) = &framework.attributes()[j];
        (name.as_str(), domain)
    };
    match query {
        QuerySpec::ColumnSum(j) | QuerySpec::ColumnMean(j) => {
            let (name, domain) = attr(*j);
            let entry = family.attribute_distribution(name, phi[j], domain)?;
            let total = entry.convolve_power(n);
            Ok(if matches!(query, QuerySpec::ColumnMean(_)) { total.scaled(1.0 / n as f64) } else { total })
        }
        QuerySpec::ThresholdCount(preds) => {
            let mut p = 1.0;
            for pred in preds {
                let (name, domain) = attr(pred.attribute);
                let entry = family.attribute_distribution(name, phi[&pred.attribute], domain)?;
                p *= entry.atoms().filter(|(x, _)| pred.holds(*x)).map(|(_, q)| q).sum::<f64>();
            }
            binomial(n, p.clamp(0.0, 1.0))
        }
    }
}

fn parameter_network_conditionals(
    framework: &PufferfishFramework,
    query: &QuerySpec,
    n: usize,
    members: &[ParameterFamily],
) -> Result<Vec<ConditionalEntry>> {
    for f in members {
        f.check_attributes(framework.attributes())?;
    }
    let mut out = Vec::new();
    for secret in framework.secrets() {
        let attr_name = framework.name(secret.attribute).to_string();
        for (family, theta) in members.iter().zip(framework.theta_ids()) {
            let net = family.net();
            let i = net.index(&attr_name)?;
            // Network nodes carry attribute names, so node k ↔ attribute index.
            let node_of = |j: usize| net.index(framework.name(j));
            let mut vars = vec![i];
            let mut read = Vec::new();
            for j in query.attributes() {
                let v = node_of(j)?;
                read.push((j, v));
                if v != i {
                    vars.push(v);
                }
            }
            let joint = net.marginal(&vars)?;
            let cards: Vec<usize> = vars.iter().map(|&v| net.support(v).len()).collect();

            let mut cache: BTreeMap<Vec<usize>, DiscreteDistribution> = BTreeMap::new();
            for event in &secret.events {
                let mut parts: Vec<(f64, DiscreteDistribution)> = Vec::new();
                let mut failure = None;
                let mut flat = 0;
                for_each_assignment(&cards, |a| {
                    let w = joint[flat];
                    flat += 1;
                    if failure.is_some() || w <= 0.0 || !event.set.contains(net.support(i)[a[0]]) {
                        return;
                    }
                    let phi: BTreeMap<usize, usize> = read
                        .iter()
                        .map(|&(j, v)| (j, a[vars.iter().position(|&u| u == v).unwrap()]))
                        .collect();
                    let key: Vec<usize> = phi.values().copied().collect();
                    let dist = match cache.get(&key) {
                        Some(d) => d.clone(),
                        None => match query_given_parameters(family, framework, query, n, &phi) {
                            Ok(d) => {
                                cache.insert(key, d.clone());
                                d
                            }
                            Err(e) => {
                                failure = Some(e);
                                return;
                            }
                        },
                    };
                    parts.push((w, dist));
                });
                if let Some(e) = failure {
                    return Err(e);
                }
                let probability: f64 = parts.iter().map(|(w, _)| w).sum();
                if probability <= 0.0 {
                    continue;
                }
                out.push(ConditionalEntry {
                    attribute: attr_name.clone(),
                    event: event.id.clone(),
                    theta: theta.clone(),
                    probability,
                    distribution: DiscreteDistribution::mixture(&parts)?,
                });
            }
        }
    }
    Ok(out)
}

/// Conditional query distributions for every secret event and member of Θ
/// with positive event probability.
pub fn conditional_table(
    framework: &PufferfishFramework,
    query: &QuerySpec,
    n: usize,
) -> Result<Vec<ConditionalEntry>> {
    query.validate(&framework.domains())?;
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one record".into()));
    }
    if framework.secrets().is_empty() {
        return Err(Error::InvalidConfig("no secrets to protect".into()));
    }
    match framework.theta() {
        DistributionClass::BinaryRecord(members) => binary_record_conditionals(framework, query, n, members),
        DistributionClass::ParameterNetwork(members) => {
            debug_assert_eq!(framework.notion(), Some(Notion::Distributional));
            parameter_network_conditionals(framework, query, n, members)
        }
        DistributionClass::Gaussian(_) => Err(Error::IncompatibleTheta(
            "the Wasserstein mechanism needs discrete conditional distributions".into(),
        )),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairDistance {
    pub attribute: String,
    pub secret_a: String,
    pub secret_b: String,
    pub theta: String,
    pub distance: f64,
}

/// Every pairwise `W∞` between conditionals sharing an attribute and θ.
pub fn pair_distances(entries: &[ConditionalEntry]) -> Vec<PairDistance> {
    let mut out = Vec::new();
    for (k, a) in entries.iter().enumerate() {
        for b in &entries[k + 1..] {
            if a.attribute == b.attribute && a.theta == b.theta {
                out.push(PairDistance {
                    attribute: a.attribute.clone(),
                    secret_a: a.event.clone(),
                    secret_b: b.event.clone(),
                    theta: a.theta.clone(),
                    distance: w_infinity(&a.distribution, &b.distribution),
                });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WassersteinReport {
    pub mechanism: &'static str,
    pub epsilon: f64,
    pub per_pair_distances: Vec<PairDistance>,
    #[serde(rename = "W")]
    pub w: f64,
    /// Laplace scale `W / ε`.
    pub scale: f64,
    pub output: f64,
    pub seed: u64,
    pub theta_members: usize,
    /// Step of the grid a continuous class was discretized on, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    #[serde(skip)]
    pub noise_drawn: Option<f64>,
}

/// The largest distance, or an error when no pair was computable.
pub fn worst_case_distance(pairs: &[PairDistance]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::VacuousSecret(
            "no secret pair has positive probability under any member of the class".into(),
        ));
    }
    Ok(pairs.iter().map(|p| p.distance).fold(0.0, f64::max))
}

/// Adds Laplace noise of scale `W / ε`, where `W` is the worst-case `W∞`
/// between conditional query distributions of paired secrets.
pub fn wasserstein_mechanism(
    x: &Dataset,
    query: &QuerySpec,
    framework: &PufferfishFramework,
    epsilon: f64,
    rng: &mut NoiseRng,
) -> Result<WassersteinReport> {
    framework.check_dataset(x)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let entries = conditional_table(framework, query, x.n())?;
    let per_pair_distances = pair_distances(&entries);
    let w = worst_case_distance(&per_pair_distances)?;
    let scale = w / epsilon;
    let exact = query.evaluate(x)?;
    let (output, noise_drawn) = if scale > 0.0 {
        let z = rng.laplace(scale);
        (exact + z, Some(z))
    } else {
        (exact, None)
    };
    Ok(WassersteinReport {
        mechanism: "wasserstein",
        epsilon,
        per_pair_distances,
        w,
        scale,
        output,
        seed: rng.seed(),
        theta_members: framework.theta().len(),
        grid_step: framework.grid_step(),
        noise_drawn,
    })
}

/// Members of a binary-record class on a rectangular `(p1, p2)` grid with
/// the given step, endpoints included.
pub fn record_grid(
    p1: (f64, f64),
    p2: (f64, f64),
    step: f64,
    secret_rate: f64,
) -> Result<Vec<RecordDependence>> {
    let axis = |(lo, hi): (f64, f64)| -> Result<Vec<f64>> {
        if !(step > 0.0) || !(lo <= hi) || lo < 0.0 || hi > 1.0 {
            return Err(Error::InvalidConfig(format!("bad grid [{lo}, {hi}] with step {step}")));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        // Rounded so that ids and reports show 0.45 rather than 0.45000000000000007.
        let mut v: Vec<f64> = (0..=count).map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12).collect();
        if let Some(last) = v.last_mut() {
            if (hi - *last).abs() <= 1e-9 * step.max(1.0) {
                *last = hi;
            } else {
                v.push(hi);
            }
        }
        Ok(v)
    };
    let mut out = Vec::new();
    for &a in &axis(p1)? {
        for &b in &axis(p2)? {
            let r = RecordDependence { p1: a, p2: b, secret_rate };
            r.validate()?;
            out.push(r);
        }
    }
    Ok(out)
}
