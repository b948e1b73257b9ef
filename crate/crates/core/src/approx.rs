//! Gaussian mechanism for non-Gaussian data.
//!
//! The analyst supplies a Gaussian approximation of the query's conditional
//! distribution for every secret event and every member of Θ. The mechanism
//! calibrates against those approximations; the privacy loss grows with how
//! far they are from the true conditionals, measured by approximate
//! max-divergence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::framework::{Notion, PrivacyParams, PufferfishFramework};
use crate::gaussian::{noise_variance, release, GaussianCalibration, GaussianMechanismReport};
use crate::noise::{normal_cdf, normal_sf, NoiseRng};
use crate::query::QuerySpec;

/// Relative tolerance for the constant-variance requirement.
const VARIANCE_TOLERANCE: f64 = 1e-12;

fn check_shared_support(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.points() != q.points() {
        return Err(Error::SupportMismatch(
            "divergences need both distributions on the same support points".into(),
        ));
    }
    Ok(())
}

/// `sup_T ln(P(T)/Q(T))`. A ratio of sums never exceeds its largest term, so
/// the supremum is attained at a single atom.
pub fn max_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_shared_support(p, q)?;
    let mut best = f64::NEG_INFINITY;
    for (&pa, &qa) in p.probs().iter().zip(q.probs()) {
        if pa <= 0.0 {
            continue;
        }
        if qa <= 0.0 {
            return Ok(f64::INFINITY);
        }
        best = best.max((pa / qa).ln());
    }
    Ok(best)
}

/// `sup { ln((P(T) − η)/Q(T)) : P(T) ≥ η }`, or `-inf` when nothing is feasible.
///
/// If `T` is optimal with value `r`, adding an atom with `p/q > r` or
/// removing one with `p/q < r` strictly improves `(P − η)/Q`, so some
/// optimum is a prefix of the atoms sorted by decreasing `p/q`.
pub fn approx_max_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution, eta: f64) -> Result<f64> {
    check_shared_support(p, q)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")));
    }
    let mut atoms: Vec<(f64, f64)> =
        p.probs().iter().zip(q.probs()).filter(|(pa, _)| **pa > 0.0).map(|(&pa, &qa)| (pa, qa)).collect();
    // Decreasing p/q, comparing p1*q2 against p2*q1 so that q = 0 sorts first.
    atoms.sort_by(|a, b| (b.0 * a.1).total_cmp(&(a.0 * b.1)));

    let (mut mass_p, mut mass_q) = (0.0, 0.0);
    let mut best = f64::NEG_INFINITY;
    for (pa, qa) in atoms {
        mass_p += pa;
        mass_q += qa;
        let excess = mass_p - eta;
        if excess <= 0.0 {
            continue;
        }
        if mass_q <= 0.0 {
            return Ok(f64::INFINITY);
        }
        best = best.max((excess / mass_q).ln());
    }
    Ok(best)
}

/// Larger of the two directed approximate max-divergences.
pub fn symmetric_approx_divergence(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    eta: f64,
) -> Result<f64> {
    Ok(approx_max_divergence(p, q, eta)?.max(approx_max_divergence(q, p, eta)?))
}

/// A Gaussian stand-in for the conditional distribution of the query given
/// one secret event under one member of Θ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianApprox {
    pub mean: f64,
    pub variance: f64,
    #[serde(default)]
    pub event: String,
    #[serde(default)]
    pub theta: String,
}

impl GaussianApprox {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        let g = GaussianApprox { mean, variance, event: String::new(), theta: String::new() };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "approximation needs a finite mean and positive variance, got N({}, {})",
                self.mean, self.variance
            )));
        }
        Ok(())
    }
}

/// Estimates the symmetric approximate max-divergence between `f` and its
/// Gaussian approximation by binning both on a common grid.
///
/// The grid has `bins` equal cells spanning both `f`'s support and six
/// standard deviations of the approximation on either side of its mean.
/// Atoms of `f` are assigned to cells; the Gaussian contributes its cell
/// masses, renormalized over the window. The result is clamped at zero,
/// since the bound being estimated is nonnegative. This is an estimate, not a
/// certified bound.
pub fn certify_approximation(
    f: &DiscreteDistribution,
    approx: &GaussianApprox,
    eta: f64,
    bins: usize,
) -> Result<f64> {
    approx.validate()?;
    if bins < 2 {
        return Err(Error::InvalidParameter("at least two bins are required".into()));
    }
    let sd = approx.variance.sqrt();
    let lo = f.points()[0].min(approx.mean - 6.0 * sd);
    let hi = f.points()[f.len() - 1].max(approx.mean + 6.0 * sd);
    let width = (hi - lo) / bins as f64;
    let edge = |k: usize| if k == bins { hi } else { lo + k as f64 * width };
    let centers: Vec<f64> = (0..bins).map(|k| 0.5 * (edge(k) + edge(k + 1))).collect();

    let mut binned_f = vec![0.0; bins];
    for (x, p) in f.atoms() {
        let k = (((x - lo) / width).floor() as usize).min(bins - 1);
        binned_f[k] += p;
    }

    let z = |x: f64| (x - approx.mean) / sd;
    let mut binned_g: Vec<f64> = (0..bins)
        .map(|k| {
            let (a, b) = (z(edge(k)), z(edge(k + 1)));
            // Difference on whichever tail keeps precision.
            if a >= 0.0 {
                normal_sf(a) - normal_sf(b)
            } else {
                normal_cdf(b) - normal_cdf(a)
            }
        })
        .collect();
    let total: f64 = binned_g.iter().sum();
    binned_g.iter_mut().for_each(|g| *g /= total);

    let total_f: f64 = binned_f.iter().sum();
    binned_f.iter_mut().for_each(|p| *p /= total_f);

    let pf = DiscreteDistribution::new(centers.iter().copied().zip(binned_f).collect())?;
    let pg = DiscreteDistribution::new(centers.into_iter().zip(binned_g).collect())?;
    Ok(symmetric_approx_divergence(&pf, &pg, eta)?.max(0.0))
}

/// `(η, λ_η)` with `λ_η` bounding the approximate divergence of every
/// approximation from its true conditional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivergenceBudget {
    eta: f64,
    lambda_eta: f64,
}

impl DivergenceBudget {
    pub fn new(eta: f64, lambda_eta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("eta must lie in [0, 1), got {eta}")));
        }
        if !(lambda_eta >= 0.0) || !lambda_eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and nonnegative, got {lambda_eta}"
            )));
        }
        Ok(DivergenceBudget { eta, lambda_eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lambda_eta(&self) -> f64 {
        self.lambda_eta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectivePrivacy {
    pub epsilon: f64,
    pub delta: f64,
    /// Set when `δ` reached 1, i.e. the guarantee says nothing.
    pub vacuous: bool,
}

/// Guarantee actually delivered by [`apgmng`] when the approximations are
/// within `λ_η` of the truth: `(ε + 2λ_η, e^{λ_η} δ + η)`.
pub fn effective_privacy(params: &PrivacyParams, budget: &DivergenceBudget) -> EffectivePrivacy {
    let lambda = budget.lambda_eta();
    let delta = lambda.exp() * params.delta() + budget.eta();
    EffectivePrivacy {
        epsilon: params.epsilon() + 2.0 * lambda,
        delta: delta.min(1.0),
        vacuous: delta >= 1.0,
    }
}

/// Approximations keyed by `(event id, θ id)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ApproximationSet {
    entries: BTreeMap<(String, String), GaussianApprox>,
}

#[derive(Deserialize, Serialize)]
struct MomentDoc {
    mean: f64,
    variance: f64,
}

impl ApproximationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, event: &str, theta: &str, mean: f64, variance: f64) -> Result<()> {
        let mut g = GaussianApprox::new(mean, variance)?;
        g.event = event.to_string();
        g.theta = theta.to_string();
        self.entries.insert((event.to_string(), theta.to_string()), g);
        Ok(())
    }

    pub fn get(&self, event: &str, theta: &str) -> Option<&GaussianApprox> {
        self.entries.get(&(event.to_string(), theta.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `{"<event id>": {"<theta id>": {"mean": .., "variance": ..}}}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BTreeMap<String, BTreeMap<String, MomentDoc>> = serde_json::from_str(text)?;
        let mut set = ApproximationSet::new();
        for (event, per_theta) in doc {
            for (theta, m) in per_theta {
                set.insert(&event, &theta, m.mean, m.variance)?;
            }
        }
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        let mut doc: BTreeMap<&str, BTreeMap<&str, MomentDoc>> = BTreeMap::new();
        for ((e, t), g) in &self.entries {
            doc.entry(e).or_default().insert(t, MomentDoc { mean: g.mean, variance: g.variance });
        }
        serde_json::to_string_pretty(&doc).expect("approximations serialize")
    }
}

/// Sensitivities and variances implied by a set of approximations.
pub fn calibrate_approximations(
    framework: &PufferfishFramework,
    approximations: &ApproximationSet,
    params: &PrivacyParams,
) -> Result<GaussianCalibration> {
    let c = params.c()?;
    if framework.notion() != Some(Notion::Dataset) {
        return Err(Error::IncompatibleTheta("apgmng protects dataset-level secrets".into()));
    }
    if framework.sensitive().is_empty() {
        return Err(Error::InvalidConfig("no sensitive attributes".into()));
    }
    let mut sensitivities = BTreeMap::new();
    let mut variances = BTreeMap::new();
    for &i in framework.sensitive() {
        let secret = framework.secret_for(i)?;
        let mut delta_i: f64 = 0.0;
        let mut min_var = f64::INFINITY;
        for theta in framework.theta_ids() {
            let mut row = Vec::with_capacity(secret.events.len());
            for e in &secret.events {
                let g = approximations.get(&e.id, theta).ok_or_else(|| {
                    Error::MissingApproximation(format!("event {:?} under theta {theta:?}", e.id))
                })?;
                row.push(g);
            }
            let v0 = row[0].variance;
            if row.iter().any(|g| (g.variance - v0).abs() > VARIANCE_TOLERANCE * v0) {
                return Err(Error::NonConstantVariance(format!(
                    "approximations for attribute {} under theta {theta:?} differ in variance",
                    framework.name(i)
                )));
            }
            min_var = min_var.min(v0);
            for (k, a) in row.iter().enumerate() {
                for b in &row[k + 1..] {
                    delta_i = delta_i.max((a.mean - b.mean).abs());
                }
            }
        }
        let name = framework.name(i).to_string();
        sensitivities.insert(name.clone(), delta_i);
        variances.insert(name, min_var);
    }
    let sigma2 =
        noise_variance(c, params.epsilon(), sensitivities.values().copied().zip(variances.values().copied()));
    Ok(GaussianCalibration { c, sensitivities, min_conditional_variances: variances, sigma2 })
}

/// Gaussian release calibrated against analyst-chosen approximations.
pub fn apgmng(
    x: &Dataset,
    query: &QuerySpec,
    approximations: &ApproximationSet,
    framework: &PufferfishFramework,
    params: &PrivacyParams,
    rng: &mut NoiseRng,
) -> Result<GaussianMechanismReport> {
    framework.check_dataset(x)?;
    let cal = calibrate_approximations(framework, approximations, params)?;
    let exact = query.evaluate(x)?;
    Ok(release("apgmng", cal, exact, params, rng))
}
