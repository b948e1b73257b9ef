//! Attribute-private Gaussian mechanism for multivariate Gaussian data.
//!
//! Records are i.i.d. draws from `N(mu, V)`. When the query and each secret
//! function are column means (or sums), the query conditioned on a secret
//! value `a` is Gaussian with mean linear in `a` and a variance that does not
//! depend on `a`. That conditional variance already masks part of the
//! correlation, so the added noise only needs to make up the difference.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::framework::{
    DistributionClass, Notion, PrivacyParams, PufferfishFramework, SecretFunction, SecretSpec,
};
use crate::noise::{gaussian_inverse_cdf, NoiseRng};
use crate::query::QuerySpec;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const PSD_TOLERANCE: f64 = 1e-9;

/// Record distribution `N(mean, covariance)` over the `m` attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianDoc", into = "GaussianDoc")]
pub struct MultivariateGaussian {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GaussianDoc {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

impl TryFrom<GaussianDoc> for MultivariateGaussian {
    type Error = Error;
    fn try_from(d: GaussianDoc) -> Result<Self> {
        MultivariateGaussian::new(d.mean, d.covariance)
    }
}

impl From<MultivariateGaussian> for GaussianDoc {
    fn from(g: MultivariateGaussian) -> Self {
        let m = g.dim();
        GaussianDoc {
            covariance: (0..m).map(|r| (0..m).map(|c| g.cov[(r, c)]).collect()).collect(),
            mean: g.mean,
        }
    }
}

impl MultivariateGaussian {
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let m = mean.len();
        if m == 0 {
            return Err(Error::InvalidConfig("Gaussian needs at least one attribute".into()));
        }
        if covariance.len() != m || covariance.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidConfig(format!("covariance must be {m}x{m}")));
        }
        if mean.iter().chain(covariance.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("Gaussian parameters must be finite".into()));
        }
        let cov = DMatrix::from_fn(m, m, |r, c| covariance[r][c]);
        for r in 0..m {
            if cov[(r, r)] <= 0.0 {
                return Err(Error::DegenerateCovariance(format!("variance V[{r}][{r}] <= 0")));
            }
            for c in 0..r {
                if (cov[(r, c)] - cov[(c, r)]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::InvalidConfig(format!("covariance is not symmetric at ({r}, {c})")));
                }
            }
        }
        let min_eig = SymmetricEigen::new(cov.clone()).eigenvalues.min();
        if min_eig < -PSD_TOLERANCE {
            return Err(Error::DegenerateCovariance(format!(
                "covariance is not positive semidefinite (eigenvalue {min_eig})"
            )));
        }
        Ok(MultivariateGaussian { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self, r: usize, c: usize) -> f64 {
        self.cov[(r, c)]
    }
}

/// `N(mean, variance)` with `variance >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionalGaussian {
    pub mean: f64,
    pub variance: f64,
}

/// Distribution of the mean of column `j` over `n` records given that the
/// mean of column `i` equals `a`.
pub fn conditional_of_linear(
    theta: &MultivariateGaussian,
    n: usize,
    j: usize,
    i: usize,
    a: f64,
) -> Result<ConditionalGaussian> {
    let m = theta.dim();
    if i >= m || j >= m {
        return Err(Error::InvalidConfig(format!("attribute index out of range for dimension {m}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("record count must be positive".into()));
    }
    let vii = theta.cov(i, i);
    if vii <= 0.0 {
        return Err(Error::DegenerateCovariance(format!("V[{i}][{i}] <= 0")));
    }
    let vij = theta.cov(i, j);
    let mean = theta.mean[j] + (vij / vii) * (a - theta.mean[i]);
    let variance = ((theta.cov(j, j) - vij * vij / vii) / n as f64).max(0.0);
    Ok(ConditionalGaussian { mean, variance })
}

fn query_scale(query: &QuerySpec, n: usize) -> Result<(usize, f64)> {
    match query {
        QuerySpec::ColumnMean(j) => Ok((*j, 1.0)),
        QuerySpec::ColumnSum(j) => Ok((*j, n as f64)),
        QuerySpec::ThresholdCount(_) => Err(Error::IncompatibleTheta(
            "threshold counts are not linear in the records; use apgmng with approximations".into(),
        )),
    }
}

fn secret_scale(secret: &SecretSpec, n: usize) -> Result<f64> {
    match secret.function {
        Some(SecretFunction::Mean) => Ok(1.0),
        Some(SecretFunction::Sum) => Ok(n as f64),
        None => Err(Error::IncompatibleTheta("the Gaussian mechanism protects dataset-level secrets".into())),
    }
}

/// Conditional distribution of a linear query given that the secret column
/// function takes value `a`.
pub fn linear_conditional(
    theta: &MultivariateGaussian,
    n: usize,
    query: &QuerySpec,
    secret: &SecretSpec,
    a: f64,
) -> Result<ConditionalGaussian> {
    let (j, qs) = query_scale(query, n)?;
    let gs = secret_scale(secret, n)?;
    let c = conditional_of_linear(theta, n, j, secret.attribute, a / gs)?;
    Ok(ConditionalGaussian { mean: qs * c.mean, variance: qs * qs * c.variance })
}

fn gaussian_members(framework: &PufferfishFramework) -> Result<&[MultivariateGaussian]> {
    match framework.theta() {
        DistributionClass::Gaussian(members) => Ok(members),
        other => Err(Error::IncompatibleTheta(format!(
            "apgm needs a Gaussian distribution class, got {}; use apgmng with Gaussian approximations",
            other.variant_name()
        ))),
    }
}

/// Largest gap between conditional means of the query over the secret
/// events of attribute `i`, maximized over Θ.
///
/// Conditional means are affine in the secret value, so the gap is attained
/// at the extremes of the union of events.
pub fn sensitivity_gaussian(
    framework: &PufferfishFramework,
    query: &QuerySpec,
    i: usize,
    n: usize,
) -> Result<f64> {
    let secret = framework.secret_for(i)?;
    secret.diameter()?;
    let lo = secret.events.iter().map(|e| e.set.inf()).fold(f64::INFINITY, f64::min);
    let hi = secret.events.iter().map(|e| e.set.sup()).fold(f64::NEG_INFINITY, f64::max);
    let mut worst: f64 = 0.0;
    for theta in gaussian_members(framework)? {
        let top = linear_conditional(theta, n, query, secret, hi)?;
        let bottom = linear_conditional(theta, n, query, secret, lo)?;
        worst = worst.max((top.mean - bottom.mean).abs());
    }
    Ok(worst)
}

/// `min over Θ` of the conditional variance of the query given attribute `i`.
pub fn min_conditional_variance(
    framework: &PufferfishFramework,
    query: &QuerySpec,
    i: usize,
    n: usize,
) -> Result<f64> {
    let secret = framework.secret_for(i)?;
    let mut best = f64::INFINITY;
    for theta in gaussian_members(framework)? {
        // Independent of the conditioning value for linear instantiations.
        best = best.min(linear_conditional(theta, n, query, secret, 0.0)?.variance);
    }
    Ok(best)
}

/// Per-attribute sensitivities and conditional variances together with the
/// resulting noise variance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianCalibration {
    pub c: f64,
    pub sensitivities: BTreeMap<String, f64>,
    pub min_conditional_variances: BTreeMap<String, f64>,
    pub sigma2: f64,
}

/// Noise variance `max(0, max_i[(c Δ_i / ε)² − v_i])`.
pub fn noise_variance(c: f64, epsilon: f64, per_attribute: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    per_attribute
        .into_iter()
        .map(|(delta_i, min_var)| (c * delta_i / epsilon).powi(2) - min_var)
        .fold(0.0, f64::max)
}

pub fn calibrate(
    framework: &PufferfishFramework,
    query: &QuerySpec,
    params: &PrivacyParams,
    n: usize,
) -> Result<GaussianCalibration> {
    check_preconditions(framework, query, params)?;
    let c = params.c()?;
    let mut sensitivities = BTreeMap::new();
    let mut variances = BTreeMap::new();
    for &i in framework.sensitive() {
        let name = framework.name(i).to_string();
        sensitivities.insert(name.clone(), sensitivity_gaussian(framework, query, i, n)?);
        variances.insert(name, min_conditional_variance(framework, query, i, n)?);
    }
    let sigma2 =
        noise_variance(c, params.epsilon(), sensitivities.values().copied().zip(variances.values().copied()));
    Ok(GaussianCalibration { c, sensitivities, min_conditional_variances: variances, sigma2 })
}

fn check_preconditions(
    framework: &PufferfishFramework,
    query: &QuerySpec,
    params: &PrivacyParams,
) -> Result<()> {
    params.c()?;
    gaussian_members(framework)?;
    if framework.notion() != Some(Notion::Dataset) {
        return Err(Error::IncompatibleTheta("apgm protects dataset-level secrets".into()));
    }
    if framework.sensitive().is_empty() {
        return Err(Error::InvalidConfig("no sensitive attributes".into()));
    }
    query.validate(&framework.domains())?;
    query_scale(query, 1)?;
    Ok(())
}

/// Outcome of a Gaussian-noise release.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianMechanismReport {
    pub mechanism: String,
    pub sensitivities: BTreeMap<String, f64>,
    pub min_conditional_variances: BTreeMap<String, f64>,
    pub sigma2: f64,
    pub c: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub output: f64,
    pub seed: u64,
    /// The noise value. Publishing it voids the guarantee, so it is never
    /// serialized with the report.
    #[serde(skip)]
    pub noise_drawn: Option<f64>,
}

/// Releases `F(X) + Z` with `Z ~ N(0, σ²)` calibrated per attribute, or the
/// exact answer when no noise is needed.
pub fn apgm(
    x: &Dataset,
    query: &QuerySpec,
    framework: &PufferfishFramework,
    params: &PrivacyParams,
    rng: &mut NoiseRng,
) -> Result<GaussianMechanismReport> {
    framework.check_dataset(x)?;
    let cal = calibrate(framework, query, params, x.n())?;
    let exact = query.evaluate(x)?;
    Ok(release("apgm", cal, exact, params, rng))
}

pub(crate) fn release(
    mechanism: &str,
    cal: GaussianCalibration,
    exact: f64,
    params: &PrivacyParams,
    rng: &mut NoiseRng,
) -> GaussianMechanismReport {
    let noise = (cal.sigma2 > 0.0).then(|| rng.gaussian(cal.sigma2));
    GaussianMechanismReport {
        mechanism: mechanism.to_string(),
        sensitivities: cal.sensitivities,
        min_conditional_variances: cal.min_conditional_variances,
        sigma2: cal.sigma2,
        c: cal.c,
        epsilon: params.epsilon(),
        delta: params.delta(),
        output: noise.map_or(exact, |z| exact + z),
        seed: rng.seed(),
        noise_drawn: noise,
    }
}

/// Additive error `α` that the release exceeds with probability at most `β`.
pub fn accuracy_from_variance(sigma2: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    if sigma2 <= 0.0 {
        return Ok(0.0);
    }
    Ok(sigma2.sqrt() * gaussian_inverse_cdf(1.0 - beta / 2.0)?)
}

pub fn accuracy_bound(
    framework: &PufferfishFramework,
    query: &QuerySpec,
    params: &PrivacyParams,
    n: usize,
    beta: f64,
) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    let cal = calibrate(framework, query, params, n)?;
    accuracy_from_variance(cal.sigma2, beta)
}
