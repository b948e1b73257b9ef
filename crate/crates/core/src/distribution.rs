//! Finite probability distributions on the real line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A distribution with finitely many atoms. Support points are strictly
/// increasing; zero-probability atoms are allowed so that two distributions
/// can be laid out on a common support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AtomList", into = "AtomList")]
pub struct DiscreteDistribution {
    points: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AtomList {
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<AtomList> for DiscreteDistribution {
    type Error = Error;
    fn try_from(a: AtomList) -> Result<Self> {
        DiscreteDistribution::new(a.atoms)
    }
}

impl From<DiscreteDistribution> for AtomList {
    fn from(d: DiscreteDistribution) -> Self {
        AtomList { atoms: d.atoms().collect() }
    }
}

impl DiscreteDistribution {
    /// Builds a distribution from `(point, probability)` atoms already in
    /// strictly increasing order.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("distribution has no atoms".into()));
        }
        let (points, probs): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("support points must be finite".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("support points must be strictly increasing".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
        }
        Ok(DiscreteDistribution { points, probs })
    }

    /// Builds a distribution from atoms in any order, merging repeated points.
    pub fn from_unsorted(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += p,
                _ => merged.push((x, p)),
            }
        }
        DiscreteDistribution::new(merged)
    }

    pub fn point_mass(x: f64) -> Self {
        DiscreteDistribution { points: vec![x], probs: vec![1.0] }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(x, p)| x * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms().map(|(x, p)| p * (x - m) * (x - m)).sum()
    }

    pub fn prob_of(&self, x: f64) -> f64 {
        self.points.iter().position(|p| *p == x).map_or(0.0, |k| self.probs[k])
    }

    /// Image under `x -> scale * x`, for `scale > 0`.
    pub fn scaled(&self, scale: f64) -> Self {
        assert!(scale > 0.0);
        DiscreteDistribution {
            points: self.points.iter().map(|x| x * scale).collect(),
            probs: self.probs.clone(),
        }
    }

    /// Distribution of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut atoms = Vec::with_capacity(self.len() * other.len());
        for (x, p) in self.atoms() {
            for (y, q) in other.atoms() {
                atoms.push((x + y, p * q));
            }
        }
        DiscreteDistribution::from_unsorted(atoms).expect("convolution of valid distributions")
    }

    /// Distribution of the sum of `k` independent draws from `self`.
    pub fn convolve_power(&self, k: usize) -> Self {
        let mut acc = DiscreteDistribution::point_mass(0.0);
        for _ in 0..k {
            acc = acc.convolve(self);
        }
        acc
    }

    /// Weighted mixture of distributions. Weights need not be normalized;
    /// they are divided by their sum.
    pub fn mixture(components: &[(f64, DiscreteDistribution)]) -> Result<Self> {
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("mixture has no positive weight".into()));
        }
        let atoms = components
            .iter()
            .filter(|(w, _)| *w > 0.0)
            .flat_map(|(w, d)| d.atoms().map(move |(x, p)| (x, p * w / total)))
            .collect();
        DiscreteDistribution::from_unsorted(atoms)
    }

    /// Lays `self` out on `support`, which must contain every point of `self`.
    pub fn on_support(&self, support: &[f64]) -> Result<Self> {
        let mut probs = vec![0.0; support.len()];
        for (x, p) in self.atoms() {
            let k = support
                .iter()
                .position(|s| *s == x)
                .ok_or_else(|| Error::SupportMismatch(format!("point {x} missing from target support")))?;
            probs[k] += p;
        }
        DiscreteDistribution::new(support.iter().copied().zip(probs).collect())
    }
}

/// Binomial(n, p) on {0, ..., n}, by repeated Bernoulli convolution.
pub fn binomial(n: usize, p: f64) -> Result<DiscreteDistribution> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("Bernoulli parameter {p} outside [0, 1]")));
    }
    let mut pmf = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, q) in pmf.iter().enumerate() {
            next[k] += q * (1.0 - p);
            next[k + 1] += q * p;
        }
        pmf = next;
    }
    DiscreteDistribution::new(pmf.into_iter().enumerate().map(|(k, q)| (k as f64, q)).collect())
}
