//! Markov quilts, max-influence and the quilt-based Laplace mechanisms.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::bayesnet::{BayesNet, ParameterFamily};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::framework::{DistributionClass, Notion, PufferfishFramework};
use crate::noise::NoiseRng;
use crate::query::QuerySpec;

/// Default bound on the size of the separating set `Q`.
pub const DEFAULT_MAX_QUILT_SIZE: usize = 3;

/// A partition of the nodes into a separator `Q`, a nearby set `N`
/// containing the protected node and a remote set `R` independent of it
/// given `Q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkovQuilt {
    pub i: usize,
    pub q: BTreeSet<usize>,
    pub n: BTreeSet<usize>,
    pub r: BTreeSet<usize>,
}

/// All quilts of `i` whose separator has at most `max_quilt_size` nodes and
/// whose remote set is nonempty, ordered by separator size and then
/// lexicographically. `N` is everything still d-connected to `i`.
pub fn enumerate_quilts(net: &BayesNet, i: usize, max_quilt_size: usize) -> Result<Vec<MarkovQuilt>> {
    net.check_node(i)?;
    let others: Vec<usize> = (0..net.len()).filter(|&v| v != i).collect();
    let mut quilts = Vec::new();
    for size in 0..=max_quilt_size.min(others.len()) {
        for_each_subset(&others, size, |q| {
            let q: BTreeSet<usize> = q.iter().copied().collect();
            let mut n = net.reachable(i, &q);
            n.insert(i);
            let r: BTreeSet<usize> = (0..net.len()).filter(|v| !q.contains(v) && !n.contains(v)).collect();
            if !r.is_empty() && net.d_separated(i, &r, &q).unwrap_or(false) {
                quilts.push(MarkovQuilt { i, q, n, r });
            }
        });
    }
    Ok(quilts)
}

/// Calls `f` on every `k`-subset of `items` in lexicographic order.
fn for_each_subset(items: &[usize], k: usize, mut f: impl FnMut(&[usize])) {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for idx in start..items.len() {
            if items.len() - idx < k - cur.len() {
                break;
            }
            cur.push(items[idx]);
            rec(items, k, idx + 1, cur, f);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut Vec::with_capacity(k), &mut f);
}

/// Worst-case log-ratio of `P(Y_A = y | Y_i = a)` against
/// `P(Y_A = y | Y_i = b)` over the networks in `theta`, over values `a, b`
/// of `Y_i` with positive probability, and over configurations `y`.
///
/// Configurations impossible under both conditionings are skipped; one that
/// is possible under only one of them makes the influence infinite. An
/// empty `A` has influence zero.
pub fn variable_max_influence(theta: &[&BayesNet], i: usize, a: &BTreeSet<usize>) -> Result<f64> {
    if theta.is_empty() {
        return Err(Error::InvalidConfig("distribution class is empty".into()));
    }
    if a.contains(&i) {
        return Err(Error::InvalidParameter("influence set must not contain the node".into()));
    }
    let mut best = f64::NEG_INFINITY;
    let mut any_pair = false;
    for net in theta {
        net.check_node(i)?;
        let mut vars = vec![i];
        vars.extend(a.iter().copied());
        let joint = net.marginal(&vars)?;
        let k = net.support(i).len();
        let rest = joint.len() / k;
        let marg: Vec<f64> = (0..k).map(|x| joint[x * rest..(x + 1) * rest].iter().sum()).collect();
        let live: Vec<usize> = (0..k).filter(|&x| marg[x] > 0.0).collect();
        for &x in &live {
            for &y in &live {
                if x == y {
                    continue;
                }
                any_pair = true;
                for c in 0..rest {
                    let p = joint[x * rest + c] / marg[x];
                    let q = joint[y * rest + c] / marg[y];
                    if p == 0.0 && q == 0.0 {
                        continue;
                    }
                    if q == 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    if p > 0.0 {
                        best = best.max((p / q).ln());
                    }
                }
            }
        }
    }
    if !any_pair {
        return Err(Error::VacuousSecret(
            "no member of the class gives two values of the node positive probability".into(),
        ));
    }
    Ok(best.max(0.0))
}

/// Max-influence of parameter `i` on the parameters in `a` under a
/// parameter-network class.
pub fn max_influence(theta: &[ParameterFamily], i: usize, a: &BTreeSet<usize>) -> Result<f64> {
    let nets: Vec<&BayesNet> = theta.iter().map(ParameterFamily::net).collect();
    variable_max_influence(&nets, i, a)
}

/// One quilt considered for one protected node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuiltEvaluation {
    pub node: String,
    pub q: Vec<String>,
    pub n: Vec<String>,
    pub r: Vec<String>,
    pub max_influence: f64,
    pub admissible: bool,
    /// Noise scale this quilt would require, when admissible.
    pub scale: Option<f64>,
}

/// Calibration chosen for one protected node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuiltChoice {
    pub node: String,
    /// Scale needed without any quilt (`None` for the baseline, which has no fallback).
    pub fallback_scale: Option<f64>,
    /// The quilt achieving `scale`, or `None` when the fallback was kept.
    pub quilt: Option<QuiltEvaluation>,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuiltReport {
    pub mechanism: &'static str,
    pub epsilon: f64,
    pub max_quilt_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    pub per_node: Vec<QuiltChoice>,
    /// Laplace scale of the added noise.
    pub scale: f64,
    pub output: f64,
    pub seed: u64,
    #[serde(skip)]
    pub noise_drawn: Option<f64>,
}

fn names(net: &BayesNet, set: &BTreeSet<usize>) -> Vec<String> {
    set.iter().map(|&v| net.name(v).to_string()).collect()
}

fn parameter_members(framework: &PufferfishFramework) -> Result<&[ParameterFamily]> {
    match framework.theta() {
        DistributionClass::ParameterNetwork(members) => Ok(members),
        other => Err(Error::IncompatibleTheta(format!(
            "quilt mechanisms need a parameter network class, got {}",
            other.variant_name()
        ))),
    }
}

/// Evaluates every quilt of every sensitive attribute's parameter node
/// against the query, as used by [`apmqm`].
pub fn quilt_analysis(
    framework: &PufferfishFramework,
    query: &QuerySpec,
    n: usize,
    epsilon: f64,
    max_quilt_size: usize,
) -> Result<Vec<(QuiltChoice, Vec<QuiltEvaluation>)>> {
    if framework.notion() == Some(Notion::Dataset) {
        return Err(Error::IncompatibleTheta("apmqm protects distributional secrets".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let members = parameter_members(framework)?;
    for f in members {
        f.check_attributes(framework.attributes())?;
    }
    if framework.sensitive().is_empty() {
        return Err(Error::InvalidConfig("no sensitive attributes".into()));
    }
    let net = members[0].net();
    let domains = framework.domains();
    let query_attrs = query.attributes();
    let fallback = query.column_sensitivity(&query_attrs, n, &domains)? / epsilon;

    // Node k of the network is the parameter of the attribute with the same name.
    let attr_of =
        |v: usize| -> usize { framework.attribute_index(net.name(v)).expect("checked against attributes") };

    let mut out = Vec::new();
    for &attr in framework.sensitive() {
        let i = net.index(framework.name(attr))?;
        let mut evaluations = Vec::new();
        let mut choice = QuiltChoice {
            node: net.name(i).to_string(),
            fallback_scale: Some(fallback),
            quilt: None,
            scale: fallback,
        };
        for quilt in enumerate_quilts(net, i, max_quilt_size)? {
            let e = max_influence(members, i, &quilt.q)?;
            let admissible = e < epsilon;
            let scale = if admissible {
                let near: BTreeSet<usize> = quilt.n.iter().map(|&v| attr_of(v)).collect();
                Some(query.column_sensitivity(&near, n, &domains)? / (epsilon - e))
            } else {
                None
            };
            let eval = QuiltEvaluation {
                node: net.name(i).to_string(),
                q: names(net, &quilt.q),
                n: names(net, &quilt.n),
                r: names(net, &quilt.r),
                max_influence: e,
                admissible,
                scale,
            };
            if let Some(s) = scale {
                // Ties go to the quilt, as with a non-strict update.
                if s < choice.scale || (s == choice.scale && choice.quilt.is_none()) {
                    choice.scale = s;
                    choice.quilt = Some(eval.clone());
                }
            }
            evaluations.push(eval);
        }
        out.push((choice, evaluations));
    }
    Ok(out)
}

fn add_laplace(exact: f64, scale: f64, rng: &mut NoiseRng) -> (f64, Option<f64>) {
    if scale > 0.0 {
        let z = rng.laplace(scale);
        (exact + z, Some(z))
    } else {
        (exact, None)
    }
}

/// Laplace release calibrated by Markov quilts over the parameter network.
pub fn apmqm(
    x: &Dataset,
    query: &QuerySpec,
    framework: &PufferfishFramework,
    epsilon: f64,
    max_quilt_size: usize,
    rng: &mut NoiseRng,
) -> Result<QuiltReport> {
    framework.check_dataset(x)?;
    let analysis = quilt_analysis(framework, query, x.n(), epsilon, max_quilt_size)?;
    let per_node: Vec<QuiltChoice> = analysis.into_iter().map(|(c, _)| c).collect();
    let scale = per_node.iter().map(|c| c.scale).fold(0.0, f64::max);
    let exact = query.evaluate(x)?;
    let (output, noise_drawn) = add_laplace(exact, scale, rng);
    Ok(QuiltReport {
        mechanism: "apmqm",
        epsilon,
        max_quilt_size,
        lipschitz: None,
        per_node,
        scale,
        output,
        seed: rng.seed(),
        noise_drawn,
    })
}

/// Per-entry quilt calibration for the value-level baseline. Entry `(r, j)`
/// of the dataset is node `r * m + j` of every network in the class.
pub fn baseline_analysis(
    framework: &PufferfishFramework,
    n: usize,
    epsilon: f64,
    max_quilt_size: usize,
) -> Result<Vec<(QuiltChoice, Vec<QuiltEvaluation>)>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let members = parameter_members(framework)?;
    let nets: Vec<&BayesNet> = members.iter().map(ParameterFamily::net).collect();
    let net = nets[0];
    let m = framework.m();
    if net.len() != n * m {
        return Err(Error::InvalidConfig(format!(
            "baseline network needs one node per dataset entry ({}), has {}",
            n * m,
            net.len()
        )));
    }
    let protected: Vec<usize> = if framework.sensitive().is_empty() {
        (0..m).collect()
    } else {
        framework.sensitive().iter().copied().collect()
    };
    let mut out = Vec::new();
    for r in 0..n {
        for &j in &protected {
            let v = r * m + j;
            let mut evaluations = Vec::new();
            let mut choice = QuiltChoice {
                node: net.name(v).to_string(),
                fallback_scale: None,
                quilt: None,
                scale: f64::INFINITY,
            };
            let mut quilts = enumerate_quilts(net, v, max_quilt_size)?;
            // The trivial quilt keeps every node near and always has influence zero.
            if quilts.first().is_none_or(|q| !q.q.is_empty()) {
                let everything = (0..net.len()).collect();
                quilts.insert(0, MarkovQuilt { i: v, q: BTreeSet::new(), n: everything, r: BTreeSet::new() });
            }
            for quilt in quilts {
                let e = variable_max_influence(&nets, v, &quilt.q)?;
                let admissible = e < epsilon;
                let scale = admissible.then(|| quilt.n.len() as f64 / (epsilon - e));
                let eval = QuiltEvaluation {
                    node: net.name(v).to_string(),
                    q: names(net, &quilt.q),
                    n: names(net, &quilt.n),
                    r: names(net, &quilt.r),
                    max_influence: e,
                    admissible,
                    scale,
                };
                if let Some(s) = scale {
                    // Ties go to the quilt, as with a non-strict update.
                    if s < choice.scale || (s == choice.scale && choice.quilt.is_none()) {
                        choice.scale = s;
                        choice.quilt = Some(eval.clone());
                    }
                }
                evaluations.push(eval);
            }
            out.push((choice, evaluations));
        }
    }
    Ok(out)
}

/// The value-level Markov quilt mechanism for an `lipschitz`-Lipschitz
/// query: Laplace noise of scale `L · max_i b_i`.
pub fn baseline_mqm(
    y: &Dataset,
    query: &QuerySpec,
    lipschitz: f64,
    framework: &PufferfishFramework,
    epsilon: f64,
    max_quilt_size: usize,
    rng: &mut NoiseRng,
) -> Result<QuiltReport> {
    framework.check_dataset(y)?;
    if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Lipschitz constant must be finite and nonnegative, got {lipschitz}"
        )));
    }
    let per_node: Vec<QuiltChoice> =
        baseline_analysis(framework, y.n(), epsilon, max_quilt_size)?.into_iter().map(|(c, _)| c).collect();
    let b_max = per_node.iter().map(|c| c.scale).fold(0.0, f64::max);
    let scale = if lipschitz == 0.0 {
        0.0
    } else if b_max.is_infinite() {
        let stuck = per_node.iter().find(|c| c.scale.is_infinite()).expect("some node is stuck");
        return Err(Error::NoAdmissibleQuilt(format!(
            "entry {} has no quilt with max-influence below epsilon",
            stuck.node
        )));
    } else {
        lipschitz * b_max
    };
    let exact = query.evaluate(y)?;
    let (output, noise_drawn) = add_laplace(exact, scale, rng);
    Ok(QuiltReport {
        mechanism: "mqm-baseline",
        epsilon,
        max_quilt_size,
        lipschitz: Some(lipschitz),
        per_node,
        scale,
        output,
        seed: rng.seed(),
        noise_drawn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::Node;

    fn node(name: &str, cpt: Vec<Vec<f64>>) -> Node {
        Node { name: name.into(), support: vec![0.0, 1.0], cpt }
    }

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn isolated_node_has_empty_separator_quilt() {
        let net = BayesNet::new(vec![node("a", vec![vec![0.5, 0.5]]), node("b", vec![vec![0.5, 0.5]])], &[])
            .unwrap();
        let qs = enumerate_quilts(&net, 0, 1).unwrap();
        assert_eq!(qs[0], MarkovQuilt { i: 0, q: set(&[]), n: set(&[0]), r: set(&[1]) });
    }

    #[test]
    fn fully_connected_net_has_no_small_quilt() {
        let net = BayesNet::new(
            vec![
                node("a", vec![vec![0.5, 0.5]]),
                node("b", vec![vec![0.5, 0.5]; 2]),
                node("c", vec![vec![0.5, 0.5]; 4]),
            ],
            &[(0, 1), (0, 2), (1, 2)],
        )
        .unwrap();
        assert!(enumerate_quilts(&net, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn identical_rows_have_zero_influence() {
        let net = BayesNet::new(
            vec![node("i", vec![vec![0.3, 0.7]]), node("a", vec![vec![0.5, 0.5]; 2])],
            &[(0, 1)],
        )
        .unwrap();
        assert_eq!(variable_max_influence(&[&net], 0, &set(&[1])).unwrap(), 0.0);
    }

    #[test]
    fn influence_of_two_node_net() {
        let net = BayesNet::new(
            vec![node("i", vec![vec![0.5, 0.5]]), node("a", vec![vec![0.6, 0.4], vec![0.4, 0.6]])],
            &[(0, 1)],
        )
        .unwrap();
        let e = variable_max_influence(&[&net], 0, &set(&[1])).unwrap();
        assert!((e - 1.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_node_is_vacuous() {
        let net = BayesNet::new(
            vec![node("i", vec![vec![1.0, 0.0]]), node("a", vec![vec![0.5, 0.5]; 2])],
            &[(0, 1)],
        )
        .unwrap();
        assert!(matches!(variable_max_influence(&[&net], 0, &set(&[1])), Err(Error::VacuousSecret(_))));
    }

    #[test]
    fn one_sided_zero_is_infinite() {
        let net = BayesNet::new(
            vec![node("i", vec![vec![0.5, 0.5]]), node("a", vec![vec![1.0, 0.0], vec![0.5, 0.5]])],
            &[(0, 1)],
        )
        .unwrap();
        assert_eq!(variable_max_influence(&[&net], 0, &set(&[1])).unwrap(), f64::INFINITY);
    }
}
