//! Independent reference implementations shared by the integration tests
//! and the acceptance harness.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use attrpriv::bayesnet::{BayesNet, Node};
use attrpriv::DiscreteDistribution;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

/// One value drawn from `strategy`.
pub fn draw<S: Strategy>(strategy: &S, runner: &mut TestRunner) -> S::Value {
    strategy.new_tree(runner).expect("strategy yields values").current()
}

/// Exhaustive supremum over nonempty subsets of `ln((P(T) - eta) / Q(T))`,
/// restricted to `P(T) > eta`. `eta = 0` gives the plain max-divergence.
pub fn subset_oracle(p: &[f64], q: &[f64], eta: f64) -> f64 {
    let k = p.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << k) {
        let (mut pt, mut qt) = (0.0, 0.0);
        for a in 0..k {
            if mask & (1 << a) != 0 {
                pt += p[a];
                qt += q[a];
            }
        }
        let excess = pt - eta;
        if excess <= 0.0 {
            continue;
        }
        let v = if qt == 0.0 { f64::INFINITY } else { (excess / qt).ln() };
        best = best.max(v);
    }
    best
}

/// Smallest threshold `t` such that a coupling exists using only pairs at
/// distance at most `t`. Feasibility is Hall's condition on masses: every
/// set of source atoms fits into the target mass within reach.
pub fn bottleneck(mu: &DiscreteDistribution, nu: &DiscreteDistribution) -> f64 {
    let (xs, ps) = (mu.points(), mu.probs());
    let (ys, qs) = (nu.points(), nu.probs());
    let mut candidates: Vec<f64> = xs.iter().flat_map(|x| ys.iter().map(move |y| (x - y).abs())).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let feasible = |t: f64| {
        (1u32..(1 << xs.len())).all(|s| {
            let mut mass = 0.0;
            let mut reach = vec![false; ys.len()];
            for a in 0..xs.len() {
                if s & (1 << a) != 0 {
                    mass += ps[a];
                    for b in 0..ys.len() {
                        reach[b] |= (xs[a] - ys[b]).abs() <= t;
                    }
                }
            }
            let cover: f64 = (0..ys.len()).filter(|&b| reach[b]).map(|b| qs[b]).sum();
            mass <= cover + 1e-12
        })
    };
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// A random DAG whose edges all point from lower to higher index, with one or
/// more CPT sets sharing the structure.
#[derive(Clone, Debug)]
pub struct Shape {
    pub cards: Vec<usize>,
    pub parents: Vec<Vec<usize>>,
    pub cpts: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Shape {
    pub fn net(&self, member: usize) -> BayesNet {
        let nodes = (0..self.cards.len())
            .map(|v| Node {
                name: format!("v{v}"),
                support: (0..self.cards[v]).map(|x| x as f64).collect(),
                cpt: self.cpts[member][v].clone(),
            })
            .collect();
        let mut edges = Vec::new();
        for (child, ps) in self.parents.iter().enumerate() {
            edges.extend(ps.iter().map(|&p| (p, child)));
        }
        BayesNet::new(nodes, &edges).unwrap()
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (0..self.cards.len()).filter(|&c| self.parents[c].contains(&v)).collect()
    }

    pub fn descendants(&self, v: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for c in self.children(u) {
                if out.insert(c) {
                    stack.push(c);
                }
            }
        }
        out
    }

    /// Full joint table of one member, indexed by mixed radix with node 0
    /// most significant.
    pub fn joint(&self, member: usize) -> Vec<(Vec<usize>, f64)> {
        let total: usize = self.cards.iter().product();
        let mut out = Vec::with_capacity(total);
        for mut code in 0..total {
            let mut x = vec![0; self.cards.len()];
            for v in (0..self.cards.len()).rev() {
                x[v] = code % self.cards[v];
                code /= self.cards[v];
            }
            let mut p = 1.0;
            for v in 0..self.cards.len() {
                let mut row = 0;
                for &u in &self.parents[v] {
                    row = row * self.cards[u] + x[u];
                }
                p *= self.cpts[member][v][row][x[v]];
            }
            out.push((x, p));
        }
        out
    }
}

pub fn row(card: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 5 => 0.05f64..1.0], card).prop_map(|mut w| {
        if w.iter().all(|x| *x == 0.0) {
            w[0] = 1.0;
        }
        let t: f64 = w.iter().sum();
        w.iter().map(|x| x / t).collect()
    })
}

pub fn shape(max_nodes: usize, max_card: usize, members: usize) -> impl Strategy<Value = Shape> {
    (1..=max_nodes)
        .prop_flat_map(move |n| {
            (
                prop::collection::vec(2..=max_card, n),
                prop::collection::vec(prop::bool::weighted(0.4), n * (n - 1) / 2),
                1..=members,
            )
        })
        .prop_flat_map(|(cards, flags, members)| {
            let n = cards.len();
            let mut parents = vec![Vec::new(); n];
            let mut k = 0;
            for a in 0..n {
                for row in parents.iter_mut().skip(a + 1) {
                    if flags[k] {
                        row.push(a);
                    }
                    k += 1;
                }
            }
            let per_node: Vec<_> = (0..n)
                .map(|v| {
                    let rows: usize = parents[v].iter().map(|&p| cards[p]).product();
                    prop::collection::vec(row(cards[v]), rows)
                })
                .collect();
            let cpts = prop::collection::vec(per_node, members);
            (Just(cards), Just(parents), cpts)
        })
        .prop_map(|(cards, parents, cpts)| Shape { cards, parents, cpts })
}

/// Influence by brute force over the joint tables, or `None` when no member
/// gives two values of `i` positive probability.
pub fn influence_oracle(shape: &Shape, i: usize, a: &BTreeSet<usize>) -> Option<f64> {
    let mut best = f64::NEG_INFINITY;
    let mut any = false;
    for member in 0..shape.cpts.len() {
        let mut marg = vec![0.0; shape.cards[i]];
        let mut cond: Vec<BTreeMap<Vec<usize>, f64>> = vec![BTreeMap::new(); shape.cards[i]];
        for (x, p) in shape.joint(member) {
            marg[x[i]] += p;
            let key: Vec<usize> = a.iter().map(|&v| x[v]).collect();
            *cond[x[i]].entry(key).or_insert(0.0) += p;
        }
        let live: Vec<usize> = (0..marg.len()).filter(|&x| marg[x] > 0.0).collect();
        for &x in &live {
            for &y in &live {
                if x == y {
                    continue;
                }
                any = true;
                for (key, pxy) in &cond[x] {
                    let p = pxy / marg[x];
                    let q = cond[y].get(key).copied().unwrap_or(0.0) / marg[y];
                    if p == 0.0 && q == 0.0 {
                        continue;
                    }
                    if q == 0.0 {
                        return Some(f64::INFINITY);
                    }
                    if p > 0.0 {
                        best = best.max((p / q).ln());
                    }
                }
            }
        }
    }
    any.then(|| best.max(0.0))
}

/// Whether `i` and `r` are d-separated given `q`, by enumerating every
/// simple path in the skeleton.
pub fn path_separated(shape: &Shape, i: usize, r: usize, q: &BTreeSet<usize>) -> bool {
    let n = shape.cards.len();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            let mut out = shape.parents[v].clone();
            out.extend(shape.children(v));
            out
        })
        .collect();
    let active = |path: &[usize]| {
        path.windows(3).all(|w| {
            let (a, b, c) = (w[0], w[1], w[2]);
            let collider = shape.parents[b].contains(&a) && shape.parents[b].contains(&c);
            if collider {
                q.contains(&b) || shape.descendants(b).iter().any(|d| q.contains(d))
            } else {
                !q.contains(&b)
            }
        })
    };
    fn walk(
        path: &mut Vec<usize>,
        target: usize,
        neighbours: &[Vec<usize>],
        found: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        let last = *path.last().unwrap();
        if last == target {
            return found(path);
        }
        for &next in &neighbours[last] {
            if !path.contains(&next) {
                path.push(next);
                if walk(path, target, neighbours, found) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    !walk(&mut vec![i], r, &neighbours, &mut |p| active(p))
}

/// Conditional law of the column-`j` mean given the column-`i` mean equals
/// `a`, over `n` i.i.d. records, by the generic partitioned-Gaussian formula.
pub fn schur_conditional(mean: &[f64], cov: &[Vec<f64>], n: usize, j: usize, i: usize, a: f64) -> (f64, f64) {
    let m = mean.len();
    let sigma = DMatrix::from_fn(m, m, |r, c| cov[r][c] / n as f64);
    let given = [i];
    let s_gg = DMatrix::from_fn(1, 1, |r, c| sigma[(given[r], given[c])]);
    let s_tg = DMatrix::from_fn(1, 1, |_, c| sigma[(j, given[c])]);
    let inv = s_gg.try_inverse().expect("invertible conditioning block");
    let shift = DVector::from_element(1, a - mean[i]);
    let cond_mean = mean[j] + (&s_tg * &inv * shift)[0];
    let cond_var = sigma[(j, j)] - (&s_tg * &inv * s_tg.transpose())[(0, 0)];
    (cond_mean, cond_var)
}

/// Mass under `N(mu_a, v)` of the set where its density exceeds `e^eps`
/// times that of `N(mu_b, v)`, for means `d` apart.
pub fn excess_mass(d: f64, v: f64, eps: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let s = v.sqrt();
    Normal::new(0.0, 1.0).unwrap().sf(eps * s / d - d / (2.0 * s))
}

/// A random linear Gaussian setting: column means of `m` jointly Gaussian
/// attributes over `n` records, releasing the mean of `j` while protecting
/// the mean of `i` at the listed points.
#[derive(Clone, Debug)]
pub struct LinearInstance {
    pub means: Vec<Vec<f64>>,
    pub covs: Vec<Vec<Vec<f64>>>,
    pub n: usize,
    pub i: usize,
    pub j: usize,
    pub points: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
}

fn psd(m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(-1.0f64..1.0, m * m).prop_map(move |a| {
        let a = DMatrix::from_row_slice(m, m, &a);
        let v = &a * a.transpose() + DMatrix::identity(m, m) * 0.05;
        (0..m).map(|r| (0..m).map(|c| v[(r, c)]).collect()).collect()
    })
}

pub fn linear_instance(max_dim: usize, max_members: usize) -> impl Strategy<Value = LinearInstance> {
    (2..=max_dim, 1..=max_members)
        .prop_flat_map(|(m, k)| {
            (
                prop::collection::vec(prop::collection::vec(-3.0f64..3.0, m), k),
                prop::collection::vec(psd(m), k),
                1usize..200,
                (0..m, 1..m),
                prop::collection::btree_set(-20i32..20, 2..5),
                0.05f64..1.0,
                -8.0f64..-1.0,
            )
        })
        .prop_map(|(means, covs, n, (i, shift), points, epsilon, log_delta)| {
            let m = means[0].len();
            LinearInstance {
                means,
                covs,
                n,
                i,
                j: (i + shift) % m,
                points: points.into_iter().map(|p| f64::from(p) * 0.25).collect(),
                epsilon,
                delta: 10f64.powf(log_delta),
            }
        })
}

impl LinearInstance {
    pub fn framework(&self) -> (attrpriv::PufferfishFramework, attrpriv::QuerySpec) {
        use attrpriv::framework::{EventSet, SecretEvent, SecretFunction};
        use attrpriv::gaussian::MultivariateGaussian;
        use attrpriv::{AttributeDomain, DistributionClass, PufferfishFramework, QuerySpec, SecretSpec};
        let m = self.means[0].len();
        let attributes =
            (0..m).map(|k| (format!("x{k}"), AttributeDomain::interval(-100.0, 100.0).unwrap())).collect();
        let events = self
            .points
            .iter()
            .enumerate()
            .map(|(k, &p)| SecretEvent { id: format!("e{k}"), set: EventSet::point(p) })
            .collect();
        let secret = SecretSpec::dataset(self.i, SecretFunction::Mean, events);
        let members = self
            .means
            .iter()
            .zip(&self.covs)
            .map(|(mu, v)| MultivariateGaussian::new(mu.clone(), v.clone()).unwrap())
            .collect();
        let fw = PufferfishFramework::new(
            attributes,
            [self.i].into_iter().collect(),
            vec![secret],
            DistributionClass::Gaussian(members),
        )
        .unwrap();
        (fw, QuerySpec::ColumnMean(self.j))
    }

    /// Worst excess of the tail mass over delta across members and secret
    /// pairs, with the released variance `V̄ + sigma2`.
    pub fn worst_excess(&self, sigma2: f64) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (mu, v) in self.means.iter().zip(&self.covs) {
            for a in &self.points {
                for b in &self.points {
                    let (ma, va) = schur_conditional(mu, v, self.n, self.j, self.i, *a);
                    let (mb, _) = schur_conditional(mu, v, self.n, self.j, self.i, *b);
                    let d = (ma - mb).abs();
                    if d == 0.0 {
                        continue;
                    }
                    worst = worst.max(excess_mass(d, va.max(0.0) + sigma2, self.epsilon) - self.delta);
                }
            }
        }
        worst
    }
}
