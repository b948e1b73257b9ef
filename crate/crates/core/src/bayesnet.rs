//! Discrete Bayesian networks: structure, d-separation and exact marginals.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::domain::AttributeDomain;
use crate::error::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-9;

/// Networks with at most this many joint configurations are marginalized by
/// enumerating the joint table; larger ones by variable elimination.
pub const ENUMERATION_LIMIT: u128 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    /// Values the variable can take.
    pub support: Vec<f64>,
    /// One row per parent configuration, each a distribution over `support`.
    /// Parents are ordered by node index and the first parent varies slowest.
    pub cpt: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct NetDoc {
    nodes: Vec<Node>,
    #[serde(default)]
    edges: Vec<(String, String)>,
}

/// A DAG over discrete variables with one conditional table per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetDoc", into = "NetDoc")]
pub struct BayesNet {
    nodes: Vec<Node>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl TryFrom<NetDoc> for BayesNet {
    type Error = Error;
    fn try_from(doc: NetDoc) -> Result<Self> {
        let index: BTreeMap<&str, usize> =
            doc.nodes.iter().enumerate().map(|(k, n)| (n.name.as_str(), k)).collect();
        let mut edges = Vec::with_capacity(doc.edges.len());
        for (a, b) in &doc.edges {
            let lookup =
                |s: &String| index.get(s.as_str()).copied().ok_or_else(|| Error::UnknownNode(s.clone()));
            edges.push((lookup(a)?, lookup(b)?));
        }
        BayesNet::new(doc.nodes, &edges)
    }
}

impl From<BayesNet> for NetDoc {
    fn from(net: BayesNet) -> Self {
        let mut edges = Vec::new();
        for (child, ps) in net.parents.iter().enumerate() {
            for &p in ps {
                edges.push((net.nodes[p].name.clone(), net.nodes[child].name.clone()));
            }
        }
        NetDoc { nodes: net.nodes, edges }
    }
}

impl BayesNet {
    pub fn new(nodes: Vec<Node>, edges: &[(usize, usize)]) -> Result<Self> {
        let k = nodes.len();
        if k == 0 {
            return Err(Error::InvalidConfig("network has no nodes".into()));
        }
        let mut names = BTreeSet::new();
        for node in &nodes {
            if !names.insert(node.name.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate node {:?}", node.name)));
            }
            if node.support.is_empty() || node.support.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "node {:?} needs a nonempty finite support",
                    node.name
                )));
            }
            let distinct: BTreeSet<u64> = node.support.iter().map(|x| x.to_bits()).collect();
            if distinct.len() != node.support.len() {
                return Err(Error::InvalidConfig(format!("node {:?} repeats a support value", node.name)));
            }
        }
        let mut parents = vec![Vec::new(); k];
        let mut children = vec![Vec::new(); k];
        for &(a, b) in edges {
            if a >= k || b >= k {
                return Err(Error::UnknownNode(format!("edge ({a}, {b})")));
            }
            if a == b || parents[b].contains(&a) {
                return Err(Error::InvalidConfig(format!(
                    "bad edge {:?} -> {:?}",
                    nodes[a].name, nodes[b].name
                )));
            }
            parents[b].push(a);
            children[a].push(b);
        }
        parents.iter_mut().for_each(|p| p.sort_unstable());
        children.iter_mut().for_each(|c| c.sort_unstable());

        let net = BayesNet { nodes, parents, children };
        net.topological_order()?;
        for (v, node) in net.nodes.iter().enumerate() {
            let rows: usize = net.parents[v].iter().map(|&p| net.nodes[p].support.len()).product();
            if node.cpt.len() != rows {
                return Err(Error::InvalidConfig(format!(
                    "node {:?} has {} table rows, its parents have {rows} configurations",
                    node.name,
                    node.cpt.len()
                )));
            }
            for row in &node.cpt {
                if row.len() != node.support.len() {
                    return Err(Error::InvalidConfig(format!(
                        "table row of node {:?} has the wrong width",
                        node.name
                    )));
                }
                if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "node {:?} has a negative probability",
                        node.name
                    )));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::InvalidConfig(format!(
                        "a table row of node {:?} sums to {total}",
                        node.name
                    )));
                }
            }
        }
        Ok(net)
    }

    fn topological_order(&self) -> Result<Vec<usize>> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..self.len()).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(v) = ready.pop() {
            order.push(v);
            for &c in &self.children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() != self.len() {
            return Err(Error::InvalidConfig("network has a directed cycle".into()));
        }
        Ok(order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn name(&self, v: usize) -> &str {
        &self.nodes[v].name
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.nodes.iter().position(|n| n.name == name).ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn support(&self, v: usize) -> &[f64] {
        &self.nodes[v].support
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Same node names, supports and edges; tables may differ.
    pub fn same_structure(&self, other: &BayesNet) -> bool {
        self.parents == other.parents
            && self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| a.name == b.name && a.support == b.support)
    }

    /// Number of joint configurations, saturating at `u128::MAX`.
    pub fn configuration_count(&self) -> u128 {
        self.nodes.iter().fold(1u128, |acc, n| acc.saturating_mul(n.support.len() as u128))
    }

    pub fn check_node(&self, v: usize) -> Result<()> {
        if v < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(format!("node index {v}")))
        }
    }

    /// Nodes with an active trail from `source` given `observed`
    /// (Bayes-ball reachability). Observed nodes are never returned; `source`
    /// is returned unless observed.
    pub fn reachable(&self, source: usize, observed: &BTreeSet<usize>) -> BTreeSet<usize> {
        // Ancestors of the evidence decide which colliders are open.
        let mut evidence_ancestors = BTreeSet::new();
        let mut stack: Vec<usize> = observed.iter().copied().collect();
        while let Some(v) = stack.pop() {
            if evidence_ancestors.insert(v) {
                stack.extend(self.parents[v].iter().copied());
            }
        }

        // `true` marks arrival from a child (travelling up).
        let mut visited = BTreeSet::new();
        let mut result = BTreeSet::new();
        let mut frontier = vec![(source, true)];
        while let Some((v, up)) = frontier.pop() {
            if !visited.insert((v, up)) {
                continue;
            }
            let is_observed = observed.contains(&v);
            if !is_observed {
                result.insert(v);
            }
            if up && !is_observed {
                frontier.extend(self.parents[v].iter().map(|&p| (p, true)));
                frontier.extend(self.children[v].iter().map(|&c| (c, false)));
            } else if !up {
                if !is_observed {
                    frontier.extend(self.children[v].iter().map(|&c| (c, false)));
                }
                if evidence_ancestors.contains(&v) {
                    frontier.extend(self.parents[v].iter().map(|&p| (p, true)));
                }
            }
        }
        result
    }

    /// Whether every node of `remote` is d-separated from `i` given `given`.
    pub fn d_separated(&self, i: usize, remote: &BTreeSet<usize>, given: &BTreeSet<usize>) -> Result<bool> {
        self.check_node(i)?;
        for &v in remote.iter().chain(given) {
            self.check_node(v)?;
        }
        if given.contains(&i) || remote.contains(&i) || !remote.is_disjoint(given) {
            return Err(Error::InvalidParameter(
                "d-separation needs i, the remote set and the conditioning set disjoint".into(),
            ));
        }
        let reach = self.reachable(i, given);
        Ok(remote.is_disjoint(&reach))
    }

    /// CPT entry `P(v = support[value] | parents as in assignment)`.
    fn cpt_entry(&self, v: usize, assignment: &[usize]) -> f64 {
        let mut row = 0;
        for &p in &self.parents[v] {
            row = row * self.nodes[p].support.len() + assignment[p];
        }
        self.nodes[v].cpt[row][assignment[v]]
    }

    /// Probability of a full assignment of support indices, one per node.
    pub fn joint_probability(&self, assignment: &[usize]) -> f64 {
        (0..self.len()).map(|v| self.cpt_entry(v, assignment)).product()
    }

    /// Joint marginal of `vars` as a flat table of support-index
    /// configurations, `vars[0]` varying slowest.
    pub fn marginal(&self, vars: &[usize]) -> Result<Vec<f64>> {
        if self.configuration_count() <= ENUMERATION_LIMIT {
            self.marginal_by_enumeration(vars)
        } else {
            self.marginal_by_elimination(vars)
        }
    }

    fn check_vars(&self, vars: &[usize]) -> Result<Vec<usize>> {
        let mut seen = BTreeSet::new();
        for &v in vars {
            self.check_node(v)?;
            if !seen.insert(v) {
                return Err(Error::InvalidParameter(format!("node {v} listed twice")));
            }
        }
        Ok(vars.iter().map(|&v| self.nodes[v].support.len()).collect())
    }

    pub fn marginal_by_enumeration(&self, vars: &[usize]) -> Result<Vec<f64>> {
        let cards = self.check_vars(vars)?;
        let mut table = vec![0.0; cards.iter().product()];
        let all: Vec<usize> = self.nodes.iter().map(|n| n.support.len()).collect();
        for_each_assignment(&all, |a| {
            let p = self.joint_probability(a);
            if p > 0.0 {
                table[flat_index(vars.iter().map(|&v| a[v]), &cards)] += p;
            }
        });
        Ok(table)
    }

    pub fn marginal_by_elimination(&self, vars: &[usize]) -> Result<Vec<f64>> {
        let cards = self.check_vars(vars)?;
        // Nodes outside the ancestral set of `vars` sum out to one.
        let mut keep = BTreeSet::new();
        let mut stack = vars.to_vec();
        while let Some(v) = stack.pop() {
            if keep.insert(v) {
                stack.extend(self.parents[v].iter().copied());
            }
        }
        let mut factors: Vec<Factor> = keep.iter().map(|&v| Factor::from_node(self, v)).collect();
        let targets: BTreeSet<usize> = vars.iter().copied().collect();
        let mut pending: BTreeSet<usize> = keep.difference(&targets).copied().collect();

        while !pending.is_empty() {
            // Greedy: eliminate the variable whose combined factor is smallest.
            let v = *pending
                .iter()
                .min_by_key(|&&v| {
                    let scope: BTreeSet<usize> = factors
                        .iter()
                        .filter(|f| f.vars.contains(&v))
                        .flat_map(|f| f.vars.iter().copied())
                        .collect();
                    scope
                        .iter()
                        .fold(1u128, |acc, &u| acc.saturating_mul(self.nodes[u].support.len() as u128))
                })
                .expect("pending is nonempty");
            pending.remove(&v);
            let (touching, rest): (Vec<Factor>, Vec<Factor>) =
                factors.into_iter().partition(|f| f.vars.contains(&v));
            factors = rest;
            let combined = touching
                .into_iter()
                .reduce(|a, b| a.product(&b))
                .expect("every kept node has its own factor");
            factors.push(combined.sum_out(v));
        }

        let joint = factors.into_iter().reduce(|a, b| a.product(&b)).unwrap_or_else(Factor::unit);
        let mut table = vec![0.0; cards.iter().product()];
        for_each_assignment(&cards, |a| {
            let values: Vec<usize> =
                joint.vars.iter().map(|u| a[vars.iter().position(|v| v == u).expect("target var")]).collect();
            table[flat_index(a.iter().copied(), &cards)] = joint.get(&values);
        });
        Ok(table)
    }
}

/// Mixed-radix index with the first digit most significant.
pub fn flat_index(digits: impl Iterator<Item = usize>, cards: &[usize]) -> usize {
    digits.zip(cards).fold(0, |acc, (d, c)| acc * c + d)
}

/// Calls `f` on every assignment in `0..cards[0] x 0..cards[1] x ...`, the
/// last position varying fastest.
pub fn for_each_assignment(cards: &[usize], mut f: impl FnMut(&[usize])) {
    if cards.contains(&0) {
        return;
    }
    let mut a = vec![0; cards.len()];
    loop {
        f(&a);
        let mut k = cards.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            a[k] += 1;
            if a[k] < cards[k] {
                break;
            }
            a[k] = 0;
        }
    }
}

#[derive(Clone, Debug)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    fn unit() -> Self {
        Factor { vars: Vec::new(), cards: Vec::new(), table: vec![1.0] }
    }

    fn from_node(net: &BayesNet, v: usize) -> Self {
        let mut vars: Vec<usize> = net.parents[v].to_vec();
        vars.push(v);
        vars.sort_unstable();
        let cards: Vec<usize> = vars.iter().map(|&u| net.nodes[u].support.len()).collect();
        let mut table = Vec::with_capacity(cards.iter().product());
        let mut full = vec![0; net.len()];
        for_each_assignment(&cards, |a| {
            for (&u, &x) in vars.iter().zip(a) {
                full[u] = x;
            }
            table.push(net.cpt_entry(v, &full));
        });
        Factor { vars, cards, table }
    }

    fn get(&self, values: &[usize]) -> f64 {
        self.table[flat_index(values.iter().copied(), &self.cards)]
    }

    fn product(&self, other: &Factor) -> Factor {
        let mut vars: Vec<usize> = self.vars.iter().chain(&other.vars).copied().collect();
        vars.sort_unstable();
        vars.dedup();
        let card_of = |u: usize| {
            self.vars
                .iter()
                .position(|&x| x == u)
                .map(|k| self.cards[k])
                .unwrap_or_else(|| other.cards[other.vars.iter().position(|&x| x == u).unwrap()])
        };
        let cards: Vec<usize> = vars.iter().map(|&u| card_of(u)).collect();
        let pick = |f: &Factor| -> Vec<usize> {
            f.vars.iter().map(|u| vars.iter().position(|x| x == u).unwrap()).collect()
        };
        let (ps, po) = (pick(self), pick(other));
        let mut table = Vec::with_capacity(cards.iter().product());
        for_each_assignment(&cards, |a| {
            let x = self.table[flat_index(ps.iter().map(|&k| a[k]), &self.cards)];
            let y = other.table[flat_index(po.iter().map(|&k| a[k]), &other.cards)];
            table.push(x * y);
        });
        Factor { vars, cards, table }
    }

    fn sum_out(&self, v: usize) -> Factor {
        let pos = self.vars.iter().position(|&u| u == v).expect("variable in scope");
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let mut table = vec![0.0; cards.iter().product()];
        for_each_assignment(&self.cards, |a| {
            let idx = flat_index(a.iter().enumerate().filter(|(k, _)| *k != pos).map(|(_, &x)| x), &cards);
            table[idx] += self.table[flat_index(a.iter().copied(), &self.cards)];
        });
        Factor { vars, cards, table }
    }
}

/// How an attribute's values are distributed given its parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Likelihood {
    /// The parameter is `P(X = 1)` for a `{0, 1}` attribute.
    Bernoulli,
    /// One row per parameter value, each a distribution over the
    /// attribute's finite domain values in declaration order.
    Table { rows: Vec<Vec<f64>> },
}

#[derive(Serialize, Deserialize)]
struct FamilyDoc {
    nodes: Vec<Node>,
    #[serde(default)]
    edges: Vec<(String, String)>,
    #[serde(default)]
    likelihoods: BTreeMap<String, Likelihood>,
}

/// One member of a parameter-network class: a network over the attribute
/// parameters plus the likelihood of each attribute given its parameter.
/// Records are i.i.d. given the parameters and attributes are independent
/// given the parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyDoc", into = "FamilyDoc")]
pub struct ParameterFamily {
    net: BayesNet,
    likelihoods: BTreeMap<String, Likelihood>,
}

impl TryFrom<FamilyDoc> for ParameterFamily {
    type Error = Error;
    fn try_from(doc: FamilyDoc) -> Result<Self> {
        let net = BayesNet::try_from(NetDoc { nodes: doc.nodes, edges: doc.edges })?;
        ParameterFamily::new(net, doc.likelihoods)
    }
}

impl From<ParameterFamily> for FamilyDoc {
    fn from(f: ParameterFamily) -> Self {
        let NetDoc { nodes, edges } = f.net.into();
        FamilyDoc { nodes, edges, likelihoods: f.likelihoods }
    }
}

impl ParameterFamily {
    pub fn new(net: BayesNet, likelihoods: BTreeMap<String, Likelihood>) -> Result<Self> {
        for (name, lik) in &likelihoods {
            let v = net.index(name)?;
            match lik {
                Likelihood::Bernoulli => {
                    if net.support(v).iter().any(|p| !(0.0..=1.0).contains(p)) {
                        return Err(Error::InvalidConfig(format!(
                            "Bernoulli parameter {name:?} has support outside [0, 1]"
                        )));
                    }
                }
                Likelihood::Table { rows } => {
                    if rows.len() != net.support(v).len() {
                        return Err(Error::InvalidConfig(format!(
                            "likelihood of {name:?} needs one row per parameter value"
                        )));
                    }
                    for row in rows {
                        let total: f64 = row.iter().sum();
                        if row.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > ROW_TOLERANCE {
                            return Err(Error::InvalidConfig(format!(
                                "likelihood row of {name:?} is not a distribution"
                            )));
                        }
                    }
                }
            }
        }
        Ok(ParameterFamily { net, likelihoods })
    }

    pub fn net(&self) -> &BayesNet {
        &self.net
    }

    pub fn likelihood(&self, name: &str) -> Option<&Likelihood> {
        self.likelihoods.get(name)
    }

    /// Checks that the network has exactly one node per attribute, named
    /// after it, and that each likelihood fits its attribute's domain.
    pub fn check_attributes(&self, attributes: &[(String, AttributeDomain)]) -> Result<()> {
        if self.net.len() != attributes.len() {
            return Err(Error::InvalidConfig(format!(
                "parameter network has {} nodes for {} attributes",
                self.net.len(),
                attributes.len()
            )));
        }
        for (name, domain) in attributes {
            self.net.index(name)?;
            match (self.likelihoods.get(name), domain) {
                (None, _) => {}
                (Some(Likelihood::Bernoulli), AttributeDomain::Finite { values, .. }) => {
                    let mut v = values.clone();
                    v.sort_by(f64::total_cmp);
                    if v != [0.0, 1.0] {
                        return Err(Error::DomainMismatch(format!(
                            "Bernoulli likelihood on {name:?} needs the domain {{0, 1}}"
                        )));
                    }
                }
                (Some(Likelihood::Table { rows }), AttributeDomain::Finite { values, .. }) => {
                    if rows.iter().any(|r| r.len() != values.len()) {
                        return Err(Error::DomainMismatch(format!(
                            "likelihood rows of {name:?} do not match its domain"
                        )));
                    }
                }
                (Some(_), AttributeDomain::Interval { .. }) => {
                    return Err(Error::DomainMismatch(format!(
                        "likelihood on {name:?} needs a finite domain"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Distribution of one entry of attribute `name` when its parameter
    /// takes the support value with index `phi`.
    pub fn attribute_distribution(
        &self,
        name: &str,
        phi: usize,
        domain: &AttributeDomain,
    ) -> Result<DiscreteDistribution> {
        let v = self.net.index(name)?;
        let lik = self
            .likelihoods
            .get(name)
            .ok_or_else(|| Error::InvalidConfig(format!("no likelihood given for attribute {name:?}")))?;
        match (lik, domain) {
            (Likelihood::Bernoulli, _) => {
                let p = self.net.support(v)[phi];
                DiscreteDistribution::new(vec![(0.0, 1.0 - p), (1.0, p)])
            }
            (Likelihood::Table { rows }, AttributeDomain::Finite { values, .. }) => {
                DiscreteDistribution::from_unsorted(
                    values.iter().copied().zip(rows[phi].iter().copied()).collect(),
                )
            }
            (Likelihood::Table { .. }, AttributeDomain::Interval { .. }) => {
                Err(Error::DomainMismatch(format!("likelihood on {name:?} needs a finite domain")))
            }
        }
    }
}
