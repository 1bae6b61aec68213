//! Discrete Bayesian networks over a fixed DAG: CPT fitting with any of the
//! estimators, held-out log-likelihood, TAN construction and classification.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count_model::{count_table, CountTable};
use crate::error::{Error, Result};
use crate::estimators::{bdeu_classic_estimate, bdeu_estimate, ml_estimate, CptEstimate};
use crate::hier_posterior::{hierarchical_estimate, AlphaPosterior, HierConfig, DEFAULT_SAMPLES};
use crate::report::{Table, Value};
use crate::sampling::{categorical, derive_seed, dirichlet, stream_rng};
use crate::special::log_sum_exp;
use crate::tabular_data::{Dataset, VariableMeta};

/// Node names plus ordered, duplicate-free parent lists. Always acyclic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
}

impl Dag {
    pub fn new(names: Vec<String>, parents: Vec<Vec<usize>>) -> Result<Self> {
        if names.len() != parents.len() {
            return Err(Error::InvalidDag("one parent list per node required".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidDag(format!("duplicate node `{n}`")));
            }
        }
        let k = names.len();
        for (i, ps) in parents.iter().enumerate() {
            for (j, &p) in ps.iter().enumerate() {
                if p >= k {
                    return Err(Error::InvalidDag(format!("node `{}` has parent id {p} out of range", names[i])));
                }
                if p == i {
                    return Err(Error::InvalidDag(format!("node `{}` is its own parent", names[i])));
                }
                if ps[..j].contains(&p) {
                    return Err(Error::InvalidDag(format!("node `{}` lists `{}` twice", names[i], names[p])));
                }
            }
        }
        let dag = Dag { names, parents };
        if dag.order().len() != k {
            return Err(Error::InvalidDag("graph contains a cycle".into()));
        }
        Ok(dag)
    }

    /// Nodes without edges.
    pub fn empty(names: Vec<String>) -> Result<Self> {
        let k = names.len();
        Self::new(names, vec![Vec::new(); k])
    }

    /// Parse `name | parent1,parent2` lines. Blank lines and `#` comments are
    /// skipped; line order defines node ids.
    pub fn parse(text: &str) -> Result<Self> {
        let mut names = Vec::new();
        let mut raw_parents = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, rest) = match line.split_once('|') {
                Some((n, r)) => (n.trim(), r.trim()),
                None => (line, ""),
            };
            if name.is_empty() {
                return Err(Error::InvalidDag(format!("line {}: missing node name", lineno + 1)));
            }
            let ps: Vec<String> = rest
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(String::from)
                .collect();
            names.push(name.to_string());
            raw_parents.push(ps);
        }
        let mut parents = Vec::with_capacity(names.len());
        for (i, ps) in raw_parents.iter().enumerate() {
            let mut ids = Vec::with_capacity(ps.len());
            for p in ps {
                let id = names.iter().position(|n| n == p).ok_or_else(|| {
                    Error::InvalidDag(format!("node `{}` names unknown parent `{p}`", names[i]))
                })?;
                ids.push(id);
            }
            parents.push(ids);
        }
        Self::new(names, parents)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, n) in self.names.iter().enumerate() {
            let ps: Vec<&str> = self.parents[i].iter().map(|&p| self.names[p].as_str()).collect();
            out.push_str(&format!("{n} | {}\n", ps.join(",")));
        }
        out
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn n_edges(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Topological order, smallest ready id first. Shorter than `n_nodes`
    /// only for cyclic input, which `new` rejects.
    fn order(&self) -> Vec<usize> {
        let k = self.names.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); k];
        for (i, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(i);
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> = (0..k).filter(|&i| indeg[i] == 0).map(Reverse).collect();
        let mut out = Vec::with_capacity(k);
        while let Some(Reverse(i)) = ready.pop() {
            out.push(i);
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        out
    }

    pub fn topological_order(&self) -> Vec<usize> {
        self.order()
    }

    /// Dataset column of every node, matched by name.
    pub fn resolve(&self, ds: &Dataset) -> Result<Vec<usize>> {
        self.names
            .iter()
            .map(|n| {
                ds.variable_index(n)
                    .ok_or_else(|| Error::InvalidDag(format!("node `{n}` has no column in the dataset")))
            })
            .collect()
    }
}

/// Which estimator fills each CPT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    Ml,
    /// Uniform `α` with equivalent sample size `s` per column.
    Bdeu { s: f64 },
    /// Uniform `α`, `s = 1/q`.
    BdeuClassic,
    /// Hierarchical with `s = r` and `α0 = 1` at every node.
    Hier { n_samples: usize, seed: u64, ess_floor: f64 },
}

impl EstimatorSpec {
    pub fn hier(n_samples: usize, seed: u64) -> Self {
        EstimatorSpec::Hier {
            n_samples,
            seed,
            ess_floor: 0.01,
        }
    }

    pub fn is_hier(&self) -> bool {
        matches!(self, EstimatorSpec::Hier { .. })
    }

    /// Short label used in result tables: `ML`, `BDEU(s=10)`, `BDEU-CLASSIC`, `HIER`.
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Ml => "ML".into(),
            EstimatorSpec::Bdeu { s } => format!("BDEU(s={s})"),
            EstimatorSpec::BdeuClassic => "BDEU-CLASSIC".into(),
            EstimatorSpec::Hier { .. } => "HIER".into(),
        }
    }

    /// Hierarchical config for node `node` with `r` states.
    pub fn hier_config(&self, node: usize, r: usize) -> Option<HierConfig> {
        match *self {
            EstimatorSpec::Hier {
                n_samples,
                seed,
                ess_floor,
            } => {
                let mut cfg = HierConfig::for_child(r)
                    .with_samples(n_samples)
                    .with_seed(derive_seed(seed, &[node as u64]));
                cfg.ess_floor = ess_floor;
                Some(cfg)
            }
            _ => None,
        }
    }

    fn fit(&self, node: usize, ct: &CountTable) -> Result<(CptEstimate, Option<AlphaPosterior>)> {
        match self {
            EstimatorSpec::Ml => Ok((ml_estimate(ct), None)),
            EstimatorSpec::Bdeu { s } => Ok((bdeu_estimate(ct, *s)?, None)),
            EstimatorSpec::BdeuClassic => Ok((bdeu_classic_estimate(ct)?, None)),
            EstimatorSpec::Hier { .. } => {
                let cfg = self.hier_config(node, ct.r()).expect("hier spec");
                let est = hierarchical_estimate(ct, &cfg, false)?;
                Ok((est.to_cpt(), Some(est.alpha_post)))
            }
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Parses `ml`, `bdeu:<s>`, `bdeu-classic` and `hier`. The hierarchical
/// variant gets default sampler settings and seed 0.
impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "ml" => Ok(EstimatorSpec::Ml),
            "bdeu-classic" => Ok(EstimatorSpec::BdeuClassic),
            "hier" => Ok(EstimatorSpec::hier(DEFAULT_SAMPLES, 0)),
            _ => {
                if let Some(v) = t.strip_prefix("bdeu:") {
                    let s: f64 = v
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad equivalent sample size in `{t}`")))?;
                    if !(s > 0.0 && s.is_finite()) {
                        return Err(Error::invalid("equivalent sample size must be positive"));
                    }
                    Ok(EstimatorSpec::Bdeu { s })
                } else {
                    Err(Error::invalid(format!(
                        "unknown estimator `{s}` (expected ml, bdeu:<s>, bdeu-classic, hier)"
                    )))
                }
            }
        }
    }
}

/// A DAG with one fitted CPT per node.
#[derive(Debug, Clone)]
pub struct BayesNet {
    pub dag: Dag,
    pub cards: Vec<usize>,
    pub cpts: Vec<CptEstimate>,
    /// Posterior of `α` per node, hierarchical fits only.
    pub alpha_posteriors: Vec<Option<AlphaPosterior>>,
    pub estimator: EstimatorSpec,
}

fn config_index(values: &[usize], parents: &[usize], cards: &[usize]) -> usize {
    parents.iter().fold(0, |acc, &p| acc * cards[p] + values[p])
}

impl BayesNet {
    /// Build from explicit CPTs (columns must be distributions).
    pub fn from_cpts(dag: Dag, cards: Vec<usize>, cpts: Vec<CptEstimate>) -> Result<Self> {
        if cards.len() != dag.n_nodes() || cpts.len() != dag.n_nodes() {
            return Err(Error::invalid("need one cardinality and one CPT per node"));
        }
        for (i, cpt) in cpts.iter().enumerate() {
            let q: usize = dag.parents(i).iter().map(|&p| cards[p]).product();
            if cpt.r() != cards[i] || cpt.q() != q {
                return Err(Error::invalid(format!(
                    "CPT of `{}` is {}×{}, expected {}×{q}",
                    dag.names()[i],
                    cpt.r(),
                    cpt.q(),
                    cards[i]
                )));
            }
            for y in 0..q {
                let s: f64 = cpt.theta.column(y).sum();
                if (s - 1.0).abs() > 1e-9 || cpt.theta.column(y).iter().any(|&v| v < 0.0) {
                    return Err(Error::invalid(format!("column {y} of `{}` is not a distribution", dag.names()[i])));
                }
            }
        }
        let k = dag.n_nodes();
        Ok(BayesNet {
            dag,
            cards,
            cpts,
            alpha_posteriors: vec![None; k],
            estimator: EstimatorSpec::Ml,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.dag.n_nodes()
    }

    /// Node-ordered values of dataset row `i`, given the resolved columns.
    fn node_values(ds: &Dataset, cols: &[usize], i: usize, out: &mut [usize]) {
        let row = ds.row(i);
        for (o, &c) in out.iter_mut().zip(cols) {
            *o = row[c];
        }
    }

    /// Dataset columns of all nodes, with cardinality checks.
    pub fn resolve(&self, ds: &Dataset) -> Result<Vec<usize>> {
        let cols = self.dag.resolve(ds)?;
        for (i, &c) in cols.iter().enumerate() {
            if ds.cardinality(c) != self.cards[i] {
                return Err(Error::invalid(format!(
                    "node `{}` has {} states, dataset column has {}",
                    self.dag.names()[i],
                    self.cards[i],
                    ds.cardinality(c)
                )));
            }
        }
        Ok(cols)
    }

    /// `Σ_nodes ln θ(x_i | pa_i)` for one node-ordered instance.
    pub fn log_prob(&self, values: &[usize]) -> f64 {
        (0..self.n_nodes())
            .map(|i| {
                let y = config_index(values, self.dag.parents(i), &self.cards);
                self.cpts[i].theta[(values[i], y)].ln()
            })
            .sum()
    }
}

/// Fit every CPT of `dag` from `ds`. Nodes are matched to columns by name.
pub fn fit_cpts(dag: &Dag, ds: &Dataset, estimator: &EstimatorSpec) -> Result<BayesNet> {
    let cols = dag.resolve(ds)?;
    let cards: Vec<usize> = cols.iter().map(|&c| ds.cardinality(c)).collect();
    let fitted: Vec<(CptEstimate, Option<AlphaPosterior>)> = (0..dag.n_nodes())
        .into_par_iter()
        .map(|i| {
            let parents: Vec<usize> = dag.parents(i).iter().map(|&p| cols[p]).collect();
            count_table(ds, cols[i], &parents)
                .and_then(|ct| estimator.fit(i, &ct))
                .map_err(|e| Error::NodeFit {
                    node: dag.names()[i].clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    let (cpts, alpha_posteriors) = fitted.into_iter().unzip();
    Ok(BayesNet {
        dag: dag.clone(),
        cards,
        cpts,
        alpha_posteriors,
        estimator: estimator.clone(),
    })
}

/// Total log-likelihood of all rows of `ds`. Rejects networks with undefined
/// (empty-column) ML estimates.
pub fn joint_log_likelihood(net: &BayesNet, ds: &Dataset) -> Result<f64> {
    for (i, cpt) in net.cpts.iter().enumerate() {
        if let Some(y) = cpt.undefined.iter().position(|&u| u) {
            return Err(Error::UndefinedColumn {
                node: net.dag.names()[i].clone(),
                column: y,
            });
        }
    }
    let cols = net.resolve(ds)?;
    let mut values = vec![0; net.n_nodes()];
    let mut total = 0.0;
    for i in 0..ds.n_rows() {
        BayesNet::node_values(ds, &cols, i, &mut values);
        total += net.log_prob(&values);
    }
    Ok(total)
}

/// Equivalent sample size of the uniform smoothing used for TAN edge weights.
pub const TAN_SMOOTHING: f64 = 1.0;

/// `I(X_i; X_j | C)` in nats from the joint frequencies smoothed by a uniform
/// Dirichlet prior of total mass `s`.
pub fn conditional_mutual_information(ds: &Dataset, i: usize, j: usize, c: usize, s: f64) -> f64 {
    let (ri, rj, rc) = (ds.cardinality(i), ds.cardinality(j), ds.cardinality(c));
    let cells = ri * rj * rc;
    let mut joint = vec![0.0; cells];
    for row in ds.rows() {
        joint[(row[c] * ri + row[i]) * rj + row[j]] += 1.0;
    }
    let denom = ds.n_rows() as f64 + s;
    let pseudo = s / cells as f64;
    for v in joint.iter_mut() {
        *v = (*v + pseudo) / denom;
    }
    let mut p_c = vec![0.0; rc];
    let mut p_ic = vec![0.0; rc * ri];
    let mut p_jc = vec![0.0; rc * rj];
    for cc in 0..rc {
        for a in 0..ri {
            for b in 0..rj {
                let p = joint[(cc * ri + a) * rj + b];
                p_c[cc] += p;
                p_ic[cc * ri + a] += p;
                p_jc[cc * rj + b] += p;
            }
        }
    }
    let mut mi = 0.0;
    for cc in 0..rc {
        for a in 0..ri {
            for b in 0..rj {
                let p = joint[(cc * ri + a) * rj + b];
                mi += p * (p * p_c[cc] / (p_ic[cc * ri + a] * p_jc[cc * rj + b])).ln();
            }
        }
    }
    mi.max(0.0)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Tree-augmented naive Bayes structure over all columns of `ds`: the class
/// has no parents, features form a maximum-weight spanning tree on
/// class-conditional mutual information rooted at the lowest-index feature,
/// and every feature has the class as its first parent.
pub fn learn_tan(ds: &Dataset, class_var: usize) -> Result<Dag> {
    let k = ds.n_vars();
    if class_var >= k {
        return Err(Error::invalid(format!("class variable {class_var} not in dataset")));
    }
    let features: Vec<usize> = (0..k).filter(|&v| v != class_var).collect();
    if features.len() < 2 {
        return Err(Error::invalid("TAN needs at least two features"));
    }
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for (a, &i) in features.iter().enumerate() {
        for &j in &features[a + 1..] {
            edges.push((conditional_mutual_information(ds, i, j, class_var, TAN_SMOOTHING), i, j));
        }
    }
    // heaviest first, ties by lexicographic (i, j)
    edges.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut uf: Vec<usize> = (0..k).collect();
    let mut adj = vec![Vec::new(); k];
    let mut taken = 0;
    for &(_, i, j) in &edges {
        let (a, b) = (find(&mut uf, i), find(&mut uf, j));
        if a != b {
            uf[a] = b;
            adj[i].push(j);
            adj[j].push(i);
            taken += 1;
            if taken == features.len() - 1 {
                break;
            }
        }
    }
    let mut parents = vec![Vec::new(); k];
    let root = features[0];
    parents[root].push(class_var);
    let mut visited = vec![false; k];
    visited[root] = true;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let mut next = adj[u].clone();
        next.sort_unstable();
        for v in next {
            if !visited[v] {
                visited[v] = true;
                parents[v] = vec![class_var, u];
                queue.push_back(v);
            }
        }
    }
    let names = ds.variables().iter().map(|v| v.name.clone()).collect();
    Dag::new(names, parents)
}

/// Posterior over the class given all other node values (node order, class
/// omitted).
pub fn classify(net: &BayesNet, row: &[usize], class_var: usize) -> Result<Vec<f64>> {
    let k = net.n_nodes();
    if class_var >= k {
        return Err(Error::invalid(format!("class node {class_var} out of range")));
    }
    if row.len() + 1 != k {
        return Err(Error::invalid(format!(
            "instance has {} values, expected {}",
            row.len(),
            k - 1
        )));
    }
    let mut full = Vec::with_capacity(k);
    full.extend_from_slice(&row[..class_var]);
    full.push(0);
    full.extend_from_slice(&row[class_var..]);
    for (i, &v) in full.iter().enumerate() {
        if i != class_var && v >= net.cards[i] {
            return Err(Error::StateOutOfRange {
                state: v,
                cardinality: net.cards[i],
            });
        }
    }
    Ok(class_posterior(net, &mut full, class_var))
}

fn class_posterior(net: &BayesNet, full: &mut [usize], class_var: usize) -> Vec<f64> {
    let rc = net.cards[class_var];
    let logp: Vec<f64> = (0..rc)
        .map(|c| {
            full[class_var] = c;
            net.log_prob(full)
        })
        .collect();
    let z = log_sum_exp(&logp);
    if !z.is_finite() {
        return vec![1.0 / rc as f64; rc];
    }
    logp.iter().map(|l| (l - z).exp()).collect()
}

/// Area under the ROC curve of `scores` for the positive labels, by the
/// rank statistic with tied scores counted 1/2. `None` if either class is
/// empty.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        // 1-based mid-rank of the tie block
        let mid = (start + end + 1) as f64 / 2.0;
        rank_sum += mid * idx[start..end].iter().filter(|&&i| positive[i]).count() as f64;
        start = end;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Unweighted mean of one-vs-rest AUCs. Classes absent from `truth` are
/// skipped and returned.
pub fn macro_auc(posteriors: &[Vec<f64>], truth: &[usize], n_classes: usize) -> Result<(f64, Vec<usize>)> {
    let mut aucs = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..n_classes {
        let scores: Vec<f64> = posteriors.iter().map(|p| p[c]).collect();
        let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        match roc_auc(&scores, &pos) {
            Some(a) => aucs.push(a),
            None => skipped.push(c),
        }
    }
    if aucs.is_empty() {
        return Err(Error::AucUndefined);
    }
    Ok((aucs.iter().sum::<f64>() / aucs.len() as f64, skipped))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Macro one-vs-rest AUC.
    pub auc: f64,
    pub log_lik: f64,
    pub n_test: usize,
    /// Classes absent from the test set, left out of the AUC average.
    pub skipped_classes: Vec<usize>,
}

impl EvalReport {
    pub const COLUMNS: [&'static str; 5] = ["accuracy", "auc", "log_lik", "n_test", "skipped_classes"];

    pub fn values(&self) -> Vec<Value> {
        let skipped: Vec<String> = self.skipped_classes.iter().map(|c| c.to_string()).collect();
        vec![
            Value::Float(self.accuracy),
            Value::Float(self.auc),
            Value::Float(self.log_lik),
            Value::Int(self.n_test as i64),
            Value::Text(skipped.join(";")),
        ]
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(Self::COLUMNS);
        t.push(self.values());
        t
    }
}

/// Accuracy (argmax, lowest class index wins ties), macro AUC and total
/// log-likelihood on `test`.
pub fn evaluate(net: &BayesNet, test: &Dataset, class_var: usize) -> Result<EvalReport> {
    if test.n_rows() == 0 {
        return Err(Error::invalid("test set is empty"));
    }
    if class_var >= net.n_nodes() {
        return Err(Error::invalid(format!("class node {class_var} out of range")));
    }
    let cols = net.resolve(test)?;
    let rc = net.cards[class_var];
    let rows: Vec<(Vec<f64>, usize, f64)> = (0..test.n_rows())
        .into_par_iter()
        .map(|i| {
            let mut values = vec![0; net.n_nodes()];
            BayesNet::node_values(test, &cols, i, &mut values);
            let truth = values[class_var];
            let ll = net.log_prob(&values);
            (class_posterior(net, &mut values, class_var), truth, ll)
        })
        .collect();
    let mut correct = 0usize;
    let mut log_lik = 0.0;
    let mut posteriors = Vec::with_capacity(rows.len());
    let mut truth = Vec::with_capacity(rows.len());
    for (post, t, ll) in rows {
        let mut best = 0;
        for c in 1..rc {
            if post[c] > post[best] {
                best = c;
            }
        }
        correct += usize::from(best == t);
        log_lik += ll;
        posteriors.push(post);
        truth.push(t);
    }
    let (auc, skipped_classes) = macro_auc(&posteriors, &truth, rc)?;
    Ok(EvalReport {
        accuracy: correct as f64 / test.n_rows() as f64,
        auc,
        log_lik,
        n_test: test.n_rows(),
        skipped_classes,
    })
}

/// CPTs drawn from the hierarchical model: per node `α ~ Dir(1)` and every
/// column `θ ~ Dir(r α)`.
pub fn random_hierarchical_cpts(dag: &Dag, cards: &[usize], seed: u64) -> Vec<DMatrix<f64>> {
    (0..dag.n_nodes())
        .map(|i| {
            let mut rng = stream_rng(derive_seed(seed, &[i as u64]), 0);
            let r = cards[i];
            let q: usize = dag.parents(i).iter().map(|&p| cards[p]).product();
            let alpha = dirichlet(&mut rng, &vec![1.0; r]);
            let conc: Vec<f64> = alpha.iter().map(|a| r as f64 * a).collect();
            let mut theta = DMatrix::zeros(r, q);
            for y in 0..q {
                let col = dirichlet(&mut rng, &conc);
                theta.column_mut(y).copy_from_slice(&col);
            }
            theta
        })
        .collect()
}

/// Forward-sample `n` complete instances. Columns are named after the nodes
/// with states `0..card`.
pub fn sample_dataset(dag: &Dag, cards: &[usize], cpts: &[DMatrix<f64>], n: usize, seed: u64) -> Result<Dataset> {
    let k = dag.n_nodes();
    if cards.len() != k || cpts.len() != k {
        return Err(Error::invalid("need one cardinality and one CPT per node"));
    }
    let order = dag.topological_order();
    let mut rng = stream_rng(seed, 0);
    let mut codes = Vec::with_capacity(n * k);
    let mut values = vec![0; k];
    for _ in 0..n {
        for &i in &order {
            let y = config_index(&values, dag.parents(i), cards);
            values[i] = categorical(&mut rng, cpts[i].column(y).as_slice());
        }
        codes.extend_from_slice(&values);
    }
    let vars = dag
        .names()
        .iter()
        .zip(cards)
        .map(|(n, &c)| VariableMeta::indexed(n.clone(), c))
        .collect();
    Dataset::from_flat(vars, codes)
}
