//! Random forest of Gini-split classification trees over sparse features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::text::SparseVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    pub fn resolve(self, dim: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (dim as f64).sqrt().floor() as usize,
            MaxFeatures::All => dim,
            MaxFeatures::Fixed(k) => k,
        };
        k.clamp(1, dim.max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_leaf: 1,
            max_depth: None,
            bootstrap: true,
            seed: 212,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        fraction: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_fraction(&self, x: &SparseVector) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { fraction } => return fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x.get(feature) <= threshold { left } else { right } as usize,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left as usize).max(go(nodes, right as usize)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub dim: usize,
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Mean leaf positive fraction across trees.
    pub fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        if let Some(max) = x.max_index() {
            if max as usize >= self.dim {
                return Err(Error::Arity {
                    expected: self.dim,
                    got: max as usize + 1,
                });
            }
        }
        let sum: f64 = self.trees.iter().map(|t| t.leaf_fraction(x)).sum();
        Ok((sum / self.trees.len() as f64).clamp(0.0, 1.0))
    }
}

/// Column-major copy of the training matrix; absent entries are zero.
struct Columns {
    rows: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
}

impl Columns {
    fn new(data: &[SparseVector], dim: usize) -> Self {
        let mut rows = vec![Vec::new(); dim];
        let mut values = vec![Vec::new(); dim];
        for (r, x) in data.iter().enumerate() {
            for (i, v) in x.iter() {
                rows[i as usize].push(r as u32);
                values[i as usize].push(v);
            }
        }
        Self { rows, values }
    }

    fn value(&self, feature: usize, row: u32) -> f64 {
        match self.rows[feature].binary_search(&row) {
            Ok(p) => self.values[feature][p],
            Err(_) => 0.0,
        }
    }
}

/// A bootstrap sample: distinct rows with their multiplicities.
#[derive(Clone)]
struct Sample {
    row: u32,
    weight: u32,
}

struct Candidate {
    feature: u32,
    threshold: f64,
    impurity: f64,
}

struct Builder<'a> {
    cols: &'a Columns,
    labels: &'a [u8],
    cfg: &'a ForestConfig,
    mtry: usize,
    dim: usize,
    /// Per-row weight within the node being split; zero elsewhere.
    scratch: Vec<u32>,
    /// Feature indices, partially shuffled in place at every node.
    features: Vec<u32>,
    nodes: Vec<Node>,
}

fn gini_sum(n: f64, pos: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n - (pos * pos + (n - pos) * (n - pos)) / n
    }
}

impl Builder<'_> {
    fn build(&mut self, samples: Vec<Sample>, depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { fraction: 0.0 });
        let n: u32 = samples.iter().map(|s| s.weight).sum();
        let pos: u32 = samples
            .iter()
            .filter(|s| self.labels[s.row as usize] == 1)
            .map(|s| s.weight)
            .sum();
        let fraction = f64::from(pos) / f64::from(n);
        let depth_ok = self.cfg.max_depth.is_none_or(|d| depth < d);
        let splittable = pos > 0 && pos < n && n as usize >= 2 * self.cfg.min_leaf && depth_ok;
        let best = if splittable {
            self.best_split(&samples, n, pos, rng)
        } else {
            None
        };
        let Some(best) = best else {
            self.nodes[id as usize] = Node::Leaf { fraction };
            return id;
        };
        let f = best.feature as usize;
        let (left, right): (Vec<Sample>, Vec<Sample>) = samples
            .into_iter()
            .partition(|s| self.cols.value(f, s.row) <= best.threshold);
        let l = self.build(left, depth + 1, rng);
        let r = self.build(right, depth + 1, rng);
        self.nodes[id as usize] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }

    /// Draws features without replacement until `mtry` have been examined
    /// and at least one valid split exists, or the features run out.
    fn best_split(&mut self, samples: &[Sample], n: u32, pos: u32, rng: &mut ChaCha8Rng) -> Option<Candidate> {
        for s in samples {
            self.scratch[s.row as usize] = s.weight;
        }
        let parent = gini_sum(f64::from(n), f64::from(pos));
        let mut best: Option<Candidate> = None;
        let mut values: Vec<(f64, u32, u32)> = Vec::new();
        for drawn in 0..self.dim {
            if drawn >= self.mtry && best.is_some() {
                break;
            }
            let j = rng.random_range(drawn..self.dim);
            self.features.swap(drawn, j);
            let f = self.features[drawn] as usize;
            self.node_values(f, samples, n, pos, &mut values);
            if let Some(c) = self.scan(f as u32, &values, n, pos) {
                if c.impurity < parent - 1e-12 && best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                    best = Some(c);
                }
            }
        }
        for s in samples {
            self.scratch[s.row as usize] = 0;
        }
        best
    }

    /// Distinct values of feature `f` in the node as (value, weight, positive weight), sorted.
    fn node_values(&self, f: usize, samples: &[Sample], n: u32, pos: u32, out: &mut Vec<(f64, u32, u32)>) {
        out.clear();
        let col = &self.cols.rows[f];
        let log = (usize::BITS - col.len().leading_zeros()) as usize;
        let (mut nz_n, mut nz_pos) = (0u32, 0u32);
        let mut push = |row: u32, v: f64, w: u32, out: &mut Vec<(f64, u32, u32)>| {
            let p = if self.labels[row as usize] == 1 { w } else { 0 };
            nz_n += w;
            nz_pos += p;
            out.push((v, w, p));
        };
        if col.len() <= samples.len() * log.max(1) {
            for (k, &row) in col.iter().enumerate() {
                let w = self.scratch[row as usize];
                if w > 0 {
                    push(row, self.cols.values[f][k], w, out);
                }
            }
        } else {
            for s in samples {
                let v = self.cols.value(f, s.row);
                if v != 0.0 {
                    push(s.row, v, s.weight, out);
                }
            }
        }
        if nz_n < n {
            out.push((0.0, n - nz_n, pos - nz_pos));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                a.2 += b.2;
                true
            } else {
                false
            }
        });
    }

    fn scan(&self, feature: u32, values: &[(f64, u32, u32)], n: u32, pos: u32) -> Option<Candidate> {
        let min_leaf = self.cfg.min_leaf as u32;
        let (mut ln, mut lp) = (0u32, 0u32);
        let mut best: Option<Candidate> = None;
        for w in values.windows(2) {
            ln += w[0].1;
            lp += w[0].2;
            if ln < min_leaf || n - ln < min_leaf {
                continue;
            }
            let impurity = gini_sum(f64::from(ln), f64::from(lp)) + gini_sum(f64::from(n - ln), f64::from(pos - lp));
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mut threshold = w[0].0 + (w[1].0 - w[0].0) / 2.0;
                if threshold >= w[1].0 {
                    threshold = w[0].0;
                }
                best = Some(Candidate {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
        best
    }
}

fn fit_tree(cols: &Columns, labels: &[u8], dim: usize, cfg: &ForestConfig, seed: u64) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = labels.len();
    let mut weights = vec![0u32; n];
    if cfg.bootstrap {
        for _ in 0..n {
            weights[rng.random_range(0..n)] += 1;
        }
    } else {
        weights.fill(1);
    }
    let samples = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0)
        .map(|(r, &w)| Sample {
            row: r as u32,
            weight: w,
        })
        .collect();
    let mut b = Builder {
        cols,
        labels,
        cfg,
        mtry: cfg.max_features.resolve(dim),
        dim,
        scratch: vec![0; n],
        features: (0..dim as u32).collect(),
        nodes: Vec::new(),
    };
    b.build(samples, 0, &mut rng);
    Tree { nodes: b.nodes }
}

pub fn fit_random_forest(rows: &[SparseVector], labels: &[u8], dim: usize, cfg: &ForestConfig) -> Result<ForestModel> {
    if rows.len() != labels.len() {
        return Err(Error::Arity {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    if rows.len() < 2 {
        return Err(Error::Insufficient("a forest needs at least two examples".into()));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    if cfg.n_trees == 0 || cfg.min_leaf == 0 || dim == 0 {
        return Err(Error::InvalidParameter(
            "n_trees, min_leaf and dimension must be positive".into(),
        ));
    }
    if let Some(max) = rows.iter().filter_map(SparseVector::max_index).max() {
        if max as usize >= dim {
            return Err(Error::Arity {
                expected: dim,
                got: max as usize + 1,
            });
        }
    }
    let cols = Columns::new(rows, dim);
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.n_trees).map(|_| master.random()).collect();
    let trees = seeds
        .par_iter()
        .map(|&s| fit_tree(&cols, labels, dim, cfg, s))
        .collect();
    Ok(ForestModel {
        dim,
        config: *cfg,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn dense(rows: &[Vec<f64>]) -> Vec<SparseVector> {
        rows.iter().map(|r| SparseVector::from_dense(r)).collect()
    }

    fn noisy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let a = f64::from(rng.random_range(0..8u8));
            let b = f64::from(rng.random_range(0..5u8));
            let c = f64::from(rng.random_range(0..3u8));
            let y = u8::from(a + b + rng.random_range(-2.0..2.0) > 5.0);
            rows.push(vec![a, b, c]);
            labels.push(y);
        }
        (rows, labels)
    }

    #[test]
    fn perfectly_separating_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gen = |rng: &mut ChaCha8Rng| {
            let y = rng.random_range(0..2u8);
            let x = if y == 1 {
                rng.random_range(1.0..2.0)
            } else {
                rng.random_range(-2.0..-1.0)
            };
            (vec![x, rng.random_range(0.0..1.0)], y)
        };
        let (train, labels): (Vec<_>, Vec<_>) = (0..200).map(|_| gen(&mut rng)).unzip();
        let (test, truth): (Vec<_>, Vec<_>) = (0..200).map(|_| gen(&mut rng)).unzip();
        let cfg = ForestConfig {
            max_features: MaxFeatures::All,
            ..Default::default()
        };
        let f = fit_random_forest(&dense(&train), &labels, 2, &cfg).unwrap();
        for (x, y) in dense(&test).iter().zip(truth) {
            assert_eq!(u8::from(f.predict_proba(x).unwrap() >= 0.5), y);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (rows, labels) = noisy(150, 1);
        let x = dense(&rows);
        let cfg = ForestConfig {
            n_trees: 30,
            ..Default::default()
        };
        let a = fit_random_forest(&x, &labels, 3, &cfg).unwrap();
        let b = fit_random_forest(&x, &labels, 3, &cfg).unwrap();
        assert_eq!(a, b);
        let c = fit_random_forest(&x, &labels, 3, &ForestConfig { seed: 9, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn structure_invariants() {
        let (rows, labels) = noisy(120, 2);
        let f = fit_random_forest(&dense(&rows), &labels, 3, &ForestConfig::default()).unwrap();
        assert_eq!(f.n_trees(), 100);
        for t in &f.trees {
            let n = t.nodes.len() as u32;
            for node in &t.nodes {
                match *node {
                    Node::Split { left, right, .. } => assert!(left < n && right < n && left != right),
                    Node::Leaf { fraction } => assert!((0.0..=1.0).contains(&fraction)),
                }
            }
        }
    }

    #[test]
    fn min_leaf_and_depth_limits() {
        let (rows, labels) = noisy(100, 3);
        let cfg = ForestConfig {
            n_trees: 10,
            max_depth: Some(2),
            ..Default::default()
        };
        let f = fit_random_forest(&dense(&rows), &labels, 3, &cfg).unwrap();
        assert!(f.trees.iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn errors() {
        let x = dense(&[vec![1.0], vec![2.0]]);
        assert!(matches!(
            fit_random_forest(&x, &[1, 1], 1, &ForestConfig::default()),
            Err(Error::SingleClass)
        ));
        assert!(fit_random_forest(&x[..1], &[1], 1, &ForestConfig::default()).is_err());
        let f = fit_random_forest(&x, &[0, 1], 1, &ForestConfig::default()).unwrap();
        assert!(f.predict_proba(&SparseVector::from_dense(&[0.0, 3.0])).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        // Strictly increasing maps with g(0) = 0 keep the sparsity pattern and
        // every in-bag partition. Thresholds are midpoints, so only points whose
        // values lie on a node's grid are guaranteed the same route: all training
        // points without bootstrap, the tree shapes with it.
        #[test]
        fn monotone_transform_keeps_partitions(seed in 0u64..1000, which in 0usize..3, kind in 0usize..3) {
            let (rows, labels) = noisy(80, seed);
            let g = |v: f64| match kind {
                0 => v * v * v,
                1 => 3.0 * v + v.abs() * v,
                _ => v.exp() - 1.0,
            };
            let moved: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().enumerate().map(|(i, &v)| if i == which { g(v) } else { v }).collect())
                .collect();
            for bootstrap in [false, true] {
                let cfg = ForestConfig { n_trees: 20, seed, bootstrap, ..Default::default() };
                let a = fit_random_forest(&dense(&rows), &labels, 3, &cfg).unwrap();
                let b = fit_random_forest(&dense(&moved), &labels, 3, &cfg).unwrap();
                for (ta, tb) in a.trees.iter().zip(&b.trees) {
                    prop_assert_eq!(ta.nodes.len(), tb.nodes.len());
                    for (x, y) in ta.nodes.iter().zip(&tb.nodes) {
                        let same = match (x, y) {
                            (Node::Leaf { fraction: f }, Node::Leaf { fraction: h }) => f == h,
                            (
                                Node::Split { feature: f, left: l, right: r, .. },
                                Node::Split { feature: h, left: m, right: q, .. },
                            ) => f == h && l == m && r == q,
                            _ => false,
                        };
                        prop_assert!(same);
                    }
                }
                if !bootstrap {
                    for (x, y) in dense(&rows).iter().zip(dense(&moved).iter()) {
                        prop_assert_eq!(a.predict_proba(x).unwrap(), b.predict_proba(y).unwrap());
                    }
                }
            }
        }
    }
}
