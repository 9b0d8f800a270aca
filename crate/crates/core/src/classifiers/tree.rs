use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_input, check_training_data, Classifier};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Binary tree node. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

/// Flat node list with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, n_samples: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf { value, n_samples }],
        }
    }

    pub fn predict_row(&self, x: ArrayView1<'_, f64>) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => k = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match &t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, n_samples } => Some((*value, *n_samples)),
            Node::Split { .. } => None,
        })
    }

    /// Checks child indices point forward and every node is reachable once.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(k) = stack.pop() {
            if k >= self.nodes.len() || seen[k] {
                return Err(Error::InvalidData(format!("malformed tree at node {k}")));
            }
            seen[k] = true;
            match &self.nodes[k] {
                Node::Leaf { value, .. } if !value.is_finite() => {
                    return Err(Error::InvalidData("non-finite leaf value".into()));
                }
                Node::Leaf { .. } => {}
                Node::Split {
                    feature,
                    left,
                    right,
                    threshold,
                    ..
                } => {
                    if *feature >= n_features || !threshold.is_finite() || *left <= k || *right <= k {
                        return Err(Error::InvalidData(format!("malformed split at node {k}")));
                    }
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        if seen.iter().all(|s| *s) {
            Ok(())
        } else {
            Err(Error::InvalidData("tree has unreachable nodes".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_samples_split: 6,
            min_samples_leaf: 11,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_samples_split < 2 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "tree needs max_depth >= 1, min_samples_split >= 2, min_samples_leaf >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Classification tree whose leaves hold the class-1 frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub tree: Tree,
    pub n_features: usize,
}

impl Classifier for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_input(x, self.n_features)?;
        Ok(x.rows().into_iter().map(|r| self.tree.predict_row(r)).collect())
    }
}

pub fn train_tree(x: ArrayView2<'_, f64>, y: &[bool], config: &TreeConfig) -> Result<TreeModel> {
    check_training_data(x, y)?;
    config.validate()?;
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let tree = grow_classification_tree(x, y, rows, config, None)?;
    Ok(TreeModel {
        tree,
        n_features: x.ncols(),
    })
}

/// Per-split feature subsampling: examine random features until `count`
/// non-constant ones have been seen.
pub(crate) struct FeatureSampler<'r> {
    pub count: usize,
    pub rng: &'r mut Rng,
}

/// Greedy entropy-minimizing CART on the given (possibly repeated) rows.
pub(crate) fn grow_classification_tree(
    x: ArrayView2<'_, f64>,
    y: &[bool],
    rows: Vec<usize>,
    config: &TreeConfig,
    mut sampler: Option<FeatureSampler<'_>>,
) -> Result<Tree> {
    if rows.is_empty() {
        return Err(Error::Empty("no rows to grow a tree on".into()));
    }
    let mut nodes = Vec::new();
    let mut stack = vec![(rows, 0usize, usize::MAX, false)];
    while let Some((rows, depth, parent, is_left)) = stack.pop() {
        let id = nodes.len();
        if parent != usize::MAX {
            if let Node::Split { left, right, .. } = &mut nodes[parent] {
                if is_left {
                    *left = id;
                } else {
                    *right = id;
                }
            }
        }
        let n = rows.len();
        let n_pos = rows.iter().filter(|&&i| y[i]).count();
        let can_split = depth < config.max_depth
            && n >= config.min_samples_split
            && n >= 2 * config.min_samples_leaf
            && n_pos > 0
            && n_pos < n;
        let split = if can_split {
            let features = candidate_features(x, &rows, sampler.as_mut());
            best_split(x, y, &rows, &features, config.min_samples_leaf)
        } else {
            None
        };
        match split {
            None => nodes.push(Node::Leaf {
                value: n_pos as f64 / n as f64,
                n_samples: n,
            }),
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[[i, feature]] <= threshold);
                nodes.push(Node::Split {
                    feature,
                    threshold,
                    left: 0,
                    right: 0,
                    n_samples: n,
                });
                // right pushed first so the left subtree is numbered first
                stack.push((r, depth + 1, id, false));
                stack.push((l, depth + 1, id, true));
            }
        }
    }
    Ok(Tree { nodes })
}

fn is_constant(x: ArrayView2<'_, f64>, rows: &[usize], f: usize) -> bool {
    let first = x[[rows[0], f]];
    rows.iter().all(|&i| x[[i, f]] == first)
}

/// Features to evaluate, ascending so ties resolve to the lowest index.
pub(crate) fn candidate_features(x: ArrayView2<'_, f64>, rows: &[usize], sampler: Option<&mut FeatureSampler<'_>>) -> Vec<usize> {
    let p = x.ncols();
    match sampler {
        None => (0..p).collect(),
        Some(s) => {
            let mut order: Vec<usize> = (0..p).collect();
            order.shuffle(s.rng);
            let mut chosen = Vec::new();
            let mut non_constant = 0;
            for f in order {
                if non_constant >= s.count {
                    break;
                }
                if !is_constant(x, rows, f) {
                    non_constant += 1;
                    chosen.push(f);
                }
            }
            chosen.sort_unstable();
            chosen
        }
    }
}

fn entropy(pos: usize, n: usize) -> f64 {
    if pos == 0 || pos == n {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

fn best_split(x: ArrayView2<'_, f64>, y: &[bool], rows: &[usize], features: &[usize], min_leaf: usize) -> Option<(usize, f64)> {
    let n = rows.len();
    let n_pos = rows.iter().filter(|&&i| y[i]).count();
    let parent = n as f64 * entropy(n_pos, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(n);
    for &f in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&i| (x[[i, f]], y[i])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0;
        for k in 1..n {
            left_pos += usize::from(pairs[k - 1].1);
            if pairs[k - 1].0 == pairs[k].0 || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let child = k as f64 * entropy(left_pos, k) + (n - k) as f64 * entropy(n_pos - left_pos, n - k);
            let gain = parent - child;
            if best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                best = Some((gain, f, midpoint(pairs[k - 1].0, pairs[k].0)));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
