//! Interventional TreeSHAP: exact Shapley values of tree ensembles against
//! each background row, averaged over the background.
//!
//! For one foreground row `x` and reference row `r`, a leaf is reached by
//! the coalition `A` iff every split on which `x` and `r` disagree sends
//! the walk to `x`'s side for features in `A` and to `r`'s side otherwise.
//! With `p` features fixed to `x` and `n` fixed to `r` on the path, the
//! leaf value `v` contributes `v (p-1)! n! / (p+n)!` to each `x`-side
//! feature and `-v p! (n-1)! / (p+n)!` to each `r`-side feature.

use ndarray::ArrayView1;

use super::{Background, Explanation};
use crate::classifiers::{BoostedModel, ForestModel, Node, Tree, TreeModel};
use crate::error::{ensure_dim, Result};

/// Additive tree ensemble: `output = offset + sum_k scale_k * tree_k(x)`.
pub trait TreeEnsemble {
    fn n_features(&self) -> usize;
    fn members(&self) -> Vec<(&Tree, f64)>;
    fn offset(&self) -> f64;
}

impl TreeEnsemble for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn members(&self) -> Vec<(&Tree, f64)> {
        vec![(&self.tree, 1.0)]
    }

    fn offset(&self) -> f64 {
        0.0
    }
}

impl TreeEnsemble for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn members(&self) -> Vec<(&Tree, f64)> {
        let w = 1.0 / self.trees.len() as f64;
        self.trees.iter().map(|t| (t, w)).collect()
    }

    fn offset(&self) -> f64 {
        0.0
    }
}

/// Explained on the margin.
impl TreeEnsemble for BoostedModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn members(&self) -> Vec<(&Tree, f64)> {
        self.trees.iter().map(|t| (t, self.learning_rate)).collect()
    }

    fn offset(&self) -> f64 {
        self.base_score
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Free,
    X,
    R,
}

struct Walk<'a> {
    tree: &'a Tree,
    x: ArrayView1<'a, f64>,
    r: ArrayView1<'a, f64>,
    side: Vec<Side>,
    xs: Vec<usize>,
    rs: Vec<usize>,
    /// `fact[k] = k!`
    fact: &'a [f64],
    phi: &'a mut [f64],
    scale: f64,
}

impl Walk<'_> {
    fn visit(&mut self, k: usize) {
        match self.tree.nodes[k] {
            Node::Leaf { value, .. } => {
                let (p, n) = (self.xs.len(), self.rs.len());
                let v = value * self.scale;
                if p > 0 {
                    let w = self.fact[p - 1] * self.fact[n] / self.fact[p + n];
                    for &j in &self.xs {
                        self.phi[j] += v * w;
                    }
                }
                if n > 0 {
                    let w = self.fact[p] * self.fact[n - 1] / self.fact[p + n];
                    for &j in &self.rs {
                        self.phi[j] -= v * w;
                    }
                }
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let x_left = self.x[feature] <= threshold;
                let r_left = self.r[feature] <= threshold;
                let child = |go_left: bool| if go_left { left } else { right };
                if x_left == r_left {
                    return self.visit(child(x_left));
                }
                match self.side[feature] {
                    Side::X => self.visit(child(x_left)),
                    Side::R => self.visit(child(r_left)),
                    Side::Free => {
                        self.side[feature] = Side::X;
                        self.xs.push(feature);
                        self.visit(child(x_left));
                        self.xs.pop();
                        self.side[feature] = Side::R;
                        self.rs.push(feature);
                        self.visit(child(r_left));
                        self.rs.pop();
                        self.side[feature] = Side::Free;
                    }
                }
            }
        }
    }
}

pub fn tree_shap<E: TreeEnsemble + ?Sized>(model: &E, x: ArrayView1<'_, f64>, background: &Background) -> Result<Explanation> {
    let d = model.n_features();
    ensure_dim(d, x.len())?;
    ensure_dim(d, background.n_features())?;
    let members = model.members();
    for (t, _) in &members {
        t.validate(d)?;
    }
    let max_depth = members.iter().map(|(t, _)| t.depth()).max().unwrap_or(0);
    let mut fact = vec![1.0; max_depth + 1];
    for k in 1..fact.len() {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut phi = vec![0.0; d];
    let mut base = 0.0;
    for r in background.rows().rows() {
        for (tree, scale) in &members {
            base += scale * tree.predict_row(r);
            Walk {
                tree,
                x,
                r,
                side: vec![Side::Free; d],
                xs: Vec::new(),
                rs: Vec::new(),
                fact: &fact,
                phi: &mut phi,
                scale: *scale,
            }
            .visit(0);
        }
    }
    let k = background.len() as f64;
    Ok(Explanation {
        values: phi.into_iter().map(|v| v / k).collect(),
        base_value: model.offset() + base / k,
    })
}
