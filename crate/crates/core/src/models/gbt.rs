//! Gradient-boosted regression trees on the logistic loss.
//!
//! Exact greedy splits over presorted features, Newton leaf values
//! `-G/(H + l2)`. Each round's tree is shrunk by the learning rate and then
//! halved until the training loss does not increase, so the recorded loss is
//! non-increasing round over round.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{require_both_classes, sigmoid, softplus, Classifier};
use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub l2: f64,
    /// Row fraction drawn (without replacement) per round; 1 uses every row.
    pub subsample: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
            l2: 0.0,
            subsample: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// `x[feature] < threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Regression tree stored as a node arena rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], k: usize) -> usize {
            match nodes[k] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn scale(&mut self, factor: f64) {
        for node in &mut self.nodes {
            if let TreeNode::Leaf { value } = node {
                *value *= factor;
            }
        }
    }
}

/// `P(y=1|x) = sigmoid(base_score + Σ trees)`; leaf values already include
/// the learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub n_features: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub trees: Vec<Tree>,
}

impl GbtModel {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.eval(x)).sum::<f64>()
    }
}

impl Classifier for GbtModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn proba_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }
}

struct Builder<'a> {
    data: &'a TabularDataset,
    /// Row indices sorted by each feature.
    sorted: Vec<Vec<usize>>,
    grad: Vec<f64>,
    hess: Vec<f64>,
    params: &'a GbtParams,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.params.l2;
        if denom <= 1e-300 {
            0.0
        } else {
            -g / denom
        }
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.params.l2;
        if denom <= 1e-300 {
            0.0
        } else {
            g * g / denom
        }
    }

    /// `orders[f]` lists the node's rows sorted by feature `f`.
    fn best_split(&self, orders: &[Vec<usize>], g: f64, h: f64) -> Option<BestSplit> {
        let min_leaf = self.params.min_samples_leaf.max(1);
        let rows = orders.first().map_or(0, Vec::len);
        if rows < 2 * min_leaf {
            return None;
        }
        let parent = self.score(g, h);
        let mut best: Option<BestSplit> = None;
        for (f, order) in orders.iter().enumerate() {
            let mut gl = 0.0;
            let mut hl = 0.0;
            for (nl, w) in order.windows(2).enumerate() {
                gl += self.grad[w[0]];
                hl += self.hess[w[0]];
                let nl = nl + 1;
                let pv = self.data.row(w[0])[f];
                let v = self.data.row(w[1])[f];
                if v > pv && nl >= min_leaf && rows - nl >= min_leaf {
                    let gain = self.score(gl, hl) + self.score(g - gl, h - hl) - parent;
                    if best.as_ref().is_none_or(|b| gain > b.gain + 1e-12) {
                        best = Some(BestSplit {
                            gain,
                            feature: f,
                            threshold: 0.5 * (pv + v),
                        });
                    }
                }
            }
        }
        best.filter(|b| b.gain >= -1e-12)
    }

    fn grow(&self, orders: Vec<Vec<usize>>, rows: &[usize], depth: usize, nodes: &mut Vec<TreeNode>) -> usize {
        let id = nodes.len();
        nodes.push(TreeNode::Leaf { value: 0.0 });
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let split = if depth < self.params.max_depth && !orders.is_empty() {
            self.best_split(&orders, g, h)
        } else {
            None
        };
        match split {
            None => nodes[id] = TreeNode::Leaf { value: self.leaf_value(g, h) },
            Some(s) => {
                let goes_left = |i: usize| self.data.row(i)[s.feature] < s.threshold;
                let (mut lo, mut ro) = (Vec::with_capacity(orders.len()), Vec::with_capacity(orders.len()));
                for order in &orders {
                    let (l, r): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| goes_left(i));
                    lo.push(l);
                    ro.push(r);
                }
                let (lr, rr): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| goes_left(i));
                let l = self.grow(lo, &lr, depth + 1, nodes);
                let r = self.grow(ro, &rr, depth + 1, nodes);
                nodes[id] = TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: l,
                    right: r,
                };
            }
        }
        id
    }
}

fn mean_log_loss(scores: &[f64], labels: &[u8]) -> f64 {
    scores
        .iter()
        .zip(labels)
        .map(|(&z, &y)| softplus(z) - f64::from(y) * z)
        .sum::<f64>()
        / scores.len() as f64
}

pub fn train_gbt(data: &TabularDataset, params: &GbtParams, seed: u64) -> Result<GbtModel> {
    train_gbt_traced(data, params, seed).map(|(m, _)| m)
}

/// Also returns the mean training log-loss after each round, preceded by the
/// loss of the base score alone.
pub fn train_gbt_traced(
    data: &TabularDataset,
    params: &GbtParams,
    seed: u64,
) -> Result<(GbtModel, Vec<f64>)> {
    require_both_classes(data)?;
    if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "learning rate {}",
            params.learning_rate
        )));
    }
    if !(params.subsample > 0.0 && params.subsample <= 1.0) {
        return Err(Error::InvalidParameter(format!("subsample {}", params.subsample)));
    }
    if params.l2 < 0.0 {
        return Err(Error::InvalidParameter(format!("l2 {}", params.l2)));
    }
    let n = data.len();
    let labels = data.labels();
    let rate = labels.iter().map(|&y| f64::from(y)).sum::<f64>() / n as f64;
    let base_score = (rate / (1.0 - rate)).ln();
    let mut model = GbtModel {
        n_features: data.n_features(),
        base_score,
        learning_rate: params.learning_rate,
        max_depth: params.max_depth,
        trees: Vec::with_capacity(params.rounds),
    };
    let mut scores = vec![base_score; n];
    let mut losses = vec![mean_log_loss(&scores, labels)];
    if params.rounds == 0 {
        return Ok((model, losses));
    }

    let sorted: Vec<Vec<usize>> = (0..data.n_features())
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| data.row(a)[f].total_cmp(&data.row(b)[f]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut builder = Builder {
        data,
        sorted,
        grad: vec![0.0; n],
        hess: vec![0.0; n],
        params,
    };
    let mut rng = rng_from_seed(seed);
    let n_sub = ((n as f64 * params.subsample).round() as usize).clamp(1, n);

    for _ in 0..params.rounds {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            builder.grad[i] = p - f64::from(labels[i]);
            builder.hess[i] = p * (1.0 - p);
        }
        let (orders, rows) = if n_sub == n {
            (builder.sorted.clone(), (0..n).collect::<Vec<_>>())
        } else {
            let mut member = vec![false; n];
            for i in sample(&mut rng, n, n_sub) {
                member[i] = true;
            }
            let orders = builder
                .sorted
                .iter()
                .map(|o| o.iter().copied().filter(|&i| member[i]).collect())
                .collect();
            (orders, (0..n).filter(|&i| member[i]).collect())
        };
        let mut tree = Tree { nodes: Vec::new() };
        builder.grow(orders, &rows, 0, &mut tree.nodes);
        tree.scale(params.learning_rate);

        let current = *losses.last().expect("non-empty");
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..n).map(|i| scores[i] + tree.eval(data.row(i))).collect();
            let loss = mean_log_loss(&trial, labels);
            if loss <= current {
                scores = trial;
                losses.push(loss);
                accepted = true;
                break;
            }
            tree.scale(0.5);
        }
        if !accepted {
            tree.scale(0.0);
            losses.push(current);
        }
        model.trees.push(tree);
    }
    Ok((model, losses))
}
