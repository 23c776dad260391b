//! ID3-style decision tree on continuous features: binary splits at the
//! midpoints between consecutive distinct values, chosen by information gain.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Classifier, LabeledDataset, Trainer};
use crate::eps_plant::FaultKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { class: usize },
    /// `value < threshold` descends left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub class_order: Vec<FaultKind>,
}

/// Shannon entropy in bits of a class histogram.
pub fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// `H(parent) - sum_children (n_child / n) H(child)`.
pub fn information_gain(left: &[usize], right: &[usize]) -> f64 {
    let parent: Vec<usize> = left.iter().zip(right).map(|(a, b)| a + b).collect();
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    let n = (nl + nr) as f64;
    entropy(&parent) - (nl as f64 / n) * entropy(left) - (nr as f64 / n) * entropy(right)
}

/// One candidate split and its gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub n_left: usize,
}

/// All midpoint splits of the rows `idx`, by feature then ascending threshold.
fn candidates(x: &DMatrix<f64>, y: &[usize], n_classes: usize, idx: &[usize]) -> Vec<SplitCandidate> {
    let mut total = vec![0; n_classes];
    for &i in idx {
        total[y[i]] += 1;
    }
    let mut out = Vec::new();
    let mut order = idx.to_vec();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]));
        let mut left = vec![0; n_classes];
        for p in 0..order.len() - 1 {
            left[y[order[p]]] += 1;
            let (lo, hi) = (x[(order[p], f)], x[(order[p + 1], f)]);
            if lo == hi {
                continue;
            }
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let mut threshold = 0.5 * (lo + hi);
            if threshold <= lo {
                threshold = hi;
            }
            out.push(SplitCandidate {
                feature: f,
                threshold,
                gain: information_gain(&left, &right),
                n_left: p + 1,
            });
        }
    }
    out
}

/// Candidate splits at the root of `data`.
pub fn root_split_candidates(data: &LabeledDataset) -> Vec<SplitCandidate> {
    let idx: Vec<usize> = (0..data.len()).collect();
    if idx.is_empty() {
        return Vec::new();
    }
    candidates(&data.features, &data.label_indices(), data.n_classes(), &idx)
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for c in 1..counts.len() {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    y: Vec<usize>,
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let mut counts = vec![0; self.n_classes];
        for &i in &idx {
            counts[self.y[i]] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority(&counts) });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return id;
        }
        let best = candidates(self.x, &self.y, self.n_classes, &idx)
            .into_iter()
            .filter(|c| c.n_left >= self.min_leaf && idx.len() - c.n_left >= self.min_leaf)
            .fold(None::<SplitCandidate>, |best, c| match best {
                Some(b) if b.gain >= c.gain => Some(b),
                _ => Some(c),
            });
        let Some(best) = best else { return id };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x[(i, best.feature)] < best.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows a tree until nodes are pure, `max_depth` is reached or a split
/// would leave fewer than `min_leaf` rows in a child.
pub fn id3_train(data: &LabeledDataset, max_depth: usize, min_leaf: usize) -> Result<DecisionTree> {
    if data.is_empty() {
        return Err(Error::Data("cannot grow a tree on an empty dataset".into()));
    }
    let mut b = Builder {
        x: &data.features,
        y: data.label_indices(),
        n_classes: data.n_classes(),
        max_depth,
        min_leaf: min_leaf.max(1),
        nodes: Vec::new(),
    };
    b.grow((0..data.len()).collect(), 0);
    Ok(DecisionTree {
        nodes: b.nodes,
        n_features: data.n_features(),
        class_order: data.class_order.clone(),
    })
}

impl DecisionTree {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<FaultKind> {
        if x.len() != self.n_features {
            return Err(Error::Shape(format!(
                "tree expects {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return Ok(self.class_order[class]),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }
}

pub fn id3_predict(tree: &DecisionTree, features: &DMatrix<f64>) -> Result<Vec<FaultKind>> {
    tree.predict(features)
}

impl Classifier for DecisionTree {
    fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<FaultKind>> {
        features
            .row_iter()
            .map(|r| self.predict_one(&r.iter().copied().collect::<Vec<_>>()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Id3Trainer {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Trainer for Id3Trainer {
    type Model = DecisionTree;
    fn train(&self, data: &LabeledDataset) -> Result<DecisionTree> {
        id3_train(data, self.max_depth, self.min_leaf)
    }
}
