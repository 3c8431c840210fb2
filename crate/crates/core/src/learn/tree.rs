//! CART classification tree: best Gini split over candidate features,
//! midpoint thresholds, optional cost-complexity pruning.

use serde::{Deserialize, Serialize};

use crate::market::OutcomeLabel;
use crate::rng::Rng;

use super::dataset::TrainView;
use super::ProbabilityTriple;

const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        counts: [u32; 3],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted tree. Nodes live in an arena with the root at index 0;
/// traversal goes left when `value <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub width: usize,
}

impl DecisionTree {
    pub fn leaf_counts(&self, x: &[f64]) -> &[u32; 3] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { counts } => return counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Leaf class frequencies.
    pub fn predict_proba(&self, x: &[f64]) -> ProbabilityTriple {
        ProbabilityTriple::from_counts(self.leaf_counts(x))
    }

    /// Leaf-majority class; count ties break by label priority.
    pub fn predict_label(&self, x: &[f64]) -> OutcomeLabel {
        majority(self.leaf_counts(x))
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// Majority class of a count triple; ties break by [`OutcomeLabel::priority`].
pub fn majority(counts: &[u32; 3]) -> OutcomeLabel {
    let mut best = OutcomeLabel::Winner;
    for label in OutcomeLabel::ALL {
        let c = counts[label.index()];
        let b = counts[best.index()];
        if c > b || (c == b && label.priority() < best.priority()) {
            best = label;
        }
    }
    best
}

fn gini(counts: &[u32; 3], total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let mut g = 1.0;
    for &c in counts {
        let p = f64::from(c) / total;
        g -= p * p;
    }
    g
}

pub(crate) struct GrowControl {
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Features drawn per split; `None` enumerates all of them.
    pub features_per_split: Option<usize>,
}

struct BuildNode {
    counts: [u32; 3],
    split: Option<(usize, f64, usize, usize)>,
}

struct Grower<'a, 'b> {
    view: &'a TrainView<'b>,
    control: GrowControl,
    rng: Option<Rng>,
    nodes: Vec<BuildNode>,
}

struct BestSplit {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl<'a, 'b> Grower<'a, 'b> {
    fn node_counts(&self, members: &[usize]) -> [u32; 3] {
        let mut counts = [0u32; 3];
        for &i in members {
            counts[self.view.labels[i] as usize] += 1;
        }
        counts
    }

    fn build(&mut self, members: Vec<usize>, depth: usize) -> usize {
        let counts = self.node_counts(&members);
        let total = members.len() as f64;
        let node_gini = gini(&counts, total);
        let at_depth_limit = self.control.max_depth.is_some_and(|d| depth >= d);
        let splittable = members.len() >= 2 * self.control.min_leaf
            && node_gini > 0.0
            && !at_depth_limit;

        let split = if splittable {
            self.find_best_split(&members, &counts)
        } else {
            None
        };

        let index = self.nodes.len();
        self.nodes.push(BuildNode {
            counts,
            split: None,
        });

        if let Some(best) = split {
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for &i in &members {
                if self.view.rows[i][best.feature] <= best.threshold {
                    left.push(i);
                } else {
                    right.push(i);
                }
            }
            let left_index = self.build(left, depth + 1);
            let right_index = self.build(right, depth + 1);
            self.nodes[index].split =
                Some((best.feature, best.threshold, left_index, right_index));
        }
        index
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        match self.control.features_per_split {
            None => (0..self.view.width).collect(),
            Some(m) if m >= self.view.width => (0..self.view.width).collect(),
            Some(m) => {
                let rng = self.rng.as_mut().expect("feature subsetting needs a seed");
                let mut picked = rng.sample_indices(self.view.width, m);
                // Canonical evaluation order keeps tie-breaking identical
                // to full enumeration.
                picked.sort_unstable();
                picked
            }
        }
    }

    fn find_best_split(&mut self, members: &[usize], counts: &[u32; 3]) -> Option<BestSplit> {
        let total = members.len() as f64;
        let min_leaf = self.control.min_leaf;
        let mut best: Option<BestSplit> = None;
        let mut scratch: Vec<(f64, u8)> = Vec::with_capacity(members.len());

        let consider = |candidate: BestSplit, best: &mut Option<BestSplit>| {
            let better = match best {
                None => true,
                Some(b) => {
                    candidate.impurity < b.impurity - TIE_EPS
                        || ((candidate.impurity - b.impurity).abs() <= TIE_EPS
                            && (candidate.feature, candidate.threshold)
                                < (b.feature, b.threshold))
                }
            };
            if better {
                *best = Some(candidate);
            }
        };

        for feature in self.candidate_features() {
            if self.view.binary[feature] {
                // One pass: the only possible threshold for a 0/1 column.
                let mut left = [0u32; 3];
                let mut n_left = 0usize;
                for &i in members {
                    if self.view.rows[i][feature] == 0.0 {
                        left[self.view.labels[i] as usize] += 1;
                        n_left += 1;
                    }
                }
                let n_right = members.len() - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let right = [
                    counts[0] - left[0],
                    counts[1] - left[1],
                    counts[2] - left[2],
                ];
                let impurity = (n_left as f64 * gini(&left, n_left as f64)
                    + n_right as f64 * gini(&right, n_right as f64))
                    / total;
                consider(
                    BestSplit {
                        impurity,
                        feature,
                        threshold: 0.5,
                    },
                    &mut best,
                );
                continue;
            }

            scratch.clear();
            scratch.extend(
                members
                    .iter()
                    .map(|&i| (self.view.rows[i][feature], self.view.labels[i])),
            );
            scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut left = [0u32; 3];
            for cut in 1..scratch.len() {
                left[scratch[cut - 1].1 as usize] += 1;
                let (prev, next) = (scratch[cut - 1].0, scratch[cut].0);
                if prev == next {
                    continue;
                }
                if cut < min_leaf || scratch.len() - cut < min_leaf {
                    continue;
                }
                let right = [
                    counts[0] - left[0],
                    counts[1] - left[1],
                    counts[2] - left[2],
                ];
                let n_left = cut as f64;
                let n_right = (scratch.len() - cut) as f64;
                let impurity =
                    (n_left * gini(&left, n_left) + n_right * gini(&right, n_right)) / total;
                consider(
                    BestSplit {
                        impurity,
                        feature,
                        threshold: prev + (next - prev) / 2.0,
                    },
                    &mut best,
                );
            }
        }

        // Zero-gain splits are kept: a first cut through an XOR-like
        // pattern has no immediate Gini gain but enables the child splits.
        best
    }
}

/// Grows an unpruned tree over the whole view (optionally with a random
/// feature subset per split).
pub(crate) fn grow(
    view: &TrainView<'_>,
    members: Vec<usize>,
    control: GrowControl,
    rng: Option<Rng>,
) -> DecisionTree {
    let mut grower = Grower {
        view,
        control,
        rng,
        nodes: Vec::new(),
    };
    grower.build(members, 0);
    finalize(grower.nodes, view.width)
}

/// Weakest-link cost-complexity pruning.
///
/// Collapses internal nodes while the cheapest link cost
/// g(t) = (R(t) - R(subtree)) / (leaves - 1) is strictly below `alpha`,
/// with R measured as training misclassification share. `alpha = 0`
/// therefore disables pruning.
pub(crate) fn prune(tree: DecisionTree, alpha: f64) -> DecisionTree {
    if alpha <= 0.0 {
        return tree;
    }
    let total: u32 = match &tree.nodes[0] {
        TreeNode::Leaf { counts } => counts.iter().sum(),
        TreeNode::Split { .. } => sum_counts(&tree),
    };
    let mut nodes: Vec<BuildNode> = Vec::with_capacity(tree.nodes.len());
    for node in &tree.nodes {
        match node {
            TreeNode::Leaf { counts } => nodes.push(BuildNode {
                counts: *counts,
                split: None,
            }),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => nodes.push(BuildNode {
                counts: [0; 3],
                split: Some((*feature, *threshold, *left, *right)),
            }),
        }
    }
    fill_counts(&mut nodes, 0);

    loop {
        let mut weakest: Option<(f64, usize)> = None;
        let mut stats = vec![(0usize, 0u32); nodes.len()]; // (leaves, errors)
        compute_stats(&nodes, 0, &mut stats);
        for (i, node) in nodes.iter().enumerate() {
            if node.split.is_none() || !reachable(&nodes, i) {
                continue;
            }
            let (leaves, subtree_errors) = stats[i];
            if leaves <= 1 {
                continue;
            }
            let node_errors = node.counts.iter().sum::<u32>()
                - *node.counts.iter().max().unwrap();
            let g = (f64::from(node_errors) - f64::from(subtree_errors))
                / f64::from(total)
                / (leaves - 1) as f64;
            let better = match weakest {
                None => true,
                Some((wg, wi)) => g < wg - TIE_EPS || ((g - wg).abs() <= TIE_EPS && i < wi),
            };
            if better {
                weakest = Some((g, i));
            }
        }
        match weakest {
            Some((g, i)) if g < alpha - TIE_EPS => nodes[i].split = None,
            _ => break,
        }
    }

    finalize(nodes, tree.width)
}

fn sum_counts(tree: &DecisionTree) -> u32 {
    tree.nodes
        .iter()
        .filter_map(|n| match n {
            TreeNode::Leaf { counts } => Some(counts.iter().sum::<u32>()),
            TreeNode::Split { .. } => None,
        })
        .sum()
}

fn fill_counts(nodes: &mut Vec<BuildNode>, at: usize) -> [u32; 3] {
    match nodes[at].split {
        None => nodes[at].counts,
        Some((_, _, l, r)) => {
            let lc = fill_counts(nodes, l);
            let rc = fill_counts(nodes, r);
            let counts = [lc[0] + rc[0], lc[1] + rc[1], lc[2] + rc[2]];
            nodes[at].counts = counts;
            counts
        }
    }
}

fn compute_stats(nodes: &[BuildNode], at: usize, stats: &mut Vec<(usize, u32)>) -> (usize, u32) {
    let result = match nodes[at].split {
        None => {
            let errors = nodes[at].counts.iter().sum::<u32>()
                - *nodes[at].counts.iter().max().unwrap();
            (1, errors)
        }
        Some((_, _, l, r)) => {
            let (ll, le) = compute_stats(nodes, l, stats);
            let (rl, re) = compute_stats(nodes, r, stats);
            (ll + rl, le + re)
        }
    };
    stats[at] = result;
    result
}

fn reachable(nodes: &[BuildNode], target: usize) -> bool {
    let mut stack = vec![0usize];
    while let Some(at) = stack.pop() {
        if at == target {
            return true;
        }
        if let Some((_, _, l, r)) = nodes[at].split {
            stack.push(l);
            stack.push(r);
        }
    }
    false
}

/// Compacts a build arena into the final node layout, dropping pruned
/// branches.
fn finalize(nodes: Vec<BuildNode>, width: usize) -> DecisionTree {
    fn copy(nodes: &[BuildNode], at: usize, out: &mut Vec<TreeNode>) -> usize {
        let index = out.len();
        match nodes[at].split {
            None => out.push(TreeNode::Leaf {
                counts: nodes[at].counts,
            }),
            Some((feature, threshold, l, r)) => {
                out.push(TreeNode::Leaf { counts: [0; 3] }); // placeholder
                let left = copy(nodes, l, out);
                let right = copy(nodes, r, out);
                out[index] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        index
    }
    let mut out = Vec::with_capacity(nodes.len());
    copy(&nodes, 0, &mut out);
    DecisionTree { nodes: out, width }
}
