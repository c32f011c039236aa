//! Least-squares gradient boosting with exact greedy regression trees.
//!
//! Trees are grown level by level. Each feature is sorted once per fit; at
//! every level a single pass over each feature's sorted order evaluates every
//! candidate threshold for every open node at once, so a tree costs
//! O(depth · features · rows).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 || self.max_depth > 30 {
            return Err(Error::invalid(format!("max depth must lie in 1..=30, got {}", self.max_depth)));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

/// One node of a regression tree. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    #[inline]
    pub fn evaluate(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize) -> usize {
            match &nodes[idx] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub initial_prediction: f64,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
}

impl GbdtModel {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_row_truncated(row, self.trees.len())
    }

    /// Prediction using only the first `n_trees` trees.
    #[inline]
    pub fn predict_row_truncated(&self, row: &[f64], n_trees: usize) -> f64 {
        let mut f = self.initial_prediction;
        for tree in &self.trees[..n_trees.min(self.trees.len())] {
            f += self.learning_rate * tree.evaluate(row);
        }
        f
    }
}

/// A candidate must beat the current best gain by this relative margin.
/// Different features often induce the same partition, and their gains then
/// differ only by rounding; keeping the first makes the choice independent of
/// row order.
const GAIN_TIE_RTOL: f64 = 1e-12;

struct OpenNode {
    node: usize,
    sum: f64,
    count: usize,
    depth: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Boosted trees on squared error, starting from the target mean.
pub fn gbdt_fit(features: &DenseMatrix, targets: &[f64], params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    super::elastic_net::check_inputs(features, targets)?;

    let n = targets.len();
    let d = features.cols();
    let first = targets[0];
    let initial_prediction = if targets.iter().all(|&y| y == first) {
        first
    } else {
        targets.iter().sum::<f64>() / n as f64
    };

    let columns: Vec<Vec<f64>> = (0..d).map(|j| features.column(j)).collect();
    let sorted: Vec<Vec<u32>> = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            idx
        })
        .collect();

    let mut fitted = vec![initial_prediction; n];
    let mut residual = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut builder = TreeBuilder::new(n);
    for _ in 0..params.n_trees {
        for ((r, y), f) in residual.iter_mut().zip(targets).zip(&fitted) {
            *r = y - f;
        }
        let tree = builder.grow(&columns, &sorted, &residual, params);
        for (i, f) in fitted.iter_mut().enumerate() {
            *f += params.learning_rate * builder.leaf_value_of_row(&tree, i);
        }
        trees.push(tree);
    }

    Ok(GbdtModel {
        initial_prediction,
        learning_rate: params.learning_rate,
        max_depth: params.max_depth,
        n_features: d,
        trees,
    })
}

struct TreeBuilder {
    node_of: Vec<u32>,
}

impl TreeBuilder {
    fn new(n: usize) -> Self {
        Self { node_of: vec![0; n] }
    }

    fn leaf_value_of_row(&self, tree: &RegressionTree, row: usize) -> f64 {
        match tree.nodes[self.node_of[row] as usize] {
            TreeNode::Leaf { value } => value,
            TreeNode::Split { .. } => unreachable!("rows always end in leaves"),
        }
    }

    fn grow(
        &mut self,
        columns: &[Vec<f64>],
        sorted: &[Vec<u32>],
        residual: &[f64],
        params: &GbdtParams,
    ) -> RegressionTree {
        let n = residual.len();
        self.node_of.iter_mut().for_each(|v| *v = 0);
        let mut nodes = vec![TreeNode::Leaf {
            value: residual.iter().sum::<f64>() / n as f64,
        }];
        let mut open = vec![OpenNode {
            node: 0,
            sum: residual.iter().sum(),
            count: n,
            depth: 0,
        }];
        let msl = params.min_samples_leaf;

        while !open.is_empty() {
            // Nodes whose residuals are all equal cannot improve.
            let mut lo = vec![f64::INFINITY; nodes.len()];
            let mut hi = vec![f64::NEG_INFINITY; nodes.len()];
            for (i, &r) in residual.iter().enumerate() {
                let v = self.node_of[i] as usize;
                lo[v] = lo[v].min(r);
                hi[v] = hi[v].max(r);
            }
            open.retain(|o| o.depth < params.max_depth && o.count >= 2 * msl && lo[o.node] < hi[o.node]);
            if open.is_empty() {
                break;
            }

            let mut slot_of = vec![u32::MAX; nodes.len()];
            for (s, o) in open.iter().enumerate() {
                slot_of[o.node] = s as u32;
            }
            let slots = open.len();
            let mut best: Vec<Option<Candidate>> = vec![None; slots];
            let mut left_sum = vec![0.0; slots];
            let mut left_count = vec![0usize; slots];
            let mut last = vec![0.0; slots];

            for (feature, order) in sorted.iter().enumerate() {
                let col = &columns[feature];
                left_sum.iter_mut().for_each(|v| *v = 0.0);
                left_count.iter_mut().for_each(|v| *v = 0);
                for &row in order {
                    let row = row as usize;
                    let slot = slot_of[self.node_of[row] as usize];
                    if slot == u32::MAX {
                        continue;
                    }
                    let s = slot as usize;
                    let x = col[row];
                    let nl = left_count[s];
                    if nl > 0 && x > last[s] {
                        let o = &open[s];
                        let nr = o.count - nl;
                        if nl >= msl && nr >= msl {
                            let sl = left_sum[s];
                            let sr = o.sum - sl;
                            let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - o.sum * o.sum / o.count as f64;
                            if best[s].map_or(gain > 0.0, |c| gain > c.gain * (1.0 + GAIN_TIE_RTOL)) {
                                best[s] = Some(Candidate {
                                    gain,
                                    feature,
                                    threshold: midpoint(last[s], x),
                                });
                            }
                        }
                    }
                    left_sum[s] += residual[row];
                    left_count[s] = nl + 1;
                    last[s] = x;
                }
            }

            // Materialize the chosen splits and route rows to the children.
            let mut child_of = vec![(u32::MAX, u32::MAX); nodes.len()];
            let mut split_of: Vec<Option<(usize, f64)>> = vec![None; nodes.len()];
            let mut next_open = Vec::new();
            for (s, o) in open.iter().enumerate() {
                let Some(c) = best[s] else { continue };
                let left = nodes.len();
                let right = left + 1;
                nodes.push(TreeNode::Leaf { value: 0.0 });
                nodes.push(TreeNode::Leaf { value: 0.0 });
                nodes[o.node] = TreeNode::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                child_of[o.node] = (left as u32, right as u32);
                split_of[o.node] = Some((c.feature, c.threshold));
                for child in [left, right] {
                    next_open.push(OpenNode {
                        node: child,
                        sum: 0.0,
                        count: 0,
                        depth: o.depth + 1,
                    });
                }
            }
            if next_open.is_empty() {
                break;
            }
            let mut sums = vec![0.0; nodes.len()];
            let mut counts = vec![0usize; nodes.len()];
            for (i, v) in self.node_of.iter_mut().enumerate() {
                let parent = *v as usize;
                if let Some((feature, threshold)) = split_of[parent] {
                    let (l, r) = child_of[parent];
                    *v = if columns[feature][i] <= threshold { l } else { r };
                }
                sums[*v as usize] += residual[i];
                counts[*v as usize] += 1;
            }
            for o in next_open.iter_mut() {
                o.sum = sums[o.node];
                o.count = counts[o.node];
                nodes[o.node] = TreeNode::Leaf {
                    value: o.sum / o.count as f64,
                };
            }
            open = next_open;
        }

        RegressionTree { nodes }
    }
}

/// Threshold strictly below `hi` and at least `lo`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;

    fn mse(model: &GbdtModel, x: &DenseMatrix, y: &[f64], trees: usize) -> f64 {
        y.iter()
            .enumerate()
            .map(|(i, t)| {
                let e = t - model.predict_row_truncated(x.row(i), trees);
                e * e
            })
            .sum::<f64>()
            / y.len() as f64
    }

    #[test]
    fn zero_trees_predict_mean() {
        let x = DenseMatrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let params = GbdtParams {
            n_trees: 0,
            ..Default::default()
        };
        let m = gbdt_fit(&x, &[1.0, 2.0, 6.0], &params).unwrap();
        assert_eq!(m.predict_row(&[10.0]), 3.0);
    }

    #[test]
    fn constant_targets_give_zero_trees() {
        let x = DenseMatrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]).unwrap();
        let m = gbdt_fit(&x, &[0.1; 4], &GbdtParams::default()).unwrap();
        for tree in &m.trees {
            assert_eq!(tree.nodes, vec![TreeNode::Leaf { value: 0.0 }]);
        }
        assert_eq!(m.predict_row(&[2.5]), 0.1);
    }

    #[test]
    fn single_split_recovers_step() {
        // Brute force over every threshold: the only zero-error split is at 0.
        let xs = [-2.0, -1.5, -0.3, 0.4, 1.0, 2.2];
        let y: Vec<f64> = xs.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let x = DenseMatrix::from_rows(&xs.iter().map(|&v| [v]).collect::<Vec<_>>()).unwrap();
        let params = GbdtParams {
            n_trees: 1,
            learning_rate: 1.0,
            max_depth: 1,
            min_samples_leaf: 1,
        };
        let m = gbdt_fit(&x, &y, &params).unwrap();
        for (i, &target) in y.iter().enumerate() {
            assert!((m.predict_row(x.row(i)) - target).abs() < 1e-12);
        }
        match &m.trees[0].nodes[0] {
            TreeNode::Split { threshold, .. } => assert!((*threshold - 0.05).abs() < 1e-12),
            other => panic!("expected a split, got {other:?}"),
        }
    }

    #[test]
    fn ties_prefer_lowest_feature_then_threshold() {
        // Both columns separate the targets identically.
        let x = DenseMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let params = GbdtParams {
            n_trees: 1,
            learning_rate: 1.0,
            max_depth: 1,
            min_samples_leaf: 1,
        };
        let m = gbdt_fit(&x, &[0.0, 0.0, 1.0, 1.0], &params).unwrap();
        match &m.trees[0].nodes[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 1.5);
            }
            other => panic!("{other:?}"),
        }
        // Symmetric targets: splits at 0.5 and 2.5 tie; the lower one wins.
        let m = gbdt_fit(&x, &[0.0, 1.0, 1.0, 0.0], &params).unwrap();
        match &m.trees[0].nodes[0] {
            TreeNode::Split { threshold, .. } => assert_eq!(*threshold, 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let x = DenseMatrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]).unwrap();
        let params = GbdtParams {
            n_trees: 1,
            learning_rate: 1.0,
            max_depth: 3,
            min_samples_leaf: 2,
        };
        let m = gbdt_fit(&x, &[0.0, 10.0, 0.0, 0.0, 0.0], &params).unwrap();
        let mut counts = std::collections::HashMap::new();
        for i in 0..5 {
            let leaf = format!("{:?}", m.trees[0].evaluate(x.row(i)));
            *counts.entry(leaf).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 2));
    }

    #[test]
    fn depth_and_leaf_bounds() {
        let mut s = RandomStream::new(1, 0);
        let (n, d) = (200, 4);
        let x = DenseMatrix::new(n, d, s.normals(n * d)).unwrap();
        let y: Vec<f64> = (0..n).map(|i| x.get(i, 0).sin() * 3.0 + x.get(i, 2) + s.standard_normal()).collect();
        let params = GbdtParams {
            n_trees: 20,
            max_depth: 4,
            ..Default::default()
        };
        let m = gbdt_fit(&x, &y, &params).unwrap();
        for t in &m.trees {
            assert!(t.depth() <= 4);
            assert!(t.leaf_count() <= 16);
            for node in &t.nodes {
                if let TreeNode::Split { feature, .. } = node {
                    assert!(*feature < d);
                }
            }
        }
        assert!(mse(&m, &x, &y, 20) < mse(&m, &x, &y, 0));
    }

    #[test]
    fn rejects_bad_parameters() {
        let x = DenseMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        for params in [
            GbdtParams {
                learning_rate: 0.0,
                ..Default::default()
            },
            GbdtParams {
                learning_rate: 1.5,
                ..Default::default()
            },
            GbdtParams {
                max_depth: 0,
                ..Default::default()
            },
            GbdtParams {
                min_samples_leaf: 0,
                ..Default::default()
            },
        ] {
            assert!(gbdt_fit(&x, &[0.0, 1.0], &params).is_err());
        }
        assert!(gbdt_fit(&x, &[0.0], &GbdtParams::default()).is_err());
    }
}
