//! Gradient-boosted regression trees for squared loss.
//!
//! Each round fits a tree to the current residuals with exact greedy split
//! search and L2-regularized leaf values `sum(residuals) / (count + lambda)`,
//! then adds it scaled by the shrinkage factor. Split gain is
//! `GL^2/(nL+lambda) + GR^2/(nR+lambda) - G^2/(n+lambda)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::N_FEATURES;
use crate::error::{Error, Result};
use crate::sampler::CdfSample;

pub const DEFAULT_MAX_DEPTH: usize = 15;
pub const DEFAULT_LAMBDA: f64 = 5.0;
pub const DEFAULT_ROUNDS: usize = 100;
pub const DEFAULT_SHRINKAGE: f64 = 0.3;
pub const DEFAULT_BASE_SCORE: f64 = 0.5;
pub const DEFAULT_MIN_SAMPLES: usize = 1;

/// Nodes larger than this search their split features in parallel.
const PARALLEL_SPLIT_THRESHOLD: usize = 32_768;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
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
    pub nodes: Vec<Node>,
    pub max_depth: usize,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// The tree as a step function of feature 0 with the other features
    /// fixed to `x`: pieces `(lo, hi, value)` meaning `value` for
    /// `lo < r <= hi`, in ascending r, covering the whole line.
    pub fn r_pieces(&self, x: &[f64], out: &mut Vec<(f64, f64, f64)>) {
        fn walk(
            nodes: &[Node],
            i: usize,
            lo: f64,
            hi: f64,
            x: &[f64],
            out: &mut Vec<(f64, f64, f64)>,
        ) {
            match nodes[i] {
                Node::Leaf { value } => out.push((lo, hi, value)),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature != 0 {
                        let next = if x[feature] <= threshold { left } else { right };
                        walk(nodes, next, lo, hi, x, out);
                        return;
                    }
                    if threshold > lo {
                        walk(nodes, left, lo, hi.min(threshold), x, out);
                    }
                    if threshold < hi {
                        walk(nodes, right, lo.max(threshold), hi, x, out);
                    }
                }
            }
        }
        walk(&self.nodes, 0, f64::NEG_INFINITY, f64::INFINITY, x, out);
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Children exist and come after their parent (so there are no cycles),
    /// every node is reachable once, leaves are finite, depth within bounds.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Empty("tree nodes"));
        }
        let mut seen = vec![false; self.nodes.len()];
        seen[0] = true;
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(Error::OutOfRange(format!("leaf {i} is not finite")));
                }
                Node::Leaf { .. } => {}
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= N_FEATURES || !threshold.is_finite() {
                        return Err(Error::OutOfRange(format!("bad split at node {i}")));
                    }
                    for child in [left, right] {
                        if child <= i || child >= self.nodes.len() || seen[child] {
                            return Err(Error::InvalidArgument(format!(
                                "bad child link at node {i}"
                            )));
                        }
                        seen[child] = true;
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("unreachable tree nodes".into()));
        }
        if self.depth() > self.max_depth {
            return Err(Error::OutOfRange("tree exceeds its max depth".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub lambda: f64,
    pub min_samples: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
            lambda: DEFAULT_LAMBDA,
            min_samples: DEFAULT_MIN_SAMPLES,
        }
    }
}

/// Column-major features with per-feature sample orderings.
struct Presorted {
    columns: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    fn new(rows: &[[f64; N_FEATURES]]) -> Self {
        let columns: Vec<Vec<f64>> = (0..N_FEATURES)
            .map(|f| rows.iter().map(|r| r[f]).collect())
            .collect();
        let order = columns
            .par_iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { columns, order }
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct TreeBuilder<'a> {
    data: &'a Presorted,
    residuals: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
}

impl TreeBuilder<'_> {
    fn best_split_for(
        &self,
        feature: usize,
        idx: &[u32],
        total: f64,
        min_gain: f64,
    ) -> Option<SplitCandidate> {
        let col = &self.data.columns[feature];
        let lambda = self.params.lambda;
        let n = idx.len();
        let parent = total * total / (n as f64 + lambda);
        let mut best: Option<SplitCandidate> = None;
        let mut left_sum = 0.0;
        for pos in 0..n - 1 {
            let i = idx[pos] as usize;
            left_sum += self.residuals[i];
            let n_left = pos + 1;
            let n_right = n - n_left;
            let (lo, hi) = (col[i], col[idx[pos + 1] as usize]);
            if lo >= hi || n_left < self.params.min_samples || n_right < self.params.min_samples {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / (n_left as f64 + lambda)
                + right_sum * right_sum / (n_right as f64 + lambda)
                - parent;
            if gain > min_gain && best.is_none_or(|b| gain > b.gain) {
                let mid = 0.5 * (lo + hi);
                let threshold = if mid < hi { mid } else { lo };
                best = Some(SplitCandidate {
                    gain,
                    feature,
                    threshold,
                });
            }
        }
        best
    }

    fn build(&mut self, order: Vec<Vec<u32>>, depth: usize) -> usize {
        let id = self.nodes.len();
        let idx0 = &order[0];
        let n = idx0.len();
        let total: f64 = idx0.iter().map(|&i| self.residuals[i as usize]).sum();
        let leaf = Node::Leaf {
            value: total / (n as f64 + self.params.lambda),
        };
        self.nodes.push(leaf.clone());
        if depth >= self.params.max_depth || n < 2 * self.params.min_samples.max(1) {
            return id;
        }
        let sum_sq: f64 = idx0
            .iter()
            .map(|&i| self.residuals[i as usize].powi(2))
            .sum();
        let min_gain = 1e-12 * sum_sq;

        let candidates: Vec<Option<SplitCandidate>> = if n >= PARALLEL_SPLIT_THRESHOLD {
            (0..N_FEATURES)
                .into_par_iter()
                .map(|f| self.best_split_for(f, &order[f], total, min_gain))
                .collect()
        } else {
            (0..N_FEATURES)
                .map(|f| self.best_split_for(f, &order[f], total, min_gain))
                .collect()
        };
        // ties go to the lowest feature index
        let best =
            candidates
                .into_iter()
                .flatten()
                .fold(None::<SplitCandidate>, |acc, c| match acc {
                    Some(a) if a.gain >= c.gain => Some(a),
                    _ => Some(c),
                });
        let Some(best) = best else {
            return id;
        };

        let col = &self.data.columns[best.feature];
        for &i in &order[best.feature] {
            self.goes_left[i as usize] = col[i as usize] <= best.threshold;
        }
        let mut left_order = Vec::with_capacity(N_FEATURES);
        let mut right_order = Vec::with_capacity(N_FEATURES);
        for list in order {
            let (l, r): (Vec<u32>, Vec<u32>) =
                list.into_iter().partition(|&i| self.goes_left[i as usize]);
            left_order.push(l);
            right_order.push(r);
        }
        let left = self.build(left_order, depth + 1);
        let right = self.build(right_order, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}

fn fit_presorted(data: &Presorted, residuals: &[f64], params: TreeParams) -> RegressionTree {
    let mut builder = TreeBuilder {
        data,
        residuals,
        params,
        nodes: Vec::new(),
        goes_left: vec![false; residuals.len()],
    };
    builder.build(data.order.clone(), 0);
    RegressionTree {
        nodes: builder.nodes,
        max_depth: params.max_depth,
    }
}

fn check_params(params: &TreeParams) -> Result<()> {
    if !(params.lambda >= 0.0) || !params.lambda.is_finite() {
        return Err(Error::OutOfRange(format!(
            "lambda must be >= 0, got {}",
            params.lambda
        )));
    }
    if params.min_samples == 0 {
        return Err(Error::InvalidArgument("min_samples must be >= 1".into()));
    }
    Ok(())
}

/// Fits one regression tree to `residuals`.
pub fn fit_tree(
    features: &[[f64; N_FEATURES]],
    residuals: &[f64],
    params: TreeParams,
) -> Result<RegressionTree> {
    if features.is_empty() {
        return Err(Error::Empty("tree training rows"));
    }
    if features.len() != residuals.len() {
        return Err(Error::ShapeMismatch {
            expected: features.len(),
            actual: residuals.len(),
        });
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::OutOfRange("residuals must be finite".into()));
    }
    check_params(&params)?;
    Ok(fit_presorted(&Presorted::new(features), residuals, params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtTrainConfig {
    pub rounds: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub base_score: f64,
    pub min_samples: usize,
}

impl Default for GbdtTrainConfig {
    fn default() -> Self {
        Self {
            rounds: DEFAULT_ROUNDS,
            shrinkage: DEFAULT_SHRINKAGE,
            max_depth: DEFAULT_MAX_DEPTH,
            lambda: DEFAULT_LAMBDA,
            base_score: DEFAULT_BASE_SCORE,
            min_samples: DEFAULT_MIN_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtProvenance {
    pub config: GbdtTrainConfig,
    pub split_search: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub base_score: f64,
    pub shrinkage: f64,
    pub lambda: f64,
    pub rounds: usize,
    pub trees: Vec<RegressionTree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_provenance: Option<GbdtProvenance>,
}

impl GbdtModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::OutOfRange(format!(
                "shrinkage must be in (0, 1], got {}",
                self.shrinkage
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::OutOfRange("lambda must be >= 0".into()));
        }
        if self.rounds != self.trees.len() {
            return Err(Error::ShapeMismatch {
                expected: self.rounds,
                actual: self.trees.len(),
            });
        }
        self.trees.iter().try_for_each(RegressionTree::validate)
    }

    /// Unclamped ensemble output `base + shrinkage * sum(tree(x))`.
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        self.base_score
            + self
                .trees
                .iter()
                .map(|t| self.shrinkage * t.predict(x))
                .sum::<f64>()
    }

    /// `max over 0 <= s <= r` of the clamped prediction, for each `r` in
    /// `rs` (ascending, non-negative), with the other features from `x`.
    ///
    /// The ensemble is a left-continuous step function of r, so the maximum
    /// over `[0, r]` is attained at 0, at an r-threshold, or at r itself.
    /// The result depends on r alone, never on which other points are asked.
    pub fn running_sup(&self, x: &[f64; N_FEATURES], rs: &[f64]) -> Vec<f64> {
        let Some(&r_max) = rs.last() else {
            return Vec::new();
        };
        let mut pieces: Vec<Vec<(f64, f64, f64)>> = Vec::with_capacity(self.trees.len());
        let mut points = Vec::with_capacity(rs.len() + 1);
        points.push(0.0);
        points.extend_from_slice(rs);
        for tree in &self.trees {
            let mut p = Vec::new();
            tree.r_pieces(x, &mut p);
            points.extend(p.iter().map(|q| q.1).filter(|&t| t > 0.0 && t <= r_max));
            pieces.push(p);
        }
        points.sort_by(f64::total_cmp);
        points.dedup();

        let mut acc = vec![0.0; points.len()];
        for p in &pieces {
            let mut k = 0;
            for (a, &r) in acc.iter_mut().zip(&points) {
                while r > p[k].1 {
                    k += 1;
                }
                *a += self.shrinkage * p[k].2;
            }
        }
        let mut running = f64::NEG_INFINITY;
        let sup: Vec<f64> = acc
            .iter()
            .map(|a| {
                running = running.max((self.base_score + a).clamp(0.0, 1.0));
                running
            })
            .collect();
        rs.iter()
            .map(|r| sup[points.partition_point(|p| p < r)])
            .collect()
    }

    pub fn predict_rows(&self, rows: &[[f64; N_FEATURES]]) -> Vec<f64> {
        rows.iter()
            .map(|r| self.predict_raw(r).clamp(0.0, 1.0))
            .collect()
    }
}

/// Ensemble output clamped to `[0, 1]`.
pub fn predict_gbdt(model: &GbdtModel, features_raw: &[f64]) -> Result<f64> {
    if features_raw.len() != N_FEATURES {
        return Err(Error::ShapeMismatch {
            expected: N_FEATURES,
            actual: features_raw.len(),
        });
    }
    Ok(model.predict_raw(features_raw).clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct GbdtTrainOutcome {
    pub model: GbdtModel,
    /// Training MSE after each round.
    pub mse_history: Vec<f64>,
}

pub fn train_gbdt(train: &[CdfSample], config: &GbdtTrainConfig) -> Result<GbdtTrainOutcome> {
    train_gbdt_with(train, config, |_, _| {})
}

/// [`train_gbdt`] with a callback invoked after each round as `(round, mse)`.
pub fn train_gbdt_with(
    train: &[CdfSample],
    config: &GbdtTrainConfig,
    mut on_round: impl FnMut(usize, f64),
) -> Result<GbdtTrainOutcome> {
    if train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if !(config.shrinkage > 0.0 && config.shrinkage <= 1.0) {
        return Err(Error::OutOfRange(format!(
            "shrinkage must be in (0, 1], got {}",
            config.shrinkage
        )));
    }
    let params = TreeParams {
        max_depth: config.max_depth,
        lambda: config.lambda,
        min_samples: config.min_samples,
    };
    check_params(&params)?;

    let rows: Vec<[f64; N_FEATURES]> = train.iter().map(|s| s.features.values).collect();
    let targets: Vec<f64> = train.iter().map(|s| s.target).collect();
    let data = Presorted::new(&rows);
    let mut prediction = vec![config.base_score; rows.len()];
    let mut residuals = vec![0.0; rows.len()];
    let mut trees = Vec::with_capacity(config.rounds);
    let mut history = Vec::with_capacity(config.rounds);

    for round in 0..config.rounds {
        for ((r, t), p) in residuals.iter_mut().zip(&targets).zip(&prediction) {
            *r = t - p;
        }
        let tree = fit_presorted(&data, &residuals, params);
        prediction
            .par_iter_mut()
            .zip(rows.par_iter())
            .for_each(|(p, x)| *p += config.shrinkage * tree.predict(x));
        trees.push(tree);
        let mse = targets
            .iter()
            .zip(&prediction)
            .map(|(t, p)| (t - p) * (t - p))
            .sum::<f64>()
            / rows.len() as f64;
        history.push(mse);
        on_round(round, mse);
    }

    Ok(GbdtTrainOutcome {
        model: GbdtModel {
            base_score: config.base_score,
            shrinkage: config.shrinkage,
            lambda: config.lambda,
            rounds: trees.len(),
            trees,
            training_provenance: Some(GbdtProvenance {
                config: config.clone(),
                split_search: "exact greedy, ties to lowest feature then lowest threshold".into(),
                dataset_hash: None,
            }),
        },
        mse_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FeatureVector;
    use crate::seed::rng_from;
    use rand::Rng;

    fn row(x: f64) -> [f64; N_FEATURES] {
        [x, 0.0, 0.0, 0.0, 0.0, 0.0]
    }

    fn sample(values: [f64; N_FEATURES], target: f64) -> CdfSample {
        CdfSample {
            features: FeatureVector { values },
            target,
        }
    }

    fn params(max_depth: usize, lambda: f64) -> TreeParams {
        TreeParams {
            max_depth,
            lambda,
            min_samples: 1,
        }
    }

    #[test]
    fn constant_residuals_give_single_leaf() {
        let rows: Vec<_> = (0..20).map(|i| row(i as f64 * 0.37)).collect();
        let tree = fit_tree(&rows, &[0.3; 20], params(6, 0.0)).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        let Node::Leaf { value } = tree.nodes[0] else {
            panic!()
        };
        assert!((value - 0.3).abs() < 1e-15);
    }

    #[test]
    fn single_split_two_points() {
        let rows = [row(0.0), row(1.0)];
        let tree = fit_tree(&rows, &[0.0, 1.0], params(1, 0.0)).unwrap();
        assert_eq!(
            tree.nodes,
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2
                },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 1.0 },
            ]
        );
        tree.validate().unwrap();
    }

    #[test]
    fn depth_zero_leaf_value() {
        let rows = [row(0.0), row(1.0)];
        let tree = fit_tree(&rows, &[0.0, 1.0], params(0, 5.0)).unwrap();
        assert_eq!(tree.nodes, vec![Node::Leaf { value: 1.0 / 7.0 }]);
        let tree = fit_tree(&rows, &[0.0, 1.0], params(0, 0.0)).unwrap();
        assert_eq!(tree.nodes, vec![Node::Leaf { value: 0.5 }]);
    }

    #[test]
    fn fit_tree_rejects_bad_input() {
        assert!(fit_tree(&[], &[], params(3, 1.0)).is_err());
        assert!(fit_tree(&[row(0.0)], &[f64::NAN], params(3, 1.0)).is_err());
        assert!(fit_tree(&[row(0.0)], &[0.0, 1.0], params(3, 1.0)).is_err());
        assert!(fit_tree(&[row(0.0)], &[0.0], params(3, -1.0)).is_err());
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // features 0 and 2 separate the targets identically
        let rows = [
            [0.0, 5.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 5.0, 1.0, 0.0, 0.0, 0.0],
        ];
        let tree = fit_tree(&rows, &[0.0, 1.0], params(1, 0.0)).unwrap();
        assert!(matches!(tree.nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn single_round_hand_computation() {
        let data: Vec<_> = [0.0, 1.0, 1.0, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &t)| sample(row(i as f64), t))
            .collect();
        let cfg = GbdtTrainConfig {
            rounds: 1,
            shrinkage: 1.0,
            max_depth: 0,
            lambda: 5.0,
            base_score: 0.5,
            min_samples: 1,
        };
        let out = train_gbdt(&data, &cfg).unwrap();
        let leaf = 1.0 / 9.0;
        assert_eq!(out.model.trees[0].nodes, vec![Node::Leaf { value: leaf }]);
        for x in [row(0.0), row(17.0), [3.0; 6]] {
            let y = predict_gbdt(&out.model, &x).unwrap();
            assert!((y - (0.5 + leaf)).abs() < 1e-15);
            assert!((y - 0.6111).abs() < 1e-4);
        }
        out.model.validate().unwrap();
    }

    #[test]
    fn zero_residual_targets_keep_base_score() {
        let data: Vec<_> = (0..10).map(|i| sample(row(i as f64), 0.5)).collect();
        let cfg = GbdtTrainConfig {
            rounds: 3,
            max_depth: 4,
            ..Default::default()
        };
        let out = train_gbdt(&data, &cfg).unwrap();
        for t in &out.model.trees {
            assert_eq!(t.nodes, vec![Node::Leaf { value: 0.0 }]);
        }
        assert!(data
            .iter()
            .all(|s| predict_gbdt(&out.model, &s.features.values).unwrap() == 0.5));
    }

    #[test]
    fn empty_model_predicts_base_and_clamps() {
        let mut m = GbdtModel {
            base_score: 0.5,
            shrinkage: 0.3,
            lambda: 5.0,
            rounds: 0,
            trees: vec![],
            training_provenance: None,
        };
        assert_eq!(predict_gbdt(&m, &[0.0; 6]).unwrap(), 0.5);
        m.base_score = -0.2;
        assert_eq!(m.predict_raw(&[0.0; 6]), -0.2);
        assert_eq!(predict_gbdt(&m, &[0.0; 6]).unwrap(), 0.0);
        assert!(predict_gbdt(&m, &[0.0; 4]).is_err());
    }

    #[test]
    fn memorizes_small_distinct_sets() {
        let mut rng = rng_from(3);
        let data: Vec<_> = (0..64)
            .map(|_| {
                sample(
                    std::array::from_fn(|_| rng.random_range(0.0..1.0)),
                    rng.random(),
                )
            })
            .collect();
        let cfg = GbdtTrainConfig {
            rounds: 1,
            shrinkage: 1.0,
            max_depth: 64,
            lambda: 0.0,
            base_score: 0.5,
            min_samples: 1,
        };
        let out = train_gbdt(&data, &cfg).unwrap();
        assert!(out.mse_history[0] < 1e-20, "{}", out.mse_history[0]);
    }

    #[test]
    fn training_mse_never_increases() {
        let mut rng = rng_from(8);
        let data: Vec<_> = (0..500)
            .map(|_| {
                let x: [f64; 6] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
                let t = (x[0] * 3.0).sin().abs() * 0.5 + 0.3 * x[3];
                sample(x, t)
            })
            .collect();
        let cfg = GbdtTrainConfig {
            rounds: 25,
            max_depth: 5,
            ..Default::default()
        };
        let out = train_gbdt(&data, &cfg).unwrap();
        assert!(
            out.mse_history.windows(2).all(|w| w[1] <= w[0]),
            "{:?}",
            out.mse_history
        );
        assert_eq!(out.model.rounds, 25);
        out.model.validate().unwrap();
        let again = train_gbdt(&data, &cfg).unwrap();
        assert_eq!(out.model, again.model);
    }

    #[test]
    fn validate_catches_broken_links() {
        let tree = RegressionTree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 0,
                    right: 1,
                },
                Node::Leaf { value: 1.0 },
            ],
            max_depth: 3,
        };
        assert!(tree.validate().is_err());
    }
    fn wiggly_model() -> GbdtModel {
        // non-monotone in r, with a second feature that changes the shape
        let mut rng = rng_from(17);
        let samples: Vec<CdfSample> = (0..600)
            .map(|_| {
                let r: f64 = rng.random_range(0.0..1.5);
                let w: f64 = if rng.random_bool(0.5) { 1.0 } else { 2.0 };
                let t = (0.5 + 0.4 * (6.0 * r * w).sin()).clamp(0.0, 1.0);
                sample([r, 0.0, 0.0, w, 0.0, 0.0], t)
            })
            .collect();
        let cfg = GbdtTrainConfig {
            rounds: 6,
            max_depth: 6,
            ..Default::default()
        };
        train_gbdt(&samples, &cfg).unwrap().model
    }

    fn r_thresholds(m: &GbdtModel) -> Vec<f64> {
        m.trees
            .iter()
            .flat_map(|t| &t.nodes)
            .filter_map(|n| match *n {
                Node::Split {
                    feature: 0,
                    threshold,
                    ..
                } => Some(threshold),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn running_sup_matches_brute_force() {
        let m = wiggly_model();
        let ts = r_thresholds(&m);
        for w in [1.0, 2.0] {
            let x = [0.0, 0.0, 0.0, w, 0.0, 0.0];
            let f = |r: f64| m.predict_raw(&[r, 0.0, 0.0, w, 0.0, 0.0]).clamp(0.0, 1.0);
            let rs: Vec<f64> = (0..=60).map(|k| k as f64 * 0.025).collect();
            let sup = m.running_sup(&x, &rs);
            for (&r, &s) in rs.iter().zip(&sup) {
                let brute = ts
                    .iter()
                    .filter(|&&t| t > 0.0 && t <= r)
                    .map(|&t| f(t))
                    .chain([f(0.0), f(r)])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(s, brute, "r={r}");
                // dense sampling never exceeds the supremum
                let dense = (0..=400)
                    .map(|k| f(r * k as f64 / 400.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(dense <= s);
            }
            assert!(sup.windows(2).all(|p| p[0] <= p[1]));
            assert!(
                rs.iter().zip(&sup).any(|(&r, &s)| f(r) < s),
                "fixture should be non-monotone"
            );
        }
    }

    #[test]
    fn running_sup_ignores_the_other_query_points() {
        let m = wiggly_model();
        let x = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let coarse: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let fine: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let a = m.running_sup(&x, &coarse);
        let b = m.running_sup(&x, &fine);
        for (k, v) in a.iter().enumerate() {
            assert_eq!(*v, b[2 * k]);
        }
        for (k, &r) in coarse.iter().enumerate() {
            assert_eq!(m.running_sup(&x, &[r])[0], a[k]);
        }
        assert!(m.running_sup(&x, &[]).is_empty());
    }

    #[test]
    fn r_pieces_reproduce_predictions() {
        let m = wiggly_model();
        let x = [0.0, 0.0, 0.0, 2.0, 0.0, 0.0];
        for tree in &m.trees {
            let mut p = Vec::new();
            tree.r_pieces(&x, &mut p);
            assert_eq!(p[0].0, f64::NEG_INFINITY);
            assert_eq!(p.last().unwrap().1, f64::INFINITY);
            assert!(p.windows(2).all(|q| q[0].1 == q[1].0));
            for k in 0..150 {
                let r = k as f64 * 0.01;
                let piece = p.iter().find(|q| q.0 < r && r <= q.1).unwrap();
                assert_eq!(piece.2, tree.predict(&[r, 0.0, 0.0, 2.0, 0.0, 0.0]));
            }
        }
    }
}
