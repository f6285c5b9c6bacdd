//! From-scratch binary random forest: CART-style trees grown on bootstrap
//! resamples, splits chosen by Gini impurity over a random feature subset.
//!
//! Randomness comes from an explicitly seeded ChaCha8 generator; each tree
//! seeds its own stream from `rng_seed` and the tree index, so training is
//! reproducible and trees are independent of growth order. The model
//! serializes to a versioned JSON document (see [`ForestModel::save`]).

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureDescriptor, FeatureMatrix};
use crate::seed::mix;

/// Model file format version accepted by this build.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Random forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until purity or `min_samples_split`.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Candidate features considered per split; `None` uses ⌈√d⌉.
    pub features_per_split: Option<usize>,
    /// Bootstrap-resample each tree's training set (n draws with
    /// replacement).
    pub bootstrap: bool,
    pub rng_seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
            bootstrap: true,
            rng_seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "min_samples_split must be >= 2".into(),
            ));
        }
        if let Some(m) = self.features_per_split {
            if m == 0 || m > n_features {
                return Err(Error::InvalidConfig(format!(
                    "features_per_split {m} outside [1, {n_features}]"
                )));
            }
        }
        Ok(())
    }

    fn resolved_features_per_split(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .min(n_features)
            .max(1)
    }
}

/// One node of a flattened decision tree. Children are indices into the
/// tree's node array; samples with `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Training sample counts per class `[idle, word]`.
        counts: [u64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Fraction of class-1 training samples in the leaf this input reaches.
    fn leaf_score(&self, values: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if values[*feature_index] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                TreeNode::Leaf { counts } => {
                    let total = counts[0] + counts[1];
                    return counts[1] as f64 / total as f64;
                }
            }
        }
    }
}

/// A trained ensemble plus the feature layout it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub feature_layout: Vec<FeatureDescriptor>,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    /// Classifies one instance.
    ///
    /// The score is the mean class-1 leaf fraction over all trees; the
    /// label is 1 iff score ≥ 0.5.
    pub fn predict(&self, values: &[f64]) -> Result<(u8, f64)> {
        if values.len() != self.feature_layout.len() {
            return Err(Error::DimensionMismatch {
                found: values.len(),
                expected: self.feature_layout.len(),
            });
        }
        let score = self
            .trees
            .iter()
            .map(|t| t.leaf_score(values))
            .sum::<f64>()
            / self.trees.len() as f64;
        Ok((u8::from(score >= 0.5), score))
    }

    /// Writes the model as a versioned JSON document:
    ///
    /// ```json
    /// {
    ///   "format_version": 1,
    ///   "rng_algorithm": "chacha8+splitmix64",
    ///   "params": { "n_trees": ..., "max_depth": ..., "min_samples_split": ...,
    ///               "features_per_split": ..., "bootstrap": ..., "rng_seed": ... },
    ///   "feature_layout": [ { "channel": "...", "feature": "..." }, ... ],
    ///   "trees": [ { "nodes": [ {"kind": "split", "feature_index": ..,
    ///                            "threshold": .., "left": .., "right": ..},
    ///                           {"kind": "leaf", "counts": [.., ..]} ] }, ... ]
    /// }
    /// ```
    pub fn save(&self, path: &Path) -> Result<()> {
        let doc = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            rng_algorithm: RNG_ALGORITHM.to_owned(),
            params: self.params.clone(),
            feature_layout: self.feature_layout.clone(),
            trees: self.trees.clone(),
        };
        let json = serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::MalformedModelFile(e.to_string()))?;
        fs::write(path, json)?;
        Ok(())
    }

    /// Loads and validates a model written by [`ForestModel::save`].
    pub fn load(path: &Path) -> Result<ForestModel> {
        let text = fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::MalformedModelFile(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::MalformedModelFile("missing format_version".into()))?;
        if version != MODEL_FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: version as u32,
                supported: MODEL_FORMAT_VERSION,
            });
        }
        let doc: ModelFile = serde_json::from_value(value)
            .map_err(|e| Error::MalformedModelFile(e.to_string()))?;
        let model = ForestModel {
            params: doc.params,
            feature_layout: doc.feature_layout,
            trees: doc.trees,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let d = self.feature_layout.len();
        if self.trees.is_empty() || d == 0 {
            return Err(Error::MalformedModelFile(
                "model must have at least one tree and one feature".into(),
            ));
        }
        for tree in &self.trees {
            if tree.nodes.is_empty() {
                return Err(Error::MalformedModelFile("empty tree".into()));
            }
            for node in &tree.nodes {
                match node {
                    TreeNode::Split {
                        feature_index,
                        threshold,
                        left,
                        right,
                    } => {
                        if *feature_index >= d {
                            return Err(Error::MalformedModelFile(format!(
                                "feature index {feature_index} out of range (d = {d})"
                            )));
                        }
                        if !threshold.is_finite() {
                            return Err(Error::MalformedModelFile(
                                "non-finite split threshold".into(),
                            ));
                        }
                        if *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                            return Err(Error::MalformedModelFile(
                                "child index out of range".into(),
                            ));
                        }
                    }
                    TreeNode::Leaf { counts } => {
                        if counts[0] + counts[1] == 0 {
                            return Err(Error::MalformedModelFile("empty leaf".into()));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

const RNG_ALGORITHM: &str = "chacha8+splitmix64";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    rng_algorithm: String,
    params: ForestParams,
    feature_layout: Vec<FeatureDescriptor>,
    trees: Vec<DecisionTree>,
}

/// Trains a forest on a labeled matrix. Deterministic given
/// `params.rng_seed`.
pub fn train(matrix: &FeatureMatrix, params: &ForestParams) -> Result<ForestModel> {
    let (model, _) = train_inner(matrix, params, false)?;
    Ok(model)
}

/// Trains a forest and also reports the out-of-bag error: the
/// misclassification rate of each training instance under the vote of the
/// trees whose bootstrap sample excluded it.
pub fn train_with_oob(matrix: &FeatureMatrix, params: &ForestParams) -> Result<(ForestModel, f64)> {
    let (model, oob) = train_inner(matrix, params, true)?;
    Ok((model, oob.unwrap_or(0.0)))
}

fn train_inner(
    matrix: &FeatureMatrix,
    params: &ForestParams,
    want_oob: bool,
) -> Result<(ForestModel, Option<f64>)> {
    let labels = matrix.labels.as_ref().ok_or(Error::MissingLabels)?;
    let n = matrix.rows.len();
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let d = matrix.layout.len();
    for (i, row) in matrix.rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::InconsistentWidth {
                row: i,
                found: row.len(),
                expected: d,
            });
        }
    }
    if labels.len() != n {
        return Err(Error::InconsistentWidth {
            row: labels.len(),
            found: labels.len(),
            expected: n,
        });
    }
    params.validate(d)?;
    let m = params.resolved_features_per_split(d);

    let mut trees = Vec::with_capacity(params.n_trees);
    let mut bags: Vec<Vec<bool>> = Vec::new();
    for tree_idx in 0..params.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(params.rng_seed, tree_idx as u64));
        let indices: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        if want_oob {
            let mut in_bag = vec![false; n];
            for &i in &indices {
                in_bag[i] = true;
            }
            bags.push(in_bag);
        }
        let mut builder = TreeBuilder {
            rows: &matrix.rows,
            labels,
            features_per_split: m,
            n_features: d,
            min_samples_split: params.min_samples_split,
            max_depth: params.max_depth,
            rng,
            nodes: Vec::new(),
        };
        builder.build(indices, 0);
        trees.push(DecisionTree {
            nodes: builder.nodes,
        });
    }

    let model = ForestModel {
        params: params.clone(),
        feature_layout: matrix.layout.clone(),
        trees,
    };

    let oob = if want_oob {
        let mut evaluated = 0usize;
        let mut wrong = 0usize;
        for i in 0..n {
            let mut score = 0.0;
            let mut voters = 0usize;
            for (t, bag) in bags.iter().enumerate() {
                if !bag[i] {
                    score += model.trees[t].leaf_score(&matrix.rows[i]);
                    voters += 1;
                }
            }
            if voters > 0 {
                evaluated += 1;
                let label = u8::from(score / voters as f64 >= 0.5);
                if label != labels[i] {
                    wrong += 1;
                }
            }
        }
        Some(if evaluated == 0 {
            0.0
        } else {
            wrong as f64 / evaluated as f64
        })
    } else {
        None
    };

    Ok((model, oob))
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [u8],
    features_per_split: usize,
    n_features: usize,
    min_samples_split: usize,
    max_depth: Option<usize>,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// Grows the subtree for `indices`, returning its node index.
    fn build(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let counts = self.class_counts(&indices);
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || indices.len() < self.min_samples_split {
            return self.push_leaf(counts);
        }
        let Some((feature, threshold)) = self.best_split(&indices) else {
            // all candidate features constant on this partition
            return self.push_leaf(counts);
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| self.rows[i][feature] <= threshold);

        let node = self.nodes.len();
        self.nodes.push(TreeNode::Split {
            feature_index: feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        if let TreeNode::Split {
            left: l, right: r, ..
        } = &mut self.nodes[node]
        {
            *l = left;
            *r = right;
        }
        node
    }

    fn push_leaf(&mut self, counts: [u64; 2]) -> usize {
        self.nodes.push(TreeNode::Leaf { counts });
        self.nodes.len() - 1
    }

    fn class_counts(&self, indices: &[usize]) -> [u64; 2] {
        let mut counts = [0u64; 2];
        for &i in indices {
            counts[self.labels[i] as usize] += 1;
        }
        counts
    }

    /// Minimum-Gini split over a random subset of features; thresholds are
    /// midpoints between consecutive distinct sorted values. Returns `None`
    /// when no candidate feature separates the partition.
    fn best_split(&mut self, indices: &[usize]) -> Option<(usize, f64)> {
        let candidates =
            rand::seq::index::sample(&mut self.rng, self.n_features, self.features_per_split);
        let n = indices.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None; // (gini, feature, threshold)

        for feature in candidates {
            let mut sorted: Vec<(f64, u8)> = indices
                .iter()
                .map(|&i| (self.rows[i][feature], self.labels[i]))
                .collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

            let total = self.class_counts(indices);
            let mut left = [0u64; 2];
            for w in 0..sorted.len() - 1 {
                left[sorted[w].1 as usize] += 1;
                if sorted[w].0 == sorted[w + 1].0 {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let gini = weighted_gini(left, right) / n;
                if best.as_ref().is_none_or(|(g, _, _)| gini < *g) {
                    let threshold = 0.5 * (sorted[w].0 + sorted[w + 1].0);
                    best = Some((gini, feature, threshold));
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }
}

/// `n_l · gini_l + n_r · gini_r` (caller divides by the partition size).
fn weighted_gini(left: [u64; 2], right: [u64; 2]) -> f64 {
    let side = |c: [u64; 2]| {
        let n = (c[0] + c[1]) as f64;
        let p0 = c[0] as f64 / n;
        let p1 = c[1] as f64 / n;
        n * (1.0 - p0 * p0 - p1 * p1)
    };
    side(left) + side(right)
}
