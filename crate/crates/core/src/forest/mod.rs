//! Compact random forest over binned features.
//!
//! Internal nodes test `bin(feature) > t` with `t` in `{0, 1}`; the left
//! (`no`) child is taken when the predicate is false.

mod eval;
mod split;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{loocv, majority_baseline, FoldResult, LoocvReport};
pub use split::{split_gain, SplitCriterion};

use crate::exec::Execution;
use crate::features::{Bin, BinnedMatrix, FeatureId};
use crate::fingerprint::{self, Provenance};
use crate::seed;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("training matrix has no rows")]
    NoRows,
    #[error("training matrix has no features")]
    NoFeatures,
    #[error("{rows} rows but {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Candidate features drawn per split; `None` means `ceil(sqrt(features))`.
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
    pub criterion: SplitCriterion,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 7,
            max_depth: 3,
            feature_subsample: None,
            bootstrap: true,
            seed: 0,
            criterion: SplitCriterion::Gini,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidParams("n_trees must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(ForestError::InvalidParams("max_depth must be at least 1".into()));
        }
        if self.feature_subsample == Some(0) {
            return Err(ForestError::InvalidParams("feature_subsample must be at least 1".into()));
        }
        Ok(())
    }

    pub fn candidates_per_split(&self, n_features: usize) -> usize {
        let default = (n_features as f64).sqrt().ceil() as usize;
        self.feature_subsample.unwrap_or(default).clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: FeatureId,
        threshold: u8,
        no: Box<Node>,
        yes: Box<Node>,
    },
    Leaf {
        label: bool,
        /// `[negatives, positives]` among the training samples reaching the leaf.
        counts: [usize; 2],
    },
}

/// Bin source for prediction. Missing features read as bin 0.
pub trait BinLookup {
    fn bin_of(&self, feature: &FeatureId) -> Bin;
}

impl BinLookup for BTreeMap<FeatureId, Bin> {
    fn bin_of(&self, feature: &FeatureId) -> Bin {
        self.get(feature).copied().unwrap_or_default()
    }
}

impl BinLookup for HashMap<FeatureId, Bin> {
    fn bin_of(&self, feature: &FeatureId) -> Bin {
        self.get(feature).copied().unwrap_or_default()
    }
}

impl Node {
    pub fn leaf(label: bool) -> Node {
        Node::Leaf {
            label,
            counts: [0, 0],
        }
    }

    pub fn split(feature: FeatureId, threshold: u8, no: Node, yes: Node) -> Node {
        Node::Split {
            feature,
            threshold,
            no: Box::new(no),
            yes: Box::new(yes),
        }
    }

    /// Follows the row to a leaf and returns its label.
    pub fn classify<R: BinLookup + ?Sized>(&self, row: &R) -> bool {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { label, .. } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    no,
                    yes,
                } => {
                    node = if row.bin_of(feature).get() > *threshold {
                        yes
                    } else {
                        no
                    };
                }
            }
        }
    }

    pub fn internal_nodes(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { no, yes, .. } => 1 + no.internal_nodes() + yes.internal_nodes(),
        }
    }

    /// Longest root-to-leaf path counted in internal nodes.
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { no, yes, .. } => 1 + no.depth().max(yes.depth()),
        }
    }

    /// Pre-order visit of every internal node's `(feature, threshold)`.
    pub fn for_each_predicate<'a>(&'a self, f: &mut impl FnMut(&'a FeatureId, u8)) {
        if let Node::Split {
            feature,
            threshold,
            no,
            yes,
        } = self
        {
            f(feature, *threshold);
            no.for_each_predicate(f);
            yes.for_each_predicate(f);
        }
    }
}

/// The outcome of a majority vote over trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub label: bool,
    pub votes_true: usize,
    pub votes_total: usize,
    /// Set when an even number of trees split evenly; the label is then `false`.
    #[serde(default)]
    pub tie: bool,
}

impl Vote {
    pub fn from_labels<I: IntoIterator<Item = bool>>(labels: I) -> Vote {
        let (mut t, mut n) = (0, 0);
        for l in labels {
            n += 1;
            t += usize::from(l);
        }
        let tie = n > 0 && 2 * t == n;
        Vote {
            label: 2 * t > n,
            votes_true: t,
            votes_total: n,
            tie,
        }
    }

    pub fn votes_false(&self) -> usize {
        self.votes_total - self.votes_true
    }
}

/// A trained forest. Serialized as `forest.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub trees: Vec<Node>,
    /// Hash of the binned training matrix and labels.
    pub training_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Forest {
    /// Hash identifying this exact forest; quizzes compiled from it record it.
    pub fn fingerprint(&self) -> String {
        fingerprint::of_json(self)
    }

    pub fn predict<R: BinLookup + ?Sized>(&self, row: &R) -> Vote {
        Vote::from_labels(self.trees.iter().map(|t| t.classify(row)))
    }

    /// Per-tree leaf labels for the row.
    pub fn tree_votes<R: BinLookup + ?Sized>(&self, row: &R) -> Vec<bool> {
        self.trees.iter().map(|t| t.classify(row)).collect()
    }

    /// Every distinct `(feature, threshold)` predicate.
    pub fn predicates(&self) -> BTreeSet<(FeatureId, u8)> {
        let mut out = BTreeSet::new();
        for t in &self.trees {
            t.for_each_predicate(&mut |f, th| {
                out.insert((f.clone(), th));
            });
        }
        out
    }

    pub fn features(&self) -> BTreeSet<FeatureId> {
        self.predicates().into_iter().map(|(f, _)| f).collect()
    }

    pub fn internal_nodes(&self) -> usize {
        self.trees.iter().map(Node::internal_nodes).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest serializes")
    }
}

/// Trains a forest. Tree `i` draws from the seed stream `(params.seed, i)`,
/// so serial and parallel execution produce the same forest.
pub fn train_forest(
    matrix: &BinnedMatrix,
    labels: &[bool],
    params: &ForestParams,
    exec: Execution,
) -> Result<Forest, ForestError> {
    params.validate()?;
    if matrix.n_rows() == 0 {
        return Err(ForestError::NoRows);
    }
    if matrix.n_features() == 0 {
        return Err(ForestError::NoFeatures);
    }
    if labels.len() != matrix.n_rows() {
        return Err(ForestError::LabelMismatch {
            rows: matrix.n_rows(),
            labels: labels.len(),
        });
    }
    if labels.iter().all(|&l| l == labels[0]) {
        log::warn!(
            "all {} training labels are {}; every tree will be a single leaf",
            labels.len(),
            labels[0]
        );
    }

    let trees = exec.map_indexed(params.n_trees, |i| {
        let mut builder = TreeBuilder {
            matrix,
            labels,
            params,
            rng: seed::rng(params.seed, &[i as u64]),
        };
        let n = matrix.n_rows();
        let samples: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| builder.rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        builder.grow(&samples, 0)
    });

    Ok(Forest {
        params: params.clone(),
        trees,
        training_fingerprint: training_fingerprint(matrix, labels),
        provenance: None,
    })
}

pub fn training_fingerprint(matrix: &BinnedMatrix, labels: &[bool]) -> String {
    fingerprint::of_json(&(&matrix.communities, &matrix.features, &matrix.bins, labels))
}

struct TreeBuilder<'a> {
    matrix: &'a BinnedMatrix,
    labels: &'a [bool],
    params: &'a ForestParams,
    rng: seed::Rng,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, samples: &[usize], depth: usize) -> Node {
        let pos = samples.iter().filter(|&&i| self.labels[i]).count();
        let counts = [samples.len() - pos, pos];
        let leaf = Node::Leaf {
            // Even splits go to the negative class.
            label: pos > counts[0],
            counts,
        };
        if depth >= self.params.max_depth || pos == 0 || pos == samples.len() {
            return leaf;
        }
        let Some((feature, threshold)) = self.best_split(samples) else {
            return leaf;
        };
        let (yes, no): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.matrix.bins[i][feature].get() > threshold);
        Node::Split {
            feature: self.matrix.features[feature].clone(),
            threshold,
            no: Box::new(self.grow(&no, depth + 1)),
            yes: Box::new(self.grow(&yes, depth + 1)),
        }
    }

    /// Best `(feature index, threshold)` among a random candidate subset;
    /// equal gains resolve to the lowest feature index, then threshold.
    fn best_split(&mut self, samples: &[usize]) -> Option<(usize, u8)> {
        let n_features = self.matrix.n_features();
        let m = self.params.candidates_per_split(n_features);
        let mut candidates = if m >= n_features {
            (0..n_features).collect()
        } else {
            index::sample(&mut self.rng, n_features, m).into_vec()
        };
        candidates.sort_unstable();

        let mut best: Option<(usize, u8)> = None;
        let mut best_gain = 1e-12;
        for f in candidates {
            let counts = split::bin_class_counts(
                samples
                    .iter()
                    .map(|&i| (self.matrix.bins[i][f], self.labels[i])),
            );
            for t in 0..=1u8 {
                let (no, yes) = split::partition(&counts, t);
                let gain = self.params.criterion.gain(no, yes);
                if gain > best_gain + 1e-12 {
                    best_gain = gain;
                    best = Some((f, t));
                }
            }
        }
        best
    }
}
