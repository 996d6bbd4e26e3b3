//! Random forest engine.
//!
//! Trees are grown on a [`TrainingFrame`] that holds presorted ranks of the
//! covariates, so refitting on new outcomes at fixed `X` costs no sorting.
//! Tree `b` draws all of its randomness from `seed / "tree" / b`.

mod artifact;
mod frame;
mod inbag;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use artifact::{ForestArtifact, ARTIFACT_FORMAT, ARTIFACT_VERSION};
pub use frame::TrainingFrame;
pub use inbag::InbagVector;
pub use tree::{Leaf, Node, Tree};

use crate::data::{FeatureMatrix, OutcomeKind};
use crate::error::{config_err, data_err, Result};
use crate::rng::SeedPath;
use tree::{GrowParams, TreeGrower};

/// Minimum in-bag weight per child used by the simulation scenarios and the
/// command line unless overridden.
pub const DEFAULT_MIN_LEAF: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Sampling {
    /// `n` draws with replacement.
    Bootstrap,
    /// `round(fraction * n)` rows without replacement.
    Subsample { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features drawn at each node.
    pub mtry: usize,
    pub sampling: Sampling,
    /// Minimum inbag multiplicity of every leaf.
    pub min_leaf: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl ForestConfig {
    pub fn new(n_trees: usize, mtry: usize, sampling: Sampling, min_leaf: usize) -> Self {
        ForestConfig {
            n_trees,
            mtry,
            sampling,
            min_leaf,
            max_depth: None,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trees(mut self, n_trees: usize) -> Self {
        self.n_trees = n_trees;
        self
    }

    pub fn with_max_depth(mut self, max_depth: Option<usize>) -> Self {
        self.max_depth = max_depth;
        self
    }

    /// Every covariate is a candidate, leaves of one row, no resampling.
    pub fn saturated(p: usize) -> Self {
        ForestConfig::new(1, p, Sampling::Subsample { fraction: 1.0 }, 1)
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return config_err("forest needs at least one tree");
        }
        if p == 0 {
            return config_err("forest needs at least one covariate");
        }
        if self.mtry == 0 || self.mtry > p {
            return config_err(format!(
                "candidate-set size q = {} must lie in 1..={p}",
                self.mtry
            ));
        }
        if self.min_leaf == 0 {
            return config_err("minimum leaf size must be at least 1");
        }
        if n == 0 {
            return config_err("forest needs at least one training row");
        }
        if let Sampling::Subsample { fraction } = self.sampling {
            let k = inbag::subsample_size(fraction, n)?;
            if k < 2 * self.min_leaf && n >= 2 * self.min_leaf {
                return config_err(format!(
                    "subsample of {k} rows cannot hold two leaves of size {}",
                    self.min_leaf
                ));
            }
        }
        Ok(())
    }

    pub fn tree_seed(&self, b: usize) -> SeedPath {
        SeedPath::new(self.seed).child("tree").index(b as u64)
    }

    fn params(&self) -> GrowParams {
        GrowParams {
            mtry: self.mtry,
            min_leaf: self.min_leaf as f64,
            max_depth: self.max_depth,
        }
    }

    /// Grows tree `b` of this configuration.
    pub fn grow_tree(&self, frame: &TrainingFrame, y: &[f64], b: usize) -> Result<Tree> {
        self.check_inputs(frame, y)?;
        let mut grower = TreeGrower::new(frame);
        self.grow_with(&mut grower, frame, y, b)
    }

    fn grow_with(
        &self,
        grower: &mut TreeGrower,
        frame: &TrainingFrame,
        y: &[f64],
        b: usize,
    ) -> Result<Tree> {
        let seed = self.tree_seed(b);
        let mut rng = seed.rng();
        let inbag = InbagVector::draw(self.sampling, frame.n_rows(), &mut rng)?;
        Ok(grower.grow(frame, y, inbag, &self.params(), &mut rng, seed.value()))
    }

    /// Grows a tree on a caller-supplied resampling draw.
    pub fn grow_tree_on(
        &self,
        frame: &TrainingFrame,
        y: &[f64],
        inbag: InbagVector,
        split_seed: SeedPath,
    ) -> Result<Tree> {
        self.check_inputs(frame, y)?;
        if inbag.len() != frame.n_rows() || inbag.total() == 0 {
            return data_err("inbag vector does not match the training rows");
        }
        let mut grower = TreeGrower::new(frame);
        let mut rng = split_seed.rng();
        Ok(grower.grow(frame, y, inbag, &self.params(), &mut rng, split_seed.value()))
    }

    fn check_inputs(&self, frame: &TrainingFrame, y: &[f64]) -> Result<()> {
        self.validate(frame.n_rows(), frame.n_cols())?;
        if y.len() != frame.n_rows() {
            return data_err(format!(
                "{} outcomes for {} covariate rows",
                y.len(),
                frame.n_rows()
            ));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return data_err(format!("outcome at row {} is not finite", i + 1));
        }
        Ok(())
    }

    /// Grows every tree, keeping only its predictions at `points`.
    pub fn tree_predictions(
        &self,
        frame: &TrainingFrame,
        y: &[f64],
        points: &FeatureMatrix,
    ) -> Result<TreePredictions> {
        self.check_inputs(frame, y)?;
        check_width(points, frame.n_cols())?;
        let per_tree: Vec<Vec<f64>> = (0..self.n_trees)
            .into_par_iter()
            .map_init(
                || TreeGrower::new(frame),
                |grower, b| {
                    let tree = self.grow_with(grower, frame, y, b)?;
                    Ok(points.rows().map(|x| tree.predict(x)).collect())
                },
            )
            .collect::<Result<_>>()?;
        Ok(TreePredictions::from_trees(points.n_rows(), per_tree))
    }

    /// Mean and tree variance at `points` without retaining the trees.
    pub fn fit_predict(
        &self,
        frame: &TrainingFrame,
        y: &[f64],
        points: &FeatureMatrix,
    ) -> Result<ForestPredictions> {
        Ok(self.tree_predictions(frame, y, points)?.summarize())
    }
}

fn check_width(points: &FeatureMatrix, p: usize) -> Result<()> {
    if points.n_cols() != p {
        return data_err(format!(
            "prediction points have {} columns, the forest was trained on {p}",
            points.n_cols()
        ));
    }
    Ok(())
}

/// Per-tree predictions at a set of points, tree-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePredictions {
    n_points: usize,
    n_trees: usize,
    values: Vec<f64>,
}

impl TreePredictions {
    fn from_trees(n_points: usize, per_tree: Vec<Vec<f64>>) -> Self {
        let n_trees = per_tree.len();
        let values = per_tree.into_iter().flatten().collect();
        TreePredictions {
            n_points,
            n_trees,
            values,
        }
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn tree(&self, b: usize) -> &[f64] {
        &self.values[b * self.n_points..(b + 1) * self.n_points]
    }

    /// Forest prediction built from the first `b` trees.
    pub fn prefix_mean(&self, b: usize) -> Vec<f64> {
        assert!(b >= 1 && b <= self.n_trees);
        let mut acc = vec![0.0; self.n_points];
        for t in 0..b {
            for (a, v) in acc.iter_mut().zip(self.tree(t)) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= b as f64);
        acc
    }

    pub fn mean(&self) -> Vec<f64> {
        self.prefix_mean(self.n_trees)
    }

    /// Sample variance of tree predictions at each point (divisor `B - 1`).
    pub fn variance(&self) -> Vec<Option<f64>> {
        if self.n_trees < 2 {
            return vec![None; self.n_points];
        }
        let mean = self.mean();
        let mut ss = vec![0.0; self.n_points];
        for t in 0..self.n_trees {
            for ((s, v), m) in ss.iter_mut().zip(self.tree(t)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        ss.into_iter()
            .map(|s| Some(s / (self.n_trees - 1) as f64))
            .collect()
    }

    pub fn summarize(&self) -> ForestPredictions {
        ForestPredictions {
            mean: self.mean(),
            tree_variance: self.variance(),
            n_trees: self.n_trees,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestPredictions {
    pub mean: Vec<f64>,
    /// Absent when the forest has a single tree.
    pub tree_variance: Vec<Option<f64>>,
    pub n_trees: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub per_tree: Vec<f64>,
    pub tree_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    config: ForestConfig,
    outcome: OutcomeKind,
    n_features: usize,
    trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(
        frame: &TrainingFrame,
        y: &[f64],
        outcome: OutcomeKind,
        config: &ForestConfig,
    ) -> Result<Forest> {
        config.check_inputs(frame, y)?;
        outcome.validate(y)?;
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map_init(
                || TreeGrower::new(frame),
                |grower, b| config.grow_with(grower, frame, y, b),
            )
            .collect::<Result<Vec<_>>>()?;
        Ok(Forest {
            config: config.clone(),
            outcome,
            n_features: frame.n_cols(),
            trees,
        })
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn outcome(&self) -> OutcomeKind {
        self.outcome
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_train(&self) -> usize {
        self.trees.first().map_or(0, Tree::n_train)
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let per_tree: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let b = per_tree.len() as f64;
        let mean = per_tree.iter().sum::<f64>() / b;
        let tree_variance = (per_tree.len() >= 2).then(|| {
            per_tree.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b - 1.0)
        });
        Prediction {
            mean,
            per_tree,
            tree_variance,
        }
    }

    pub fn predict_many(&self, points: &FeatureMatrix) -> Result<ForestPredictions> {
        check_width(points, self.n_features)?;
        let per_tree: Vec<Vec<f64>> = self
            .trees
            .par_iter()
            .map(|t| points.rows().map(|x| t.predict(x)).collect())
            .collect();
        Ok(TreePredictions::from_trees(points.n_rows(), per_tree).summarize())
    }

    /// Mean of the per-tree weight vectors at `x`.
    pub fn weights(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_train()];
        let scale = 1.0 / self.trees.len() as f64;
        for t in &self.trees {
            t.add_weights(x, scale, &mut out);
        }
        out
    }

    /// Out-of-bag prediction at each training row; `None` where every tree
    /// saw the row.
    pub fn predict_oob(&self, x_train: &FeatureMatrix) -> Result<Vec<Option<f64>>> {
        check_width(x_train, self.n_features)?;
        if x_train.n_rows() != self.n_train() {
            return data_err(format!(
                "{} rows supplied, the forest was trained on {}",
                x_train.n_rows(),
                self.n_train()
            ));
        }
        Ok(x_train
            .rows()
            .enumerate()
            .map(|(i, x)| {
                let mut s = 0.0;
                let mut k = 0usize;
                for t in self.trees.iter().filter(|t| t.inbag().is_oob(i)) {
                    s += t.predict(x);
                    k += 1;
                }
                (k > 0).then(|| s / k as f64)
            })
            .collect())
    }

    /// Number of trees for which each training row is out of bag.
    pub fn oob_tree_counts(&self) -> Vec<usize> {
        (0..self.n_train())
            .map(|i| self.trees.iter().filter(|t| t.inbag().is_oob(i)).count())
            .collect()
    }
}
