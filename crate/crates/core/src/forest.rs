//! Bagged random forest whose leaves feed the minimum rule cover.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};
use crate::tree::{grow_tree, DecisionTree, FeatureSubsample, TreeParams};

/// How member trees are aggregated at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Voting {
    /// Sum the leaf class counts of every tree, then take the argmax.
    #[default]
    Counts,
    /// One vote per tree for its leaf majority class.
    Majority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree_params: TreeParams,
    pub seed: u64,
    /// Size-`m` sampling with replacement per tree.
    pub bootstrap: bool,
    pub voting: Voting,
}

impl ForestParams {
    /// Standard configuration: bootstrap samples and `⌈√p⌉` features per split.
    pub fn new(n_trees: usize, max_depth: usize, seed: u64) -> Self {
        ForestParams {
            n_trees,
            tree_params: TreeParams {
                max_depth,
                max_features: FeatureSubsample::Sqrt,
                ..TreeParams::default()
            },
            seed,
            bootstrap: true,
            voting: Voting::Counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest<F> {
    pub trees: Vec<DecisionTree<F>>,
    pub params: ForestParams,
}

/// RNG of tree `t`: a function of `(seed, t)` only.
fn tree_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

pub fn fit_forest<F: Scalar>(dataset: &Dataset<F>, params: &ForestParams) -> Result<Forest<F>> {
    if params.n_trees < 1 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    if params.tree_params.max_depth < 1 {
        return Err(Error::InvalidParameter(
            "max_depth must be at least 1".into(),
        ));
    }
    let m = dataset.n_samples();
    let weights = vec![F::one(); m];
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let ids: Vec<usize> = if params.bootstrap {
                (0..m).map(|_| rng.gen_range(0..m)).collect()
            } else {
                (0..m).collect()
            };
            grow_tree(dataset, ids, &weights, &params.tree_params, rng)
        })
        .collect();
    Ok(Forest {
        trees,
        params: *params,
    })
}

impl<F: Scalar> Forest<F> {
    /// Aggregated class scores for `x` under the configured voting scheme.
    pub fn votes(&self, x: &[F]) -> Vec<usize> {
        let k = self.trees.first().map_or(0, |t| t.n_classes);
        let mut votes = vec![0usize; k];
        for tree in &self.trees {
            let leaf = tree.leaf(x);
            match self.params.voting {
                Voting::Counts => {
                    for (v, c) in votes.iter_mut().zip(&leaf.counts) {
                        *v += c;
                    }
                }
                Voting::Majority => votes[leaf.majority_class()] += 1,
            }
        }
        votes
    }

    /// Argmax of the votes; ties go to the lowest class index.
    pub fn predict(&self, x: &[F]) -> usize {
        argmax(&self.votes(x))
    }

    pub fn predict_all(&self, dataset: &Dataset<F>) -> Vec<usize> {
        dataset.rows().map(|x| self.predict(x)).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.trees.iter().map(DecisionTree::n_leaves).sum()
    }
}
