//! Minimum rule cover (MIRCO): the leaves of a trained forest become rules,
//! their impurities are evaluated on the full training set, and a greedy
//! weighted set cover with costs `1 + w_j` picks a small subset of rules
//! that still covers every training sample.

use serde::{Deserialize, Serialize};

use crate::cover::{greedy_cover, CoverSolution};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::forest::{fit_forest, Forest, ForestParams};
use crate::rules::{dedup, extract_rules, Prediction, Provenance, RulePool};
use crate::scalar::Scalar;
use crate::tree::{fit_tree_unweighted, Criterion, DecisionTree, FeatureSubsample, TreeParams};

#[derive(Debug, Clone)]
pub struct MircoResult<F: Scalar> {
    /// The selected rules `Ĵ`.
    pub selected_pool: RulePool<F>,
    /// Greedy solution over the deduplicated forest pool.
    pub cover: CoverSolution<F>,
    pub n_rules_selected: usize,
    /// Leaves over all trees, duplicates included.
    pub n_rules_forest: usize,
    pub n_rules_forest_unique: usize,
    /// Leaf count of a single tree grown with the same depth limit.
    pub n_rules_dt: usize,
    pub forest: Forest<F>,
    pub baseline_tree: DecisionTree<F>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MircoMetrics {
    pub accuracy: f64,
    pub missed_fraction: f64,
    pub n_missed: usize,
    pub n_test: usize,
}

/// Deduplicated pool of every leaf rule of `forest`, evaluated on `train`.
pub fn forest_rule_pool<F: Scalar>(
    forest: &Forest<F>,
    train: &Dataset<F>,
    criterion: Criterion,
) -> (RulePool<F>, usize) {
    let mut total = 0;
    let rules = forest.trees.iter().enumerate().flat_map(|(t, tree)| {
        let rules = extract_rules(tree, train, criterion, |leaf| Provenance::Forest {
            tree: t,
            leaf,
        });
        total += rules.len();
        rules
    });
    let pool = dedup(
        rules.collect::<Vec<_>>(),
        criterion,
        train.n_classes(),
        train.n_features(),
    );
    (pool, total)
}

/// Rule cover of an already trained forest.
pub fn mirco_from_forest<F: Scalar>(
    forest: Forest<F>,
    train: &Dataset<F>,
    criterion: Criterion,
) -> Result<MircoResult<F>> {
    let (pool, n_rules_forest) = forest_rule_pool(&forest, train, criterion);
    let problem = pool.build_coverage(train)?;
    let cover = greedy_cover(&problem)?;
    let selected_pool = pool.select(&cover.selected);

    let baseline_params = TreeParams {
        max_depth: forest.params.tree_params.max_depth,
        criterion: forest.params.tree_params.criterion,
        max_features: FeatureSubsample::All,
        ..forest.params.tree_params
    };
    let baseline_tree = fit_tree_unweighted(train, &baseline_params)?;

    Ok(MircoResult {
        n_rules_selected: selected_pool.len(),
        n_rules_forest,
        n_rules_forest_unique: pool.len(),
        n_rules_dt: baseline_tree.n_leaves(),
        selected_pool,
        cover,
        forest,
        baseline_tree,
    })
}

/// Trains the forest on `train` and extracts its minimum rule cover.
pub fn run_mirco<F: Scalar>(
    train: &Dataset<F>,
    forest_params: &ForestParams,
    criterion: Criterion,
) -> Result<MircoResult<F>> {
    let forest = fit_forest(train, forest_params)?;
    mirco_from_forest(forest, train, criterion)
}

impl<F: Scalar> MircoResult<F> {
    /// Majority vote of the selected rules, falling back to the rules with
    /// the largest fraction of satisfied clauses for uncovered points.
    pub fn predict(&self, x: &[F]) -> Prediction {
        self.selected_pool
            .predict(x, true)
            .expect("selected pool is nonempty")
    }
}

pub fn evaluate_mirco<F: Scalar>(result: &MircoResult<F>, test: &Dataset<F>) -> MircoMetrics {
    let mut hits = 0;
    let mut missed = 0;
    for (i, x) in test.rows().enumerate() {
        let p = result.predict(x);
        hits += usize::from(p.class == test.label(i));
        missed += usize::from(p.missed);
    }
    let n = test.n_samples();
    MircoMetrics {
        accuracy: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
        missed_fraction: if n == 0 {
            0.0
        } else {
            missed as f64 / n as f64
        },
        n_missed: missed,
        n_test: n,
    }
}
