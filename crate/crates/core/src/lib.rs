//! Interpretable rule models carved out of tree ensembles.
//!
//! Two learners share one rule representation:
//!
//! * MIRCO trains a random forest, turns every leaf into a rule and keeps a
//!   small subset of rules that still covers the training set.
//! * RCBoost grows a rule pool by column generation, pricing new rules with
//!   weighted trees fitted to the duals of a covering LP.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix the usual choice.

pub mod cover;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod lp;
pub mod mirco;
pub mod oracles;
pub mod rcboost;
pub mod rules;
pub mod scalar;
pub mod tree;

pub use cover::{
    exact_cover, greedy_cover, harmonic, remove_redundant, CoverProblem, CoverSolution,
};
pub use dataset::{
    accuracy, grid_search, nested_kfold, stratified_kfold, Dataset, FoldPlan, GridSearch,
    LabelColumn,
};
pub use error::{Error, Result};
pub use forest::{fit_forest, Forest, ForestParams, Voting};
pub use lp::{reduced_cost, solve_covering_lp, solve_covering_lp_with, LpOptions, LpSolution};
pub use mirco::{evaluate_mirco, mirco_from_forest, run_mirco, MircoMetrics, MircoResult};
pub use oracles::{check_lp_certificate, enumerate_small_trees, Certificate, CoverInstance};
pub use rcboost::{rcb_predict, run_rcboost, RcbModel, RcbParams, RcbTrace, Termination};
pub use rules::{
    dedup, extract_rules, Clause, Interval, Op, Prediction, Provenance, Rule, RulePool,
};
pub use scalar::Scalar;
pub use tree::{
    fit_tree, fit_tree_unweighted, weighted_impurity, Criterion, DecisionTree, FeatureSubsample,
    TreeParams,
};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type DecisionTree64 = DecisionTree<f64>;
pub type Forest64 = Forest<f64>;
pub type Rule64 = Rule<f64>;
pub type RulePool64 = RulePool<f64>;
pub type RulePool32 = RulePool<f32>;
pub type CoverProblem64 = CoverProblem<f64>;
pub type LpSolution64 = LpSolution<f64>;
pub type MircoResult64 = MircoResult<f64>;
pub type RcbModel64 = RcbModel<f64>;
