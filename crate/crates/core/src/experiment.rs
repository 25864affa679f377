//! Nested cross-validation experiments and their JSON reports.
//!
//! Every learner (the random forest and decision tree baselines as well as
//! MIRCO or RCBoost) is tuned separately on the inner folds of each outer
//! training split and then scored on the outer test fold.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    accuracy, grid_search, nested_kfold, Dataset, Encoding, FoldPlan, GridSearch,
};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::mirco::{evaluate_mirco, run_mirco};
use crate::rcboost::{run_rcboost, RcbParams, RcbTrace, Termination};
use crate::rules::RulePool;
use crate::scalar::Scalar;
use crate::tree::{fit_tree_unweighted, Criterion, FeatureSubsample, TreeParams};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mirco,
    Rcboost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub outer: usize,
    /// Inner folds used for tuning; ignored when a learner has only one
    /// grid point.
    pub inner: usize,
    pub seed: u64,
    pub criterion: Criterion,
    pub depth_grid: Vec<usize>,
    pub trees_grid: Vec<usize>,
    pub rmp_grid: Vec<usize>,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            outer: 10,
            inner: 4,
            seed: 42,
            criterion: Criterion::Gini,
            depth_grid: vec![5, 10],
            trees_grid: vec![10, 50],
            rmp_grid: vec![10, 50],
            workers: 0,
            trace: false,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        for (name, grid) in [
            ("depth", &self.depth_grid),
            ("trees", &self.trees_grid),
            ("rmp", &self.rmp_grid),
        ] {
            if grid.is_empty() {
                return Err(Error::InvalidParameter(format!("{name} grid is empty")));
            }
            if grid.contains(&0) {
                return Err(Error::InvalidParameter(format!("{name} grid contains 0")));
            }
        }
        Ok(())
    }
}

/// Hyperparameters chosen for one learner on one fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Choice {
    pub depth: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trees: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rmp_calls: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LearnerResult<F> {
    pub method: String,
    pub params: Choice,
    /// Mean inner-fold accuracy of the chosen parameters.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inner_score: Option<f64>,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub missed_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_rules: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_rules_forest: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_rules_forest_unique: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_rules_dt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rmp_calls: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub termination: Option<Termination>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<RcbTrace<F>>,
    pub fit_ms: u64,
}

impl<F> LearnerResult<F> {
    fn new(method: &str, params: Choice, accuracy: f64) -> Self {
        LearnerResult {
            method: method.to_owned(),
            params,
            inner_score: None,
            accuracy,
            missed_fraction: None,
            n_rules: None,
            n_rules_forest: None,
            n_rules_forest_unique: None,
            n_rules_dt: None,
            rmp_calls: None,
            termination: None,
            trace: None,
            fit_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct FoldReport<F> {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Seed of the inner plan, absent when nothing was tuned.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inner_seed: Option<u64>,
    pub learners: Vec<LearnerResult<F>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_missed_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_rules: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_rmp_calls: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub class_names: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub encoding: Option<Encoding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ExperimentReport<F> {
    pub schema: u32,
    pub algorithm: Algorithm,
    pub dataset: DatasetInfo,
    pub config: ExperimentConfig,
    pub folds: Vec<FoldReport<F>>,
    pub summary: Vec<Summary>,
    pub total_ms: u64,
}

impl<F: Scalar> ExperimentReport<F> {
    pub fn summary_for(&self, method: &str) -> Option<&Summary> {
        self.summary.iter().find(|s| s.method == method)
    }

    pub fn fold_results(&self, method: &str) -> impl Iterator<Item = &LearnerResult<F>> + '_ {
        let method = method.to_owned();
        self.folds
            .iter()
            .flat_map(|f| f.learners.iter())
            .filter(move |l| l.method == method)
    }

    /// Parameters chosen on the most folds (earliest in sort order on ties).
    pub fn consensus(&self, method: &str) -> Option<Choice> {
        let mut seen: Vec<(Choice, usize)> = Vec::new();
        for l in self.fold_results(method) {
            match seen.iter_mut().find(|(c, _)| *c == l.params) {
                Some((_, n)) => *n += 1,
                None => seen.push((l.params, 1)),
            }
        }
        seen.sort();
        seen.iter()
            .fold(None, |best: Option<(Choice, usize)>, &(c, n)| match best {
                Some((_, bn)) if bn >= n => best,
                _ => Some((c, n)),
            })
            .map(|(c, _)| c)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn forest_params(c: &Choice, seed: u64, criterion: Criterion) -> ForestParams {
    let mut p = ForestParams::new(c.trees.unwrap_or(1), c.depth, seed);
    p.tree_params.criterion = criterion;
    p
}

fn tree_params(depth: usize, seed: u64, criterion: Criterion) -> TreeParams {
    TreeParams {
        max_depth: depth,
        criterion,
        max_features: FeatureSubsample::All,
        seed,
        ..TreeParams::default()
    }
}

fn rcb_params(c: &Choice, seed: u64, criterion: Criterion) -> RcbParams {
    RcbParams {
        max_rmp_calls: c.rmp_calls.unwrap_or(100),
        tree_params: tree_params(c.depth, seed, criterion),
        criterion,
        seed,
    }
}

fn rf_accuracy<F: Scalar>(
    train: &Dataset<F>,
    test: &Dataset<F>,
    c: &Choice,
    seed: u64,
    crit: Criterion,
) -> Result<f64> {
    let forest = fit_forest(train, &forest_params(c, seed, crit))?;
    Ok(accuracy(&forest.predict_all(test), test.labels()))
}

fn dt_accuracy<F: Scalar>(
    train: &Dataset<F>,
    test: &Dataset<F>,
    c: &Choice,
    seed: u64,
    crit: Criterion,
) -> Result<f64> {
    let tree = fit_tree_unweighted(train, &tree_params(c.depth, seed, crit))?;
    Ok(accuracy(&tree.predict_all(test), test.labels()))
}

fn mirco_accuracy<F: Scalar>(
    train: &Dataset<F>,
    test: &Dataset<F>,
    c: &Choice,
    seed: u64,
    crit: Criterion,
) -> Result<f64> {
    let res = run_mirco(train, &forest_params(c, seed, crit), crit)?;
    Ok(evaluate_mirco(&res, test).accuracy)
}

fn rcb_accuracy<F: Scalar>(
    train: &Dataset<F>,
    test: &Dataset<F>,
    c: &Choice,
    seed: u64,
    crit: Criterion,
) -> Result<f64> {
    run_rcboost(train, &rcb_params(c, seed, crit))?.accuracy(test)
}

type Trainer<F> = fn(&Dataset<F>, &Dataset<F>, &Choice, u64, Criterion) -> Result<f64>;

/// Picks the best grid point on the inner folds, or the only one.
fn tune<F: Scalar>(
    train: &Dataset<F>,
    grid: &[Choice],
    inner: Option<&FoldPlan>,
    seed: u64,
    criterion: Criterion,
    trainer: Trainer<F>,
) -> Result<(Choice, Option<f64>)> {
    match (grid, inner) {
        ([only], _) => Ok((*only, None)),
        (_, None) => Err(Error::InvalidParameter(
            "tuning needs an inner fold plan".into(),
        )),
        (_, Some(plan)) => {
            let search: GridSearch<Choice> = grid_search(train, grid, plan, |tr, te, c| {
                trainer(tr, te, c, seed, criterion)
            })?;
            Ok((search.best, Some(search.best_score)))
        }
    }
}

struct Grids {
    forest: Vec<Choice>,
    tree: Vec<Choice>,
    rcb: Vec<Choice>,
}

impl Grids {
    fn new(config: &ExperimentConfig) -> Self {
        let choice = |depth, trees, rmp_calls| Choice {
            depth,
            trees,
            rmp_calls,
        };
        let mut forest = Vec::new();
        let mut rcb = Vec::new();
        for &d in &config.depth_grid {
            for &t in &config.trees_grid {
                forest.push(choice(d, Some(t), None));
            }
            for &r in &config.rmp_grid {
                rcb.push(choice(d, None, Some(r)));
            }
        }
        let tree = config
            .depth_grid
            .iter()
            .map(|&d| choice(d, None, None))
            .collect();
        Grids { forest, tree, rcb }
    }
}

fn run_fold<F: Scalar>(
    dataset: &Dataset<F>,
    plan: &FoldPlan,
    fold: usize,
    algorithm: Algorithm,
    config: &ExperimentConfig,
    grids: &Grids,
) -> Result<FoldReport<F>> {
    let train_ids = plan.train_indices(fold);
    let test_ids = plan.test_indices(fold);
    let train = dataset.subset(&train_ids);
    let test = dataset.subset(&test_ids);
    let needs_inner = grids.forest.len() > 1
        || grids.tree.len() > 1
        || (algorithm == Algorithm::Rcboost && grids.rcb.len() > 1);
    let inner = if needs_inner {
        Some(plan.inner_plan(dataset, fold)?)
    } else {
        None
    };
    let seed = config.seed;
    let crit = config.criterion;
    let mut learners = Vec::new();

    let start = Instant::now();
    let (c, score) = tune(
        &train,
        &grids.forest,
        inner.as_ref(),
        seed,
        crit,
        rf_accuracy,
    )?;
    let forest = fit_forest(&train, &forest_params(&c, seed, crit))?;
    let mut rf = LearnerResult::new("RF", c, accuracy(&forest.predict_all(&test), test.labels()));
    rf.inner_score = score;
    rf.n_rules_forest = Some(forest.n_leaves());
    rf.fit_ms = elapsed_ms(start);
    learners.push(rf);

    match algorithm {
        Algorithm::Mirco => {
            let start = Instant::now();
            let (c, score) = tune(&train, &grids.tree, inner.as_ref(), seed, crit, dt_accuracy)?;
            let tree = fit_tree_unweighted(&train, &tree_params(c.depth, seed, crit))?;
            let mut dt =
                LearnerResult::new("DT", c, accuracy(&tree.predict_all(&test), test.labels()));
            dt.inner_score = score;
            dt.n_rules = Some(tree.n_leaves());
            dt.fit_ms = elapsed_ms(start);
            learners.push(dt);

            let start = Instant::now();
            let (c, score) = tune(
                &train,
                &grids.forest,
                inner.as_ref(),
                seed,
                crit,
                mirco_accuracy,
            )?;
            let res = run_mirco(&train, &forest_params(&c, seed, crit), crit)?;
            let metrics = evaluate_mirco(&res, &test);
            let mut mirco = LearnerResult::new("MIRCO", c, metrics.accuracy);
            mirco.inner_score = score;
            mirco.missed_fraction = Some(metrics.missed_fraction);
            mirco.n_rules = Some(res.n_rules_selected);
            mirco.n_rules_forest = Some(res.n_rules_forest);
            mirco.n_rules_forest_unique = Some(res.n_rules_forest_unique);
            mirco.n_rules_dt = Some(res.n_rules_dt);
            mirco.fit_ms = elapsed_ms(start);
            learners.push(mirco);
        }
        Algorithm::Rcboost => {
            let start = Instant::now();
            let (c, score) = tune(&train, &grids.rcb, inner.as_ref(), seed, crit, rcb_accuracy)?;
            let model = run_rcboost(&train, &rcb_params(&c, seed, crit))?;
            let rcb_ms = elapsed_ms(start);

            let tree_choice = Choice {
                depth: c.depth,
                trees: None,
                rmp_calls: None,
            };
            let mut ini = LearnerResult::new("iniDT", tree_choice, model.initial_accuracy(&test));
            ini.n_rules = Some(model.trace.initial_rules);
            learners.push(ini);

            let mut rcb = LearnerResult::new("RCB", c, model.accuracy(&test)?);
            rcb.inner_score = score;
            rcb.n_rules = Some(model.pool.len());
            rcb.rmp_calls = Some(model.trace.rmp_calls());
            rcb.termination = Some(model.trace.termination);
            if config.trace {
                rcb.trace = Some(model.trace.clone());
            }
            rcb.fit_ms = rcb_ms;
            learners.push(rcb);
        }
    }

    Ok(FoldReport {
        fold,
        n_train: train.n_samples(),
        n_test: test.n_samples(),
        inner_seed: inner.map(|p| p.seed),
        learners,
    })
}

fn summarize<F: Scalar>(folds: &[FoldReport<F>]) -> Vec<Summary> {
    let Some(first) = folds.first() else {
        return Vec::new();
    };
    first
        .learners
        .iter()
        .map(|l| {
            let rows: Vec<&LearnerResult<F>> = folds
                .iter()
                .flat_map(|f| f.learners.iter().filter(|x| x.method == l.method))
                .collect();
            let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
            let (mean_accuracy, std_accuracy) = mean_std(&acc);
            let mean_of = |get: fn(&LearnerResult<F>) -> Option<f64>| {
                let v: Option<Vec<f64>> = rows.iter().map(|r| get(r)).collect();
                v.map(|v| mean_std(&v).0)
            };
            Summary {
                method: l.method.clone(),
                mean_accuracy,
                std_accuracy,
                mean_missed_fraction: mean_of(|r| r.missed_fraction),
                mean_rules: mean_of(|r| r.n_rules.map(|n| n as f64)),
                mean_rmp_calls: mean_of(|r| r.rmp_calls.map(|n| n as f64)),
            }
        })
        .collect()
}

pub fn dataset_info<F: Scalar>(dataset: &Dataset<F>, name: &str) -> DatasetInfo {
    DatasetInfo {
        name: name.to_owned(),
        n_samples: dataset.n_samples(),
        n_features: dataset.n_features(),
        n_classes: dataset.n_classes(),
        class_names: dataset.class_names().to_vec(),
        encoding: dataset.encoding().cloned(),
    }
}

/// Runs the full outer loop. Outer folds run in parallel on a pool of
/// `config.workers` threads (0 = one per core); results are assembled in
/// fold order.
pub fn run_experiment<F: Scalar>(
    dataset: &Dataset<F>,
    name: &str,
    algorithm: Algorithm,
    config: &ExperimentConfig,
) -> Result<ExperimentReport<F>> {
    config.validate()?;
    let start = Instant::now();
    let grids = Grids::new(config);
    let tuned = grids.forest.len() > 1
        || grids.tree.len() > 1
        || (algorithm == Algorithm::Rcboost && grids.rcb.len() > 1);
    if tuned && config.inner < 2 {
        return Err(Error::InvalidParameter(format!(
            "inner = {}, tuning over the grid needs at least 2 inner folds",
            config.inner
        )));
    }
    let plan = nested_kfold(dataset, config.outer, config.inner.max(2), config.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let folds = pool.install(|| {
        (0..config.outer)
            .into_par_iter()
            .map(|fold| {
                run_fold(dataset, &plan, fold, algorithm, config, &grids).map_err(|e| Error::Fold {
                    fold,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ExperimentReport {
        schema: REPORT_SCHEMA,
        algorithm,
        dataset: dataset_info(dataset, name),
        config: config.clone(),
        summary: summarize(&folds),
        folds,
        total_ms: elapsed_ms(start),
    })
}

/// Trains the final rule model on all of `dataset` with `choice`.
pub fn train_rule_model<F: Scalar>(
    dataset: &Dataset<F>,
    algorithm: Algorithm,
    choice: &Choice,
    seed: u64,
    criterion: Criterion,
) -> Result<RulePool<F>> {
    match algorithm {
        Algorithm::Mirco => {
            let res = run_mirco(dataset, &forest_params(choice, seed, criterion), criterion)?;
            Ok(res.selected_pool)
        }
        Algorithm::Rcboost => Ok(run_rcboost(dataset, &rcb_params(choice, seed, criterion))?.pool),
    }
}
