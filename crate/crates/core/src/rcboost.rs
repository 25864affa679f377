//! Rule cover boosting (RCBoost) by column generation.
//!
//! The rule pool starts with the leaves of one unweighted tree. Every round
//! solves the covering LP over the pool, adds its duals to the running sample
//! weights, grows a new weighted tree and admits the leaves whose reduced
//! cost under the current duals is negative.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lp::{reduced_cost, solve_covering_lp};
use crate::rules::{extract_rules, Provenance, RulePool};
use crate::scalar::Scalar;
use crate::tree::{fit_tree, Criterion, DecisionTree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcbParams {
    /// Upper bound on the number of restricted master problem solves.
    pub max_rmp_calls: usize,
    pub tree_params: TreeParams,
    /// Impurity used for the rule costs `1 + w_j`.
    pub criterion: Criterion,
    pub seed: u64,
}

impl Default for RcbParams {
    fn default() -> Self {
        RcbParams {
            max_rmp_calls: 100,
            tree_params: TreeParams::default(),
            criterion: Criterion::Gini,
            seed: 0,
        }
    }
}

impl RcbParams {
    pub fn new(max_depth: usize, max_rmp_calls: usize, seed: u64) -> Self {
        RcbParams {
            max_rmp_calls,
            tree_params: TreeParams {
                max_depth,
                seed,
                ..TreeParams::default()
            },
            criterion: Criterion::Gini,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// No leaf of the pricing tree had a negative reduced cost.
    Converged,
    /// Every negative leaf was already in the pool.
    Stalled,
    MaxRmpCalls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct RcbIteration<F> {
    /// RMP call number, starting at 1.
    pub t: usize,
    /// `Φ(J_t)`.
    pub objective: F,
    /// `|J_t|` at the time of the solve.
    pub pool_size: usize,
    pub lp_pivots: usize,
    /// Leaves of the pricing tree.
    pub candidates: usize,
    /// Reduced cost of every candidate, in leaf order.
    pub candidate_reduced_costs: Vec<F>,
    /// Candidates with a negative reduced cost.
    pub negative: usize,
    /// Pool indices of the rules that entered, with their reduced costs.
    pub admitted: Vec<(usize, F)>,
    pub min_reduced_cost: Option<F>,
    /// `λ^t`.
    #[serde(skip)]
    pub duals: Vec<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct RcbTrace<F> {
    pub initial_rules: usize,
    pub iterations: Vec<RcbIteration<F>>,
    pub termination: Termination,
}

impl<F: Scalar> RcbTrace<F> {
    pub fn rmp_calls(&self) -> usize {
        self.iterations.len()
    }

    pub fn objectives(&self) -> Vec<F> {
        self.iterations.iter().map(|it| it.objective).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RcbModel<F: Scalar> {
    /// Final pool `J*`.
    pub pool: RulePool<F>,
    /// Tree whose leaves seeded the pool.
    pub initial_tree: DecisionTree<F>,
    pub trace: RcbTrace<F>,
}

pub fn run_rcboost<F: Scalar>(train: &Dataset<F>, params: &RcbParams) -> Result<RcbModel<F>> {
    if params.max_rmp_calls < 1 {
        return Err(Error::InvalidParameter(
            "max_rmp_calls must be at least 1".into(),
        ));
    }
    let m = train.n_samples();
    let tree_params = TreeParams {
        seed: params.seed,
        ..params.tree_params
    };
    let mut weights = vec![F::one(); m];
    let initial_tree = fit_tree(train, &weights, &tree_params)?;
    let mut pool = RulePool::new(params.criterion, train.n_classes(), train.n_features());
    pool.extend(extract_rules(
        &initial_tree,
        train,
        params.criterion,
        |leaf| Provenance::InitialTree { leaf },
    ));
    let initial_rules = pool.len();

    let mut iterations = Vec::new();
    let mut termination = Termination::MaxRmpCalls;
    for t in 1..=params.max_rmp_calls {
        let problem = pool.build_coverage(train)?;
        let lp = solve_covering_lp(&problem).map_err(|e| Error::Rmp {
            iteration: t,
            source: Box::new(e),
        })?;
        for (w, &l) in weights.iter_mut().zip(&lp.duals) {
            *w = *w + l;
        }
        let tree = fit_tree(train, &weights, &tree_params)?;
        let candidates = extract_rules(&tree, train, params.criterion, |leaf| {
            Provenance::Pricing { iteration: t, leaf }
        });
        let costs: Vec<F> = candidates
            .iter()
            .map(|r| reduced_cost(r.cost(), &r.covered, &lp.duals))
            .collect();
        let min_reduced_cost = costs.iter().copied().reduce(F::min);

        let mut negative = 0;
        let mut admitted = Vec::new();
        for (rule, &rc) in candidates.iter().zip(&costs) {
            if rc < F::zero() {
                negative += 1;
                if pool.insert(rule.clone()) {
                    admitted.push((pool.len() - 1, rc));
                }
            }
        }
        let stop = if negative == 0 {
            Some(Termination::Converged)
        } else if admitted.is_empty() {
            Some(Termination::Stalled)
        } else {
            None
        };
        iterations.push(RcbIteration {
            t,
            objective: lp.objective,
            pool_size: problem.n_rules(),
            lp_pivots: lp.iterations,
            candidates: candidates.len(),
            candidate_reduced_costs: costs,
            negative,
            admitted,
            min_reduced_cost,
            duals: lp.duals,
        });
        if let Some(reason) = stop {
            termination = reason;
            break;
        }
    }

    Ok(RcbModel {
        pool,
        initial_tree,
        trace: RcbTrace {
            initial_rules,
            iterations,
            termination,
        },
    })
}

/// Majority vote over the satisfied rules of `pool`. Never misses when the
/// pool contains the leaves of the initial tree, which partition the space.
pub fn rcb_predict<F: Scalar>(pool: &RulePool<F>, x: &[F]) -> Result<usize> {
    pool.predict(x, false)
        .map(|p| p.class)
        .map_err(|e| match e {
            Error::NoSatisfiedRule => {
                Error::Invariant("RCBoost pool does not cover the query point".into())
            }
            other => other,
        })
}

impl<F: Scalar> RcbModel<F> {
    pub fn predict(&self, x: &[F]) -> Result<usize> {
        rcb_predict(&self.pool, x)
    }

    pub fn accuracy(&self, test: &Dataset<F>) -> Result<f64> {
        let mut hits = 0;
        for (i, x) in test.rows().enumerate() {
            hits += usize::from(self.predict(x)? == test.label(i));
        }
        Ok(if test.n_samples() == 0 {
            0.0
        } else {
            hits as f64 / test.n_samples() as f64
        })
    }

    /// Accuracy of the initial tree alone.
    pub fn initial_accuracy(&self, test: &Dataset<F>) -> f64 {
        let hits = test
            .rows()
            .enumerate()
            .filter(|(i, x)| self.initial_tree.predict(x) == test.label(*i))
            .count();
        if test.n_samples() == 0 {
            0.0
        } else {
            hits as f64 / test.n_samples() as f64
        }
    }
}
