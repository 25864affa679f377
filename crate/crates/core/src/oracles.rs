//! Brute-force verifiers, written from the definitions and kept apart from
//! the solvers they check. Everything here works in `f64`.

use serde::{Deserialize, Serialize};

use crate::cover::CoverProblem;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const PRIMAL_TOL: f64 = 1e-7;
pub const DUAL_TOL: f64 = 1e-7;
pub const GAP_TOL: f64 = 1e-6;
pub const COMP_SLACK_TOL: f64 = 1e-6;

pub const TREE_ORACLE_MAX_SAMPLES: usize = 50;
pub const TREE_ORACLE_MAX_FEATURES: usize = 4;
pub const TREE_ORACLE_MAX_DEPTH: usize = 2;

/// Covering instance in plain form: `rules[j]` lists the samples rule `j`
/// covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverInstance {
    pub n_samples: usize,
    pub costs: Vec<f64>,
    pub rules: Vec<Vec<usize>>,
}

impl CoverInstance {
    pub fn from_problem<F: Scalar>(problem: &CoverProblem<F>) -> Self {
        CoverInstance {
            n_samples: problem.n_samples(),
            costs: problem.costs().iter().map(|c| c.as_f64()).collect(),
            rules: (0..problem.n_rules())
                .map(|j| problem.rule_samples(j).to_vec())
                .collect(),
        }
    }

    pub fn to_problem<F: Scalar>(&self) -> Result<CoverProblem<F>> {
        CoverProblem::new(
            self.n_samples,
            self.costs.iter().map(|&c| F::cast(c)).collect(),
            self.rules.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Largest violation of `Σ_{j∋i} z_j ≥ 1` or `z ≥ 0`.
    pub primal_residual: f64,
    /// Largest violation of `Σ_{i∈I(j)} λ_i ≤ c_j` or `λ ≥ 0`.
    pub dual_residual: f64,
    /// `|c·z − Σ λ_i|`.
    pub gap: f64,
    pub comp_slack_max: f64,
}

impl Certificate {
    pub fn passes(&self) -> bool {
        self.primal_residual <= PRIMAL_TOL
            && self.dual_residual <= DUAL_TOL
            && self.gap <= GAP_TOL
            && self.comp_slack_max <= COMP_SLACK_TOL
    }
}

/// Optimality certificate for a primal/dual pair of the covering LP
/// `min c·z s.t. Az ≥ 1, z ≥ 0`.
pub fn check_lp_certificate(
    instance: &CoverInstance,
    primal: &[f64],
    duals: &[f64],
) -> Result<Certificate> {
    let m = instance.n_samples;
    let n = instance.costs.len();
    if instance.rules.len() != n || primal.len() != n || duals.len() != m {
        return Err(Error::InvalidParameter(format!(
            "certificate dimensions: {} costs, {} rules, {} primal, {} duals, {} samples",
            n,
            instance.rules.len(),
            primal.len(),
            duals.len(),
            m
        )));
    }
    if let Some(&i) = instance.rules.iter().flatten().find(|&&i| i >= m) {
        return Err(Error::InvalidParameter(format!("sample {i} out of range")));
    }

    let mut row_activity = vec![0.0; m];
    for (rule, &z) in instance.rules.iter().zip(primal) {
        for &i in rule {
            row_activity[i] += z;
        }
    }
    let column_load: Vec<f64> = instance
        .rules
        .iter()
        .map(|rule| rule.iter().map(|&i| duals[i]).sum())
        .collect();

    let mut primal_residual: f64 = 0.0;
    for &a in &row_activity {
        primal_residual = primal_residual.max(1.0 - a);
    }
    for &z in primal {
        primal_residual = primal_residual.max(-z);
    }
    let mut dual_residual: f64 = 0.0;
    for (&load, &c) in column_load.iter().zip(&instance.costs) {
        dual_residual = dual_residual.max(load - c);
    }
    for &l in duals {
        dual_residual = dual_residual.max(-l);
    }

    let primal_obj: f64 = instance.costs.iter().zip(primal).map(|(c, z)| c * z).sum();
    let dual_obj: f64 = duals.iter().sum();

    let mut comp: f64 = 0.0;
    for j in 0..n {
        comp = comp.max((primal[j] * (instance.costs[j] - column_load[j])).abs());
    }
    for i in 0..m {
        comp = comp.max((duals[i] * (row_activity[i] - 1.0)).abs());
    }

    Ok(Certificate {
        primal_residual,
        dual_residual,
        gap: (primal_obj - dual_obj).abs(),
        comp_slack_max: comp,
    })
}

/// Best training accuracy reachable by any axis-aligned tree of depth at most
/// `max_depth`, found by trying every midpoint split at every node.
pub fn enumerate_small_trees<F: Scalar>(dataset: &Dataset<F>, max_depth: usize) -> Result<f64> {
    let m = dataset.n_samples();
    let p = dataset.n_features();
    if m > TREE_ORACLE_MAX_SAMPLES
        || p > TREE_ORACLE_MAX_FEATURES
        || max_depth > TREE_ORACLE_MAX_DEPTH
    {
        return Err(Error::OracleBounds(format!(
            "tree enumeration supports m <= {TREE_ORACLE_MAX_SAMPLES}, p <= {TREE_ORACLE_MAX_FEATURES}, \
             depth <= {TREE_ORACLE_MAX_DEPTH}; got m = {m}, p = {p}, depth = {max_depth}"
        )));
    }
    if m == 0 {
        return Err(Error::EmptyData);
    }
    let rows: Vec<Vec<f64>> = dataset
        .rows()
        .map(|r| r.iter().map(|v| v.as_f64()).collect())
        .collect();
    let labels = dataset.labels();
    let k = dataset.n_classes();
    let all: Vec<usize> = (0..m).collect();
    let best = best_correct(&rows, labels, k, &all, max_depth);
    Ok(best as f64 / m as f64)
}

fn best_correct(
    rows: &[Vec<f64>],
    labels: &[usize],
    k: usize,
    ids: &[usize],
    depth: usize,
) -> usize {
    let mut counts = vec![0usize; k];
    for &i in ids {
        counts[labels[i]] += 1;
    }
    let mut best = counts.iter().copied().max().unwrap_or(0);
    if depth == 0 || best == ids.len() {
        return best;
    }
    let p = rows.first().map_or(0, Vec::len);
    for f in 0..p {
        let mut values: Vec<f64> = ids.iter().map(|&i| rows[i][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let t = (pair[0] + pair[1]) / 2.0;
            let (left, right): (Vec<usize>, Vec<usize>) =
                ids.iter().partition(|&&i| rows[i][f] <= t);
            let score = best_correct(rows, labels, k, &left, depth - 1)
                + best_correct(rows, labels, k, &right, depth - 1);
            best = best.max(score);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle() -> CoverInstance {
        CoverInstance {
            n_samples: 3,
            costs: vec![1.0; 3],
            rules: vec![vec![0, 1], vec![1, 2], vec![0, 2]],
        }
    }

    #[test]
    fn three_cycle_hand_pair_is_optimal() {
        let cert = check_lp_certificate(&cycle(), &[0.5; 3], &[0.5; 3]).unwrap();
        assert!(cert.primal_residual <= 1e-12);
        assert!(cert.dual_residual <= 1e-12);
        assert!(cert.gap <= 1e-12);
        assert!(cert.comp_slack_max <= 1e-12);
        assert!(cert.passes());
    }

    #[test]
    fn perturbed_primal_shows_gap() {
        let cert = check_lp_certificate(&cycle(), &[0.6, 0.5, 0.5], &[0.5; 3]).unwrap();
        assert!(cert.gap > 0.05);
        assert!(!cert.passes());
    }

    #[test]
    fn negative_dual_is_infeasible() {
        let cert = check_lp_certificate(&cycle(), &[0.5; 3], &[0.5, -0.1, 0.5]).unwrap();
        assert!(cert.dual_residual > 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(check_lp_certificate(&cycle(), &[0.5; 2], &[0.5; 3]).is_err());
    }

    #[test]
    fn xor_needs_depth_two() {
        let d = Dataset::from_rows(
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
            vec![0, 1, 1, 0],
        )
        .unwrap();
        assert_eq!(enumerate_small_trees(&d, 2).unwrap(), 1.0);
        assert_eq!(enumerate_small_trees(&d, 1).unwrap(), 0.5);
    }

    #[test]
    fn separable_line_needs_one_split() {
        let d = Dataset::from_rows(
            (0..10).map(|i| vec![i as f64]).collect(),
            (0..10).map(|i| usize::from(i >= 4)).collect(),
        )
        .unwrap();
        assert_eq!(enumerate_small_trees(&d, 1).unwrap(), 1.0);
        assert_eq!(enumerate_small_trees(&d, 0).unwrap(), 0.6);
    }

    #[test]
    fn single_class_subset_is_perfect_at_depth_zero() {
        let d = Dataset::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 1]).unwrap();
        let single = d.subset(&[1, 2]);
        assert_eq!(enumerate_small_trees(&single, 0).unwrap(), 1.0);
    }

    #[test]
    fn refuses_large_inputs() {
        let d = Dataset::from_rows(
            (0..51).map(|i| vec![i as f64]).collect(),
            (0..51).map(|i| i % 2).collect(),
        )
        .unwrap();
        assert!(matches!(
            enumerate_small_trees(&d, 1),
            Err(Error::OracleBounds(_))
        ));
        let small = d.subset(&[0, 1, 2]);
        assert!(matches!(
            enumerate_small_trees(&small, 3),
            Err(Error::OracleBounds(_))
        ));
    }
}
