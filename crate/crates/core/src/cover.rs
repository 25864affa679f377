//! Weighted set covering over rules: Chvátal's greedy heuristic followed by
//! redundant-rule removal, and an exhaustive solver for tiny instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest rule count [`exact_cover`] will enumerate.
pub const EXACT_COVER_MAX_RULES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverProblem<F> {
    n_samples: usize,
    costs: Vec<F>,
    /// `I(j)`, sorted.
    rule_samples: Vec<Vec<usize>>,
    /// `J(i)`, sorted.
    sample_rules: Vec<Vec<usize>>,
}

impl<F: Scalar> CoverProblem<F> {
    /// Validates costs (finite, at least 1) and that every sample is covered.
    pub fn new(n_samples: usize, costs: Vec<F>, rule_samples: Vec<Vec<usize>>) -> Result<Self> {
        if costs.len() != rule_samples.len() {
            return Err(Error::InvalidParameter(format!(
                "{} costs for {} rules",
                costs.len(),
                rule_samples.len()
            )));
        }
        if let Some(j) = costs.iter().position(|&c| !c.is_finite() || c < F::one()) {
            return Err(Error::InvalidParameter(format!(
                "rule {j} has cost {}, costs must be at least 1",
                costs[j]
            )));
        }
        let mut sample_rules = vec![Vec::new(); n_samples];
        let mut normalized = Vec::with_capacity(rule_samples.len());
        for (j, mut samples) in rule_samples.into_iter().enumerate() {
            samples.sort_unstable();
            samples.dedup();
            if let Some(&i) = samples.iter().find(|&&i| i >= n_samples) {
                return Err(Error::InvalidParameter(format!(
                    "rule {j} covers sample {i} outside 0..{n_samples}"
                )));
            }
            for &i in &samples {
                sample_rules[i].push(j);
            }
            normalized.push(samples);
        }
        if let Some(i) = sample_rules.iter().position(Vec::is_empty) {
            return Err(Error::UncoveredSample(i));
        }
        Ok(CoverProblem {
            n_samples,
            costs,
            rule_samples: normalized,
            sample_rules,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_rules(&self) -> usize {
        self.costs.len()
    }

    pub fn costs(&self) -> &[F] {
        &self.costs
    }

    pub fn cost(&self, j: usize) -> F {
        self.costs[j]
    }

    pub fn rule_samples(&self, j: usize) -> &[usize] {
        &self.rule_samples[j]
    }

    pub fn sample_rules(&self, i: usize) -> &[usize] {
        &self.sample_rules[i]
    }

    /// `max_j |I(j)|`.
    pub fn max_coverage(&self) -> usize {
        self.rule_samples.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_feasible(&self, selected: &[usize]) -> bool {
        let mut covered = vec![false; self.n_samples];
        for &j in selected {
            for &i in &self.rule_samples[j] {
                covered[i] = true;
            }
        }
        covered.into_iter().all(|c| c)
    }

    pub fn total_cost(&self, selected: &[usize]) -> F {
        selected.iter().map(|&j| self.costs[j]).sum()
    }

    fn solution(&self, mut selected: Vec<usize>) -> CoverSolution<F> {
        selected.sort_unstable();
        CoverSolution {
            total_cost: self.total_cost(&selected),
            selected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSolution<F> {
    /// Sorted ids of the rules with `z_j = 1`.
    pub selected: Vec<usize>,
    pub total_cost: F,
}

/// Chvátal's greedy heuristic: repeatedly take the rule minimizing
/// `c_j / |I_R(j)|` over the still uncovered samples `R` (lower id on ties),
/// then drop redundant rules.
pub fn greedy_cover<F: Scalar>(problem: &CoverProblem<F>) -> Result<CoverSolution<F>> {
    let mut uncovered = vec![true; problem.n_samples];
    let mut remaining = problem.n_samples;
    let mut fresh: Vec<usize> = problem.rule_samples.iter().map(Vec::len).collect();
    let mut chosen = vec![false; problem.n_rules()];
    let mut selected = Vec::new();
    let tol = F::tie_tolerance();

    while remaining > 0 {
        let mut best: Option<(usize, F)> = None;
        for j in 0..problem.n_rules() {
            if chosen[j] || fresh[j] == 0 {
                continue;
            }
            let ratio = problem.costs[j] / F::from_count(fresh[j]);
            if best.is_none_or(|(_, b)| ratio < b - tol * b) {
                best = Some((j, ratio));
            }
        }
        let (j, _) = best.ok_or_else(|| {
            let i = uncovered.iter().position(|&u| u).unwrap_or_default();
            Error::UncoveredSample(i)
        })?;
        chosen[j] = true;
        selected.push(j);
        for &i in &problem.rule_samples[j] {
            if uncovered[i] {
                uncovered[i] = false;
                remaining -= 1;
                for &other in &problem.sample_rules[i] {
                    fresh[other] -= 1;
                }
            }
        }
    }
    Ok(remove_redundant(&selected, problem))
}

/// Examines the selected rules from the most to the least expensive (higher
/// id first on equal cost) and drops each one whose samples stay covered by
/// the others.
pub fn remove_redundant<F: Scalar>(
    selected: &[usize],
    problem: &CoverProblem<F>,
) -> CoverSolution<F> {
    let mut multiplicity = vec![0usize; problem.n_samples];
    for &j in selected {
        for &i in &problem.rule_samples[j] {
            multiplicity[i] += 1;
        }
    }
    let mut order = selected.to_vec();
    order.sort_by(|&a, &b| {
        problem.costs[b]
            .partial_cmp(&problem.costs[a])
            .expect("finite costs")
            .then(b.cmp(&a))
    });
    let mut kept = Vec::with_capacity(order.len());
    for j in order {
        let samples = &problem.rule_samples[j];
        if samples.iter().all(|&i| multiplicity[i] >= 2) {
            for &i in samples {
                multiplicity[i] -= 1;
            }
        } else {
            kept.push(j);
        }
    }
    problem.solution(kept)
}

/// Minimum-cost cover by enumerating every subset. Ties go to the
/// lexicographically smallest sorted id list.
pub fn exact_cover<F: Scalar>(problem: &CoverProblem<F>) -> Result<CoverSolution<F>> {
    let n = problem.n_rules();
    if n > EXACT_COVER_MAX_RULES {
        return Err(Error::TooManyRules {
            rules: n,
            bound: EXACT_COVER_MAX_RULES,
        });
    }
    let words = problem.n_samples.div_ceil(64);
    let masks: Vec<Vec<u64>> = problem
        .rule_samples
        .iter()
        .map(|samples| {
            let mut bits = vec![0u64; words];
            for &i in samples {
                bits[i / 64] |= 1 << (i % 64);
            }
            bits
        })
        .collect();
    let mut full = vec![u64::MAX; words];
    if !problem.n_samples.is_multiple_of(64) {
        full[words - 1] = (1u64 << (problem.n_samples % 64)) - 1;
    }

    let mut best: Option<(F, Vec<usize>)> = None;
    let mut union = vec![0u64; words];
    for subset in 1u32..(1u32 << n) {
        let ids: Vec<usize> = (0..n).filter(|&j| subset & (1 << j) != 0).collect();
        let cost: F = ids.iter().map(|&j| problem.costs[j]).sum();
        if let Some((b, _)) = &best {
            if cost > *b + F::tie_tolerance() * b.max(F::one()) {
                continue;
            }
        }
        union.iter_mut().for_each(|w| *w = 0);
        for &j in &ids {
            for (u, m) in union.iter_mut().zip(&masks[j]) {
                *u |= m;
            }
        }
        if union != full {
            continue;
        }
        let better = match &best {
            None => true,
            Some((b, b_ids)) => {
                let tol = F::tie_tolerance() * b.max(F::one());
                cost < *b - tol || ((cost - *b).abs() <= tol && ids < *b_ids)
            }
        };
        if better {
            best = Some((cost, ids));
        }
    }
    let (_, ids) = best.ok_or(Error::UncoveredSample(0))?;
    Ok(problem.solution(ids))
}

/// `H(d) = 1 + 1/2 + ... + 1/d`, Chvátal's approximation factor.
pub fn harmonic(d: usize) -> f64 {
    (1..=d).map(|k| 1.0 / k as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(m: usize, rules: &[(&[usize], f64)]) -> CoverProblem<f64> {
        CoverProblem::new(
            m,
            rules.iter().map(|r| r.1).collect(),
            rules.iter().map(|r| r.0.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_rule_covering_everything() {
        let p = problem(4, &[(&[0, 1, 2, 3], 1.3)]);
        assert_eq!(greedy_cover(&p).unwrap().selected, vec![0]);
        assert_eq!(exact_cover(&p).unwrap().selected, vec![0]);
    }

    #[test]
    fn greedy_matches_optimum_on_three_rules() {
        // r1 {1,2} cost 1, r2 {3} cost 1, r3 {1,2,3} cost 2.5
        let p = problem(3, &[(&[0, 1], 1.0), (&[2], 1.0), (&[0, 1, 2], 2.5)]);
        let g = greedy_cover(&p).unwrap();
        assert_eq!(g.selected, vec![0, 1]);
        assert_eq!(g.total_cost, 2.0);
        let e = exact_cover(&p).unwrap();
        assert_eq!(e.selected, vec![0, 1]);
        assert_eq!(e.total_cost, 2.0);
    }

    #[test]
    fn redundancy_removal_drops_cheaper_subset_rule() {
        // rA {1,2,3} cost 1.2 then rB {1,2,3,4} cost 1.8; rA becomes redundant.
        let p = problem(4, &[(&[0, 1, 2], 1.2), (&[0, 1, 2, 3], 1.8)]);
        let g = greedy_cover(&p).unwrap();
        assert_eq!(g.selected, vec![1]);
        assert!((g.total_cost - 1.8).abs() < 1e-12);
        assert_eq!(remove_redundant(&[0, 1], &p).selected, vec![1]);
        assert_eq!(exact_cover(&p).unwrap().selected, vec![1]);
    }

    #[test]
    fn removal_keeps_irredundant_selection() {
        let p = problem(3, &[(&[0, 1], 1.0), (&[2], 1.0)]);
        let s = remove_redundant(&[0, 1], &p);
        assert_eq!(s.selected, vec![0, 1]);
    }

    #[test]
    fn duplicate_rules_lose_one_copy() {
        let p = problem(2, &[(&[0, 1], 1.5), (&[0, 1], 1.5)]);
        let s = remove_redundant(&[0, 1], &p);
        // Equal cost: the higher id is examined first and removed.
        assert_eq!(s.selected, vec![0]);
    }

    #[test]
    fn exact_tie_break_is_lexicographic() {
        let p = problem(3, &[(&[0, 1], 1.0), (&[1, 2], 1.0), (&[0, 2], 1.0)]);
        let e = exact_cover(&p).unwrap();
        assert_eq!(e.selected, vec![0, 1]);
        assert_eq!(e.total_cost, 2.0);
    }

    #[test]
    fn exact_refuses_large_instances() {
        let rules: Vec<Vec<usize>> = (0..21).map(|j| vec![j % 3]).collect();
        let p = CoverProblem::new(3, vec![1.0; 21], rules).unwrap();
        assert!(matches!(exact_cover(&p), Err(Error::TooManyRules { .. })));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            CoverProblem::new(3, vec![1.0_f64], vec![vec![0, 1]]),
            Err(Error::UncoveredSample(2))
        ));
        assert!(CoverProblem::new(1, vec![0.5_f64], vec![vec![0]]).is_err());
        assert!(CoverProblem::new(1, vec![1.0_f64], vec![vec![4]]).is_err());
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(3) - 11.0 / 6.0).abs() < 1e-15);
    }
}
