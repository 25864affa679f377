//! Covering LP relaxation `min Σ c_j z_j  s.t.  Σ_{j∈J(i)} z_j >= 1, z >= 0`.
//!
//! The solver runs the primal simplex on the dual
//!
//! ```text
//! max Σ_i λ_i   s.t.  Σ_{i∈I(j)} λ_i + s_j = c_j,   λ, s >= 0
//! ```
//!
//! whose slack basis is feasible from the start because every cost is
//! positive. The covering solution `z` is read off the objective row under
//! the slack columns at optimality. Pricing is Dantzig's rule, switching to
//! Bland's rule after `2 (m + n)` pivots so degenerate problems terminate.

use serde::{Deserialize, Serialize};

use crate::cover::CoverProblem;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions<F> {
    /// Primal and dual feasibility tolerance of the returned pair.
    pub feasibility_tol: F,
    /// Allowed `|Σ c_j z_j - Σ λ_i|`.
    pub gap_tol: F,
    /// Smallest tableau entry accepted as a pivot.
    pub pivot_tol: F,
}

impl<F: Scalar> Default for LpOptions<F> {
    fn default() -> Self {
        LpOptions {
            feasibility_tol: F::cast(1e-7).max(F::epsilon() * F::cast(1e2)),
            gap_tol: F::cast(1e-6).max(F::epsilon() * F::cast(1e3)),
            pivot_tol: F::cast(1e-9).max(F::epsilon() * F::cast(1e3)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution<F> {
    /// `z_j` per rule.
    pub primal: Vec<F>,
    /// `λ_i` per sample.
    pub duals: Vec<F>,
    /// Optimal value `Φ`.
    pub objective: F,
    pub iterations: usize,
    pub status: LpStatus,
}

/// `w̄_j = c_j - Σ_{i∈I(j)} λ_i`.
pub fn reduced_cost<F: Scalar>(cost: F, covered: &[usize], duals: &[F]) -> F {
    cost - covered.iter().map(|&i| duals[i]).sum::<F>()
}

struct Tableau<F> {
    rows: usize,
    width: usize,
    /// Row-major `rows × width` constraint block.
    body: Vec<F>,
    rhs: Vec<F>,
    /// Reduced costs `c_B B^{-1} a_q - c_q` of the maximization.
    objective_row: Vec<F>,
    objective: F,
    basis: Vec<usize>,
}

impl<F: Scalar> Tableau<F> {
    fn new(problem: &CoverProblem<F>) -> Self {
        let m = problem.n_samples();
        let n = problem.n_rules();
        let width = m + n;
        let mut body = vec![F::zero(); n * width];
        for j in 0..n {
            let row = &mut body[j * width..(j + 1) * width];
            for &i in problem.rule_samples(j) {
                row[i] = F::one();
            }
            row[m + j] = F::one();
        }
        let mut objective_row = vec![F::zero(); width];
        objective_row[..m].iter_mut().for_each(|r| *r = -F::one());
        Tableau {
            rows: n,
            width,
            body,
            rhs: problem.costs().to_vec(),
            objective_row,
            objective: F::zero(),
            basis: (m..m + n).collect(),
        }
    }

    fn entering(&self, bland: bool, tol: F) -> Option<usize> {
        if bland {
            return self.objective_row.iter().position(|&r| r < -tol);
        }
        let mut best: Option<(usize, F)> = None;
        for (q, &r) in self.objective_row.iter().enumerate() {
            if r < -tol && best.is_none_or(|(_, b)| r < b) {
                best = Some((q, r));
            }
        }
        best.map(|(q, _)| q)
    }

    /// Minimum ratio row; ties go to the row whose basic variable has the
    /// smallest index.
    fn leaving(&self, q: usize, pivot_tol: F) -> Option<usize> {
        let mut best: Option<(usize, F)> = None;
        for r in 0..self.rows {
            let a = self.body[r * self.width + q];
            if a <= pivot_tol {
                continue;
            }
            let ratio = self.rhs[r] / a;
            best = match best {
                None => Some((r, ratio)),
                Some((br, b)) => {
                    let tol = F::tie_tolerance() * b.abs().max(F::one());
                    if ratio < b - tol
                        || ((ratio - b).abs() <= tol && self.basis[r] < self.basis[br])
                    {
                        Some((r, ratio))
                    } else {
                        Some((br, b))
                    }
                }
            };
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, pr: usize, q: usize) {
        let w = self.width;
        let inv = F::one() / self.body[pr * w + q];
        {
            let row = &mut self.body[pr * w..(pr + 1) * w];
            row.iter_mut().for_each(|v| *v = *v * inv);
            row[q] = F::one();
        }
        self.rhs[pr] = (self.rhs[pr] * inv).max(F::zero());
        let pivot_row: Vec<F> = self.body[pr * w..(pr + 1) * w].to_vec();
        let pivot_rhs = self.rhs[pr];

        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let factor = self.body[r * w + q];
            if factor == F::zero() {
                continue;
            }
            let row = &mut self.body[r * w..(r + 1) * w];
            for (v, &p) in row.iter_mut().zip(&pivot_row) {
                *v = *v - factor * p;
            }
            row[q] = F::zero();
            self.rhs[r] = (self.rhs[r] - factor * pivot_rhs).max(F::zero());
        }
        let factor = self.objective_row[q];
        for (v, &p) in self.objective_row.iter_mut().zip(&pivot_row) {
            *v = *v - factor * p;
        }
        self.objective_row[q] = F::zero();
        self.objective = self.objective - factor * pivot_rhs;
        self.basis[pr] = q;
    }
}

/// Solves the covering LP to optimality and checks the returned pair:
/// primal and dual feasibility within `feasibility_tol` and a duality gap
/// within `gap_tol`.
pub fn solve_covering_lp<F: Scalar>(problem: &CoverProblem<F>) -> Result<LpSolution<F>> {
    solve_covering_lp_with(problem, &LpOptions::default())
}

pub fn solve_covering_lp_with<F: Scalar>(
    problem: &CoverProblem<F>,
    options: &LpOptions<F>,
) -> Result<LpSolution<F>> {
    let m = problem.n_samples();
    let n = problem.n_rules();
    let size = m + n;
    let bland_after = 2 * size;
    let limit = 50 * size;
    let mut tableau = Tableau::new(problem);
    let price_tol = options.pivot_tol;

    let mut iterations = 0;
    loop {
        let bland = iterations >= bland_after;
        let Some(q) = tableau.entering(bland, price_tol) else {
            break;
        };
        if iterations >= limit {
            return Err(Error::PivotLimit {
                limit,
                rows: n,
                cols: size,
                objective: tableau.objective.as_f64(),
            });
        }
        let Some(pr) = tableau.leaving(q, options.pivot_tol) else {
            return Err(Error::Invariant(format!(
                "dual of a feasible covering LP reported unbounded in column {q}"
            )));
        };
        tableau.pivot(pr, q);
        iterations += 1;
    }

    let mut duals = vec![F::zero(); m];
    for (r, &var) in tableau.basis.iter().enumerate() {
        if var < m {
            duals[var] = tableau.rhs[r].max(F::zero());
        }
    }
    let primal: Vec<F> = tableau.objective_row[m..]
        .iter()
        .map(|&z| z.max(F::zero()))
        .collect();
    let solution = LpSolution {
        objective: duals.iter().copied().sum(),
        primal,
        duals,
        iterations,
        status: LpStatus::Optimal,
    };
    verify(problem, &solution, options)?;
    Ok(solution)
}

fn verify<F: Scalar>(
    problem: &CoverProblem<F>,
    s: &LpSolution<F>,
    options: &LpOptions<F>,
) -> Result<()> {
    for i in 0..problem.n_samples() {
        let lhs: F = problem.sample_rules(i).iter().map(|&j| s.primal[j]).sum();
        if lhs < F::one() - options.feasibility_tol {
            return Err(Error::Invariant(format!(
                "LP sample {i} covered to {lhs} < 1"
            )));
        }
    }
    for j in 0..problem.n_rules() {
        let load: F = problem.rule_samples(j).iter().map(|&i| s.duals[i]).sum();
        if load > problem.cost(j) + options.feasibility_tol {
            return Err(Error::Invariant(format!(
                "LP dual load {load} on rule {j} exceeds its cost {}",
                problem.cost(j)
            )));
        }
    }
    let primal_value: F = s
        .primal
        .iter()
        .zip(problem.costs())
        .map(|(&z, &c)| z * c)
        .sum();
    if (primal_value - s.objective).abs() > options.gap_tol {
        return Err(Error::Invariant(format!(
            "LP duality gap {} exceeds {}",
            (primal_value - s.objective).abs(),
            options.gap_tol
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn problem(m: usize, rules: &[(&[usize], f64)]) -> CoverProblem<f64> {
        CoverProblem::new(
            m,
            rules.iter().map(|r| r.1).collect(),
            rules.iter().map(|r| r.0.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_covering_rule() {
        let p = problem(3, &[(&[0, 1, 2], 1.0)]);
        let s = solve_covering_lp(&p).unwrap();
        assert_abs_diff_eq!(s.primal[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.duals.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn three_cycle_has_half_integral_optimum() {
        let p = problem(3, &[(&[0, 1], 1.0), (&[1, 2], 1.0), (&[0, 2], 1.0)]);
        let s = solve_covering_lp(&p).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(s.primal[j], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(s.duals[j], 0.5, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.objective, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn partition_forces_unit_primal() {
        let costs = [1.0, 1.25, 1.5];
        let p = problem(
            5,
            &[(&[0, 1], costs[0]), (&[2], costs[1]), (&[3, 4], costs[2])],
        );
        let s = solve_covering_lp(&p).unwrap();
        for z in &s.primal {
            assert_abs_diff_eq!(*z, 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.objective, 3.75, epsilon = 1e-12);
    }

    #[test]
    fn reduced_cost_arithmetic() {
        let duals = [0.0, 0.4, 0.8, 0.6, 0.7];
        assert_abs_diff_eq!(reduced_cost(1.0, &[0], &duals), 1.0);
        assert_abs_diff_eq!(reduced_cost(1.5, &[1, 2], &duals), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(reduced_cost(1.0, &[3, 4], &duals), -0.3, epsilon = 1e-12);
    }

    #[test]
    fn deterministic() {
        let p = problem(
            4,
            &[
                (&[0, 1], 1.0),
                (&[1, 2], 1.0),
                (&[2, 3], 1.0),
                (&[0, 3], 1.0),
                (&[0, 1, 2, 3], 2.0),
            ],
        );
        assert_eq!(
            solve_covering_lp(&p).unwrap(),
            solve_covering_lp(&p).unwrap()
        );
    }

    #[test]
    fn works_in_single_precision() {
        let p = CoverProblem::new(
            3,
            vec![1.0_f32, 1.0, 1.0],
            vec![vec![0, 1], vec![1, 2], vec![0, 2]],
        )
        .unwrap();
        let options = LpOptions {
            feasibility_tol: 1e-5,
            gap_tol: 1e-5,
            ..LpOptions::default()
        };
        let s = solve_covering_lp_with(&p, &options).unwrap();
        assert!((s.objective - 1.5).abs() < 1e-5);
    }
}
