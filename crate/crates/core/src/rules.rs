//! Rules are root-to-leaf paths stored as per-feature intervals.
//!
//! A path's clauses are merged per feature into the tightest bounds, which
//! makes rule equality order-free and exact: two rules are the same iff they
//! constrain the same features with bitwise-equal thresholds. Every rule
//! carries its class counts, impurity and covered sample ids as evaluated on
//! the full training set.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cover::CoverProblem;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};
use crate::tree::{impurity, Criterion, DecisionTree, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clause<F> {
    pub feature: usize,
    pub op: Op,
    pub threshold: F,
}

impl<F: Scalar> Clause<F> {
    pub fn le(feature: usize, threshold: F) -> Self {
        Clause {
            feature,
            op: Op::Le,
            threshold,
        }
    }

    pub fn gt(feature: usize, threshold: F) -> Self {
        Clause {
            feature,
            op: Op::Gt,
            threshold,
        }
    }

    pub fn holds(&self, x: &[F]) -> bool {
        match self.op {
            Op::Le => x[self.feature] <= self.threshold,
            Op::Gt => x[self.feature] > self.threshold,
        }
    }
}

/// `lower < x[feature] <= upper`; a missing bound is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<F> {
    pub feature: usize,
    pub lower: Option<F>,
    pub upper: Option<F>,
}

impl<F: Scalar> Interval<F> {
    fn contains(&self, v: F) -> bool {
        self.lower.is_none_or(|lo| v > lo) && self.upper.is_none_or(|hi| v <= hi)
    }
}

/// Merges clauses into sorted per-feature intervals keeping the tightest bounds.
pub fn canonicalize<F: Scalar>(clauses: &[Clause<F>]) -> Vec<Interval<F>> {
    let mut intervals: Vec<Interval<F>> = Vec::new();
    for c in clauses {
        let pos = match intervals.iter().position(|iv| iv.feature == c.feature) {
            Some(pos) => pos,
            None => {
                intervals.push(Interval {
                    feature: c.feature,
                    lower: None,
                    upper: None,
                });
                intervals.len() - 1
            }
        };
        let iv = &mut intervals[pos];
        match c.op {
            Op::Le => iv.upper = Some(iv.upper.map_or(c.threshold, |u| u.min(c.threshold))),
            Op::Gt => iv.lower = Some(iv.lower.map_or(c.threshold, |l| l.max(c.threshold))),
        }
    }
    intervals.sort_by_key(|iv| iv.feature);
    intervals
}

/// Where a rule came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Forest { tree: usize, leaf: usize },
    InitialTree { leaf: usize },
    Pricing { iteration: usize, leaf: usize },
    Manual,
}

type KeyBound = Option<(u64, i16, i8)>;

/// Exact identity of a rule's region.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleKey(Vec<(usize, KeyBound, KeyBound)>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule<F> {
    pub intervals: Vec<Interval<F>>,
    /// `n_jk`: training samples of class `k` satisfying the rule.
    pub class_counts: Vec<usize>,
    /// `w_j`: impurity of `class_counts`.
    pub impurity: F,
    /// `I(j)`: sorted ids of the training samples satisfying the rule.
    pub covered: Vec<usize>,
    pub provenance: Provenance,
}

impl<F: Scalar> Rule<F> {
    /// Evaluates the region given by `clauses` on `dataset`.
    pub fn evaluate(
        clauses: &[Clause<F>],
        dataset: &Dataset<F>,
        criterion: Criterion,
        provenance: Provenance,
    ) -> Result<Self> {
        let intervals = canonicalize(clauses);
        if let Some(iv) = intervals
            .iter()
            .find(|iv| iv.feature >= dataset.n_features())
        {
            return Err(Error::InvalidParameter(format!(
                "clause on feature {} but dataset has {} features",
                iv.feature,
                dataset.n_features()
            )));
        }
        let covered: Vec<usize> = (0..dataset.n_samples())
            .filter(|&i| {
                intervals
                    .iter()
                    .all(|iv| iv.contains(dataset.value(i, iv.feature)))
            })
            .collect();
        Self::from_covered(intervals, covered, dataset, criterion, provenance)
    }

    fn from_covered(
        intervals: Vec<Interval<F>>,
        covered: Vec<usize>,
        dataset: &Dataset<F>,
        criterion: Criterion,
        provenance: Provenance,
    ) -> Result<Self> {
        if covered.is_empty() {
            return Err(Error::InvalidParameter(
                "rule covers no training sample".into(),
            ));
        }
        let mut class_counts = vec![0usize; dataset.n_classes()];
        for &i in &covered {
            class_counts[dataset.label(i)] += 1;
        }
        let totals: Vec<F> = class_counts.iter().map(|&c| F::from_count(c)).collect();
        let impurity = impurity(&totals, F::from_count(covered.len()), criterion);
        Ok(Rule {
            intervals,
            class_counts,
            impurity,
            covered,
            provenance,
        })
    }

    /// Whether `x` lies inside every interval.
    pub fn satisfies(&self, x: &[F]) -> bool {
        self.intervals.iter().all(|iv| iv.contains(x[iv.feature]))
    }

    /// Canonical clauses: per feature, the `>` bound then the `<=` bound.
    pub fn clauses(&self) -> Vec<Clause<F>> {
        let mut out = Vec::with_capacity(2 * self.intervals.len());
        for iv in &self.intervals {
            if let Some(lo) = iv.lower {
                out.push(Clause::gt(iv.feature, lo));
            }
            if let Some(hi) = iv.upper {
                out.push(Clause::le(iv.feature, hi));
            }
        }
        out
    }

    pub fn n_clauses(&self) -> usize {
        self.intervals
            .iter()
            .map(|iv| usize::from(iv.lower.is_some()) + usize::from(iv.upper.is_some()))
            .sum()
    }

    pub fn n_satisfied_clauses(&self, x: &[F]) -> usize {
        self.clauses().iter().filter(|c| c.holds(x)).count()
    }

    /// Covering cost `1 + w_j`.
    pub fn cost(&self) -> F {
        F::one() + self.impurity
    }

    pub fn majority_class(&self) -> usize {
        argmax(&self.class_counts)
    }

    pub fn key(&self) -> RuleKey {
        RuleKey(
            self.intervals
                .iter()
                .map(|iv| {
                    (
                        iv.feature,
                        iv.lower.map(Scalar::exact_key),
                        iv.upper.map(Scalar::exact_key),
                    )
                })
                .collect(),
        )
    }

    /// `IF x3 <= 0.520000 AND x1 > -1.400000 THEN class=1 counts=[12,3] impurity=0.320000`
    pub fn to_line(&self) -> String {
        let mut line = String::from("IF ");
        let clauses = self.clauses();
        if clauses.is_empty() {
            line.push_str("TRUE");
        }
        for (n, c) in clauses.iter().enumerate() {
            if n > 0 {
                line.push_str(" AND ");
            }
            let op = match c.op {
                Op::Le => "<=",
                Op::Gt => ">",
            };
            let _ = write!(line, "x{} {op} {:.6}", c.feature, c.threshold.as_f64());
        }
        let counts: Vec<String> = self.class_counts.iter().map(usize::to_string).collect();
        let _ = write!(
            line,
            " THEN class={} counts=[{}] impurity={:.6}",
            self.majority_class(),
            counts.join(","),
            self.impurity.as_f64()
        );
        line
    }
}

/// One rule per leaf of `tree` that is reached by at least one sample of
/// `dataset`. Counts, impurity and coverage are computed on `dataset`, which
/// should be the full training set rather than a bootstrap sample.
pub fn extract_rules<F: Scalar>(
    tree: &DecisionTree<F>,
    dataset: &Dataset<F>,
    criterion: Criterion,
    provenance: impl Fn(usize) -> Provenance,
) -> Vec<Rule<F>> {
    fn paths<F: Scalar>(
        node: &TreeNode<F>,
        prefix: &mut Vec<Clause<F>>,
        out: &mut Vec<Vec<Clause<F>>>,
    ) {
        match node {
            TreeNode::Leaf(_) => out.push(prefix.clone()),
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                prefix.push(Clause::le(*feature, *threshold));
                paths(left, prefix, out);
                prefix.pop();
                prefix.push(Clause::gt(*feature, *threshold));
                paths(right, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut leaf_paths = Vec::new();
    paths(&tree.root, &mut Vec::new(), &mut leaf_paths);

    let mut routed: Vec<Vec<usize>> = vec![Vec::new(); leaf_paths.len()];
    for (i, x) in dataset.rows().enumerate() {
        routed[tree.leaf_with_index(x).0].push(i);
    }
    leaf_paths
        .into_iter()
        .zip(routed)
        .enumerate()
        .filter(|(_, (_, covered))| !covered.is_empty())
        .map(|(leaf, (clauses, covered))| {
            Rule::from_covered(
                canonicalize(&clauses),
                covered,
                dataset,
                criterion,
                provenance(leaf),
            )
            .expect("nonempty coverage")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    /// No rule was satisfied; the class came from the best partially
    /// satisfied rules.
    pub missed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PoolRepr<F> {
    criterion: Criterion,
    n_classes: usize,
    n_features: usize,
    rules: Vec<Rule<F>>,
}

/// Deduplicated rule collection used as a voting classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(
    from = "PoolRepr<F>",
    into = "PoolRepr<F>",
    bound(serialize = "F: Scalar", deserialize = "F: Scalar")
)]
pub struct RulePool<F: Scalar> {
    criterion: Criterion,
    n_classes: usize,
    n_features: usize,
    rules: Vec<Rule<F>>,
    keys: HashSet<RuleKey>,
}

impl<F: Scalar> From<PoolRepr<F>> for RulePool<F> {
    fn from(repr: PoolRepr<F>) -> Self {
        let mut pool = RulePool::new(repr.criterion, repr.n_classes, repr.n_features);
        pool.extend(repr.rules);
        pool
    }
}

impl<F: Scalar> From<RulePool<F>> for PoolRepr<F> {
    fn from(pool: RulePool<F>) -> Self {
        PoolRepr {
            criterion: pool.criterion,
            n_classes: pool.n_classes,
            n_features: pool.n_features,
            rules: pool.rules,
        }
    }
}

impl<F: Scalar> PartialEq for RulePool<F> {
    fn eq(&self, other: &Self) -> bool {
        self.criterion == other.criterion
            && self.n_classes == other.n_classes
            && self.n_features == other.n_features
            && self.rules == other.rules
    }
}

impl<F: Scalar> RulePool<F> {
    pub fn new(criterion: Criterion, n_classes: usize, n_features: usize) -> Self {
        RulePool {
            criterion,
            n_classes,
            n_features,
            rules: Vec::new(),
            keys: HashSet::new(),
        }
    }

    /// Adds `rule` unless a rule with the same region is present.
    pub fn insert(&mut self, rule: Rule<F>) -> bool {
        if self.keys.insert(rule.key()) {
            self.rules.push(rule);
            true
        } else {
            false
        }
    }

    /// Inserts every rule, returning how many were new.
    pub fn extend(&mut self, rules: impl IntoIterator<Item = Rule<F>>) -> usize {
        rules.into_iter().map(|r| usize::from(self.insert(r))).sum()
    }

    pub fn contains(&self, rule: &Rule<F>) -> bool {
        self.keys.contains(&rule.key())
    }

    pub fn rules(&self) -> &[Rule<F>] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Pool restricted to the rules at `ids`, in that order.
    pub fn select(&self, ids: &[usize]) -> Self {
        let mut pool = RulePool::new(self.criterion, self.n_classes, self.n_features);
        pool.extend(ids.iter().map(|&j| self.rules[j].clone()));
        pool
    }

    /// Majority vote `argmax_k Σ_j n_jk` over the satisfied rules.
    ///
    /// When no rule is satisfied and `fallback` is set, the rules with the
    /// largest fraction of satisfied clauses vote jointly and the
    /// prediction is flagged as missed. Ties go to the lowest class index.
    pub fn predict(&self, x: &[F], fallback: bool) -> Result<Prediction> {
        if self.rules.is_empty() {
            return Err(Error::InvalidParameter("empty rule pool".into()));
        }
        let mut votes = vec![0usize; self.n_classes];
        let mut hit = false;
        for rule in self.rules.iter().filter(|r| r.satisfies(x)) {
            hit = true;
            for (v, c) in votes.iter_mut().zip(&rule.class_counts) {
                *v += c;
            }
        }
        if hit {
            return Ok(Prediction {
                class: argmax(&votes),
                missed: false,
            });
        }
        if !fallback {
            return Err(Error::NoSatisfiedRule);
        }
        // Fractions compared exactly as (satisfied, total) pairs.
        let scored: Vec<(usize, usize)> = self
            .rules
            .iter()
            .map(|r| (r.n_satisfied_clauses(x), r.n_clauses().max(1)))
            .collect();
        let (mut bs, mut bt) = scored[0];
        for &(s, t) in &scored[1..] {
            if s * bt > bs * t {
                (bs, bt) = (s, t);
            }
        }
        for (rule, &(s, t)) in self.rules.iter().zip(&scored) {
            if s * bt == bs * t {
                for (v, c) in votes.iter_mut().zip(&rule.class_counts) {
                    *v += c;
                }
            }
        }
        Ok(Prediction {
            class: argmax(&votes),
            missed: true,
        })
    }

    /// Rule ids sorted by `(impurity, id)`.
    pub fn export_order(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.rules.len()).collect();
        ids.sort_by(|&a, &b| {
            self.rules[a]
                .impurity
                .partial_cmp(&self.rules[b].impurity)
                .expect("finite impurity")
                .then(a.cmp(&b))
        });
        ids
    }

    /// One line per rule in [`RulePool::export_order`].
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        for j in self.export_order() {
            out.push_str(&self.rules[j].to_line());
            out.push('\n');
        }
        out
    }

    /// Set covering instance over the samples of `dataset`, which must be the
    /// set the rules were evaluated on.
    pub fn build_coverage(&self, dataset: &Dataset<F>) -> Result<CoverProblem<F>> {
        CoverProblem::new(
            dataset.n_samples(),
            self.rules.iter().map(Rule::cost).collect(),
            self.rules.iter().map(|r| r.covered.clone()).collect(),
        )
    }
}

/// Collapses rules with identical regions, keeping the first occurrence.
pub fn dedup<F: Scalar>(
    rules: impl IntoIterator<Item = Rule<F>>,
    criterion: Criterion,
    n_classes: usize,
    n_features: usize,
) -> RulePool<F> {
    let mut pool = RulePool::new(criterion, n_classes, n_features);
    pool.extend(rules);
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{fit_tree_unweighted, TreeParams};

    fn line_data() -> Dataset<f64> {
        let rows = vec![
            vec![1.0, 0.0],
            vec![1.5, 1.0],
            vec![3.0, 0.0],
            vec![4.0, 2.0],
        ];
        Dataset::from_rows(rows, vec![0, 0, 1, 1]).unwrap()
    }

    fn rule(clauses: &[Clause<f64>], d: &Dataset<f64>) -> Rule<f64> {
        Rule::evaluate(clauses, d, Criterion::Gini, Provenance::Manual).unwrap()
    }

    fn fixed(counts: Vec<usize>, clauses: &[Clause<f64>]) -> Rule<f64> {
        Rule {
            intervals: canonicalize(clauses),
            covered: vec![0],
            impurity: 0.0,
            class_counts: counts,
            provenance: Provenance::Manual,
        }
    }

    #[test]
    fn depth_one_tree_gives_two_rules() {
        let d = line_data();
        let tree = fit_tree_unweighted(&d, &TreeParams::with_depth(1)).unwrap();
        let rules = extract_rules(&tree, &d, Criterion::Gini, |leaf| Provenance::InitialTree {
            leaf,
        });
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].clauses(), vec![Clause::le(0, 2.25)]);
        assert_eq!(rules[1].clauses(), vec![Clause::gt(0, 2.25)]);
        assert_eq!(rules[0].covered, vec![0, 1]);
        assert_eq!(rules[0].impurity, 0.0);
    }

    #[test]
    fn interval_intersection() {
        let iv = canonicalize(&[Clause::le(0, 5.0), Clause::le(0, 3.0)]);
        assert_eq!(
            iv,
            vec![Interval {
                feature: 0,
                lower: None,
                upper: Some(3.0)
            }]
        );
        let iv = canonicalize(&[Clause::gt(1, 1.0), Clause::le(0, 2.0), Clause::gt(1, 0.5)]);
        assert_eq!(iv[0].feature, 0);
        assert_eq!(iv[1].lower, Some(1.0));
    }

    #[test]
    fn satisfies_boundaries() {
        let d = line_data();
        let r = rule(&[Clause::le(0, 2.0)], &d);
        assert!(r.satisfies(&[1.5, 9.0]));
        assert!(r.satisfies(&[2.0, 9.0]));
        let r = rule(&[Clause::le(0, 2.0), Clause::gt(1, 0.0)], &d);
        assert!(!r.satisfies(&[1.5, 0.0]));
        let root = rule(&[], &d);
        assert!(root.satisfies(&[-1e300, 1e300]));
        assert_eq!(root.covered.len(), 4);
    }

    #[test]
    fn dedup_is_order_free_and_exact() {
        let d = line_data();
        let a = rule(&[Clause::le(0, 2.0), Clause::gt(1, 0.5)], &d);
        let b = rule(&[Clause::gt(1, 0.5), Clause::le(0, 2.0)], &d);
        let c = rule(&[Clause::le(0, 2.000_000_1)], &d);
        let e = rule(&[Clause::le(0, 2.0)], &d);
        let pool = dedup(vec![a, b, c, e.clone(), e], Criterion::Gini, 2, 2);
        assert_eq!(pool.len(), 3);
        let again = dedup(pool.rules().to_vec(), Criterion::Gini, 2, 2);
        assert_eq!(again, pool);
    }

    #[test]
    fn voting_sums_counts() {
        let pool = dedup(
            vec![
                fixed(vec![3, 1], &[Clause::le(0, 5.0)]),
                fixed(vec![0, 5], &[Clause::gt(1, 0.0)]),
            ],
            Criterion::Gini,
            2,
            2,
        );
        let p = pool.predict(&[1.0, 1.0], false).unwrap();
        assert_eq!(
            p,
            Prediction {
                class: 1,
                missed: false
            }
        );
    }

    #[test]
    fn vote_tie_goes_to_lowest_class() {
        let pool = dedup(vec![fixed(vec![3, 3], &[])], Criterion::Gini, 2, 1);
        assert_eq!(pool.predict(&[0.0], false).unwrap().class, 0);
    }

    #[test]
    fn fallback_uses_largest_fraction() {
        // r satisfies 2 of its 3 clauses at x; the other rules satisfy at most 1/3.
        let r = fixed(
            vec![0, 4],
            &[Clause::le(0, 1.0), Clause::le(1, 1.0), Clause::gt(2, 5.0)],
        );
        let s = fixed(
            vec![9, 0],
            &[Clause::gt(0, 1.0), Clause::gt(1, 1.0), Clause::gt(2, 5.0)],
        );
        let t = fixed(
            vec![7, 0],
            &[Clause::le(0, 1.0), Clause::gt(1, 3.0), Clause::le(2, -1.0)],
        );
        let pool = dedup(vec![r, s, t], Criterion::Gini, 2, 3);
        let x = [0.0, 0.0, 0.0];
        assert_eq!(
            pool.predict(&x, true).unwrap(),
            Prediction {
                class: 1,
                missed: true
            }
        );
        assert!(matches!(
            pool.predict(&x, false),
            Err(Error::NoSatisfiedRule)
        ));
    }

    #[test]
    fn fallback_ties_vote_jointly() {
        let a = fixed(vec![2, 0], &[Clause::le(0, 0.0), Clause::le(1, 5.0)]);
        let b = fixed(vec![0, 3], &[Clause::le(0, 0.0), Clause::gt(1, -5.0)]);
        let pool = dedup(vec![a, b], Criterion::Gini, 2, 2);
        let p = pool.predict(&[1.0, 0.0], true).unwrap();
        assert_eq!(p.class, 1);
        assert!(p.missed);
    }

    #[test]
    fn export_line_format() {
        let r = Rule {
            intervals: canonicalize(&[Clause::le(3, 0.52), Clause::gt(1, -1.4)]),
            class_counts: vec![12, 3],
            impurity: 0.32,
            covered: vec![0],
            provenance: Provenance::Manual,
        };
        assert_eq!(
            r.to_line(),
            "IF x1 > -1.400000 AND x3 <= 0.520000 THEN class=0 counts=[12,3] impurity=0.320000"
        );
        let root = fixed(vec![1, 2], &[]);
        assert!(root.to_line().starts_with("IF TRUE THEN class=1"));
    }

    #[test]
    fn pool_serde_round_trip_rebuilds_keys() {
        let d = line_data();
        let pool = dedup(vec![rule(&[Clause::le(0, 2.0)], &d)], Criterion::Gini, 2, 2);
        let json = serde_json::to_string(&pool).unwrap();
        let mut back: RulePool<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pool);
        assert!(!back.insert(rule(&[Clause::le(0, 2.0)], &d)));
    }

    #[test]
    fn coverage_reports_uncovered_sample() {
        let rows = (0..10).map(|i| vec![i as f64]).collect();
        let labels = (0..10).map(|i| usize::from(i >= 5)).collect();
        let d = Dataset::from_rows(rows, labels).unwrap();
        let pool = dedup(
            vec![
                rule(&[Clause::le(0, 6.5)], &d),
                rule(&[Clause::gt(0, 7.5)], &d),
            ],
            Criterion::Gini,
            2,
            1,
        );
        let err = pool.build_coverage(&d).unwrap_err();
        assert!(matches!(err, Error::UncoveredSample(7)), "{err}");
    }
}
