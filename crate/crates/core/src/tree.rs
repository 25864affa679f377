//! Sample-weighted CART classification tree.
//!
//! The same learner grows the forest members for rule extraction and acts
//! as the pricing step of rule-cover boosting, where the accumulated LP
//! duals are passed as sample weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
    /// Shannon entropy divided by `ln K`, so it lies in `[0, 1]` like Gini.
    Entropy,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(Error::InvalidParameter(format!(
                "unknown criterion {other:?}"
            ))),
        }
    }
}

/// Impurity of a node with (possibly weighted) per-class totals.
///
/// Gini is `1 - Σ (U_k/U)²`. With per-sample weights `1 + Σ_s λ_i^s` this is
/// exactly the dual-weighted Gini used to steer boosting.
pub fn weighted_impurity<F: Scalar>(totals: &[F], criterion: Criterion) -> Result<F> {
    let total: F = totals.iter().copied().sum();
    if totals.iter().any(|&t| t < F::zero() || !t.is_finite()) {
        return Err(Error::InvalidParameter(
            "class totals must be finite and non-negative".into(),
        ));
    }
    if total <= F::zero() {
        return Err(Error::ZeroTotals);
    }
    Ok(impurity(totals, total, criterion))
}

/// `total` must equal the sum of `totals` and be positive.
pub(crate) fn impurity<F: Scalar>(totals: &[F], total: F, criterion: Criterion) -> F {
    match criterion {
        Criterion::Gini => {
            let sq: F = totals.iter().map(|&t| (t / total) * (t / total)).sum();
            (F::one() - sq).max(F::zero())
        }
        Criterion::Entropy => {
            if totals.len() < 2 {
                return F::zero();
            }
            let h: F = totals
                .iter()
                .filter(|&&t| t > F::zero())
                .map(|&t| {
                    let p = t / total;
                    -p * p.ln()
                })
                .sum();
            (h / F::from_count(totals.len()).ln()).max(F::zero())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    #[default]
    All,
    /// `⌈√p⌉` candidate features per split.
    Sqrt,
    Count(usize),
}

impl FeatureSubsample {
    fn resolve(self, p: usize) -> usize {
        match self {
            FeatureSubsample::All => p,
            FeatureSubsample::Sqrt => ((p as f64).sqrt().ceil() as usize).clamp(1, p),
            FeatureSubsample::Count(n) => n.clamp(1, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub criterion: Criterion,
    pub max_features: FeatureSubsample,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 5,
            min_samples_split: 2,
            criterion: Criterion::Gini,
            max_features: FeatureSubsample::All,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn with_depth(max_depth: usize) -> Self {
        TreeParams {
            max_depth,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidParameter(
                "max_depth must be at least 1".into(),
            ));
        }
        if let FeatureSubsample::Count(0) = self.max_features {
            return Err(Error::InvalidParameter(
                "max_features must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf<F> {
    /// Per-class sums of the sample weights that reached the leaf.
    pub weighted_totals: Vec<F>,
    /// Per-class sample counts (bootstrap repeats counted).
    pub counts: Vec<usize>,
    /// Ids of the fitting samples that reached the leaf.
    pub samples: Vec<usize>,
}

impl<F> Leaf<F> {
    pub fn majority_class(&self) -> usize {
        argmax(&self.counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode<F> {
    /// Samples with `x[feature] <= threshold` go left.
    Internal {
        feature: usize,
        threshold: F,
        left: Box<TreeNode<F>>,
        right: Box<TreeNode<F>>,
    },
    Leaf(Leaf<F>),
}

impl<F: Scalar> TreeNode<F> {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Internal { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Structural equality: same splits and same leaf class counts, ignoring
    /// the weighted totals.
    pub fn same_structure(&self, other: &TreeNode<F>) -> bool {
        match (self, other) {
            (TreeNode::Leaf(a), TreeNode::Leaf(b)) => a.counts == b.counts,
            (
                TreeNode::Internal {
                    feature: fa,
                    threshold: ta,
                    left: la,
                    right: ra,
                },
                TreeNode::Internal {
                    feature: fb,
                    threshold: tb,
                    left: lb,
                    right: rb,
                },
            ) => fa == fb && ta == tb && la.same_structure(lb) && ra.same_structure(rb),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<F> {
    pub root: TreeNode<F>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl<F: Scalar> DecisionTree<F> {
    pub fn leaf(&self, x: &[F]) -> &Leaf<F> {
        self.leaf_with_index(x).1
    }

    /// Leaf reached by `x` and its position in left-first depth-first order.
    pub fn leaf_with_index(&self, x: &[F]) -> (usize, &Leaf<F>) {
        let mut node = &self.root;
        let mut offset = 0;
        loop {
            match node {
                TreeNode::Leaf(leaf) => return (offset, leaf),
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if x[*feature] <= *threshold {
                        node = left;
                    } else {
                        offset += left.n_leaves();
                        node = right;
                    }
                }
            }
        }
    }

    pub fn predict(&self, x: &[F]) -> usize {
        self.leaf(x).majority_class()
    }

    pub fn predict_all(&self, dataset: &Dataset<F>) -> Vec<usize> {
        dataset.rows().map(|x| self.predict(x)).collect()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn n_leaves(&self) -> usize {
        self.root.n_leaves()
    }

    /// Leaves in left-first depth-first order.
    pub fn leaves(&self) -> Vec<&Leaf<F>> {
        fn walk<'a, F>(node: &'a TreeNode<F>, out: &mut Vec<&'a Leaf<F>>) {
            match node {
                TreeNode::Leaf(l) => out.push(l),
                TreeNode::Internal { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn same_structure(&self, other: &DecisionTree<F>) -> bool {
        self.root.same_structure(&other.root)
    }
}

/// Best axis-aligned split of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split<F> {
    pub feature: usize,
    pub threshold: F,
    /// `imp(parent) - (U_L imp(L) + U_R imp(R)) / U`.
    pub decrease: F,
}

struct FeatureScan<F> {
    constant: bool,
    best: Option<Split<F>>,
}

fn class_totals<F: Scalar>(
    dataset: &Dataset<F>,
    ids: &[usize],
    weights: &[F],
) -> (Vec<F>, Vec<usize>) {
    let k = dataset.n_classes();
    let mut totals = vec![F::zero(); k];
    let mut counts = vec![0; k];
    for &i in ids {
        let y = dataset.label(i);
        totals[y] = totals[y] + weights[i];
        counts[y] += 1;
    }
    (totals, counts)
}

fn scan_feature<F: Scalar>(
    dataset: &Dataset<F>,
    ids: &[usize],
    weights: &[F],
    feature: usize,
    parent_totals: &[F],
    criterion: Criterion,
) -> FeatureScan<F> {
    let mut order: Vec<usize> = ids.to_vec();
    order.sort_by(|&a, &b| {
        dataset
            .value(a, feature)
            .partial_cmp(&dataset.value(b, feature))
            .expect("finite features")
            .then(a.cmp(&b))
    });
    let first = dataset.value(order[0], feature);
    let last = dataset.value(order[order.len() - 1], feature);
    if first == last {
        return FeatureScan {
            constant: true,
            best: None,
        };
    }

    let total: F = parent_totals.iter().copied().sum();
    let parent_impurity = impurity(parent_totals, total, criterion);
    let tol = F::tie_tolerance();
    let mut left = vec![F::zero(); parent_totals.len()];
    let mut right = parent_totals.to_vec();
    let mut left_total = F::zero();
    let mut best: Option<Split<F>> = None;

    for pos in 0..order.len() - 1 {
        let i = order[pos];
        let y = dataset.label(i);
        left[y] = left[y] + weights[i];
        right[y] = right[y] - weights[i];
        left_total = left_total + weights[i];

        let here = dataset.value(i, feature);
        let next = dataset.value(order[pos + 1], feature);
        if here == next {
            continue;
        }
        let right_total = total - left_total;
        if left_total <= F::zero() || right_total <= F::zero() {
            continue;
        }
        for r in right.iter_mut() {
            if *r < F::zero() {
                *r = F::zero();
            }
        }
        let children = (left_total * impurity(&left, left_total, criterion)
            + right_total * impurity(&right, right_total, criterion))
            / total;
        let decrease = parent_impurity - children;
        if best.is_none_or(|b| decrease > b.decrease + tol) {
            best = Some(Split {
                feature,
                threshold: midpoint(here, next),
                decrease,
            });
        }
    }
    FeatureScan {
        constant: false,
        best,
    }
}

fn midpoint<F: Scalar>(a: F, b: F) -> F {
    let mid = a + (b - a) / (F::one() + F::one());
    if mid >= a && mid < b {
        mid
    } else {
        a
    }
}

fn pick_best<F: Scalar>(mut candidates: Vec<Split<F>>) -> Option<Split<F>> {
    candidates.sort_by_key(|s| s.feature);
    let tol = F::tie_tolerance();
    let mut best: Option<Split<F>> = None;
    for c in candidates {
        if c.decrease >= -tol && best.is_none_or(|b| c.decrease > b.decrease + tol) {
            best = Some(c);
        }
    }
    best
}

/// Best split over `features` for the samples `ids` (repeats allowed).
///
/// Thresholds are midpoints between adjacent distinct values. Ties in the
/// decrease go to the lower feature index, then the smaller threshold.
/// Splits that leave the impurity unchanged still count, so XOR-like
/// patterns can be separated one level further down. Returns `None` when
/// every candidate feature is constant on `ids`.
pub fn find_best_split<F: Scalar>(
    dataset: &Dataset<F>,
    ids: &[usize],
    weights: &[F],
    features: &[usize],
    criterion: Criterion,
) -> Option<Split<F>> {
    if ids.len() < 2 {
        return None;
    }
    let (totals, _) = class_totals(dataset, ids, weights);
    if totals.iter().copied().sum::<F>() <= F::zero() {
        return None;
    }
    let candidates = features
        .iter()
        .filter_map(|&f| scan_feature(dataset, ids, weights, f, &totals, criterion).best)
        .collect();
    pick_best(candidates)
}

struct Grower<'a, F> {
    dataset: &'a Dataset<F>,
    weights: &'a [F],
    params: &'a TreeParams,
    n_candidates: usize,
    rng: ChaCha8Rng,
}

impl<F: Scalar> Grower<'_, F> {
    fn grow(&mut self, ids: Vec<usize>, depth: usize) -> TreeNode<F> {
        let (totals, counts) = class_totals(self.dataset, &ids, self.weights);
        let n_present = counts.iter().filter(|&&c| c > 0).count();
        let stop = depth >= self.params.max_depth
            || ids.len() < self.params.min_samples_split.max(2)
            || n_present <= 1;
        let split = if stop {
            None
        } else {
            self.choose_split(&ids, &totals)
        };
        match split {
            None => TreeNode::Leaf(Leaf {
                weighted_totals: totals,
                counts,
                samples: ids,
            }),
            Some(split) => {
                let (left, right): (Vec<usize>, Vec<usize>) = ids
                    .into_iter()
                    .partition(|&i| self.dataset.value(i, split.feature) <= split.threshold);
                TreeNode::Internal {
                    feature: split.feature,
                    threshold: split.threshold,
                    left: Box::new(self.grow(left, depth + 1)),
                    right: Box::new(self.grow(right, depth + 1)),
                }
            }
        }
    }

    fn choose_split(&mut self, ids: &[usize], totals: &[F]) -> Option<Split<F>> {
        if totals.iter().copied().sum::<F>() <= F::zero() {
            return None;
        }
        let p = self.dataset.n_features();
        let mut order: Vec<usize> = (0..p).collect();
        if self.n_candidates < p {
            order.shuffle(&mut self.rng);
        }
        // Visit features until `n_candidates` non-constant ones were scanned.
        let mut visited = 0;
        let mut candidates = Vec::new();
        for f in order {
            if visited == self.n_candidates {
                break;
            }
            let scan = scan_feature(
                self.dataset,
                ids,
                self.weights,
                f,
                totals,
                self.params.criterion,
            );
            if scan.constant {
                continue;
            }
            visited += 1;
            candidates.extend(scan.best);
        }
        pick_best(candidates)
    }
}

pub(crate) fn grow_tree<F: Scalar>(
    dataset: &Dataset<F>,
    ids: Vec<usize>,
    weights: &[F],
    params: &TreeParams,
    rng: ChaCha8Rng,
) -> DecisionTree<F> {
    let mut grower = Grower {
        dataset,
        weights,
        params,
        n_candidates: params.max_features.resolve(dataset.n_features()),
        rng,
    };
    DecisionTree {
        root: grower.grow(ids, 0),
        n_features: dataset.n_features(),
        n_classes: dataset.n_classes(),
    }
}

pub(crate) fn check_weights<F: Scalar>(weights: &[F], m: usize) -> Result<()> {
    if weights.len() != m {
        return Err(Error::InvalidParameter(format!(
            "{} sample weights for {m} samples",
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !w.is_finite() || w < F::zero()) {
        return Err(Error::InvalidParameter(
            "sample weights must be finite and non-negative".into(),
        ));
    }
    if !weights.iter().any(|&w| w > F::zero()) {
        return Err(Error::InvalidParameter(
            "at least one sample weight must be positive".into(),
        ));
    }
    Ok(())
}

/// Fits a tree on every sample of `dataset` with per-sample `weights`.
pub fn fit_tree<F: Scalar>(
    dataset: &Dataset<F>,
    weights: &[F],
    params: &TreeParams,
) -> Result<DecisionTree<F>> {
    params.validate()?;
    check_weights(weights, dataset.n_samples())?;
    let ids = (0..dataset.n_samples()).collect();
    let rng = ChaCha8Rng::seed_from_u64(params.seed);
    Ok(grow_tree(dataset, ids, weights, params, rng))
}

/// Unit-weight convenience wrapper around [`fit_tree`].
pub fn fit_tree_unweighted<F: Scalar>(
    dataset: &Dataset<F>,
    params: &TreeParams,
) -> Result<DecisionTree<F>> {
    fit_tree(dataset, &vec![F::one(); dataset.n_samples()], params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ds(rows: &[&[f64]], labels: &[usize]) -> Dataset<f64> {
        Dataset::from_rows(rows.iter().map(|r| r.to_vec()).collect(), labels.to_vec()).unwrap()
    }

    #[test]
    fn gini_values() {
        assert_abs_diff_eq!(
            weighted_impurity(&[2.0, 2.0], Criterion::Gini).unwrap(),
            0.5
        );
        assert_abs_diff_eq!(
            weighted_impurity(&[5.0, 0.0], Criterion::Gini).unwrap(),
            0.0
        );
        // Sample of class A with accumulated dual 3 (weight 4), one of class B with weight 1.
        assert_abs_diff_eq!(
            weighted_impurity(&[4.0, 1.0], Criterion::Gini).unwrap(),
            0.32,
            epsilon = 1e-12
        );
    }

    #[test]
    fn entropy_is_normalized() {
        assert_abs_diff_eq!(
            weighted_impurity(&[1.0, 1.0, 1.0], Criterion::Entropy).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            weighted_impurity(&[3.0, 0.0], Criterion::Entropy).unwrap(),
            0.0
        );
        let h = weighted_impurity(&[3.0_f64, 1.0], Criterion::Entropy).unwrap();
        let expected = -(0.75_f64 * 0.75_f64.ln() + 0.25 * 0.25_f64.ln()) / 2.0_f64.ln();
        assert_abs_diff_eq!(h, expected, epsilon = 1e-12);
    }

    #[test]
    fn impurity_rejects_zero_totals() {
        assert!(matches!(
            weighted_impurity(&[0.0_f64, 0.0], Criterion::Gini),
            Err(Error::ZeroTotals)
        ));
        assert!(weighted_impurity(&[-1.0_f64, 2.0], Criterion::Gini).is_err());
    }

    #[test]
    fn gini_is_bounded_by_one_minus_one_over_k() {
        let g = weighted_impurity(&[1.0_f32, 1.0, 1.0, 1.0], Criterion::Gini).unwrap();
        assert!((g - 0.75).abs() < 1e-6);
    }

    #[test]
    fn midpoint_threshold() {
        let d = ds(&[&[1.0], &[3.0]], &[0, 1]);
        let s = find_best_split(&d, &[0, 1], &[1.0, 1.0], &[0], Criterion::Gini).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 2.0);
        assert_abs_diff_eq!(s.decrease, 0.5);
    }

    #[test]
    fn constant_feature_has_no_split() {
        let d = ds(&[&[1.0], &[1.0], &[1.0]], &[0, 1, 0]);
        assert!(find_best_split(&d, &[0, 1, 2], &[1.0; 3], &[0], Criterion::Gini).is_none());
    }

    #[test]
    fn equal_decrease_prefers_lower_feature() {
        let d = ds(&[&[0.0, 0.0], &[1.0, 1.0]], &[0, 1]);
        let s = find_best_split(&d, &[0, 1], &[1.0, 1.0], &[1, 0], Criterion::Gini).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn equal_decrease_prefers_smaller_threshold() {
        // Splits at 1.5 and 2.5 both isolate one class-1 sample among 0,1,0,1.
        let d = ds(&[&[1.0], &[2.0], &[3.0], &[4.0]], &[1, 0, 0, 1]);
        let s = find_best_split(&d, &[0, 1, 2, 3], &[1.0; 4], &[0], Criterion::Gini).unwrap();
        assert_eq!(s.threshold, 1.5);
    }

    #[test]
    fn single_class_gives_root_leaf() {
        let full = ds(&[&[0.0], &[1.0], &[2.0], &[3.0]], &[0, 0, 1, 1]);
        let single = full.subset(&[0, 1]);
        let tree = fit_tree_unweighted(&single, &TreeParams::with_depth(5)).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.depth(), 0);
    }

    #[test]
    fn xor_is_solved_at_depth_two() {
        let d = ds(
            &[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]],
            &[0, 1, 1, 0],
        );
        let tree = fit_tree_unweighted(&d, &TreeParams::with_depth(2)).unwrap();
        assert_eq!(tree.predict_all(&d), vec![0, 1, 1, 0]);
        assert_eq!(tree.depth(), 2);
        assert_eq!(tree.n_leaves(), 4);
    }

    #[test]
    fn depth_limit_and_weights_validation() {
        let d = ds(&[&[0.0], &[1.0], &[2.0], &[3.0]], &[0, 1, 0, 1]);
        let tree = fit_tree_unweighted(&d, &TreeParams::with_depth(1)).unwrap();
        assert!(tree.depth() <= 1);
        assert!(fit_tree(&d, &[1.0; 3], &TreeParams::default()).is_err());
        assert!(fit_tree(&d, &[0.0; 4], &TreeParams::default()).is_err());
        assert!(fit_tree(&d, &[1.0, -1.0, 1.0, 1.0], &TreeParams::default()).is_err());
        assert!(fit_tree(&d, &[1.0; 4], &TreeParams::with_depth(0)).is_err());
    }

    #[test]
    fn weights_steer_the_split() {
        // Unweighted, x<=1.5 isolates the first sample; a heavy sample at 4
        // makes isolating it the better split.
        let d = ds(&[&[1.0], &[2.0], &[3.0], &[4.0]], &[1, 0, 0, 1]);
        let s = find_best_split(
            &d,
            &[0, 1, 2, 3],
            &[1.0, 1.0, 1.0, 10.0],
            &[0],
            Criterion::Gini,
        )
        .unwrap();
        assert_eq!(s.threshold, 3.5);
    }

    #[test]
    fn leaf_indices_follow_depth_first_order() {
        let d = ds(&[&[0.0], &[1.0], &[2.0], &[3.0]], &[0, 1, 0, 1]);
        let tree = fit_tree_unweighted(&d, &TreeParams::with_depth(3)).unwrap();
        let leaves = tree.leaves();
        for x in d.rows() {
            let (idx, leaf) = tree.leaf_with_index(x);
            assert!(std::ptr::eq(leaves[idx], leaf));
        }
    }
}
