mod common;

use proptest::prelude::*;
use ruleforge::tree::weighted_impurity;
use ruleforge::{
    dedup, enumerate_small_trees, extract_rules, fit_forest, fit_tree, fit_tree_unweighted,
    stratified_kfold, Criterion, Dataset, ForestParams, Provenance, TreeParams,
};

fn params(depth: usize, entropy: bool) -> TreeParams {
    TreeParams {
        criterion: if entropy {
            Criterion::Entropy
        } else {
            Criterion::Gini
        },
        ..TreeParams::with_depth(depth)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leaves_partition_the_training_samples(ds in common::dataset(40, 4), depth in 1..6usize, entropy: bool) {
        let tree = fit_tree_unweighted(&ds, &params(depth, entropy)).unwrap();
        prop_assert!(tree.depth() <= depth);
        let mut seen: Vec<usize> = tree.leaves().iter().flat_map(|l| l.samples.iter().copied()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..ds.n_samples()).collect::<Vec<_>>());
        for (i, x) in ds.rows().enumerate() {
            prop_assert!(tree.leaf(x).samples.contains(&i));
        }
    }

    #[test]
    fn uniform_weights_do_not_change_the_tree(ds in common::dataset(40, 4), depth in 1..6usize, entropy: bool) {
        let p = params(depth, entropy);
        let base = fit_tree_unweighted(&ds, &p).unwrap();
        for c in [0.5, 1.0, 7.0] {
            let t = fit_tree(&ds, &vec![c; ds.n_samples()], &p).unwrap();
            prop_assert!(t.same_structure(&base));
        }
    }

    #[test]
    fn uniform_weights_in_single_precision(ds in common::dataset(30, 3), depth in 1..5usize) {
        let rows: Vec<Vec<f32>> = ds.rows().map(|r| r.iter().map(|&v| v as f32).collect()).collect();
        let ds32 = Dataset::from_rows(rows, ds.labels().to_vec()).unwrap();
        let p = params(depth, false);
        let base = fit_tree_unweighted(&ds32, &p).unwrap();
        for c in [0.5f32, 1.0, 7.0] {
            let t = fit_tree(&ds32, &vec![c; ds32.n_samples()], &p).unwrap();
            prop_assert!(t.same_structure(&base));
        }
    }

    #[test]
    fn extracted_rules_agree_with_the_data(ds in common::dataset(40, 4), depth in 1..6usize) {
        let tree = fit_tree_unweighted(&ds, &params(depth, false)).unwrap();
        let rules = extract_rules(&tree, &ds, Criterion::Gini, |leaf| Provenance::InitialTree { leaf });
        prop_assert!(rules.len() <= tree.n_leaves());
        for r in &rules {
            let covered: Vec<usize> = (0..ds.n_samples()).filter(|&i| r.satisfies(ds.row(i))).collect();
            prop_assert_eq!(&covered, &r.covered);
            let mut counts = vec![0usize; ds.n_classes()];
            for &i in &covered {
                counts[ds.label(i)] += 1;
            }
            prop_assert_eq!(&counts, &r.class_counts);
            let totals: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let w = weighted_impurity(&totals, Criterion::Gini).unwrap();
            prop_assert!((w - r.impurity).abs() < 1e-12);
            prop_assert!(r.n_clauses() <= depth);
        }
    }

    #[test]
    fn dedup_is_idempotent(ds in common::dataset(40, 3), trees in 1..6usize, seed: u64) {
        let forest = fit_forest(&ds, &ForestParams::new(trees, 3, seed)).unwrap();
        let mut all = Vec::new();
        for (t, tree) in forest.trees.iter().enumerate() {
            all.extend(extract_rules(tree, &ds, Criterion::Gini, |leaf| Provenance::Forest { tree: t, leaf }));
        }
        let once = dedup(all.clone(), Criterion::Gini, ds.n_classes(), ds.n_features());
        let twice = dedup(once.rules().to_vec(), Criterion::Gini, ds.n_classes(), ds.n_features());
        prop_assert_eq!(&once, &twice);
        let doubled: Vec<_> = all.iter().chain(all.iter()).cloned().collect();
        let again = dedup(doubled, Criterion::Gini, ds.n_classes(), ds.n_features());
        prop_assert_eq!(&once, &again);
    }

    #[test]
    fn cart_never_beats_exhaustive_search(ds in common::dataset(16, 2), depth in 1..=2usize) {
        let tree = fit_tree_unweighted(&ds, &params(depth, false)).unwrap();
        let hits = ds.rows().enumerate().filter(|(i, x)| tree.predict(x) == ds.label(*i)).count();
        let best = enumerate_small_trees(&ds, depth).unwrap();
        prop_assert!(hits as f64 / ds.n_samples() as f64 <= best + 1e-12);
    }

    #[test]
    fn stratified_folds_balance_each_class(ds in common::dataset(40, 1), k in 2..5usize, seed: u64) {
        prop_assume!(k <= ds.n_samples());
        let plan = stratified_kfold(&ds, k, seed).unwrap();
        let counts = ds.class_counts();
        for fold in 0..k {
            let test = plan.test_indices(fold);
            for (c, &total) in counts.iter().enumerate() {
                let n = test.iter().filter(|&&i| ds.label(i) == c).count();
                prop_assert!(n == total / k || n == total.div_ceil(k));
            }
        }
    }
}

#[test]
fn xor_matches_the_exhaustive_optimum() {
    let ds = Dataset::from_rows(
        vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ],
        vec![0, 1, 1, 0],
    )
    .unwrap();
    let tree = fit_tree_unweighted(&ds, &TreeParams::with_depth(2)).unwrap();
    assert_eq!(tree.predict_all(&ds), vec![0, 1, 1, 0]);
    assert_eq!(enumerate_small_trees(&ds, 2).unwrap(), 1.0);
}

#[test]
fn forest_is_reproducible_across_thread_counts() {
    let ds = Dataset::from_rows(
        (0..80)
            .map(|i| vec![(i % 9) as f64, (i * 7 % 13) as f64, (i % 4) as f64])
            .collect(),
        (0..80).map(|i| usize::from(i % 9 + i % 4 > 6)).collect(),
    )
    .unwrap();
    let params = ForestParams::new(12, 4, 99);
    let a = fit_forest(&ds, &params).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let b = pool.install(|| fit_forest(&ds, &params).unwrap());
    assert_eq!(a.trees, b.trees);
}
