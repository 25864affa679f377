#![allow(dead_code)]

use proptest::prelude::*;
use ruleforge::{CoverInstance, Dataset};

/// Small labelled datasets; coarse grids make ties and repeated values common.
pub fn dataset(max_m: usize, max_p: usize) -> impl Strategy<Value = Dataset<f64>> {
    (4..=max_m, 1..=max_p, 2..=3usize, any::<bool>()).prop_flat_map(|(m, p, k, coarse)| {
        let value = if coarse {
            (0..6i32).prop_map(f64::from).boxed()
        } else {
            (-50.0..50.0f64).boxed()
        };
        (
            prop::collection::vec(prop::collection::vec(value, p), m),
            prop::collection::vec(0..k, m),
        )
            .prop_map(move |(rows, mut labels)| {
                for (c, y) in labels.iter_mut().take(k).enumerate() {
                    *y = c;
                }
                Dataset::from_rows(rows, labels).unwrap()
            })
    })
}

/// Feasible covering instances with costs in `[1, 2]`.
pub fn instance(max_m: usize, max_n: usize) -> impl Strategy<Value = CoverInstance> {
    (1..=max_m, 1..=max_n).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(prop::collection::vec(any::<bool>(), m), n),
            prop::collection::vec(1.0..=2.0f64, n),
            prop::collection::vec(0..n, m),
        )
            .prop_map(move |(mask, costs, owner)| {
                let mut rules: Vec<Vec<usize>> = mask
                    .iter()
                    .map(|row| (0..m).filter(|&i| row[i]).collect())
                    .collect();
                for (i, &j) in owner.iter().enumerate() {
                    if !rules[j].contains(&i) {
                        rules[j].push(i);
                        rules[j].sort_unstable();
                    }
                }
                for r in rules.iter_mut() {
                    if r.is_empty() {
                        r.push(0);
                    }
                }
                CoverInstance {
                    n_samples: m,
                    costs,
                    rules,
                }
            })
    })
}
