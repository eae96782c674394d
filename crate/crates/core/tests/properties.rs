use std::collections::BTreeMap;

use blockboruta::boruta::{make_shadow, BlockStatus};
use blockboruta::correlation::BlockCorrelationMatrix;
use blockboruta::{
    brute_force_solve, consensus, grouped_kfold, solve, BorutaConfig, BorutaOutcome, ClassifierKind, ClassifierSpec,
    ConsensusRule, Matrix, PartitionProblem, Status,
};
use proptest::prelude::*;

fn symmetric(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(0.0f64..=1.0, n * (n - 1) / 2).prop_map(move |upper| {
        let mut m = vec![vec![1.0; n]; n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                m[i][j] = upper[k];
                m[j][i] = upper[k];
                k += 1;
            }
        }
        m
    })
}

fn outcome(statuses: &[bool]) -> BorutaOutcome {
    BorutaOutcome {
        blocks: statuses
            .iter()
            .enumerate()
            .map(|(i, &acc)| BlockStatus {
                name: format!("b{i}"),
                status: if acc { Status::Accepted } else { Status::Rejected },
                hits: 0,
                trials: 0,
                p_raw: 1.0,
                p_adjusted: 1.0,
                decided_at_iteration: None,
            })
            .collect(),
        history: vec![],
        config: BorutaConfig::default(),
        classifier: ClassifierSpec::new(ClassifierKind::LogisticRegression, 0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_is_feasible_and_optimal(
        (n, values) in (1usize..=8).prop_flat_map(|n| (Just(n), symmetric(n))),
        tau in 0.0f64..=1.0,
    ) {
        let names: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
        let problem = PartitionProblem::new(BlockCorrelationMatrix::from_values(names.clone(), values.clone()), tau).unwrap();
        let p = solve(&problem);
        let mut seen: Vec<String> = p.groups.iter().flatten().cloned().collect();
        seen.sort();
        let mut all = names.clone();
        all.sort();
        prop_assert_eq!(seen, all);
        let index = |name: &str| names.iter().position(|n| n == name).unwrap();
        for g in &p.groups {
            for (a, x) in g.iter().enumerate() {
                for y in &g[a + 1..] {
                    prop_assert!(values[index(x)][index(y)] >= tau);
                }
            }
        }
        prop_assert!(p.exact);
        prop_assert_eq!(p.objective, brute_force_solve(&problem).unwrap().objective);
    }

    #[test]
    fn consensus_sets_nest(votes in prop::collection::vec(prop::collection::vec(any::<bool>(), 6), 1..6)) {
        let outcomes: Vec<BorutaOutcome> = votes.iter().map(|v| outcome(v)).collect();
        let unanimous = consensus(&outcomes, ConsensusRule::Unanimous).unwrap();
        let majority = consensus(&outcomes, ConsensusRule::Majority).unwrap();
        prop_assert!(unanimous.iter().all(|b| majority.contains(b)));
        for (i, name) in (0..6).map(|i| (i, format!("b{i}"))) {
            let count = votes.iter().filter(|v| v[i]).count();
            prop_assert_eq!(unanimous.contains(&name), count == votes.len());
            prop_assert_eq!(majority.contains(&name), 2 * count > votes.len());
        }
    }

    #[test]
    fn folds_never_split_groups(
        n_groups in 2usize..40,
        reps in 1usize..4,
        k in 2usize..6,
        seed in any::<u64>(),
    ) {
        prop_assume!(n_groups >= k);
        let ids: Vec<String> = (0..n_groups * reps).map(|r| format!("g{}", (n_groups * reps - r) % n_groups)).collect();
        let plan = grouped_kfold(&ids, k, seed).unwrap();
        let mut fold_of: BTreeMap<&str, usize> = BTreeMap::new();
        let mut total = 0;
        for (f, rows) in plan.folds.iter().enumerate() {
            total += rows.len();
            for &r in rows {
                let prev = *fold_of.entry(ids[r].as_str()).or_insert(f);
                prop_assert_eq!(prev, f);
            }
        }
        prop_assert_eq!(total, ids.len());
    }

    #[test]
    fn shadow_keeps_block_rows_together(
        rows in prop::collection::vec(prop::collection::vec(-3i32..3, 4), 2..30),
        seed in any::<u64>(),
    ) {
        let x = Matrix::from_rows(
            (0..4).map(|j| format!("f{j}")).collect(),
            &rows.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect::<Vec<_>>(),
        );
        let blocks = vec![vec![0, 2], vec![1], vec![3]];
        let sh = make_shadow(&x, &blocks, seed);
        let tuples = |m: &Matrix| {
            let mut v: Vec<(i32, i32)> = (0..m.n_rows()).map(|r| (m.get(r, 0) as i32, m.get(r, 2) as i32)).collect();
            v.sort();
            v
        };
        prop_assert_eq!(tuples(&x), tuples(&sh));
        for c in [1, 3] {
            let mut a = x.column(c).to_vec();
            let mut b = sh.column(c).to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
    }
}
