use proptest::prelude::*;
use toolplan_core::artifact::Artifact;
use toolplan_core::competition::split_indices;
use toolplan_core::harness::{leaderboard_percentile, median};
use toolplan_core::search::{uct_score, SearchTree};
use toolplan_core::{NodeId, NodePad, PathView, Scratchpad};

proptest! {
    #[test]
    fn split_is_a_sorted_partition(n in 2usize..400, sample in 0usize..500, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let (train, test) = split_indices(n, sample, frac, seed);
        let m = sample.clamp(2, n);
        prop_assert_eq!(train.len() + test.len(), m);
        prop_assert!(!train.is_empty() && !test.is_empty());
        prop_assert!(train.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(test.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(train.iter().chain(&test).all(|&i| i < n));
        prop_assert!(test.iter().all(|i| train.binary_search(i).is_err()));
        prop_assert_eq!(split_indices(n, sample, frac, seed), (train, test));
    }

    #[test]
    fn percentile_is_bounded_and_monotone(
        board in prop::collection::vec(-1e3f64..1e3, 1..60),
        a in -2e3f64..2e3,
        b in -2e3f64..2e3,
        hib in any::<bool>(),
    ) {
        let pa = leaderboard_percentile(&board, a, hib).unwrap();
        let pb = leaderboard_percentile(&board, b, hib).unwrap();
        prop_assert!((0.0..=100.0).contains(&pa));
        let a_better = if hib { a >= b } else { a <= b };
        if a_better {
            prop_assert!(pa >= pb);
        }
    }

    #[test]
    fn median_lies_within_range(values in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let m = median(&values).unwrap();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= m && m <= hi);
        let mut rev = values.clone();
        rev.reverse();
        prop_assert_eq!(median(&rev), Some(m));
    }

    #[test]
    fn uct_exploration_shrinks_with_visits(value in -1.0f64..1.0, v in 1u32..1000, parent in 2u32..5000, w in 0.0f64..3.0) {
        let s1 = uct_score(value, v, parent, w);
        let s2 = uct_score(value, v + 1, parent, w);
        prop_assert!(s1 >= value && s2 <= s1);
    }

    #[test]
    fn backpropagated_values_are_running_means(rewards in prop::collection::vec((0usize..3, -2.0f64..2.0), 1..40)) {
        let mut tree = SearchTree::new();
        let a = tree.add_child(SearchTree::ROOT, Some(NodeId(1)), 1);
        let leaves = [a, tree.add_child(a, Some(NodeId(2)), 2), tree.add_child(a, Some(NodeId(3)), 2)];
        let mut sums = [0.0f64; 3];
        let mut counts = [0u32; 3];
        for &(k, r) in &rewards {
            tree.backpropagate(leaves[k], r);
            sums[k] += r;
            counts[k] += 1;
        }
        let total: f64 = rewards.iter().map(|(_, r)| r).sum();
        prop_assert_eq!(tree.entry(SearchTree::ROOT).visits as usize, rewards.len());
        prop_assert!((tree.entry(SearchTree::ROOT).value - total / rewards.len() as f64).abs() < 1e-9);
        prop_assert_eq!(tree.entry(a).visits as usize, rewards.len());
        for k in 1..3 {
            let e = tree.entry(leaves[k]);
            prop_assert_eq!(e.visits, counts[k]);
            if counts[k] > 0 {
                prop_assert!((e.value - sums[k] / counts[k] as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deepest_definition_wins(defs in prop::collection::vec(prop::collection::btree_set(0usize..6, 0..4), 1..8)) {
        let mut pad = Scratchpad::new(256);
        let mut path = Vec::new();
        for (depth, names) in defs.iter().enumerate() {
            let mut p = NodePad::new();
            for n in names {
                p.put(&format!("obj{n}"), Artifact::text(format!("{depth}")), "tool").unwrap();
            }
            pad.insert(NodeId(depth), p);
            path.push(NodeId(depth));
        }
        let view = PathView::from_path(path);
        for n in 0..6 {
            let name = format!("obj{n}");
            let expect = defs.iter().rposition(|s| s.contains(&n));
            match (pad.resolve(&view, &name), expect) {
                (Ok(e), Some(d)) => prop_assert_eq!(e.value.summary(), Artifact::text(d.to_string()).summary()),
                (Err(_), None) => {}
                (got, want) => prop_assert!(false, "{name}: {:?} vs {want:?}", got.map(|e| e.created_by.clone())),
            }
        }
        let names = pad.available(&view);
        prop_assert!(names.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn duplicate_name_in_one_node_is_rejected() {
    let mut p = NodePad::new();
    p.put("x", Artifact::text("a"), "t").unwrap();
    assert!(p.put("x", Artifact::text("b"), "t").is_err());
    assert!(p.put("", Artifact::text("b"), "t").is_err());
}
