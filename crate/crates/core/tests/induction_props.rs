use astprobe::corpus::PairMode;
use astprobe::induce::{
    baseline_tree, build_tree, f1, inject_bias, tree_to_pairs, Baseline, BiasVariant, BinaryTree, PairSet,
};
use astprobe::synth::{ideal_distances, random_binary_tree};
use proptest::prelude::*;

fn pairs(raw: Vec<(usize, usize)>) -> PairSet {
    raw.into_iter().collect()
}

fn leaves(t: &BinaryTree) -> Vec<usize> {
    match t {
        BinaryTree::Leaf(w) => vec![*w],
        BinaryTree::Node(l, r) => [leaves(l), leaves(r)].concat(),
    }
}

proptest! {
    #[test]
    fn f1_is_bounded_and_symmetric(a in prop::collection::vec((0usize..8, 0usize..8), 0..12),
                                   b in prop::collection::vec((0usize..8, 0usize..8), 0..12)) {
        let (a, b) = (pairs(a), pairs(b));
        let s = f1(&a, &b);
        for v in [s.precision, s.recall, s.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(s.f1, f1(&b, &a).f1);
        prop_assert_eq!(f1(&a, &a).f1, 1.0);
        if a.is_disjoint(&b) && !(a.is_empty() && b.is_empty()) {
            prop_assert_eq!(s.f1, 0.0);
        }
    }

    #[test]
    fn built_trees_keep_word_order(d in prop::collection::vec(0.0f64..10.0, 0..40)) {
        let words: Vec<usize> = (0..=d.len()).collect();
        let t = build_tree(&words, &d).unwrap();
        prop_assert_eq!(leaves(&t), words);
        prop_assert_eq!(t.num_internal(), d.len());
    }

    #[test]
    fn first_split_is_at_the_leftmost_maximum(d in prop::collection::vec(0u8..4, 1..30)) {
        let d: Vec<f64> = d.into_iter().map(f64::from).collect();
        let words: Vec<usize> = (0..=d.len()).collect();
        let max = d.iter().cloned().fold(f64::MIN, f64::max);
        let k = d.iter().position(|&x| x == max).unwrap();
        let BinaryTree::Node(left, _) = build_tree(&words, &d).unwrap() else { unreachable!() };
        prop_assert_eq!(left.num_leaves(), k + 1);
    }

    #[test]
    fn ideal_distances_round_trip(n in 1usize..40, seed in any::<u64>()) {
        let t = random_binary_tree(n, seed).unwrap();
        let d = ideal_distances(&t).unwrap();
        let words: Vec<usize> = (0..n).collect();
        prop_assert_eq!(build_tree(&words, &d).unwrap(), t);
    }

    #[test]
    fn one_pair_per_internal_node(n in 1usize..40, seed in any::<u64>(), pick in any::<u64>()) {
        let t = random_binary_tree(n, seed).unwrap();
        for mode in [PairMode::Leftmost, PairMode::SeededRandom(pick)] {
            let p = tree_to_pairs(&t, mode);
            prop_assert_eq!(p.len(), n - 1);
            prop_assert!(p.iter().all(|&(i, j)| i < j && j < n));
        }
    }

    #[test]
    fn baselines_cover_every_word(n in 1usize..60, seed in any::<u64>()) {
        for kind in [Baseline::Random(seed), Baseline::Balanced, Baseline::LeftBranching, Baseline::RightBranching] {
            let t = baseline_tree(n, kind).unwrap();
            prop_assert_eq!(leaves(&t), (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn zero_lambda_leaves_distances_unchanged(d in prop::collection::vec(0.0f64..10.0, 0..30)) {
        for v in [BiasVariant::Ramp, BiasVariant::Literal] {
            prop_assert_eq!(inject_bias(&d, 0.0, v), d.clone());
        }
    }

    #[test]
    fn bias_never_lowers_a_distance(d in prop::collection::vec(0.0f64..10.0, 1..30), lambda in 0.0f64..3.0) {
        for v in [BiasVariant::Ramp, BiasVariant::Literal] {
            let b = inject_bias(&d, lambda, v);
            prop_assert!(b.iter().zip(&d).all(|(x, y)| x >= y));
        }
    }
}

#[test]
fn right_branching_pairs_chain_from_the_left() {
    let t = baseline_tree(4, Baseline::RightBranching).unwrap();
    assert_eq!(t.to_sexpr(), "(0 (1 (2 3)))");
    assert_eq!(tree_to_pairs(&t, PairMode::Leftmost), pairs(vec![(0, 1), (1, 2), (2, 3)]));
    let t = baseline_tree(4, Baseline::LeftBranching).unwrap();
    assert_eq!(t.to_sexpr(), "(((0 1) 2) 3)");
    assert_eq!(tree_to_pairs(&t, PairMode::Leftmost), pairs(vec![(0, 1), (0, 2), (0, 3)]));
}
