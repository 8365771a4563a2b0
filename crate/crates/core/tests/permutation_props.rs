use proptest::prelude::*;
use softrank_core::permutation::{
    enumerate_all, factorial, kendall_distance, kendall_tau, rank_of_coordinates, Permutation,
};
use softrank_core::softrank::lift_to_grid;

fn perm(max_n: usize) -> impl Strategy<Value = Permutation> {
    (2..=max_n).prop_flat_map(|n| Just((0..n).collect::<Vec<usize>>()).prop_shuffle()).prop_map(|seq| {
        Permutation::from_sequence(&seq).unwrap()
    })
}

fn pair(max_n: usize) -> impl Strategy<Value = (Permutation, Permutation)> {
    (2..=max_n).prop_flat_map(|n| {
        let base = Just((0..n).collect::<Vec<usize>>());
        (base.clone().prop_shuffle(), base.prop_shuffle())
    })
    .prop_map(|(a, b)| (Permutation::from_sequence(&a).unwrap(), Permutation::from_sequence(&b).unwrap()))
}

proptest! {
    #[test]
    fn inverse_is_two_sided(sigma in perm(9)) {
        let inv = sigma.inverse();
        prop_assert!(Permutation::compose(&sigma, &inv).unwrap().is_identity());
        prop_assert!(Permutation::compose(&inv, &sigma).unwrap().is_identity());
        prop_assert_eq!(inv.inverse(), sigma);
    }

    #[test]
    fn apply_respects_composition((a, b) in pair(8)) {
        let items: Vec<usize> = (0..a.len()).map(|i| 10 * i + 1).collect();
        let lhs = Permutation::compose(&a, &b).unwrap().apply(&items).unwrap();
        let rhs = a.apply(&b.apply(&items).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn lift_then_rank_round_trips(sigma in perm(10)) {
        let z = lift_to_grid::<f64>(&sigma);
        prop_assert_eq!(rank_of_coordinates(z.as_slice()).unwrap(), sigma);
    }

    #[test]
    fn rank_of_coordinates_sorts(values in prop::collection::vec(-5.0f64..5.0, 2..12)) {
        let sigma = rank_of_coordinates(&values).unwrap();
        let sorted = sigma.apply(&values).unwrap();
        prop_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn kendall_is_a_metric((a, b) in pair(8), seed in 0usize..40320) {
        let n = a.len();
        let c = Permutation::from_lex_index(n, seed % factorial(n).unwrap()).unwrap();
        let dab = kendall_distance(&a, &b).unwrap();
        prop_assert_eq!(dab, kendall_distance(&b, &a).unwrap());
        prop_assert_eq!(kendall_distance(&a, &a).unwrap(), 0);
        prop_assert!(dab <= kendall_distance(&a, &c).unwrap() + kendall_distance(&c, &b).unwrap());
        prop_assert!(dab <= n * (n - 1) / 2);
        let tau = kendall_tau(&a, &b).unwrap();
        let expected = 1.0 - 4.0 * dab as f64 / (n * (n - 1)) as f64;
        prop_assert!((tau - expected).abs() < 1e-12);
    }

    #[test]
    fn lex_index_is_a_bijection(sigma in perm(8)) {
        let idx = sigma.lex_index();
        prop_assert!(idx < factorial(sigma.len()).unwrap());
        prop_assert_eq!(Permutation::from_lex_index(sigma.len(), idx).unwrap(), sigma);
    }
}

#[test]
fn enumeration_is_lexicographic_and_complete() {
    for n in 2..=6 {
        let all: Vec<_> = enumerate_all(n).unwrap().collect();
        assert_eq!(all.len(), factorial(n).unwrap());
        for (i, p) in all.iter().enumerate() {
            assert_eq!(p.lex_index(), i);
        }
        assert!(all.windows(2).all(|w| w[0].ranks() < w[1].ranks()));
    }
}

#[test]
fn kendall_distance_matches_adjacent_swap_count() {
    // Bubble-sort oracle: count swaps needed to turn b's order into a's.
    fn bubble(a: &Permutation, b: &Permutation) -> usize {
        let target = a.to_sequence();
        let pos: Vec<usize> = (0..a.len()).map(|k| target.iter().position(|&x| x == k).unwrap()).collect();
        let mut seq: Vec<usize> = b.to_sequence().into_iter().map(|k| pos[k]).collect();
        let mut swaps = 0;
        for i in 0..seq.len() {
            for j in 0..seq.len() - 1 - i {
                if seq[j] > seq[j + 1] {
                    seq.swap(j, j + 1);
                    swaps += 1;
                }
            }
        }
        swaps
    }
    let all: Vec<_> = enumerate_all(4).unwrap().collect();
    for a in &all {
        for b in &all {
            assert_eq!(kendall_distance(a, b).unwrap(), bubble(a, b));
        }
    }
}
