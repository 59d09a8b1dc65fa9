mod oracles;

use lsa_core::evaluation::ndcg_at_k;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

/// Every rating list over {1..5} of length 1..=8.
#[test]
fn every_rating_list_up_to_eight() {
    for k in [10, 3] {
        let n = oracles::for_each_rating_list(8, k, |rel, pred, want| {
            let got = ndcg_at_k(rel, pred, k);
            assert!(close(got, want), "rel {rel:?} pred {pred:?} k {k}: {got} vs {want}");
        });
        assert_eq!(n, (1..=8).map(|l| 5usize.pow(l)).sum::<usize>());
    }
}

#[test]
fn length_six_with_every_cut() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..300 {
        let rel: Vec<f64> = (0..6).map(|_| rng.random_range(1..=5) as f64).collect();
        let pred: Vec<f64> = (0..6).map(|_| rng.random_range(1.0..5.0)).collect();
        for k in 1..=7 {
            assert!(close(ndcg_at_k(&rel, &pred, k), oracles::ndcg_brute(&rel, &pred, k)));
        }
    }
}

#[test]
fn random_lists_of_seven_and_eight() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for _ in 0..40 {
        let len = rng.random_range(7..=8);
        let rel: Vec<f64> = (0..len).map(|_| rng.random_range(1..=5) as f64).collect();
        let pred: Vec<f64> = (0..len).map(|_| rng.random_range(1..=5) as f64).collect();
        for k in [3, 5, 10] {
            assert!(close(ndcg_at_k(&rel, &pred, k), oracles::ndcg_brute(&rel, &pred, k)));
        }
    }
}

#[test]
fn perfect_and_reversed() {
    let rel = [5.0, 4.0, 3.0, 2.0, 1.0];
    assert!(close(ndcg_at_k(&rel, &rel, 10), 1.0));
    let rev: Vec<f64> = rel.iter().map(|r| -r).collect();
    assert!(ndcg_at_k(&rel, &rev, 10) < 1.0);
    assert_eq!(ndcg_at_k(&[0.0, 0.0], &[1.0, 2.0], 10), 1.0);
}

proptest! {
    #[test]
    fn bounded_and_matches_oracle(
        rel in prop::collection::vec(1u8..=5, 1..=6),
        seed in any::<u64>(),
        k in 1usize..=8,
    ) {
        let rel: Vec<f64> = rel.into_iter().map(f64::from).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pred: Vec<f64> = rel.iter().map(|_| rng.random_range(0..4) as f64).collect();
        let v = ndcg_at_k(&rel, &pred, k);
        prop_assert!(v > 0.0 && v <= 1.0 + 1e-12);
        prop_assert!(close(v, oracles::ndcg_brute(&rel, &pred, k)));
    }
}
