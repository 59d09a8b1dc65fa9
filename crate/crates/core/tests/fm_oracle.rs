mod checks;
mod common;
mod oracles;

use checks::fm::factors;
use lsa_core::predictor::fm_score;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn hundred_instances_match_double_loop() {
    if let Err(e) = checks::fm::fast_vs_brute(100, 7) {
        panic!("{e}");
    }
}

#[test]
fn tape_version_matches_double_loop() {
    if let Err(e) = checks::fm::tape_vs_brute(100, 8) {
        panic!("{e}");
    }
}

proptest! {
    #[test]
    fn identity_holds_for_arbitrary_features(
        x in prop::collection::vec(-3.0f64..3.0, 1..40),
        k in 1usize..8,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = x.len();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let fast = fm_score(&x, &w, &factors(&v), 0.5);
        let slow = oracles::fm_brute(&x, &w, &v, 0.5);
        // Absolute slack for sums that cancel to near zero.
        prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1.0));
    }
}
