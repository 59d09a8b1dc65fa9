//! Graph, vocabulary, split, metric and synthetic-corpus properties.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use lsa_core::corpus::{AspectVocabulary, RawReview};
use lsa_core::evaluation::{compute_metrics, split_indices};
use lsa_core::graph::{AspectGraph, EntityIndex, NodeId};
use lsa_core::model::Interaction;
use lsa_core::synth::{generate, SynthConfig};
use proptest::prelude::*;

fn graph_of(reviews: &[RawReview]) -> (AspectGraph, AspectVocabulary, EntityIndex) {
    let m = common::mentions(reviews);
    let vocab = AspectVocabulary::build(&m, 1);
    let entities = EntityIndex::from_reviews(reviews);
    (AspectGraph::build(reviews, &m, &vocab, &entities), vocab, entities)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weights_count_distinct_review_aspect_pairs(seed in 0u64..1000, users in 2usize..12, per_user in 1usize..8) {
        let reviews = common::small_synth(users, 10, per_user, seed);
        let (g, vocab, entities) = graph_of(&reviews);
        let mentions = common::mentions(&reviews);

        let mut want: BTreeMap<(bool, usize, u32), u32> = BTreeMap::new();
        let pairs: BTreeSet<(usize, u32)> = mentions.iter().map(|m| (m.review_index, vocab.id(&m.aspect).unwrap())).collect();
        for &(r, a) in &pairs {
            let rv = &reviews[r];
            *want.entry((true, entities.user(&rv.user_id).unwrap(), a)).or_default() += 1;
            *want.entry((false, entities.item(&rv.item_id).unwrap(), a)).or_default() += 1;
        }
        let mut total = 0u64;
        for u in 0..g.n_users() {
            for (a, w) in g.weighted_neighbors(NodeId::user(u)).unwrap() {
                prop_assert_eq!(Some(&w), want.get(&(true, u, a)));
                prop_assert_eq!(g.edge(NodeId::user(u), a).unwrap().times.len(), w as usize);
                total += u64::from(w);
            }
        }
        for i in 0..g.n_items() {
            for (a, w) in g.weighted_neighbors(NodeId::item(i)).unwrap() {
                prop_assert_eq!(Some(&w), want.get(&(false, i, a)));
            }
        }
        prop_assert_eq!(total, pairs.len() as u64);
    }

    #[test]
    fn rebuild_and_snapshot_are_identical(seed in 0u64..1000) {
        let reviews = common::small_synth(6, 8, 5, seed);
        let (a, _, _) = graph_of(&reviews);
        let (b, _, _) = graph_of(&reviews);
        prop_assert_eq!(&a, &b);
        let back = AspectGraph::from_snapshot(&a.to_snapshot()).unwrap();
        prop_assert_eq!(&back, &a);
    }

    #[test]
    fn vocabulary_ids_round_trip(seed in 0u64..1000, min_freq in 1u64..4) {
        let reviews = common::small_synth(8, 8, 6, seed);
        let m = common::mentions(&reviews);
        let vocab = AspectVocabulary::build(&m, min_freq);
        for id in 0..vocab.len() as u32 {
            let name = vocab.aspect(id).unwrap();
            prop_assert_eq!(vocab.id(name), Some(id));
            prop_assert!(vocab.frequency(id).unwrap() >= min_freq);
        }
        // Most frequent first.
        let f: Vec<u64> = (0..vocab.len() as u32).map(|i| vocab.frequency(i).unwrap()).collect();
        prop_assert!(f.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn split_has_requested_size_and_partitions(n in 1usize..400, ratio in 0.05f64..0.95, seed in any::<u64>()) {
        let (train, test) = split_indices(n, ratio, seed).unwrap();
        prop_assert_eq!(test.len(), (n as f64 * ratio).round() as usize);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn clamping_never_increases_error(
        rows in prop::collection::vec((1u8..=5, -3.0f64..9.0, 0usize..4), 1..40),
    ) {
        let test: Vec<Interaction> = rows.iter().enumerate().map(|(k, &(r, _, u))| Interaction {
            user: u, item: k, rating: f64::from(r), timestamp: 0,
        }).collect();
        let pred: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let m = compute_metrics(&test, &pred).unwrap();
        let n = test.len() as f64;
        let raw_mse = test.iter().zip(&pred).map(|(x, p)| (p - x.rating).powi(2)).sum::<f64>() / n;
        let raw_mae = test.iter().zip(&pred).map(|(x, p)| (p - x.rating).abs()).sum::<f64>() / n;
        prop_assert!(m.mse <= raw_mse + 1e-12);
        prop_assert!(m.mae <= raw_mae + 1e-12);
    }
}

#[test]
fn split_rejects_degenerate_ratio() {
    assert!(split_indices(10, 0.0, 1).is_err());
    assert!(split_indices(10, 1.0, 1).is_err());
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn drifted_ratings_follow_the_drift_interest() {
    let c = generate(&SynthConfig::default()).unwrap();
    let t = &c.truth;
    let (mut rating, mut with_drift, mut with_old) = (Vec::new(), Vec::new(), Vec::new());
    for (r, rt) in c.reviews.iter().zip(&t.reviews) {
        if !rt.drifted {
            continue;
        }
        let attrs = &t.item_attributes[rt.item];
        rating.push(r.rating);
        with_drift.push(dot(t.drift_interests[rt.user].as_ref().unwrap(), attrs));
        with_old.push(dot(&t.user_interests[rt.user], attrs));
        assert!(r.timestamp >= t.window_start && r.timestamp < t.window_end);
    }
    assert!(rating.len() > 100);
    let (cd, co) = (pearson(&rating, &with_drift), pearson(&rating, &with_old));
    assert!(cd > 0.5, "drift correlation {cd}");
    assert!(cd > co, "drift {cd} vs original {co}");
}

#[test]
fn extraction_recovers_every_planted_aspect() {
    let c = generate(&SynthConfig { seed: 9, ..SynthConfig::default() }).unwrap();
    let m = common::mentions(&c.reviews);
    let mut found: Vec<BTreeSet<String>> = vec![BTreeSet::new(); c.reviews.len()];
    for x in m {
        found[x.review_index].insert(x.aspect);
    }
    for (k, rt) in c.truth.reviews.iter().enumerate() {
        let planted: BTreeSet<String> = rt.aspects.iter().cloned().collect();
        assert_eq!(found[k], planted, "review {k}");
    }
}

#[test]
fn synth_is_deterministic_per_seed() {
    let a = generate(&SynthConfig { n_users: 20, n_items: 15, seed: 3, ..SynthConfig::default() }).unwrap();
    let b = generate(&SynthConfig { n_users: 20, n_items: 15, seed: 3, ..SynthConfig::default() }).unwrap();
    let c = generate(&SynthConfig { n_users: 20, n_items: 15, seed: 4, ..SynthConfig::default() }).unwrap();
    assert_eq!(a.reviews, b.reviews);
    assert_ne!(a.reviews, c.reviews);
    assert_eq!(a.reviews.len(), 20 * 20);
}
