mod common;

use lsa_core::evaluation::split_indices;
use lsa_core::exec::Sequential;
use lsa_core::model::{LsaModel, Variant};
use lsa_core::training::{prediction_mse, train, TrainConfig, TrainData};
use lsa_core::Error;

fn fifty_reviews() -> common::Fixture {
    let f = common::fixture(10, 12, 5, 21);
    assert_eq!(f.reviews.len(), 50);
    f
}

fn run(f: &common::Fixture, config: &TrainConfig) -> lsa_core::training::TrainOutcome {
    train(&f.data, config, Variant::Full, &Sequential, &mut |_| {}).unwrap()
}

#[test]
fn train_mse_falls_over_the_first_three_epochs() {
    let f = fifty_reviews();
    let config = TrainConfig {
        max_epochs: 5,
        patience: 5,
        ..common::tiny_train_config()
    };
    let out = run(&f, &config);
    let mse: Vec<f64> = out.history.iter().map(|r| r.train_mse).collect();
    assert!(mse.len() >= 3);
    assert!(mse[0] > mse[1] && mse[1] > mse[2], "{mse:?}");
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let f = fifty_reviews();
    let config = TrainConfig {
        learning_rate: 0.0,
        weight_decay: 10.0,
        max_epochs: 3,
        patience: 5,
        ..common::tiny_train_config()
    };
    let out = run(&f, &config);
    let first = &out.history[0];
    for r in &out.history {
        // Batches are reshuffled each epoch, so the mean is summed in a
        // different order.
        assert!((r.train_mse - first.train_mse).abs() <= 1e-12 * first.train_mse);
        assert_eq!(r.val_mse.to_bits(), first.val_mse.to_bits());
    }
    // Rebuild the initial model exactly as training does.
    let mut order: Vec<usize> = (0..f.data.train.len()).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut lsa_core::rng::SeedStreams::new(config.seed).stream("validation"));
    let n_val = (f.data.train.len() as f64 * config.validation_fraction).round() as usize;
    let fit = &order[..f.data.train.len() - n_val];
    let mean = fit.iter().map(|&i| f.data.train[i].rating).sum::<f64>() / fit.len() as f64;
    let init = LsaModel::new(
        config.model.clone(),
        Variant::Full,
        f.data.entities.n_users(),
        f.data.entities.n_items(),
        f.data.vocab.len(),
        mean,
        config.seed,
    )
    .unwrap();
    assert_eq!(out.model.params, init.params);
}

#[test]
fn same_seed_same_trace() {
    let f = fifty_reviews();
    let config = common::tiny_train_config();
    let a = run(&f, &config);
    let b = run(&f, &config);
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.params, b.model.params);
    let c = run(&f, &TrainConfig { seed: 99, ..config });
    assert_ne!(a.history, c.history);
}

#[test]
fn checkpoint_reload_reproduces_validation_mse_bitwise() {
    let f = fifty_reviews();
    let config = common::tiny_train_config();
    let out = run(&f, &config);
    let bytes = out.model.params.to_checkpoint_bytes();
    let loaded = LsaModel::from_checkpoint(
        config.model.clone(),
        Variant::Full,
        f.data.entities.n_users(),
        f.data.entities.n_items(),
        f.data.vocab.len(),
        &bytes,
    )
    .unwrap();
    let long = loaded.long_term_sequences(&f.data.context).unwrap();
    let mse = prediction_mse(&loaded, &long, &out.validation, &Sequential);
    assert_eq!(mse.to_bits(), out.best_val_mse.to_bits());
    assert_eq!(loaded.params.to_checkpoint_bytes(), bytes);
}

#[test]
fn short_sequences_only_look_backwards() {
    let f = common::fixture(20, 10, 10, 5);
    let (model, _, prepared) = common::model_on(&f, common::tiny_model_config(), Variant::Full, 0);
    assert_eq!(model.config.short_n, 2);
    let mut seen = 0;
    for ex in &prepared {
        for seq in [&ex.user_short, &ex.item_short] {
            let times = seq.timestamps.as_ref().unwrap();
            for (t, &m) in times.iter().zip(&seq.mask) {
                if m {
                    assert!(*t < ex.timestamp);
                    seen += 1;
                }
            }
        }
    }
    assert!(seen > 0);
}

#[test]
fn graph_sees_only_training_reviews() {
    let f = common::fixture(20, 10, 10, 6);
    let rated: usize = f.data.context.graph.rating_edges().map(|(_, _, ev)| ev.len()).sum();
    assert_eq!(rated, f.data.train.len());
    assert_eq!(rated + f.test_indices.len(), f.reviews.len());
}

#[test]
fn non_finite_targets_abort_with_a_tensor_name() {
    let mut f = fifty_reviews();
    f.data.train[3].rating = f64::NAN;
    let err = train(&f.data, &common::tiny_train_config(), Variant::Full, &Sequential, &mut |_| {}).unwrap_err();
    match err {
        Error::Divergence { epoch, tensor } => {
            assert_eq!(epoch, 1);
            assert!(!tensor.is_empty());
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn empty_training_set_is_an_error() {
    let f = fifty_reviews();
    let (_, test) = split_indices(f.reviews.len(), 0.2, 0).unwrap();
    let empty = TrainData::from_reviews(&f.reviews, &f.mentions, &[], 1);
    assert!(test.len() == 10 && empty.train.is_empty());
    assert!(matches!(
        train(&empty, &common::tiny_train_config(), Variant::Full, &Sequential, &mut |_| {}),
        Err(Error::Empty(_))
    ));
}
