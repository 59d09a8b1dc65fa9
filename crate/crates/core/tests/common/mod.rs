#![allow(dead_code)]

use lsa_core::corpus::{extract_aspect_mentions, AspectMention, RawReview};
use lsa_core::evaluation::split_indices;
use lsa_core::model::{LongTermSequences, LsaModel, ModelConfig, PreparedExample, Variant};
use lsa_core::synth::{generate, SynthConfig};
use lsa_core::training::{TrainConfig, TrainData};

pub fn small_synth(n_users: usize, n_items: usize, per_user: usize, seed: u64) -> Vec<RawReview> {
    generate(&SynthConfig {
        n_users,
        n_items,
        n_aspects: 12,
        interactions_per_user: per_user,
        n_topics: 3,
        profile_size: 3,
        attributes_per_item: 3,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
    .reviews
}

pub fn mentions(reviews: &[RawReview]) -> Vec<AspectMention> {
    reviews
        .iter()
        .enumerate()
        .flat_map(|(i, r)| extract_aspect_mentions(r.triples.as_deref().unwrap_or(&[]), i))
        .collect()
}

/// `d = 4, K = 3, N = 2`.
pub fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        d: 4,
        layers: 2,
        heads: 2,
        long_k: 3,
        short_n: 2,
        window_days: 365.0,
        lambda: 1.0,
        k_fm: 3,
        max_union: 16,
        full_vocabulary: false,
    }
}

pub fn tiny_train_config() -> TrainConfig {
    TrainConfig {
        model: tiny_model_config(),
        batch_size: 8,
        learning_rate: 3e-3,
        weight_decay: 0.0,
        max_epochs: 5,
        patience: 5,
        seed: 1,
        min_freq: 1,
        validation_fraction: 0.1,
    }
}

pub struct Fixture {
    pub reviews: Vec<RawReview>,
    pub mentions: Vec<AspectMention>,
    pub data: TrainData,
    pub test_indices: Vec<usize>,
}

pub fn fixture(n_users: usize, n_items: usize, per_user: usize, seed: u64) -> Fixture {
    let reviews = small_synth(n_users, n_items, per_user, seed);
    let mentions = mentions(&reviews);
    let (train, test) = split_indices(reviews.len(), 0.2, seed).unwrap();
    let data = TrainData::from_reviews(&reviews, &mentions, &train, 1);
    Fixture {
        reviews,
        mentions,
        data,
        test_indices: test,
    }
}

/// A freshly initialised model with its long-term sequences and every
/// training interaction prepared.
pub fn model_on(
    f: &Fixture,
    config: ModelConfig,
    variant: Variant,
    seed: u64,
) -> (LsaModel, LongTermSequences, Vec<PreparedExample>) {
    let model = LsaModel::new(
        config,
        variant,
        f.data.entities.n_users(),
        f.data.entities.n_items(),
        f.data.vocab.len(),
        3.0,
        seed,
    )
    .unwrap();
    let long = model.long_term_sequences(&f.data.context).unwrap();
    let prepared = f
        .data
        .train
        .iter()
        .map(|x| model.prepare(&f.data.context, x).unwrap())
        .collect();
    (model, long, prepared)
}
