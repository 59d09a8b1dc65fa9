//! Hold-out protocol, rating and ranking metrics, ablations and sweeps.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{AspectMention, RawReview};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{Interaction, LsaModel, ModelContext, Variant};
use crate::rng::SeedStreams;
use crate::training::{interactions, train, EpochRecord, TrainConfig, TrainData, TrainOutcome};

pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 5.0;
pub const NDCG_CUTOFF: usize = 10;

/// Uniform random split of `0..n` into `(train, test)` index lists, each in
/// ascending order. The test side receives `round(n · ratio)` indices.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig("split ratio must lie in (0, 1)".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut SeedStreams::new(seed).stream("split"));
    let n_test = libm::round(n as f64 * ratio) as usize;
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Splits reviews into `(train, test)` with [`split_indices`].
pub fn split_dataset<T: Clone>(reviews: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let (train, test) = split_indices(reviews.len(), ratio, seed)?;
    Ok((
        train.iter().map(|&i| reviews[i].clone()).collect(),
        test.iter().map(|&i| reviews[i].clone()).collect(),
    ))
}

pub fn clamp_rating(r: f64) -> f64 {
    r.clamp(RATING_MIN, RATING_MAX)
}

fn gain(rel: f64) -> f64 {
    libm::exp2(rel) - 1.0
}

/// DCG of `relevance` taken in the given order, cut at `k`.
pub fn dcg_at_k(relevance: &[f64], k: usize) -> f64 {
    relevance
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| gain(r) / libm::log2(i as f64 + 2.0))
        .sum()
}

/// NDCG@k of the list ranked by `predicted` (descending, ties by position),
/// with `relevance` as graded relevance, exponential gain and log2 discount.
/// A list whose ideal DCG is zero scores 1.
pub fn ndcg_at_k(relevance: &[f64], predicted: &[f64], k: usize) -> f64 {
    assert_eq!(relevance.len(), predicted.len(), "relevance and prediction lengths");
    let mut order: Vec<usize> = (0..relevance.len()).collect();
    order.sort_by(|&a, &b| predicted[b].total_cmp(&predicted[a]).then(a.cmp(&b)));
    let ranked: Vec<f64> = order.iter().map(|&i| relevance[i]).collect();
    let mut ideal = relevance.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    if idcg == 0.0 {
        return 1.0;
    }
    dcg_at_k(&ranked, k) / idcg
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub ndcg_at_10: f64,
    pub n_test: usize,
    /// Users with at least two test items, over which NDCG is averaged.
    pub n_ndcg_users: usize,
}

/// Metrics of raw predictions. Predictions are clamped to the rating scale.
/// NDCG is averaged over users with at least two test items; with no such
/// user it is reported as 1.
pub fn compute_metrics(test: &[Interaction], predictions: &[f64]) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if test.len() != predictions.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions vs test set",
            expected: test.len(),
            found: predictions.len(),
        });
    }
    let clamped: Vec<f64> = predictions.iter().map(|&p| clamp_rating(p)).collect();
    let n = test.len() as f64;
    let mse = test.iter().zip(&clamped).map(|(x, p)| (p - x.rating) * (p - x.rating)).sum::<f64>() / n;
    let mae = test.iter().zip(&clamped).map(|(x, p)| (p - x.rating).abs()).sum::<f64>() / n;

    let mut per_user: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (x, &p) in test.iter().zip(&clamped) {
        let e = per_user.entry(x.user).or_default();
        e.0.push(x.rating);
        e.1.push(p);
    }
    let scores: Vec<f64> = per_user
        .values()
        .filter(|(rel, _)| rel.len() >= 2)
        .map(|(rel, pred)| ndcg_at_k(rel, pred, NDCG_CUTOFF))
        .collect();
    let ndcg = if scores.is_empty() {
        1.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    };
    Ok(Metrics {
        mse,
        mae,
        ndcg_at_10: ndcg,
        n_test: test.len(),
        n_ndcg_users: scores.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: String,
    pub mse: f64,
    pub mae: f64,
    pub ndcg_at_10: f64,
    pub n_test: usize,
    pub n_ndcg_users: usize,
    /// Test pairs whose candidate aspect union was cut to `max_union`.
    pub truncated_unions: usize,
    pub seed: u64,
    pub config: TrainConfig,
}

impl MetricsReport {
    pub fn new(variant: &str, metrics: Metrics, truncated_unions: usize, config: &TrainConfig) -> Self {
        MetricsReport {
            variant: variant.to_string(),
            mse: metrics.mse,
            mae: metrics.mae,
            ndcg_at_10: metrics.ndcg_at_10,
            n_test: metrics.n_test,
            n_ndcg_users: metrics.n_ndcg_users,
            truncated_unions,
            seed: config.seed,
            config: config.clone(),
        }
    }
}

/// Unclamped predictions of `model` for `test`, plus the number of pairs
/// whose candidate union was truncated.
pub fn predict_all<E: Executor>(
    model: &LsaModel,
    ctx: &ModelContext,
    test: &[Interaction],
    exec: &E,
) -> Result<(Vec<f64>, usize)> {
    let long = model.long_term_sequences(ctx)?;
    let prepared = test.iter().map(|x| model.prepare(ctx, x)).collect::<Result<Vec<_>>>()?;
    let truncated = prepared.iter().filter(|p| p.candidates.truncated).count();
    let preds = exec.map(prepared.len(), |j| model.predict(&long, &prepared[j]));
    Ok((preds, truncated))
}

pub fn evaluate<E: Executor>(
    model: &LsaModel,
    ctx: &ModelContext,
    test: &[Interaction],
    config: &TrainConfig,
    exec: &E,
) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let (preds, truncated) = predict_all(model, ctx, test, exec)?;
    let metrics = compute_metrics(test, &preds)?;
    Ok(MetricsReport::new(model.variant.name(), metrics, truncated, config))
}

/// Global mean plus regularised user and item biases, fitted by alternating
/// closed-form updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasBaseline {
    pub global_mean: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
}

impl BiasBaseline {
    pub const DEFAULT_REGULARIZATION: f64 = 5.0;
    const SWEEPS: usize = 20;

    pub fn fit(train: &[Interaction], n_users: usize, n_items: usize, reg: f64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let mu = train.iter().map(|x| x.rating).sum::<f64>() / train.len() as f64;
        let mut bu = alloc::vec![0.0; n_users];
        let mut bi = alloc::vec![0.0; n_items];
        for _ in 0..Self::SWEEPS {
            let mut sum = alloc::vec![0.0; n_items];
            let mut cnt = alloc::vec![0.0; n_items];
            for x in train {
                sum[x.item] += x.rating - mu - bu[x.user];
                cnt[x.item] += 1.0;
            }
            for i in 0..n_items {
                bi[i] = sum[i] / (cnt[i] + reg);
            }
            let mut sum = alloc::vec![0.0; n_users];
            let mut cnt = alloc::vec![0.0; n_users];
            for x in train {
                sum[x.user] += x.rating - mu - bi[x.item];
                cnt[x.user] += 1.0;
            }
            for u in 0..n_users {
                bu[u] = sum[u] / (cnt[u] + reg);
            }
        }
        Ok(BiasBaseline {
            global_mean: mu,
            user_bias: bu,
            item_bias: bi,
        })
    }

    pub fn predict(&self, x: &Interaction) -> f64 {
        self.global_mean + self.user_bias.get(x.user).unwrap_or(&0.0) + self.item_bias.get(x.item).unwrap_or(&0.0)
    }

    pub fn evaluate(&self, test: &[Interaction]) -> Result<Metrics> {
        let preds: Vec<f64> = test.iter().map(|x| self.predict(x)).collect();
        compute_metrics(test, &preds)
    }
}

/// Reviews with extracted mentions, ready for repeated experiments.
#[derive(Clone, Copy, Debug)]
pub struct Corpus<'a> {
    pub reviews: &'a [RawReview],
    /// Mentions indexing into `reviews`.
    pub mentions: &'a [AspectMention],
}

pub struct Experiment {
    pub data: TrainData,
    pub test: Vec<Interaction>,
    pub outcome: TrainOutcome,
    pub report: MetricsReport,
}

/// Splits `corpus` with `test_ratio`, trains `variant` and evaluates it on the
/// held-out reviews. The split and training both derive from `config.seed`.
pub fn run_experiment<E: Executor>(
    corpus: Corpus<'_>,
    config: &TrainConfig,
    variant: Variant,
    test_ratio: f64,
    exec: &E,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<Experiment> {
    let (train_idx, test_idx) = split_indices(corpus.reviews.len(), test_ratio, config.seed)?;
    let data = TrainData::from_reviews(corpus.reviews, corpus.mentions, &train_idx, config.min_freq);
    let test = interactions(corpus.reviews, &test_idx, &data.entities);
    let outcome = train(&data, config, variant, exec, observer)?;
    let report = evaluate(&outcome.model, &data.context, &test, config, exec)?;
    Ok(Experiment {
        data,
        test,
        outcome,
        report,
    })
}

/// Trains and evaluates one ablation variant.
pub fn run_ablation<E: Executor>(
    variant: Variant,
    corpus: Corpus<'_>,
    config: &TrainConfig,
    test_ratio: f64,
    exec: &E,
) -> Result<MetricsReport> {
    Ok(run_experiment(corpus, config, variant, test_ratio, exec, &mut |_| {})?.report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    K,
    N,
}

impl SweepParam {
    pub fn apply(self, config: &mut TrainConfig, value: usize) {
        match self {
            SweepParam::K => config.model.long_k = value,
            SweepParam::N => config.model.short_n = value,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::K => "K",
            SweepParam::N => "N",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(SweepParam::K),
            "N" | "n" => Ok(SweepParam::N),
            other => Err(Error::InvalidConfig(alloc::format!("unknown sweep parameter {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub mse: f64,
    pub mae: f64,
    pub ndcg_at_10: f64,
}

/// One full model per value of `param`, everything else fixed.
pub fn sweep<E: Executor>(
    param: SweepParam,
    values: &[usize],
    corpus: Corpus<'_>,
    config: &TrainConfig,
    test_ratio: f64,
    exec: &E,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Empty("sweep values"));
    }
    values
        .iter()
        .map(|&value| {
            let mut c = config.clone();
            param.apply(&mut c, value);
            let r = run_ablation(Variant::Full, corpus, &c, test_ratio, exec)?;
            Ok(SweepRow {
                value,
                mse: r.mse,
                mae: r.mae,
                ndcg_at_10: r.ndcg_at_10,
            })
        })
        .collect()
}

/// Median of a non-empty list.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
