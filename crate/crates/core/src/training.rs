//! Mini-batch training with Adam, early stopping and finite-difference
//! gradient verification.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Tape};
use crate::corpus::{AspectMention, AspectVocabulary, RawReview};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::graph::{AspectGraph, EntityIndex};
use crate::model::{Interaction, LongTermSequences, LsaModel, ModelConfig, ModelContext, PreparedExample, Variant};
use crate::params::ParamStore;
use crate::rng::SeedStreams;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Decoupled L2 decay of the per-user and per-item tables, applied with
    /// every Adam step.
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub min_freq: u64,
    /// Share of the training interactions held out for early stopping.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            batch_size: 16,
            learning_rate: 1e-3,
            weight_decay: 10.0,
            max_epochs: 30,
            patience: 3,
            seed: 0,
            min_freq: 2,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be finite and non-negative".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig("weight_decay must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig("validation_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Mean squared difference.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions vs targets",
            expected: targets.len(),
            found: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / predictions.len() as f64)
}

/// Graph, vocabulary and interactions for one training run. Entities cover
/// every review so held-out pairs resolve; the vocabulary and graph only see
/// the training reviews.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainData {
    pub entities: EntityIndex,
    pub vocab: AspectVocabulary,
    pub context: ModelContext,
    pub train: Vec<Interaction>,
}

impl TrainData {
    /// `mentions` index into `reviews`; `train_indices` selects the training
    /// reviews.
    pub fn from_reviews(
        reviews: &[RawReview],
        mentions: &[AspectMention],
        train_indices: &[usize],
        min_freq: u64,
    ) -> Self {
        let entities = EntityIndex::from_reviews(reviews);
        let mut position = alloc::vec![None; reviews.len()];
        let mut train_reviews = Vec::with_capacity(train_indices.len());
        for &i in train_indices {
            if let Some(r) = reviews.get(i) {
                if position[i].is_none() {
                    position[i] = Some(train_reviews.len());
                    train_reviews.push(r.clone());
                }
            }
        }
        let train_mentions: Vec<AspectMention> = mentions
            .iter()
            .filter_map(|m| {
                let review_index = (*position.get(m.review_index)?)?;
                Some(AspectMention {
                    review_index,
                    ..m.clone()
                })
            })
            .collect();
        let vocab = AspectVocabulary::build(&train_mentions, min_freq);
        let graph = AspectGraph::build(&train_reviews, &train_mentions, &vocab, &entities);
        let train = interactions(reviews, train_indices, &entities);
        TrainData {
            entities,
            vocab,
            context: ModelContext::new(graph),
            train,
        }
    }
}

/// Dense-index interactions for the selected reviews. Reviews with unknown
/// entities are dropped.
pub fn interactions(reviews: &[RawReview], indices: &[usize], entities: &EntityIndex) -> Vec<Interaction> {
    indices
        .iter()
        .filter_map(|&i| {
            let r = reviews.get(i)?;
            Some(Interaction {
                user: entities.user(&r.user_id)?,
                item: entities.item(&r.item_id)?,
                rating: r.rating,
                timestamp: r.timestamp,
            })
        })
        .collect()
}

/// Adam with bias correction. Tensors without a gradient in a step are left
/// untouched, moments included.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Per-tensor switch for weight decay; all tensors by default.
    pub decayed: Vec<bool>,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &ParamStore, learning_rate: f64) -> Self {
        let zeros: Vec<Matrix> = params
            .tensors()
            .iter()
            .map(|t| Matrix::zeros(t.value.rows(), t.value.cols()))
            .collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            decayed: alloc::vec![true; params.len()],
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let Some(g) = grads.get(id) else { continue };
            let decay = if self.decayed.get(id.index()).copied().unwrap_or(true) { self.weight_decay } else { 0.0 };
            let m = self.m[id.index()].data_mut();
            let v = self.v[id.index()].data_mut();
            let p = params.get_mut(id).data_mut();
            for (((p, m), v), &g) in p.iter_mut().zip(m).zip(v).zip(g.data()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= self.learning_rate * (m_hat / (libm::sqrt(v_hat) + self.eps) + decay * *p);
            }
        }
    }
}

/// Squared error of one example and its gradient.
pub fn example_gradient(model: &LsaModel, long: &LongTermSequences, ex: &PreparedExample) -> (f64, Gradients) {
    let mut tape = Tape::new(&model.params);
    let pred = model.forward(&mut tape, long, ex);
    let target = tape.constant(Matrix::scalar(ex.rating));
    let diff = tape.sub(pred, target);
    let loss = tape.square(diff);
    let value = tape.value(loss).item();
    (value, tape.backward(loss))
}

/// Mean squared error over `batch` and its gradient, reduced in example order.
pub fn batch_gradient<E: Executor>(
    model: &LsaModel,
    long: &LongTermSequences,
    batch: &[&PreparedExample],
    exec: &E,
) -> (f64, Gradients) {
    let parts = exec.map(batch.len(), |j| example_gradient(model, long, batch[j]));
    let mut total = Gradients::zeros_like(&model.params);
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.add_assign(g);
    }
    let scale = 1.0 / batch.len().max(1) as f64;
    total.scale(scale);
    (loss * scale, total)
}

/// Mean squared error of unclamped predictions.
pub fn prediction_mse<E: Executor>(
    model: &LsaModel,
    long: &LongTermSequences,
    examples: &[PreparedExample],
    exec: &E,
) -> f64 {
    if examples.is_empty() {
        return f64::NAN;
    }
    let errs = exec.map(examples.len(), |j| {
        let e = &examples[j];
        let d = model.predict(long, e) - e.rating;
        d * d
    });
    errs.iter().sum::<f64>() / examples.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub model: LsaModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    /// Validation examples, for reproducing `best_val_mse`.
    pub validation: Vec<PreparedExample>,
}

/// Trains `variant` on `data.train`. The observer sees every finished epoch.
pub fn train<E: Executor>(
    data: &TrainData,
    config: &TrainConfig,
    variant: Variant,
    exec: &E,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let streams = SeedStreams::new(config.seed);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    order.shuffle(&mut streams.stream("validation"));
    let n_val = libm::round(data.train.len() as f64 * config.validation_fraction) as usize;
    let n_val = n_val.min(data.train.len() - 1);
    let (fit_idx, val_idx) = order.split_at(data.train.len() - n_val);

    let fit: Vec<&Interaction> = fit_idx.iter().map(|&i| &data.train[i]).collect();
    let global_mean = fit.iter().map(|x| x.rating).sum::<f64>() / fit.len() as f64;
    let mut model = LsaModel::new(
        config.model.clone(),
        variant,
        data.entities.n_users(),
        data.entities.n_items(),
        data.vocab.len(),
        global_mean,
        config.seed,
    )?;
    let ctx = &data.context;
    let fit_examples = fit
        .iter()
        .map(|x| model.prepare(ctx, x))
        .collect::<Result<Vec<_>>>()?;
    let mut validation = val_idx
        .iter()
        .map(|&i| model.prepare(ctx, &data.train[i]))
        .collect::<Result<Vec<_>>>()?;
    if validation.is_empty() {
        validation = fit_examples.clone();
    }

    let mut adam = Adam::new(&model.params, config.learning_rate);
    adam.weight_decay = config.weight_decay;
    adam.decayed = alloc::vec![false; model.params.len()];
    for id in model.entity_parameters() {
        adam.decayed[id.index()] = true;
    }
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.params.clone());
    let mut stale = 0;
    let mut batch_order: Vec<usize> = (0..fit_examples.len()).collect();
    for epoch in 1..=config.max_epochs {
        let long = model.long_term_sequences(ctx)?;
        batch_order.shuffle(&mut streams.indexed("shuffle", epoch as u64));
        let mut loss_sum = 0.0;
        for chunk in batch_order.chunks(config.batch_size) {
            let batch: Vec<&PreparedExample> = chunk.iter().map(|&j| &fit_examples[j]).collect();
            let (loss, grads) = batch_gradient(&model, &long, &batch, exec);
            if !loss.is_finite() {
                return Err(divergence(epoch, &model.params, &grads));
            }
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut model.params, &grads);
            if let Some(name) = model.params.first_non_finite() {
                return Err(Error::Divergence {
                    epoch,
                    tensor: name.to_string(),
                });
            }
        }
        let long = model.long_term_sequences(ctx)?;
        let val_mse = prediction_mse(&model, &long, &validation, exec);
        let record = EpochRecord {
            epoch,
            train_mse: loss_sum / fit_examples.len() as f64,
            val_mse,
            lr: config.learning_rate,
        };
        observer(&record);
        history.push(record);
        if !val_mse.is_finite() {
            return Err(Error::Divergence {
                epoch,
                tensor: "validation predictions".into(),
            });
        }
        if val_mse < best.0 {
            best = (val_mse, epoch, model.params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let (best_val_mse, best_epoch, params) = best;
    model.params = params;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_val_mse,
        validation,
    })
}

fn divergence(epoch: usize, params: &ParamStore, grads: &Gradients) -> Error {
    let tensor = params
        .first_non_finite()
        .map(ToString::to_string)
        .or_else(|| grads.first_non_finite().map(|i| params.tensors()[i].name.clone()))
        .unwrap_or_else(|| String::from("loss"));
    Error::Divergence { epoch, tensor }
}

/// Agreement of one tensor's analytic and numeric gradients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub coordinates: usize,
    pub max_relative_error: f64,
    pub max_abs_gradient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub tensors: Vec<TensorCheck>,
}

/// Mean squared error of `batch` under `params`.
pub fn batch_loss(model: &LsaModel, params: &ParamStore, long: &LongTermSequences, batch: &[PreparedExample]) -> f64 {
    let mut sum = 0.0;
    for ex in batch {
        let mut tape = Tape::new(params);
        let pred = model.forward(&mut tape, long, ex);
        let d = tape.value(pred).item() - ex.rating;
        sum += d * d;
    }
    sum / batch.len() as f64
}

/// Compares the analytic gradient of the batch MSE with central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` on up to `per_tensor` sampled coordinates of every
/// tensor. The relative error of a coordinate is
/// `|a − n| / max(|a|, |n|, 1e-8)`. Interest sequences are held fixed.
pub fn gradient_check(
    model: &LsaModel,
    long: &LongTermSequences,
    batch: &[PreparedExample],
    eps: f64,
    per_tensor: usize,
    seed: u64,
) -> Result<GradientCheck> {
    if batch.is_empty() {
        return Err(Error::Empty("gradient-check batch"));
    }
    let refs: Vec<&PreparedExample> = batch.iter().collect();
    let (_, grads) = batch_gradient(model, long, &refs, &crate::exec::Sequential);
    let mut rng = SeedStreams::new(seed).stream("gradient-check");
    let mut work = model.params.clone();
    let mut tensors = Vec::new();
    let mut overall: f64 = 0.0;
    let ids: Vec<_> = model.params.ids().collect();
    for id in ids {
        let analytic = grads.dense(id, &model.params);
        let size = analytic.data().len();
        let coords: Vec<usize> = if size <= per_tensor {
            (0..size).collect()
        } else {
            let mut c = rand::seq::index::sample(&mut rng, size, per_tensor).into_vec();
            c.sort_unstable();
            c
        };
        let mut worst: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for &c in &coords {
            let original = work.get(id).data()[c];
            work.get_mut(id).data_mut()[c] = original + eps;
            let plus = batch_loss(model, &work, long, batch);
            work.get_mut(id).data_mut()[c] = original - eps;
            let minus = batch_loss(model, &work, long, batch);
            work.get_mut(id).data_mut()[c] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.data()[c];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
            max_abs = max_abs.max(a.abs());
        }
        overall = overall.max(worst);
        tensors.push(TensorCheck {
            name: model.params.name(id).to_string(),
            coordinates: coords.len(),
            max_relative_error: worst,
            max_abs_gradient: max_abs,
        });
    }
    Ok(GradientCheck {
        max_relative_error: overall,
        tensors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 3.0], &[2.0, 5.0]).unwrap(), 2.5);
        assert_eq!(mse_loss(&[4.0, 2.0], &[4.0, 2.0]).unwrap(), 0.0);
        assert!(mse_loss(&[], &[]).is_err());
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mse_is_quadratic_in_residual_scale() {
        let t = [1.0, 2.0, 3.0];
        let p = [1.5, 1.0, 4.0];
        let base = mse_loss(&p, &t).unwrap();
        let scaled: Vec<f64> = p.iter().zip(&t).map(|(p, t)| t + 3.0 * (p - t)).collect();
        assert!((mse_loss(&scaled, &t).unwrap() - 9.0 * base).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_zero_batch() {
        let c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}

