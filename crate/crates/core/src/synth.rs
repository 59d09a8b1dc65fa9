//! Synthetic review corpora with known long-term aspect profiles and
//! injected short-term drift.
//!
//! Aspects are split into contiguous topics. Every user has a sparse
//! non-negative interest vector over the aspects and every item a sparse
//! attribute vector, each drawn mostly from one topic. A chosen share of users
//! also carries a replacement interest vector, centred on a different topic,
//! that is active only inside the final drift window. A review's affinity is the dot product of the active interest
//! vector with the item attributes, standardised over the corpus, and its
//! rating is `1 + 4σ(z) + noise` clamped to `[1, 5]`. Reviews emit `amod`
//! triples for the aspects where the active interest and the item attributes
//! overlap, plus one triple that no extraction rule accepts.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{DependencyTriple, RawReview, Relation, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::rng::{Rng, SeedStreams};
use crate::tensor::{dot, sigmoid};

/// Start of the generated time span, 2014-01-01T00:00:00Z.
pub const EPOCH_START: i64 = 1_388_534_400;

const ASPECT_WORDS: [&str; 40] = [
    "battery", "screen", "price", "sound", "design", "keyboard", "camera", "display", "speaker", "handle",
    "blade", "strap", "fabric", "color", "size", "weight", "zipper", "button", "cable", "charger", "lid",
    "grip", "motor", "filter", "pocket", "sole", "lace", "texture", "flavor", "scent", "bottle", "packaging",
    "manual", "warranty", "shipping", "remote", "volume", "plot", "story", "melody",
];

const OPINION_WORDS: [&str; 8] = ["great", "solid", "sturdy", "lovely", "decent", "nice", "excellent", "fine"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_aspects: usize,
    pub interactions_per_user: usize,
    pub drift_fraction: f64,
    pub drift_window_days: u32,
    pub noise_sd: f64,
    pub seed: u64,
    /// Non-zero entries of each interest vector.
    pub profile_size: usize,
    /// Non-zero entries of each item attribute vector.
    pub attributes_per_item: usize,
    pub n_topics: usize,
    /// Probability that a profile entry is drawn from the profile's topic
    /// rather than from all aspects.
    pub topic_purity: f64,
    /// Share of every user's interactions placed inside the drift window.
    pub window_share: f64,
    pub span_days: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 200,
            n_items: 100,
            n_aspects: 30,
            interactions_per_user: 20,
            drift_fraction: 0.5,
            drift_window_days: 30,
            noise_sd: 0.2,
            seed: 0,
            profile_size: 5,
            attributes_per_item: 4,
            n_topics: 6,
            topic_purity: 0.8,
            window_share: 0.4,
            span_days: 730,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_users == 0 || self.n_items == 0 || self.n_aspects == 0 || self.interactions_per_user == 0 {
            return bad("synthetic counts must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.drift_fraction) {
            return bad("drift_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.window_share) {
            return bad("window_share must lie in [0, 1]");
        }
        if self.n_topics == 0 || self.n_topics > self.n_aspects {
            return bad("n_topics must lie in [1, n_aspects]");
        }
        if !(0.0..=1.0).contains(&self.topic_purity) {
            return bad("topic_purity must lie in [0, 1]");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and non-negative");
        }
        if self.profile_size == 0 || self.attributes_per_item == 0 {
            return bad("profile_size and attributes_per_item must be at least 1");
        }
        if self.profile_size > self.n_aspects || self.attributes_per_item > self.n_aspects {
            return bad("profiles cannot exceed the aspect count");
        }
        if self.drift_window_days == 0 || self.drift_window_days >= self.span_days {
            return bad("drift window must be positive and shorter than the span");
        }
        Ok(())
    }
}

/// Ground truth of one generated review, aligned with the review list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewTruth {
    pub user: usize,
    pub item: usize,
    pub in_window: bool,
    /// Whether the drifted interest vector produced this rating.
    pub drifted: bool,
    /// Standardised affinity.
    pub affinity: f64,
    /// Aspects the review's triples name.
    pub aspects: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub aspect_names: Vec<String>,
    pub user_interests: Vec<Vec<f64>>,
    pub drift_interests: Vec<Option<Vec<f64>>>,
    pub item_attributes: Vec<Vec<f64>>,
    pub window_start: i64,
    pub window_end: i64,
    pub affinity_mean: f64,
    pub affinity_sd: f64,
    pub reviews: Vec<ReviewTruth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub reviews: Vec<RawReview>,
    pub truth: SynthTruth,
}

/// Distinct lemma-stable aspect words.
pub fn aspect_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match ASPECT_WORDS.get(i) {
            Some(w) => String::from(*w),
            None => format!("feature{i}"),
        })
        .collect()
}

/// Topic of aspect `a` when `n_aspects` aspects form `n_topics` contiguous
/// blocks.
pub fn topic_of(a: usize, n_aspects: usize, n_topics: usize) -> usize {
    a * n_topics / n_aspects
}

struct Profiles<'c> {
    config: &'c SynthConfig,
}

impl Profiles<'_> {
    /// `nonzero` distinct entries, each from `topic` with probability
    /// `topic_purity` while the topic has unused aspects. Entries set in
    /// `exclude` are avoided when enough others remain.
    fn draw(&self, rng: &mut Rng, nonzero: usize, topic: usize, exclude: &[f64], weighted: bool) -> Vec<f64> {
        let c = self.config;
        let na = c.n_aspects;
        let free = |v: &[f64], a: usize| v[a] == 0.0 && exclude.get(a).is_none_or(|&w| w == 0.0);
        let mut v = alloc::vec![0.0; na];
        for _ in 0..nonzero {
            let on_topic: Vec<usize> = (0..na)
                .filter(|&a| free(&v, a) && topic_of(a, na, c.n_topics) == topic)
                .collect();
            let mut pool: Vec<usize> = if !on_topic.is_empty() && rng.random_bool(c.topic_purity) {
                on_topic
            } else {
                (0..na).filter(|&a| free(&v, a)).collect()
            };
            if pool.is_empty() {
                pool = (0..na).filter(|&a| v[a] == 0.0).collect();
            }
            let a = pool[rng.random_range(0..pool.len())];
            v[a] = if weighted { rng.random_range(0.5..1.5) } else { 1.0 };
        }
        v
    }
}

struct Draft {
    user: usize,
    item: usize,
    timestamp: i64,
    in_window: bool,
    drifted: bool,
    raw: f64,
    aspects: Vec<usize>,
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let streams = SeedStreams::new(config.seed);
    let names = aspect_names(config.n_aspects);
    let na = config.n_aspects;

    let profiles = Profiles { config };
    let mut user_topics = Vec::with_capacity(config.n_users);
    let user_interests: Vec<Vec<f64>> = (0..config.n_users)
        .map(|u| {
            let mut rng = streams.indexed("user", u as u64);
            let topic = rng.random_range(0..config.n_topics);
            user_topics.push(topic);
            profiles.draw(&mut rng, config.profile_size, topic, &[], true)
        })
        .collect();
    let item_attributes: Vec<Vec<f64>> = (0..config.n_items)
        .map(|i| {
            let mut rng = streams.indexed("item", i as u64);
            let topic = rng.random_range(0..config.n_topics);
            profiles.draw(&mut rng, config.attributes_per_item, topic, &[], false)
        })
        .collect();
    let mut order: Vec<usize> = (0..config.n_users).collect();
    order.shuffle(&mut streams.stream("drift-users"));
    let n_drift = libm::round(config.n_users as f64 * config.drift_fraction) as usize;
    let mut drift_interests: Vec<Option<Vec<f64>>> = alloc::vec![None; config.n_users];
    for &u in &order[..n_drift] {
        let mut rng = streams.indexed("drift", u as u64);
        let topic = if config.n_topics > 1 {
            (user_topics[u] + rng.random_range(1..config.n_topics)) % config.n_topics
        } else {
            0
        };
        drift_interests[u] = Some(profiles.draw(&mut rng, config.profile_size, topic, &user_interests[u], true));
    }

    let window_end = EPOCH_START + i64::from(config.span_days) * SECONDS_PER_DAY;
    let window_start = window_end - i64::from(config.drift_window_days) * SECONDS_PER_DAY;
    let mut drafts = Vec::with_capacity(config.n_users * config.interactions_per_user);
    for u in 0..config.n_users {
        let mut rng = streams.indexed("interactions", u as u64);
        let items: Vec<usize> = if config.interactions_per_user <= config.n_items {
            index::sample(&mut rng, config.n_items, config.interactions_per_user).into_vec()
        } else {
            (0..config.interactions_per_user).map(|_| rng.random_range(0..config.n_items)).collect()
        };
        let mut mine = Vec::with_capacity(items.len());
        for item in items {
            let in_window = rng.random_bool(config.window_share);
            let timestamp = if in_window {
                rng.random_range(window_start..window_end)
            } else {
                rng.random_range(EPOCH_START..window_start)
            };
            let drifted = in_window && drift_interests[u].is_some();
            let interest = match (&drift_interests[u], drifted) {
                (Some(v), true) => v,
                _ => &user_interests[u],
            };
            let attrs = &item_attributes[item];
            let aspects = (0..na).filter(|&a| interest[a] > 0.0 && attrs[a] > 0.0).collect();
            mine.push(Draft {
                user: u,
                item,
                timestamp,
                in_window,
                drifted,
                raw: dot(interest, attrs),
                aspects,
            });
        }
        mine.sort_by_key(|d| (d.timestamp, d.item));
        drafts.extend(mine);
    }

    let n = drafts.len() as f64;
    let mean = drafts.iter().map(|d| d.raw).sum::<f64>() / n;
    let var = drafts.iter().map(|d| (d.raw - mean) * (d.raw - mean)).sum::<f64>() / n;
    let sd = if var > 0.0 { libm::sqrt(var) } else { 1.0 };
    let noise = Normal::new(0.0, config.noise_sd).map_err(|_| Error::InvalidConfig("noise_sd".into()))?;

    let mut reviews = Vec::with_capacity(drafts.len());
    let mut truths = Vec::with_capacity(drafts.len());
    let mut noise_rng = streams.stream("noise");
    for (k, d) in drafts.into_iter().enumerate() {
        let z = (d.raw - mean) / sd;
        let eps = if config.noise_sd > 0.0 { noise.sample(&mut noise_rng) } else { 0.0 };
        let rating = (1.0 + 4.0 * sigmoid(z) + eps).clamp(1.0, 5.0);
        let mut triples: Vec<DependencyTriple> = d
            .aspects
            .iter()
            .map(|&a| DependencyTriple::new(Relation::Amod, &names[a], OPINION_WORDS[(k + a) % OPINION_WORDS.len()]))
            .collect();
        triples.push(DependencyTriple::new(Relation::Other, "product", "the"));
        reviews.push(RawReview {
            user_id: format!("u{:04}", d.user),
            item_id: format!("i{:04}", d.item),
            rating,
            timestamp: d.timestamp,
            text: None,
            triples: Some(triples),
        });
        truths.push(ReviewTruth {
            user: d.user,
            item: d.item,
            in_window: d.in_window,
            drifted: d.drifted,
            affinity: z,
            aspects: d.aspects.iter().map(|&a| names[a].clone()).collect(),
        });
    }
    Ok(SynthCorpus {
        reviews,
        truth: SynthTruth {
            aspect_names: names,
            user_interests,
            drift_interests,
            item_attributes,
            window_start,
            window_end,
            affinity_mean: mean,
            affinity_sd: sd,
            reviews: truths,
        },
    })
}
